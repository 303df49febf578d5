// Copyright 2026 The Tarmac Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "tarmac/common.hpp"
#include "tarmac/geometry.hpp"
#include "tarmac/nn.hpp"
#include "tarmac/scenes.hpp"

namespace tarmac::model {

using nn::ShapeMismatch;

struct ModelConfig {
  int hidden = 256;           // D
  int heads = 8;              // h
  int tic_blocks = 3;         // L
  int agent_mlp_depth = 5;    // with layer normalization
  int context_mlp_depth = 4;  // with batch normalization
  int gmm_mlp_depth = 2;      // GELU activation
  int modes = 4;              // M
  int state_dim = 4;          // (x, y, z, theta)
  int out_dim = 7;            // (mu_x, mu_y, mu_z, sigma_x, sigma_y, sigma_z, rho)
  int ctx_dim = 7;            // patch point channels

  // Internal scaling: coord_scale maps meters to encoder input units;
  // ctx_coord_scale does the same for (local, tens-of-meters) patch
  // coordinates so batch-norm sees O(1) variances; head_unit_m is the meter
  // value of one raw head output unit; sigma_init_m sets the initial
  // uncertainty scale.
  double coord_scale = 1e-3;
  double ctx_coord_scale = 0.03;
  double head_unit_m = 1000.0;
  double sigma_init_m = 30.0;

  void validate() const;  // D divisible by h, depths >= 1, M >= 1

  static ModelConfig from_json(const std::string& text);
  std::string to_json() const;
  std::string config_hash() const;

  /// Reduced configuration used by gradient checks and overfit smoke runs.
  static ModelConfig tiny();
};

struct LossConfig {
  double lambda_nll = 1.0;
  double lambda_ce = 1.0;
  double sigma_floor = 0.01;  // meters
};

struct DegenerateMask : Error {
  using Error::Error;
};

/// All learnable tensors, in a fixed named order, each with Adam state.
class ModelParams {
 public:
  struct Entry {
    std::string name;
    nn::Tensor value;
    nn::AdamState opt;
  };

  static ModelParams init(const ModelConfig& cfg, int future_steps, std::uint64_t seed);

  std::vector<Entry>& entries() { return entries_; }
  const std::vector<Entry>& entries() const { return entries_; }
  const nn::Tensor& tensor(const std::string& name) const;
  nn::Tensor& tensor(const std::string& name);
  std::int64_t param_count() const;

  int future_steps() const { return future_steps_; }
  std::uint64_t seed() const { return seed_; }

 private:
  std::vector<Entry> entries_;
  int future_steps_ = 0;
  std::uint64_t seed_ = 0;
};

/// Closed-form parameter count for a configuration; the implementation is
/// asserted against this in tests.
std::int64_t expected_param_count(const ModelConfig& cfg, int future_steps);

/// Model-facing view of one scene (ego frame, meters).
struct SceneInput {
  int K = 0, H = 0, F = 0, P = 0, C = 7;
  std::vector<double> obs;               // K x H x state_dim
  std::vector<std::uint8_t> obs_valid;   // K x H
  std::vector<double> patches;           // K x P x C
  std::vector<std::uint8_t> patch_valid; // K x P
  // Constant-velocity rollout from the last observed state; the head learns
  // per-step corrections on top of it.
  std::vector<double> anchor_traj;       // K x F x 3
  std::vector<double> future;            // K x F x 3
  std::vector<std::uint8_t> future_valid;// K x F
  geo::Pose2 frame_of_reference;

  static SceneInput from_scene(const scenes::Scene& s);
};

/// One recorded forward pass: the tape plus the node ids of every output a
/// caller may need (training, tests, inference all share this).
struct Forward {
  nn::Graph g;
  ModelConfig cfg;
  int K = 0, H = 0, F = 0, P = 0;
  double sigma_floor = 0.01;
  std::vector<int> param_ids;   // aligned with ModelParams::entries()
  std::map<std::string, int> param_by_name;

  int param(const std::string& name) const {
    const auto it = param_by_name.find(name);
    if (it == param_by_name.end()) throw Error("unknown parameter: " + name);
    return it->second;
  }

  int embedded = -1;   // (K*H) x D after agent embedding (+PE, masked)
  int ctx_feat = -1;   // (K*P) x D context features
  int encoded = -1;    // (K*H) x D after the TIC stack
  std::vector<int> mu;      // per agent, per mode: F x 3 (meters)
  std::vector<int> sigma;   // per agent, per mode: F x 3 (meters)
  std::vector<int> log_rho; // per agent: 1 x M (log-softmax)
  int loss = -1, nll = -1, ce = -1;
  std::vector<int> best_mode;  // per agent; -1 when no valid future step

  int mode_id(int agent, int mode) const { return agent * cfg.modes + mode; }
};

/// Register parameters and scene constants on a fresh tape.
Forward begin_forward(const ModelParams& params, const ModelConfig& cfg, const SceneInput& in);

/// phi_x per timestep + sinusoidal positional embedding, invalid rows zeroed.
int embed_agents(Forward& f, const SceneInput& in);
/// Per-point context MLP with masked batch normalization per agent patch.
int embed_context(Forward& f, const SceneInput& in);
/// Causal temporal self-attention sublayer of one block.
int temporal_layer(Forward& f, int block, int joint, const SceneInput& in);
/// Agent-axis self-attention sublayer (per timestep).
int interaction_layer(Forward& f, int block, int joint, const SceneInput& in);
/// Cross-attention from agent features to the agent's own context patch.
int context_layer(Forward& f, int block, int joint, const SceneInput& in);
/// Embeddings followed by all TIC blocks; fills f.embedded / f.ctx_feat /
/// f.encoded and returns the encoded id.
int encode_scene(Forward& f, const SceneInput& in);
/// GMM head on the t_o feature of each agent; fills mu/sigma/log_rho.
void decode_gmm(Forward& f, const SceneInput& in);
/// Mixture NLL over valid future steps + best-mode cross-entropy.
void loss_total(Forward& f, const SceneInput& in, const LossConfig& loss_cfg);

/// encode + decode (+ loss when loss_cfg is non-null).
Forward run_forward(const ModelParams& params, const ModelConfig& cfg, const SceneInput& in,
                    const LossConfig* loss_cfg);

/// Per (agent, mode, future step) record (mu_x, mu_y, mu_z, sigma_x, sigma_y,
/// sigma_z, rho), rho tied across time and normalized per agent.
struct GmmPrediction {
  int K = 0, M = 0, F = 0;
  std::vector<double> data;  // K x M x F x 7

  double at(int k, int m, int t, int c) const {
    return data[((static_cast<std::size_t>(k) * M + m) * F + t) * 7 + c];
  }
  double& at(int k, int m, int t, int c) {
    return data[((static_cast<std::size_t>(k) * M + m) * F + t) * 7 + c];
  }
  double rho(int k, int m) const { return at(k, m, 0, 6); }
};

GmmPrediction extract_prediction(Forward& f);

/// Gradients of the loss for every parameter (order of params.entries()).
std::vector<nn::Tensor> backward(Forward& f);

/// Adam update over all parameters.
void optimizer_step(ModelParams& params, const std::vector<nn::Tensor>& grads,
                    const nn::AdamConfig& cfg);

struct ModeTrajectory {
  std::vector<double> ego_xyz;    // F x 3, ego frame
  std::vector<double> world_xyz;  // F x 3, world frame
  double rho = 0.0;
};

struct Prediction {
  GmmPrediction gmm;                                  // ego frame
  std::vector<std::vector<ModeTrajectory>> agents;    // K x M mode means
};

/// Pure inference on one scene; world-frame outputs are mapped through the
/// scene's frame_of_reference.
Prediction predict(const ModelParams& params, const ModelConfig& cfg, const scenes::Scene& scene,
                   double sigma_floor = 0.01);

struct LossReport {
  double total = 0.0;
  double nll = 0.0;
  double ce = 0.0;
};

/// One full-batch gradient step: mean gradient over the batch, then Adam.
LossReport train_step(ModelParams& params, const ModelConfig& cfg, const LossConfig& loss_cfg,
                      const std::vector<SceneInput>& batch, const nn::AdamConfig& adam_cfg);

/// Versioned checkpoint: config, scene-config hash, parameters, Adam state.
void save_checkpoint(const std::string& path, const ModelParams& params, const ModelConfig& cfg,
                     const std::string& scene_config_hash, std::uint64_t seed);

struct Checkpoint {
  ModelConfig cfg;
  ModelParams params;
  std::string scene_config_hash;
  std::uint64_t seed = 0;
};

Checkpoint load_checkpoint(const std::string& path);

}  // namespace tarmac::model
