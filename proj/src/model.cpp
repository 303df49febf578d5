// Copyright 2026 The Tarmac Authors
// SPDX-License-Identifier: Apache-2.0
#include "tarmac/model.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

#include <json.hpp>

namespace tarmac::model {

namespace {

constexpr int kFfnDepth = 5;  // per-sublayer feed-forward depth
constexpr double kLog2Pi = 1.8378770664093454836;

std::string block_prefix(int block, char sub) {
  return "block" + std::to_string(block) + "." + sub;
}

}  // namespace

void ModelConfig::validate() const {
  if (hidden < 1 || heads < 1 || hidden % heads != 0)
    throw Error("model config: hidden must be a positive multiple of heads");
  if (agent_mlp_depth < 1 || context_mlp_depth < 1 || gmm_mlp_depth < 1)
    throw Error("model config: depths must be >= 1");
  if (modes < 1) throw Error("model config: modes >= 1");
  if (tic_blocks < 0) throw Error("model config: tic_blocks >= 0");
  if (state_dim != 4 || out_dim != 7) throw Error("model config: fixed dims are 4/7");
  if (coord_scale <= 0.0) throw Error("model config: coord_scale > 0");
}

ModelConfig ModelConfig::from_json(const std::string& text) {
  const auto j = nlohmann::json::parse(text);
  ModelConfig c;
  c.hidden = j.value("hidden", c.hidden);
  c.heads = j.value("heads", c.heads);
  c.tic_blocks = j.value("tic_blocks", c.tic_blocks);
  c.agent_mlp_depth = j.value("agent_mlp_depth", c.agent_mlp_depth);
  c.context_mlp_depth = j.value("context_mlp_depth", c.context_mlp_depth);
  c.gmm_mlp_depth = j.value("gmm_mlp_depth", c.gmm_mlp_depth);
  c.modes = j.value("modes", c.modes);
  c.ctx_dim = j.value("ctx_dim", c.ctx_dim);
  c.coord_scale = j.value("coord_scale", c.coord_scale);
  c.ctx_coord_scale = j.value("ctx_coord_scale", c.ctx_coord_scale);
  c.head_unit_m = j.value("head_unit_m", c.head_unit_m);
  c.sigma_init_m = j.value("sigma_init_m", c.sigma_init_m);
  c.validate();
  return c;
}

std::string ModelConfig::to_json() const {
  nlohmann::json j;
  j["hidden"] = hidden;
  j["heads"] = heads;
  j["tic_blocks"] = tic_blocks;
  j["agent_mlp_depth"] = agent_mlp_depth;
  j["context_mlp_depth"] = context_mlp_depth;
  j["gmm_mlp_depth"] = gmm_mlp_depth;
  j["modes"] = modes;
  j["state_dim"] = state_dim;
  j["out_dim"] = out_dim;
  j["ctx_dim"] = ctx_dim;
  j["coord_scale"] = coord_scale;
  j["ctx_coord_scale"] = ctx_coord_scale;
  j["head_unit_m"] = head_unit_m;
  j["sigma_init_m"] = sigma_init_m;
  return j.dump(2);
}

std::string ModelConfig::config_hash() const { return hash_hex(fnv1a(to_json())); }

ModelConfig ModelConfig::tiny() {
  ModelConfig c;
  c.hidden = 16;
  c.heads = 2;
  c.tic_blocks = 1;
  c.modes = 2;
  return c;
}

namespace {

nn::Tensor init_weight(Rng& rng, int in, int out) {
  nn::Tensor w(in, out);
  const double bound = 1.0 / std::sqrt(static_cast<double>(in));
  for (std::size_t i = 0; i < w.numel(); ++i) w[i] = rng.uniform(-bound, bound);
  return w;
}

}  // namespace

ModelParams ModelParams::init(const ModelConfig& cfg, int future_steps, std::uint64_t seed) {
  cfg.validate();
  if (future_steps < 1) throw Error("model params: future_steps >= 1");
  ModelParams p;
  p.future_steps_ = future_steps;
  p.seed_ = seed;
  Rng rng(seed);
  const int D = cfg.hidden;

  auto add = [&](const std::string& name, nn::Tensor t) {
    p.entries_.push_back({name, std::move(t), {}});
  };
  auto add_linear = [&](const std::string& prefix, int in, int out) {
    add(prefix + ".w", init_weight(rng, in, out));
    add(prefix + ".b", nn::Tensor(1, out));
  };
  auto add_norm = [&](const std::string& prefix) {
    add(prefix + "_g", nn::Tensor::full(1, D, 1.0));
    add(prefix + "_b", nn::Tensor(1, D));
  };

  for (int i = 0; i < cfg.agent_mlp_depth; ++i) {
    const std::string prefix = "agent_mlp." + std::to_string(i);
    add_linear(prefix, i == 0 ? cfg.state_dim : D, D);
    add_norm(prefix + ".ln");
  }
  for (int i = 0; i < cfg.context_mlp_depth; ++i) {
    const std::string prefix = "ctx_mlp." + std::to_string(i);
    add_linear(prefix, i == 0 ? cfg.ctx_dim : D, D);
    add_norm(prefix + ".bn");
  }
  for (int l = 0; l < cfg.tic_blocks; ++l) {
    for (char sub : {'t', 'i', 'c'}) {
      const std::string prefix = block_prefix(l, sub);
      add_norm(prefix + ".ln1");
      if (sub == 'c') add_norm(prefix + ".ln_ctx");
      add_linear(prefix + ".wq", D, D);
      add_linear(prefix + ".wk", D, D);
      add_linear(prefix + ".wv", D, D);
      add_linear(prefix + ".wo", D, D);
      add_norm(prefix + ".ln2");
      for (int jf = 0; jf < kFfnDepth; ++jf)
        add_linear(prefix + ".ffn" + std::to_string(jf), D, D);
    }
  }
  const int gmm_out = cfg.modes * (6 * future_steps + 1);
  for (int i = 0; i < cfg.gmm_mlp_depth; ++i) {
    const std::string prefix = "gmm." + std::to_string(i);
    add_linear(prefix, D, i == cfg.gmm_mlp_depth - 1 ? gmm_out : D);
  }
  // Final head starts small so initial trajectories sit near the anchor; the
  // residual spread breaks mode symmetry.
  {
    auto& head = p.entries_[p.entries_.size() - 2].value;
    for (std::size_t i = 0; i < head.numel(); ++i) head[i] *= 0.01;
  }
  return p;
}

const nn::Tensor& ModelParams::tensor(const std::string& name) const {
  for (const auto& e : entries_)
    if (e.name == name) return e.value;
  throw Error("unknown parameter: " + name);
}

nn::Tensor& ModelParams::tensor(const std::string& name) {
  for (auto& e : entries_)
    if (e.name == name) return e.value;
  throw Error("unknown parameter: " + name);
}

std::int64_t ModelParams::param_count() const {
  std::int64_t n = 0;
  for (const auto& e : entries_) n += static_cast<std::int64_t>(e.value.numel());
  return n;
}

std::int64_t expected_param_count(const ModelConfig& cfg, int future_steps) {
  const std::int64_t D = cfg.hidden;
  const std::int64_t linear = D * D + D;
  const std::int64_t norm = 2 * D;
  // Agent MLP: (state_dim -> D) then (D -> D), layer norm each layer.
  std::int64_t n = cfg.state_dim * D + D + norm + (cfg.agent_mlp_depth - 1) * (linear + norm);
  // Context MLP: (ctx_dim -> D) then (D -> D), batch norm each layer.
  n += cfg.ctx_dim * D + D + norm + (cfg.context_mlp_depth - 1) * (linear + norm);
  // TIC blocks: 3 sublayers x (pre-LN + q/k/v/o + FFN pre-LN + 5-layer FFN),
  // plus one context-side LN per block.
  const std::int64_t sublayer = norm + 4 * linear + norm + kFfnDepth * linear;
  n += cfg.tic_blocks * (3 * sublayer + norm);
  // GMM head: (D -> D) x (depth-1) with GELU, final (D -> M*(6F+1)).
  const std::int64_t gmm_out = static_cast<std::int64_t>(cfg.modes) * (6 * future_steps + 1);
  n += (cfg.gmm_mlp_depth - 1) * linear + D * gmm_out + gmm_out;
  return n;
}

SceneInput SceneInput::from_scene(const scenes::Scene& s) {
  SceneInput in;
  in.K = s.K;
  in.H = s.H;
  in.F = s.F;
  in.P = s.P;
  in.C = airmap::ContextPatch::kChannels;
  in.frame_of_reference = s.frame_of_reference;
  in.obs.assign(static_cast<std::size_t>(s.K) * s.H * 4, 0.0);
  in.obs_valid.assign(static_cast<std::size_t>(s.K) * s.H, 0);
  in.future.assign(static_cast<std::size_t>(s.K) * s.F * 3, 0.0);
  in.future_valid.assign(static_cast<std::size_t>(s.K) * s.F, 0);
  in.anchor_traj.assign(static_cast<std::size_t>(s.K) * s.F * 3, 0.0);
  in.patches = s.patches;
  in.patch_valid = s.patch_valid;

  for (int k = 0; k < s.K; ++k) {
    for (int t = 0; t < s.H; ++t) {
      const auto& st = s.at(k, t);
      if (!st.valid) continue;
      const std::size_t base = (static_cast<std::size_t>(k) * s.H + t) * 4;
      in.obs[base + 0] = st.x;
      in.obs[base + 1] = st.y;
      in.obs[base + 2] = st.z;
      in.obs[base + 3] = st.theta;
      in.obs_valid[static_cast<std::size_t>(k) * s.H + t] = 1;
    }
    for (int t = 0; t < s.F; ++t) {
      const auto& st = s.at(k, s.H + t);
      if (!st.valid) continue;
      const std::size_t base = (static_cast<std::size_t>(k) * s.F + t) * 3;
      in.future[base + 0] = st.x;
      in.future[base + 1] = st.y;
      in.future[base + 2] = st.z;
      in.future_valid[static_cast<std::size_t>(k) * s.F + t] = 1;
    }
    int last = -1, prev = -1;
    for (int t = s.H - 1; t >= 0; --t) {
      if (!s.at(k, t).valid) continue;
      if (last < 0) {
        last = t;
      } else {
        prev = t;
        break;
      }
    }
    double px = 0.0, py = 0.0, pz = 0.0, vx = 0.0, vy = 0.0, vz = 0.0;
    int t_ref = s.H - 1;
    if (last >= 0) {
      const auto& s1 = s.at(k, last);
      px = s1.x;
      py = s1.y;
      pz = s1.z;
      t_ref = last;
      if (prev >= 0) {
        const auto& s0 = s.at(k, prev);
        const double dt = last - prev;
        vx = (s1.x - s0.x) / dt;
        vy = (s1.y - s0.y) / dt;
        vz = (s1.z - s0.z) / dt;
      }
    }
    for (int t = 0; t < s.F; ++t) {
      const double dt = static_cast<double>(s.H + t - t_ref);
      const std::size_t base = (static_cast<std::size_t>(k) * s.F + t) * 3;
      in.anchor_traj[base + 0] = px + vx * dt;
      in.anchor_traj[base + 1] = py + vy * dt;
      in.anchor_traj[base + 2] = pz + vz * dt;
    }
  }
  return in;
}

Forward begin_forward(const ModelParams& params, const ModelConfig& cfg, const SceneInput& in) {
  cfg.validate();
  if (in.K < 1 || in.H < 1 || in.F < 1 || in.P < 1) throw ShapeMismatch("scene input dims");
  if (in.obs.size() != static_cast<std::size_t>(in.K) * in.H * 4 ||
      in.obs_valid.size() != static_cast<std::size_t>(in.K) * in.H ||
      in.patches.size() != static_cast<std::size_t>(in.K) * in.P * in.C ||
      in.patch_valid.size() != static_cast<std::size_t>(in.K) * in.P ||
      in.anchor_traj.size() != static_cast<std::size_t>(in.K) * in.F * 3)
    throw ShapeMismatch("scene input buffers");
  if (params.future_steps() != in.F)
    throw ShapeMismatch("parameters were initialized for a different future length");

  Forward f;
  f.cfg = cfg;
  f.K = in.K;
  f.H = in.H;
  f.F = in.F;
  f.P = in.P;
  f.g.reserve(1024);
  for (const auto& e : params.entries()) {
    const int id = f.g.input(e.value);
    f.param_ids.push_back(id);
    f.param_by_name[e.name] = id;
  }
  return f;
}

namespace {

/// Linear -> norm -> GELU stack over row-features.
int mlp_norm_stack(Forward& f, int x, const std::string& base, int depth, bool batchnorm,
                   const nn::Tensor* rowmask) {
  auto& g = f.g;
  for (int i = 0; i < depth; ++i) {
    const std::string prefix = base + "." + std::to_string(i);
    x = g.add_row(g.matmul(x, f.param(prefix + ".w")), f.param(prefix + ".b"));
    if (batchnorm)
      x = g.batchnorm_masked(x, f.param(prefix + ".bn_g"), f.param(prefix + ".bn_b"), *rowmask);
    else
      x = g.layernorm(x, f.param(prefix + ".ln_g"), f.param(prefix + ".ln_b"));
    x = g.gelu(x);
  }
  return x;
}

/// Plain feed-forward (Linear -> GELU, last layer linear).
int ffn_stack(Forward& f, int x, const std::string& prefix) {
  auto& g = f.g;
  for (int i = 0; i < kFfnDepth; ++i) {
    const std::string p = prefix + ".ffn" + std::to_string(i);
    x = g.add_row(g.matmul(x, f.param(p + ".w")), f.param(p + ".b"));
    if (i + 1 < kFfnDepth) x = g.gelu(x);
  }
  return x;
}

/// Pre-norm multi-head attention + feed-forward, both residual, with query
/// rows zeroed by `qmask` so padded positions stay exactly zero.
int attn_sublayer(Forward& f, const std::string& prefix, int x, int kv, bool cross,
                  nn::Tensor keep, nn::Tensor qmask) {
  auto& g = f.g;
  const int D = f.cfg.hidden;
  const int h = f.cfg.heads;
  const int dh = D / h;

  const int qmask_id = g.constant(std::move(qmask));
  const int qn = g.layernorm(x, f.param(prefix + ".ln1_g"), f.param(prefix + ".ln1_b"));
  const int kn = cross ? g.layernorm(kv, f.param(prefix + ".ln_ctx_g"),
                                     f.param(prefix + ".ln_ctx_b"))
                       : qn;
  const int Q = g.add_row(g.matmul(qn, f.param(prefix + ".wq.w")), f.param(prefix + ".wq.b"));
  const int Kt = g.add_row(g.matmul(kn, f.param(prefix + ".wk.w")), f.param(prefix + ".wk.b"));
  const int V = g.add_row(g.matmul(kn, f.param(prefix + ".wv.w")), f.param(prefix + ".wv.b"));

  std::vector<int> heads;
  heads.reserve(static_cast<std::size_t>(h));
  for (int hh = 0; hh < h; ++hh) {
    const int qh = g.slice_cols(Q, hh * dh, (hh + 1) * dh);
    const int kh = g.slice_cols(Kt, hh * dh, (hh + 1) * dh);
    const int vh = g.slice_cols(V, hh * dh, (hh + 1) * dh);
    const int scores = g.affine(g.matmul_nt(qh, kh), 1.0 / std::sqrt(static_cast<double>(dh)), 0.0);
    const int attn = g.softmax_masked(scores, keep);
    heads.push_back(g.matmul(attn, vh));
  }
  const int O = g.concat_cols(heads);
  const int proj = g.add_row(g.matmul(O, f.param(prefix + ".wo.w")), f.param(prefix + ".wo.b"));
  const int x1 = g.add(x, g.mul_col(proj, qmask_id));

  const int fn = g.layernorm(x1, f.param(prefix + ".ln2_g"), f.param(prefix + ".ln2_b"));
  const int ff = ffn_stack(f, fn, prefix);
  return g.add(x1, g.mul_col(ff, qmask_id));
}

bool obs_valid_at(const SceneInput& in, int agent, int t) {
  return in.obs_valid[static_cast<std::size_t>(agent) * in.H + t] != 0;
}

}  // namespace

int embed_agents(Forward& f, const SceneInput& in) {
  auto& g = f.g;
  const int D = f.cfg.hidden;
  const int rows = f.K * f.H;

  nn::Tensor states(rows, 4);
  nn::Tensor mask(rows, 1);
  for (int k = 0; k < f.K; ++k)
    for (int t = 0; t < f.H; ++t) {
      const int r = k * f.H + t;
      const std::size_t base = (static_cast<std::size_t>(k) * f.H + t) * 4;
      states.at(r, 0) = in.obs[base + 0] * f.cfg.coord_scale;
      states.at(r, 1) = in.obs[base + 1] * f.cfg.coord_scale;
      states.at(r, 2) = in.obs[base + 2] * f.cfg.coord_scale;
      states.at(r, 3) = in.obs[base + 3];
      mask.at(r, 0) = obs_valid_at(in, k, t) ? 1.0 : 0.0;
    }

  // Sinusoidal positional embedding over the timestep index, added after the
  // agent MLP.
  nn::Tensor pe(rows, D);
  for (int t = 0; t < f.H; ++t)
    for (int j = 0; j < D; ++j) {
      const double freq = std::pow(10000.0, -2.0 * (j / 2) / static_cast<double>(D));
      const double v = (j % 2 == 0) ? std::sin(t * freq) : std::cos(t * freq);
      for (int k = 0; k < f.K; ++k) pe.at(k * f.H + t, j) = v;
    }

  int x = g.constant(std::move(states));
  x = mlp_norm_stack(f, x, "agent_mlp", f.cfg.agent_mlp_depth, false, nullptr);
  x = g.add(x, g.constant(std::move(pe)));
  f.embedded = g.mul_col(x, g.constant(std::move(mask)));
  return f.embedded;
}

int embed_context(Forward& f, const SceneInput& in) {
  auto& g = f.g;
  std::vector<int> per_agent;
  per_agent.reserve(static_cast<std::size_t>(f.K));
  for (int k = 0; k < f.K; ++k) {
    nn::Tensor pts(f.P, in.C);
    nn::Tensor mask(f.P, 1);
    for (int p = 0; p < f.P; ++p) {
      const std::size_t base = (static_cast<std::size_t>(k) * f.P + p) * in.C;
      pts.at(p, 0) = in.patches[base + 0] * f.cfg.ctx_coord_scale;
      pts.at(p, 1) = in.patches[base + 1] * f.cfg.ctx_coord_scale;
      for (int c = 2; c < in.C; ++c) pts.at(p, c) = in.patches[base + c];
      mask.at(p, 0) = in.patch_valid[static_cast<std::size_t>(k) * f.P + p] ? 1.0 : 0.0;
    }
    const int mask_id = g.constant(mask);
    int x = g.constant(std::move(pts));
    x = mlp_norm_stack(f, x, "ctx_mlp", f.cfg.context_mlp_depth, true, &mask);
    per_agent.push_back(g.mul_col(x, mask_id));
  }
  f.ctx_feat = g.concat_rows(per_agent);
  return f.ctx_feat;
}

int temporal_layer(Forward& f, int block, int joint, const SceneInput& in) {
  auto& g = f.g;
  const std::string prefix = block_prefix(block, 't');
  std::vector<int> outs;
  outs.reserve(static_cast<std::size_t>(f.K));
  for (int k = 0; k < f.K; ++k) {
    const int xa = g.slice_rows(joint, k * f.H, (k + 1) * f.H);
    nn::Tensor keep(f.H, f.H);
    nn::Tensor qmask(f.H, 1);
    for (int t = 0; t < f.H; ++t) {
      qmask.at(t, 0) = obs_valid_at(in, k, t) ? 1.0 : 0.0;
      for (int tp = 0; tp <= t; ++tp)
        keep.at(t, tp) = obs_valid_at(in, k, tp) ? 1.0 : 0.0;
    }
    outs.push_back(attn_sublayer(f, prefix, xa, xa, false, std::move(keep), std::move(qmask)));
  }
  return g.concat_rows(outs);
}

int interaction_layer(Forward& f, int block, int joint, const SceneInput& in) {
  auto& g = f.g;
  const std::string prefix = block_prefix(block, 'i');

  std::vector<int> to_time(static_cast<std::size_t>(f.K) * f.H);
  for (int t = 0; t < f.H; ++t)
    for (int k = 0; k < f.K; ++k) to_time[static_cast<std::size_t>(t) * f.K + k] = k * f.H + t;
  const int tm = g.gather_rows(joint, to_time);

  std::vector<int> outs;
  outs.reserve(static_cast<std::size_t>(f.H));
  for (int t = 0; t < f.H; ++t) {
    const int xt = g.slice_rows(tm, t * f.K, (t + 1) * f.K);
    nn::Tensor keep(f.K, f.K);
    nn::Tensor qmask(f.K, 1);
    for (int i = 0; i < f.K; ++i) {
      qmask.at(i, 0) = obs_valid_at(in, i, t) ? 1.0 : 0.0;
      for (int j = 0; j < f.K; ++j) keep.at(i, j) = obs_valid_at(in, j, t) ? 1.0 : 0.0;
    }
    outs.push_back(attn_sublayer(f, prefix, xt, xt, false, std::move(keep), std::move(qmask)));
  }
  const int time_major = g.concat_rows(outs);

  std::vector<int> to_agent(static_cast<std::size_t>(f.K) * f.H);
  for (int k = 0; k < f.K; ++k)
    for (int t = 0; t < f.H; ++t) to_agent[static_cast<std::size_t>(k) * f.H + t] = t * f.K + k;
  return g.gather_rows(time_major, to_agent);
}

int context_layer(Forward& f, int block, int joint, const SceneInput& in) {
  auto& g = f.g;
  const std::string prefix = block_prefix(block, 'c');
  if (f.ctx_feat < 0) throw Error("context features missing; call embed_context first");
  std::vector<int> outs;
  outs.reserve(static_cast<std::size_t>(f.K));
  for (int k = 0; k < f.K; ++k) {
    const int xa = g.slice_rows(joint, k * f.H, (k + 1) * f.H);
    const int kv = g.slice_rows(f.ctx_feat, k * f.P, (k + 1) * f.P);
    bool any_ctx = false;
    for (int p = 0; p < f.P; ++p)
      any_ctx = any_ctx || in.patch_valid[static_cast<std::size_t>(k) * f.P + p];
    nn::Tensor keep(f.H, f.P);
    nn::Tensor qmask(f.H, 1);
    for (int t = 0; t < f.H; ++t) {
      // An agent without any context gets no update at all (residual
      // passthrough on the empty key set).
      qmask.at(t, 0) = (any_ctx && obs_valid_at(in, k, t)) ? 1.0 : 0.0;
      for (int p = 0; p < f.P; ++p)
        keep.at(t, p) = in.patch_valid[static_cast<std::size_t>(k) * f.P + p] ? 1.0 : 0.0;
    }
    outs.push_back(attn_sublayer(f, prefix, xa, kv, true, std::move(keep), std::move(qmask)));
  }
  return g.concat_rows(outs);
}

int encode_scene(Forward& f, const SceneInput& in) {
  int joint = embed_agents(f, in);
  embed_context(f, in);
  for (int l = 0; l < f.cfg.tic_blocks; ++l) {
    joint = temporal_layer(f, l, joint, in);
    joint = interaction_layer(f, l, joint, in);
    joint = context_layer(f, l, joint, in);
  }
  f.encoded = joint;
  return joint;
}

void decode_gmm(Forward& f, const SceneInput& in) {
  auto& g = f.g;
  if (f.encoded < 0) throw Error("encode_scene must run before decode_gmm");
  const int M = f.cfg.modes;
  const int F = f.F;
  const int chunk = 6 * F + 1;
  const double unit = f.cfg.head_unit_m;
  // softplus offset giving sigma ~ sigma_init_m at raw 0
  const double sig0 = f.cfg.sigma_init_m / unit;
  const double sig_offset = std::log(std::expm1(std::max(1e-9, sig0)));

  f.mu.assign(static_cast<std::size_t>(f.K) * M, -1);
  f.sigma.assign(static_cast<std::size_t>(f.K) * M, -1);
  f.log_rho.assign(static_cast<std::size_t>(f.K), -1);

  for (int k = 0; k < f.K; ++k) {
    // Pool the feature at the last observed step.
    const int row = k * f.H + (f.H - 1);
    int x = g.slice_rows(f.encoded, row, row + 1);
    for (int i = 0; i < f.cfg.gmm_mlp_depth; ++i) {
      const std::string p = "gmm." + std::to_string(i);
      x = g.add_row(g.matmul(x, f.param(p + ".w")), f.param(p + ".b"));
      if (i + 1 < f.cfg.gmm_mlp_depth) x = g.gelu(x);
    }

    nn::Tensor anchor_rows(F, 3);
    for (int t = 0; t < F; ++t)
      for (int c = 0; c < 3; ++c)
        anchor_rows.at(t, c) = in.anchor_traj[(static_cast<std::size_t>(k) * F + t) * 3 + c];
    const int anchor_id = g.constant(std::move(anchor_rows));

    std::vector<int> rho_logits;
    rho_logits.reserve(static_cast<std::size_t>(M));
    for (int m = 0; m < M; ++m) {
      const int mc = g.slice_cols(x, m * chunk, (m + 1) * chunk);
      const int mu_raw = g.reshape(g.slice_cols(mc, 0, 3 * F), F, 3);
      const int sig_raw = g.reshape(g.slice_cols(mc, 3 * F, 6 * F), F, 3);
      // Head emits per-step offsets; their running sum from the anchor is the
      // trajectory mean.
      f.mu[static_cast<std::size_t>(f.mode_id(k, m))] =
          g.add(g.cumsum_rows(g.affine(mu_raw, unit, 0.0)), anchor_id);
      f.sigma[static_cast<std::size_t>(f.mode_id(k, m))] =
          g.affine(g.softplus(g.affine(sig_raw, 1.0, sig_offset)), unit, f.sigma_floor);
      rho_logits.push_back(g.slice_cols(mc, 6 * F, chunk));
    }
    const int logits = g.concat_cols(rho_logits);                    // 1 x M
    const int lse = g.logsumexp_rows(logits);                        // 1 x 1
    f.log_rho[static_cast<std::size_t>(k)] = g.add_col(logits, g.affine(lse, -1.0, 0.0));
  }
}

void loss_total(Forward& f, const SceneInput& in, const LossConfig& loss_cfg) {
  auto& g = f.g;
  if (f.mu.empty()) throw Error("decode_gmm must run before loss_total");
  const int M = f.cfg.modes;
  const int F = f.F;

  std::int64_t total_valid = 0;
  for (auto v : in.future_valid) total_valid += v ? 1 : 0;
  if (total_valid == 0) throw DegenerateMask("no valid future step in scene");

  f.best_mode.assign(static_cast<std::size_t>(f.K), -1);
  int ll_sum = -1;
  std::vector<int> ce_terms;
  for (int k = 0; k < f.K; ++k) {
    nn::Tensor gt(F, 3);
    nn::Tensor mask(F, 1);
    std::int64_t agent_valid = 0;
    for (int t = 0; t < F; ++t) {
      const std::size_t base = (static_cast<std::size_t>(k) * F + t) * 3;
      gt.at(t, 0) = in.future[base + 0];
      gt.at(t, 1) = in.future[base + 1];
      gt.at(t, 2) = in.future[base + 2];
      const bool v = in.future_valid[static_cast<std::size_t>(k) * F + t] != 0;
      mask.at(t, 0) = v ? 1.0 : 0.0;
      agent_valid += v ? 1 : 0;
    }
    const int gt_id = g.constant(gt);
    const int mask_id = g.constant(std::move(mask));

    std::vector<int> log_n;
    log_n.reserve(static_cast<std::size_t>(M));
    for (int m = 0; m < M; ++m) {
      const int mu = f.mu[static_cast<std::size_t>(f.mode_id(k, m))];
      const int sigma = f.sigma[static_cast<std::size_t>(f.mode_id(k, m))];
      const int z = g.div(g.sub(gt_id, mu), sigma);
      const int q = g.row_sum(g.mul(z, z));                  // F x 1
      const int logsig = g.row_sum(g.log_(sigma));           // F x 1
      // log N = -q/2 - sum log sigma - (3/2) log 2pi
      log_n.push_back(g.affine(g.add(g.affine(q, 0.5, 0.0), logsig), -1.0, -1.5 * kLog2Pi));
    }
    const int log_n_mat = g.concat_cols(log_n);              // F x M
    const int mix = g.add_row(log_n_mat, f.log_rho[static_cast<std::size_t>(k)]);
    const int ll = g.logsumexp_rows(mix);                    // F x 1
    const int masked = g.mul_col(ll, mask_id);
    const int agent_sum = g.sum_all(masked);
    ll_sum = ll_sum < 0 ? agent_sum : g.add(ll_sum, agent_sum);

    if (agent_valid > 0) {
      // Best mode by average displacement (detached choice).
      int best = 0;
      double best_err = 0.0;
      for (int m = 0; m < M; ++m) {
        const nn::Tensor& mu_v = g.val(f.mu[static_cast<std::size_t>(f.mode_id(k, m))]);
        double err = 0.0;
        for (int t = 0; t < F; ++t) {
          if (!in.future_valid[static_cast<std::size_t>(k) * F + t]) continue;
          const double dx = mu_v.at(t, 0) - gt.at(t, 0);
          const double dy = mu_v.at(t, 1) - gt.at(t, 1);
          const double dz = mu_v.at(t, 2) - gt.at(t, 2);
          err += std::sqrt(dx * dx + dy * dy + dz * dz);
        }
        err /= static_cast<double>(agent_valid);
        if (m == 0 || err < best_err) {
          best = m;
          best_err = err;
        }
      }
      f.best_mode[static_cast<std::size_t>(k)] = best;
      ce_terms.push_back(
          g.affine(g.slice_cols(f.log_rho[static_cast<std::size_t>(k)], best, best + 1), -1.0, 0.0));
    }
  }

  f.nll = g.affine(ll_sum, -1.0 / static_cast<double>(total_valid), 0.0);
  if (!ce_terms.empty()) {
    int ce_sum = ce_terms[0];
    for (std::size_t i = 1; i < ce_terms.size(); ++i) ce_sum = g.add(ce_sum, ce_terms[i]);
    f.ce = g.affine(ce_sum, 1.0 / static_cast<double>(ce_terms.size()), 0.0);
  } else {
    f.ce = g.constant(nn::Tensor(1, 1));
  }
  f.loss = g.add(g.affine(f.nll, loss_cfg.lambda_nll, 0.0), g.affine(f.ce, loss_cfg.lambda_ce, 0.0));
}

Forward run_forward(const ModelParams& params, const ModelConfig& cfg, const SceneInput& in,
                    const LossConfig* loss_cfg) {
  Forward f = begin_forward(params, cfg, in);
  if (loss_cfg) f.sigma_floor = loss_cfg->sigma_floor;
  encode_scene(f, in);
  decode_gmm(f, in);
  if (loss_cfg) loss_total(f, in, *loss_cfg);
  return f;
}

GmmPrediction extract_prediction(Forward& f) {
  GmmPrediction p;
  p.K = f.K;
  p.M = f.cfg.modes;
  p.F = f.F;
  p.data.assign(static_cast<std::size_t>(p.K) * p.M * p.F * 7, 0.0);
  for (int k = 0; k < p.K; ++k) {
    const nn::Tensor& lr = f.g.val(f.log_rho[static_cast<std::size_t>(k)]);
    for (int m = 0; m < p.M; ++m) {
      const nn::Tensor& mu = f.g.val(f.mu[static_cast<std::size_t>(f.mode_id(k, m))]);
      const nn::Tensor& sg = f.g.val(f.sigma[static_cast<std::size_t>(f.mode_id(k, m))]);
      const double rho = std::exp(lr.at(0, m));
      for (int t = 0; t < p.F; ++t) {
        for (int c = 0; c < 3; ++c) {
          p.at(k, m, t, c) = mu.at(t, c);
          p.at(k, m, t, 3 + c) = sg.at(t, c);
        }
        p.at(k, m, t, 6) = rho;
      }
    }
  }
  return p;
}

std::vector<nn::Tensor> backward(Forward& f) {
  if (f.loss < 0) throw nn::GraphNotRecorded("loss was not built");
  f.g.backward(f.loss);
  std::vector<nn::Tensor> grads;
  grads.reserve(f.param_ids.size());
  for (int id : f.param_ids) grads.push_back(f.g.grad(id));
  return grads;
}

void optimizer_step(ModelParams& params, const std::vector<nn::Tensor>& grads,
                    const nn::AdamConfig& cfg) {
  auto& entries = params.entries();
  if (grads.size() != entries.size()) throw ShapeMismatch("gradient/parameter count mismatch");
  for (std::size_t i = 0; i < entries.size(); ++i)
    nn::adam_step(entries[i].value, grads[i], entries[i].opt, cfg);
}

Prediction predict(const ModelParams& params, const ModelConfig& cfg, const scenes::Scene& scene,
                   double sigma_floor) {
  const SceneInput in = SceneInput::from_scene(scene);
  Forward f = begin_forward(params, cfg, in);
  f.sigma_floor = sigma_floor;
  encode_scene(f, in);
  decode_gmm(f, in);

  Prediction out;
  out.gmm = extract_prediction(f);
  out.agents.resize(static_cast<std::size_t>(f.K));
  for (int k = 0; k < f.K; ++k) {
    auto& modes = out.agents[static_cast<std::size_t>(k)];
    modes.resize(static_cast<std::size_t>(cfg.modes));
    for (int m = 0; m < cfg.modes; ++m) {
      ModeTrajectory& traj = modes[static_cast<std::size_t>(m)];
      traj.rho = out.gmm.rho(k, m);
      traj.ego_xyz.resize(static_cast<std::size_t>(f.F) * 3);
      traj.world_xyz.resize(static_cast<std::size_t>(f.F) * 3);
      for (int t = 0; t < f.F; ++t) {
        const double x = out.gmm.at(k, m, t, 0);
        const double y = out.gmm.at(k, m, t, 1);
        const double z = out.gmm.at(k, m, t, 2);
        traj.ego_xyz[static_cast<std::size_t>(t) * 3 + 0] = x;
        traj.ego_xyz[static_cast<std::size_t>(t) * 3 + 1] = y;
        traj.ego_xyz[static_cast<std::size_t>(t) * 3 + 2] = z;
        const geo::Vec2 w = geo::from_frame({x, y}, scene.frame_of_reference);
        traj.world_xyz[static_cast<std::size_t>(t) * 3 + 0] = w.x;
        traj.world_xyz[static_cast<std::size_t>(t) * 3 + 1] = w.y;
        traj.world_xyz[static_cast<std::size_t>(t) * 3 + 2] = z;
      }
    }
  }
  return out;
}

LossReport train_step(ModelParams& params, const ModelConfig& cfg, const LossConfig& loss_cfg,
                      const std::vector<SceneInput>& batch, const nn::AdamConfig& adam_cfg) {
  if (batch.empty()) throw Error("train_step: empty batch");
  LossReport report;
  std::vector<nn::Tensor> acc;
  for (const auto& in : batch) {
    Forward f = run_forward(params, cfg, in, &loss_cfg);
    report.total += f.g.val(f.loss).at(0, 0);
    report.nll += f.g.val(f.nll).at(0, 0);
    report.ce += f.g.val(f.ce).at(0, 0);
    auto grads = backward(f);
    if (acc.empty()) {
      acc = std::move(grads);
    } else {
      for (std::size_t i = 0; i < acc.size(); ++i)
        for (std::size_t j = 0; j < acc[i].numel(); ++j) acc[i][j] += grads[i][j];
    }
  }
  const double inv = 1.0 / static_cast<double>(batch.size());
  for (auto& t : acc)
    for (std::size_t j = 0; j < t.numel(); ++j) t[j] *= inv;
  report.total *= inv;
  report.nll *= inv;
  report.ce *= inv;
  optimizer_step(params, acc, adam_cfg);
  return report;
}

namespace {

constexpr char kCkptMagic[4] = {'T', 'M', 'C', 'K'};
constexpr std::uint32_t kCkptVersion = 1;

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}
void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}
void put_str(std::string& out, const std::string& s) {
  put_u32(out, static_cast<std::uint32_t>(s.size()));
  out += s;
}
void put_tensor(std::string& out, const nn::Tensor& t) {
  put_u32(out, static_cast<std::uint32_t>(t.rows()));
  put_u32(out, static_cast<std::uint32_t>(t.cols()));
  const std::size_t bytes = t.numel() * sizeof(double);
  const std::size_t off = out.size();
  out.resize(off + bytes);
  std::memcpy(out.data() + off, t.data(), bytes);
}

struct CkptReader {
  const std::string& b;
  std::size_t pos = 0;
  void need(std::size_t n) const {
    if (pos + n > b.size()) throw Error("truncated checkpoint");
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i)
      v |= static_cast<std::uint32_t>(static_cast<unsigned char>(b[pos + i])) << (8 * i);
    pos += 4;
    return v;
  }
  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i)
      v |= static_cast<std::uint64_t>(static_cast<unsigned char>(b[pos + i])) << (8 * i);
    pos += 8;
    return v;
  }
  std::string str() {
    const std::uint32_t n = u32();
    need(n);
    std::string s = b.substr(pos, n);
    pos += n;
    return s;
  }
  nn::Tensor tensor() {
    const int rows = static_cast<int>(u32());
    const int cols = static_cast<int>(u32());
    nn::Tensor t(rows, cols);
    const std::size_t bytes = t.numel() * sizeof(double);
    need(bytes);
    std::memcpy(t.data(), b.data() + pos, bytes);
    pos += bytes;
    return t;
  }
};

}  // namespace

void save_checkpoint(const std::string& path, const ModelParams& params, const ModelConfig& cfg,
                     const std::string& scene_config_hash, std::uint64_t seed) {
  std::string out;
  out.append(kCkptMagic, 4);
  put_u32(out, kCkptVersion);
  put_str(out, cfg.to_json());
  put_u32(out, static_cast<std::uint32_t>(params.future_steps()));
  put_str(out, scene_config_hash);
  put_u64(out, seed);
  put_u32(out, static_cast<std::uint32_t>(params.entries().size()));
  for (const auto& e : params.entries()) {
    put_str(out, e.name);
    put_tensor(out, e.value);
    const bool has_opt = !e.opt.m.empty();
    out.push_back(has_opt ? 1 : 0);
    if (has_opt) {
      put_tensor(out, e.opt.m);
      put_tensor(out, e.opt.v);
      put_u64(out, static_cast<std::uint64_t>(e.opt.step));
    }
  }
  write_file(path, out);
}

Checkpoint load_checkpoint(const std::string& path) {
  const std::string bytes = read_file(path);
  if (bytes.size() < 8 || std::memcmp(bytes.data(), kCkptMagic, 4) != 0)
    throw Error("not a checkpoint file: " + path);
  CkptReader r{bytes, 4};
  const std::uint32_t version = r.u32();
  if (version != kCkptVersion) throw Error("unsupported checkpoint version");
  Checkpoint ck;
  ck.cfg = ModelConfig::from_json(r.str());
  const int future_steps = static_cast<int>(r.u32());
  ck.scene_config_hash = r.str();
  ck.seed = r.u64();
  ck.params = ModelParams::init(ck.cfg, future_steps, ck.seed);
  const std::uint32_t n = r.u32();
  if (n != ck.params.entries().size()) throw Error("checkpoint parameter count mismatch");
  for (auto& e : ck.params.entries()) {
    const std::string name = r.str();
    if (name != e.name) throw Error("checkpoint parameter order mismatch: " + name);
    e.value = r.tensor();
    r.need(1);
    const bool has_opt = bytes[r.pos++] != 0;
    if (has_opt) {
      e.opt.m = r.tensor();
      e.opt.v = r.tensor();
      e.opt.step = static_cast<std::int64_t>(r.u64());
    }
  }
  return ck;
}

}  // namespace tarmac::model
