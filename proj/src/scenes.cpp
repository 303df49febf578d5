// Copyright 2026 The Tarmac Authors
// SPDX-License-Identifier: Apache-2.0
#include "tarmac/scenes.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <limits>

#include <json.hpp>

namespace tarmac::scenes {

namespace {

constexpr char kMagic[4] = {'T', 'M', 'S', 'C'};
constexpr std::uint32_t kVersion = 1;

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}
void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}
void put_f64(std::string& out, double v) {
  std::uint64_t bits;
  std::memcpy(&bits, &v, sizeof(bits));
  put_u64(out, bits);
}
void put_str(std::string& out, const std::string& s) {
  put_u32(out, static_cast<std::uint32_t>(s.size()));
  out += s;
}

struct Reader {
  std::string_view b;
  std::size_t pos = 0;

  void need(std::size_t n) const {
    if (pos + n > b.size()) throw CorruptPayload("truncated scene payload");
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(b[pos + i])) << (8 * i);
    pos += 4;
    return v;
  }
  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(b[pos + i])) << (8 * i);
    pos += 8;
    return v;
  }
  double f64() {
    const std::uint64_t bits = u64();
    double v;
    std::memcpy(&v, &bits, sizeof(v));
    return v;
  }
  std::string str() {
    const std::uint32_t n = u32();
    need(n);
    std::string s(b.substr(pos, n));
    pos += n;
    return s;
  }
};

}  // namespace

void SceneConfig::validate() const {
  if (H + F != T) throw Error("scene config: H + F must equal T");
  if (K < 1 || K > max_agents) throw Error("scene config: need 1 <= K <= max_agents");
  if (min_agents < 1) throw Error("scene config: min_agents >= 1");
  if (P < 1 || stride < 1 || H < 1 || F < 1) throw Error("scene config: sizes must be positive");
}

SceneConfig SceneConfig::from_json(const std::string& text) {
  const auto j = nlohmann::json::parse(text);
  SceneConfig c;
  c.T = j.value("T", c.T);
  c.H = j.value("H", c.H);
  c.F = j.value("F", c.F);
  c.K = j.value("K", c.K);
  c.P = j.value("P", c.P);
  c.min_agents = j.value("min_agents", c.min_agents);
  c.max_agents = j.value("max_agents", c.max_agents);
  c.stride = j.value("stride", c.stride);
  c.validate();
  return c;
}

std::string SceneConfig::to_json() const {
  nlohmann::json j;
  j["T"] = T;
  j["H"] = H;
  j["F"] = F;
  j["K"] = K;
  j["P"] = P;
  j["min_agents"] = min_agents;
  j["max_agents"] = max_agents;
  j["stride"] = stride;
  return j.dump(2);
}

std::string SceneConfig::config_hash() const { return hash_hex(fnv1a(to_json())); }

const AgentState& RawScene::at(int agent, int t) const {
  const std::size_t T = states.size() / std::max<std::size_t>(1, agent_ids.size());
  return states[static_cast<std::size_t>(agent) * T + static_cast<std::size_t>(t)];
}

AgentState& RawScene::at(int agent, int t) {
  return const_cast<AgentState&>(static_cast<const RawScene*>(this)->at(agent, t));
}

std::vector<RawScene> window_scenes(const std::vector<ingest::AgentTrack>& tracks,
                                    const SceneConfig& cfg, const std::string& airport_id,
                                    int day_id) {
  cfg.validate();
  std::vector<RawScene> out;
  if (tracks.empty()) return out;

  std::int64_t lo = std::numeric_limits<std::int64_t>::max();
  std::int64_t hi = std::numeric_limits<std::int64_t>::min();
  for (const auto& t : tracks) {
    lo = std::min(lo, t.first_frame());
    hi = std::max(hi, t.last_frame());
  }

  for (std::int64_t start = lo; start + cfg.T - 1 <= hi; start += cfg.stride) {
    struct Candidate {
      const ingest::AgentTrack* track;
      int valid_total = 0;
      int valid_observed = 0;
    };
    std::vector<Candidate> cands;
    for (const auto& t : tracks) {
      const std::int64_t first = std::max(start, t.first_frame());
      const std::int64_t last = std::min(start + cfg.T - 1, t.last_frame());
      if (first > last) continue;
      Candidate c{&t, static_cast<int>(last - first + 1), 0};
      const std::int64_t obs_last = std::min(last, start + cfg.H - 1);
      if (first <= obs_last) c.valid_observed = static_cast<int>(obs_last - first + 1);
      cands.push_back(c);
    }

    int with_observed = 0;
    for (const auto& c : cands) with_observed += c.valid_observed > 0 ? 1 : 0;
    if (with_observed < cfg.min_agents) continue;
    if (with_observed > cfg.max_agents) {
      // Keep the max_agents most informative agents (ties by id).
      std::stable_sort(cands.begin(), cands.end(), [](const Candidate& l, const Candidate& r) {
        if (l.valid_total != r.valid_total) return l.valid_total > r.valid_total;
        return l.track->agent_id < r.track->agent_id;
      });
      cands.resize(static_cast<std::size_t>(cfg.max_agents));
      // Stable output ordering by agent id.
      std::stable_sort(cands.begin(), cands.end(), [](const Candidate& l, const Candidate& r) {
        return l.track->agent_id < r.track->agent_id;
      });
    }

    RawScene scene;
    scene.airport_id = airport_id;
    scene.day_id = day_id;
    scene.start_frame = start;
    for (const auto& c : cands) scene.agent_ids.push_back(c.track->agent_id);
    scene.states.assign(cands.size() * static_cast<std::size_t>(cfg.T), AgentState{});
    for (std::size_t a = 0; a < cands.size(); ++a) {
      const auto& trk = *cands[a].track;
      for (int t = 0; t < cfg.T; ++t) {
        const std::int64_t frame = start + t;
        if (frame < trk.first_frame() || frame > trk.last_frame()) continue;
        const std::size_t i = static_cast<std::size_t>(frame - trk.first_frame());
        AgentState& st = scene.states[a * static_cast<std::size_t>(cfg.T) + static_cast<std::size_t>(t)];
        st.x = trk.x_m(i);
        st.y = trk.y_m(i);
        st.z = trk.z_m(i);
        st.theta = trk.heading_rad(i);
        st.valid = true;
      }
    }
    out.push_back(std::move(scene));
  }
  return out;
}

std::vector<scorer::ObsWindow> observed_windows(const RawScene& raw, const SceneConfig& cfg) {
  std::vector<scorer::ObsWindow> windows;
  const int n = raw.agent_count();
  for (int a = 0; a < n; ++a) {
    scorer::ObsWindow w;
    w.agent_id = raw.agent_ids[static_cast<std::size_t>(a)];
    w.x.resize(static_cast<std::size_t>(cfg.H));
    w.y.resize(static_cast<std::size_t>(cfg.H));
    w.valid.resize(static_cast<std::size_t>(cfg.H));
    for (int t = 0; t < cfg.H; ++t) {
      const AgentState& st = raw.at(a, t);
      w.x[static_cast<std::size_t>(t)] = st.x;
      w.y[static_cast<std::size_t>(t)] = st.y;
      w.valid[static_cast<std::size_t>(t)] = st.valid ? 1 : 0;
    }
    windows.push_back(std::move(w));
  }
  return windows;
}

const AgentState& Scene::at(int agent, int t) const {
  return agents[static_cast<std::size_t>(agent) * static_cast<std::size_t>(T) +
                static_cast<std::size_t>(t)];
}

AgentState& Scene::at(int agent, int t) {
  return agents[static_cast<std::size_t>(agent) * static_cast<std::size_t>(T) +
                static_cast<std::size_t>(t)];
}

double Scene::patch_at(int agent, int p, int c) const {
  const std::size_t stride = static_cast<std::size_t>(P) * airmap::ContextPatch::kChannels;
  return patches[static_cast<std::size_t>(agent) * stride +
                 static_cast<std::size_t>(p) * airmap::ContextPatch::kChannels +
                 static_cast<std::size_t>(c)];
}

Scene assemble_scene(const RawScene& raw, const airmap::PatchIndex& map_index,
                     const scorer::ConflictPoints& map_pts, const scorer::ScoreConfig& score_cfg,
                     const SceneConfig& cfg, scorer::Strategy strategy, std::uint64_t seed) {
  cfg.validate();
  const auto windows = observed_windows(raw, cfg);
  const auto selected = scorer::rank_and_select(windows, map_pts, score_cfg, cfg.K, strategy, seed);

  std::vector<int> ego_candidates;
  for (int i : selected)
    if (windows[static_cast<std::size_t>(i)].valid_at_last()) ego_candidates.push_back(i);
  if (ego_candidates.empty()) throw NoValidEgo("no selected agent valid at t_o");

  Rng ego_rng(seed ^ 0xe90ULL);
  const int ego_raw = ego_candidates[ego_rng.uniform_int(ego_candidates.size())];

  const int t_o = cfg.H - 1;
  const AgentState& ego_state = raw.at(ego_raw, t_o);
  const geo::Pose2 ego_pose{ego_state.x, ego_state.y, ego_state.theta};

  Scene s;
  s.T = cfg.T;
  s.H = cfg.H;
  s.F = cfg.F;
  s.K = cfg.K;
  s.P = cfg.P;
  s.airport_id = raw.airport_id;
  s.day_id = raw.day_id;
  s.start_frame = raw.start_frame;
  s.t_o = t_o;
  s.frame_of_reference = ego_pose;
  s.agent_ids.assign(static_cast<std::size_t>(cfg.K), "");
  s.agents.assign(static_cast<std::size_t>(cfg.K) * static_cast<std::size_t>(cfg.T), AgentState{});
  s.patches.assign(static_cast<std::size_t>(cfg.K) * static_cast<std::size_t>(cfg.P) *
                       airmap::ContextPatch::kChannels,
                   0.0);
  s.patch_valid.assign(static_cast<std::size_t>(cfg.K) * static_cast<std::size_t>(cfg.P), 0);

  for (std::size_t row = 0; row < selected.size(); ++row) {
    const int a = selected[row];
    if (a == ego_raw) s.ego_index = static_cast<int>(row);
    s.agent_ids[row] = raw.agent_ids[static_cast<std::size_t>(a)];
    for (int t = 0; t < cfg.T; ++t) {
      const AgentState& w = raw.at(a, t);
      if (!w.valid) continue;
      AgentState& e = s.at(static_cast<int>(row), t);
      const geo::Vec2 p = geo::to_frame({w.x, w.y}, ego_pose);
      e.x = p.x;
      e.y = p.y;
      e.z = w.z;  // altitude unchanged by the planar transform
      e.theta = geo::to_frame_heading(w.theta, ego_pose);
      e.valid = true;
    }

    // Patch selected at the agent's own pose at t_o (last valid observed
    // sample as fallback), expressed in the ego frame.
    int ref_t = -1;
    for (int t = t_o; t >= 0; --t)
      if (raw.at(a, t).valid) {
        ref_t = t;
        break;
      }
    if (ref_t < 0 || map_index.points.empty()) continue;  // fully masked patch
    const AgentState& ref = raw.at(a, ref_t);
    const auto patch =
        airmap::local_patch(map_index, geo::Vec2{ref.x, ref.y}, ego_pose, cfg.P);
    const std::size_t pstride =
        static_cast<std::size_t>(cfg.P) * airmap::ContextPatch::kChannels;
    std::copy(patch.rows.begin(), patch.rows.end(), s.patches.begin() + row * pstride);
    std::copy(patch.valid.begin(), patch.valid.end(),
              s.patch_valid.begin() + row * static_cast<std::size_t>(cfg.P));
  }
  return s;
}

std::string serialize_scene(const Scene& s) {
  std::string out;
  out.append(kMagic, 4);
  put_u32(out, kVersion);
  put_u32(out, static_cast<std::uint32_t>(s.T));
  put_u32(out, static_cast<std::uint32_t>(s.H));
  put_u32(out, static_cast<std::uint32_t>(s.F));
  put_u32(out, static_cast<std::uint32_t>(s.K));
  put_u32(out, static_cast<std::uint32_t>(s.P));
  put_str(out, s.airport_id);
  put_u32(out, static_cast<std::uint32_t>(s.day_id));
  put_u64(out, static_cast<std::uint64_t>(s.start_frame));
  put_u32(out, static_cast<std::uint32_t>(s.ego_index));
  put_u32(out, static_cast<std::uint32_t>(s.t_o));
  put_f64(out, s.frame_of_reference.x);
  put_f64(out, s.frame_of_reference.y);
  put_f64(out, s.frame_of_reference.theta);
  for (const auto& id : s.agent_ids) put_str(out, id);
  for (const auto& st : s.agents) {
    put_f64(out, st.x);
    put_f64(out, st.y);
    put_f64(out, st.z);
    put_f64(out, st.theta);
    out.push_back(st.valid ? 1 : 0);
  }
  for (double v : s.patches) put_f64(out, v);
  out.append(reinterpret_cast<const char*>(s.patch_valid.data()), s.patch_valid.size());
  return out;
}

Scene deserialize_scene(std::string_view bytes) {
  Reader r{bytes};
  r.need(4);
  if (std::memcmp(bytes.data(), kMagic, 4) != 0) throw CorruptPayload("bad scene magic");
  r.pos = 4;
  const std::uint32_t version = r.u32();
  if (version != kVersion)
    throw VersionMismatch("scene version " + std::to_string(version) + " != " +
                          std::to_string(kVersion));
  Scene s;
  s.T = static_cast<int>(r.u32());
  s.H = static_cast<int>(r.u32());
  s.F = static_cast<int>(r.u32());
  s.K = static_cast<int>(r.u32());
  s.P = static_cast<int>(r.u32());
  if (s.T <= 0 || s.H <= 0 || s.F <= 0 || s.K <= 0 || s.P <= 0 || s.H + s.F != s.T)
    throw CorruptPayload("inconsistent scene dimensions");
  s.airport_id = r.str();
  s.day_id = static_cast<int>(r.u32());
  s.start_frame = static_cast<std::int64_t>(r.u64());
  s.ego_index = static_cast<int>(r.u32());
  s.t_o = static_cast<int>(r.u32());
  s.frame_of_reference.x = r.f64();
  s.frame_of_reference.y = r.f64();
  s.frame_of_reference.theta = r.f64();
  s.agent_ids.resize(static_cast<std::size_t>(s.K));
  for (auto& id : s.agent_ids) id = r.str();
  s.agents.resize(static_cast<std::size_t>(s.K) * static_cast<std::size_t>(s.T));
  for (auto& st : s.agents) {
    st.x = r.f64();
    st.y = r.f64();
    st.z = r.f64();
    st.theta = r.f64();
    r.need(1);
    st.valid = bytes[r.pos++] != 0;
  }
  const std::size_t np = static_cast<std::size_t>(s.K) * static_cast<std::size_t>(s.P);
  s.patches.resize(np * airmap::ContextPatch::kChannels);
  for (auto& v : s.patches) v = r.f64();
  r.need(np);
  s.patch_valid.resize(np);
  std::memcpy(s.patch_valid.data(), bytes.data() + r.pos, np);
  r.pos += np;
  if (r.pos != bytes.size()) throw CorruptPayload("trailing bytes after scene payload");
  return s;
}

ShardWriter::ShardWriter(std::string path, std::string config_hash, std::uint64_t seed)
    : path_(std::move(path)), config_hash_(std::move(config_hash)), seed_(seed) {}

void ShardWriter::append(const Scene& s) {
  const std::string bytes = serialize_scene(s);
  put_u32(buffer_, static_cast<std::uint32_t>(bytes.size()));
  buffer_ += bytes;
  ++count_;
}

void ShardWriter::finalize() {
  write_file(path_, buffer_);
  nlohmann::json j;
  j["count"] = count_;
  j["config_hash"] = config_hash_;
  j["seed"] = seed_;
  write_file(path_ + ".index.json", j.dump(2));
}

ShardIndex read_shard_index(const std::string& shard_path) {
  const auto j = nlohmann::json::parse(read_file(shard_path + ".index.json"));
  ShardIndex idx;
  idx.count = j.at("count").get<int>();
  idx.config_hash = j.at("config_hash").get<std::string>();
  idx.seed = j.at("seed").get<std::uint64_t>();
  return idx;
}

std::vector<Scene> read_shard(const std::string& shard_path) {
  const std::string bytes = read_file(shard_path);
  std::vector<Scene> scenes;
  std::size_t pos = 0;
  while (pos + 4 <= bytes.size()) {
    std::uint32_t len = 0;
    for (int i = 0; i < 4; ++i)
      len |= static_cast<std::uint32_t>(static_cast<unsigned char>(bytes[pos + static_cast<std::size_t>(i)]))
             << (8 * i);
    pos += 4;
    if (pos + len > bytes.size()) throw CorruptPayload("shard length prefix out of range");
    scenes.push_back(deserialize_scene(std::string_view(bytes).substr(pos, len)));
    pos += len;
  }
  if (pos != bytes.size()) throw CorruptPayload("trailing bytes in shard");
  return scenes;
}

std::vector<Scene> read_shard_dir(const std::string& dir, const std::string& expect_config_hash) {
  std::vector<std::string> paths;
  for (const auto& entry : std::filesystem::directory_iterator(dir))
    if (entry.path().extension() == ".shard") paths.push_back(entry.path().string());
  std::sort(paths.begin(), paths.end());
  std::vector<Scene> scenes;
  for (const auto& p : paths) {
    if (!expect_config_hash.empty()) {
      const auto idx = read_shard_index(p);
      if (idx.config_hash != expect_config_hash)
        throw Error("shard config hash mismatch: " + p + " has " + idx.config_hash +
                    ", expected " + expect_config_hash);
    }
    auto batch = read_shard(p);
    for (auto& s : batch) scenes.push_back(std::move(s));
  }
  return scenes;
}

}  // namespace tarmac::scenes
