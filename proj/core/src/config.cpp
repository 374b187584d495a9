// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The eraloc Authors

#include "eraloc/config.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <algorithm>
#include <functional>
#include <map>
#include <sstream>

#include "eraloc/errors.hpp"
#include "json.hpp"

namespace eraloc {

using nlohmann::json;

std::string method_name(Method m) {
  switch (m) {
    case Method::kProposed:
      return "proposed";
    case Method::kDigitalOnly:
      return "digital_only";
    case Method::kOneShot:
      return "one_shot";
  }
  return "unknown";
}

Method parse_method(const std::string& name) {
  if (name == "proposed") return Method::kProposed;
  if (name == "digital_only") return Method::kDigitalOnly;
  if (name == "one_shot") return Method::kOneShot;
  throw ConfigError("unknown method '" + name + "' (expected proposed, digital_only or one_shot)");
}

std::size_t TrainConfig::train_count() const noexcept {
  return static_cast<std::size_t>(std::llround(static_cast<double>(sample_count) * split));
}

namespace {

// Reads a section object, dispatching each key to a field setter and
// rejecting anything not listed.
class SectionReader {
 public:
  SectionReader(const json& root, const std::string& section) : pointer_("/" + section) {
    if (!root.contains(section)) return;
    node_ = &root.at(section);
    if (!node_->is_object()) throw ConfigError(pointer_ + ": expected an object");
  }

  template <typename T>
  SectionReader& field(const std::string& key, T& target) {
    known_.push_back(key);
    if (node_ == nullptr || !node_->contains(key)) return *this;
    try {
      target = node_->at(key).get<T>();
    } catch (const json::exception&) {
      throw ConfigError(pointer_ + "/" + key + ": wrong type");
    }
    return *this;
  }

  SectionReader& custom(const std::string& key, const std::function<void(const json&, const std::string&)>& fn) {
    known_.push_back(key);
    if (node_ != nullptr && node_->contains(key)) fn(node_->at(key), pointer_ + "/" + key);
    return *this;
  }

  void finish() const {
    if (node_ == nullptr) return;
    for (const auto& [key, _] : node_->items()) {
      if (std::find(known_.begin(), known_.end(), key) == known_.end()) {
        throw ConfigError(pointer_ + "/" + key + ": unknown key");
      }
    }
  }

 private:
  std::string pointer_;
  const json* node_ = nullptr;
  std::vector<std::string> known_;
};

json methods_json(const std::vector<Method>& ms) {
  json arr = json::array();
  for (Method m : ms) arr.push_back(method_name(m));
  return arr;
}

}  // namespace

RunConfig RunConfig::from_json(const std::string& text) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  if (!root.is_object()) throw ConfigError("/: config must be a JSON object");
  for (const auto& [key, _] : root.items()) {
    if (key != "system" && key != "model" && key != "train" && key != "eval") {
      throw ConfigError("/" + key + ": unknown key");
    }
  }

  RunConfig c;
  auto& s = c.system;
  SectionReader(root, "system")
      .field("n_x", s.n_x)
      .field("n_y", s.n_y)
      .field("spacing_wavelengths", s.spacing_wavelengths)
      .field("max_degree", s.max_degree)
      .field("subcarriers", s.subcarriers)
      .field("subcarrier_spacing_hz", s.subcarrier_spacing_hz)
      .field("carrier_hz", s.carrier_hz)
      .field("paths", s.paths)
      .field("stages", s.stages)
      .field("pilots_per_stage", s.pilots_per_stage)
      .field("p_max", s.p_max)
      .field("region_half_width", s.region_half_width)
      .field("ap_height", s.ap_height)
      .field("snr_db", s.snr_db)
      .finish();

  auto& m = c.model;
  SectionReader(root, "model")
      .custom("method",
              [&](const json& v, const std::string& ptr) {
                if (!v.is_string()) throw ConfigError(ptr + ": wrong type");
                try {
                  m.method = parse_method(v.get<std::string>());
                } catch (const ConfigError& e) {
                  throw ConfigError(ptr + ": " + e.what());
                }
              })
      .field("d_model", m.d_model)
      .field("heads", m.heads)
      .field("embed_dim", m.embed_dim)
      .field("lstm_hidden", m.lstm_hidden)
      .field("head_hidden", m.head_hidden)
      .field("ff_hidden", m.ff_hidden)
      .finish();

  auto& t = c.train;
  SectionReader(root, "train")
      .field("sample_count", t.sample_count)
      .field("split", t.split)
      .field("batch_size", t.batch_size)
      .field("learning_rate", t.learning_rate)
      .field("beta1", t.beta1)
      .field("beta2", t.beta2)
      .field("eps", t.eps)
      .field("epochs", t.epochs)
      .field("stage_weights", t.stage_weights)
      .field("grad_clip", t.grad_clip)
      .field("seed", t.seed)
      .finish();

  auto& e = c.eval;
  SectionReader(root, "eval")
      .field("seeds", e.seeds)
      .field("snr_db", e.snr_db)
      .field("budget", e.budget)
      .custom("allocations",
              [&](const json& v, const std::string& ptr) {
                if (!v.is_array()) throw ConfigError(ptr + ": wrong type");
                e.allocations.clear();
                for (std::size_t i = 0; i < v.size(); ++i) {
                  const auto& a = v[i];
                  if (!a.is_array() || a.size() != 2 || !a[0].is_number_unsigned() || !a[1].is_number_unsigned()) {
                    throw ConfigError(ptr + "/" + std::to_string(i) + ": expected [stages, pilots_per_stage]");
                  }
                  e.allocations.emplace_back(a[0].get<std::size_t>(), a[1].get<std::size_t>());
                }
              })
      .custom("methods",
              [&](const json& v, const std::string& ptr) {
                if (!v.is_array()) throw ConfigError(ptr + ": wrong type");
                e.methods.clear();
                for (std::size_t i = 0; i < v.size(); ++i) {
                  if (!v[i].is_string()) throw ConfigError(ptr + "/" + std::to_string(i) + ": wrong type");
                  try {
                    e.methods.push_back(parse_method(v[i].get<std::string>()));
                  } catch (const ConfigError& err) {
                    throw ConfigError(ptr + "/" + std::to_string(i) + ": " + err.what());
                  }
                }
              })
      .field("beam_n_theta", e.beam_n_theta)
      .field("beam_n_phi", e.beam_n_phi)
      .finish();

  c.validate();
  return c;
}

RunConfig RunConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return from_json(ss.str());
}

std::string RunConfig::to_json() const {
  json root;
  const auto& s = system;
  root["system"] = {{"n_x", s.n_x},
                    {"n_y", s.n_y},
                    {"spacing_wavelengths", s.spacing_wavelengths},
                    {"max_degree", s.max_degree},
                    {"subcarriers", s.subcarriers},
                    {"subcarrier_spacing_hz", s.subcarrier_spacing_hz},
                    {"carrier_hz", s.carrier_hz},
                    {"paths", s.paths},
                    {"stages", s.stages},
                    {"pilots_per_stage", s.pilots_per_stage},
                    {"p_max", s.p_max},
                    {"region_half_width", s.region_half_width},
                    {"ap_height", s.ap_height},
                    {"snr_db", s.snr_db}};
  const auto& m = model;
  root["model"] = {{"method", method_name(m.method)}, {"d_model", m.d_model},         {"heads", m.heads},
                   {"embed_dim", m.embed_dim},        {"lstm_hidden", m.lstm_hidden}, {"head_hidden", m.head_hidden},
                   {"ff_hidden", m.ff_hidden}};
  const auto& t = train;
  root["train"] = {{"sample_count", t.sample_count},
                   {"split", t.split},
                   {"batch_size", t.batch_size},
                   {"learning_rate", t.learning_rate},
                   {"beta1", t.beta1},
                   {"beta2", t.beta2},
                   {"eps", t.eps},
                   {"epochs", t.epochs},
                   {"stage_weights", t.stage_weights},
                   {"grad_clip", t.grad_clip},
                   {"seed", t.seed}};
  json allocs = json::array();
  for (const auto& [st, pl] : eval.allocations) allocs.push_back({st, pl});
  root["eval"] = {{"seeds", eval.seeds},
                  {"snr_db", eval.snr_db},
                  {"budget", eval.budget},
                  {"allocations", allocs},
                  {"methods", methods_json(eval.methods)},
                  {"beam_n_theta", eval.beam_n_theta},
                  {"beam_n_phi", eval.beam_n_phi}};
  return root.dump(2);
}

std::uint64_t RunConfig::hash() const {
  const std::string text = json::parse(to_json()).dump();
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hash_hex(std::uint64_t h) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

void RunConfig::validate() const {
  auto fail = [](const std::string& ptr, const std::string& msg) { throw ConfigError(ptr + ": " + msg); };
  const auto& s = system;
  if (s.n_x < 1) fail("/system/n_x", "must be >= 1");
  if (s.n_y < 1) fail("/system/n_y", "must be >= 1");
  if (!(s.spacing_wavelengths > 0)) fail("/system/spacing_wavelengths", "must be > 0");
  if (s.max_degree < 0) fail("/system/max_degree", "must be >= 0");
  if (s.subcarriers < 1) fail("/system/subcarriers", "must be >= 1");
  if (!(s.subcarrier_spacing_hz > 0)) fail("/system/subcarrier_spacing_hz", "must be > 0");
  if (!(s.carrier_hz > 0)) fail("/system/carrier_hz", "must be > 0");
  if (s.paths < 1) fail("/system/paths", "must be >= 1");
  if (s.stages < 1) fail("/system/stages", "must be >= 1");
  if (s.pilots_per_stage < 1) fail("/system/pilots_per_stage", "must be >= 1");
  if (!(s.p_max > 0)) fail("/system/p_max", "must be > 0");
  if (!(s.region_half_width > 0)) fail("/system/region_half_width", "must be > 0");
  if (!(s.ap_height > 0)) fail("/system/ap_height", "must be > 0 (UE plane is z = 0)");
  if (!std::isfinite(s.snr_db)) fail("/system/snr_db", "must be finite");

  const auto& m = model;
  if (m.heads == 0 || m.d_model % m.heads != 0) fail("/model/d_model", "must be divisible by /model/heads");
  const std::size_t two_ml = 2 * s.subcarriers * s.pilots_per_stage * (m.method == Method::kOneShot ? s.stages : 1);
  if (m.embed_dim == 0 || m.embed_dim >= two_ml) {
    fail("/model/embed_dim", "must satisfy 0 < d < 2*M*L = " + std::to_string(two_ml));
  }
  if (m.lstm_hidden == 0) fail("/model/lstm_hidden", "must be >= 1");
  if (m.head_hidden == 0) fail("/model/head_hidden", "must be >= 1");
  if (m.ff_hidden == 0) fail("/model/ff_hidden", "must be >= 1");

  const auto& t = train;
  if (!(t.split > 0.0 && t.split < 1.0)) fail("/train/split", "must lie in (0, 1)");
  if (t.sample_count < 2) fail("/train/sample_count", "must be >= 2");
  if (t.train_count() < 1 || t.train_count() >= t.sample_count) {
    fail("/train/split", "leaves an empty training or validation set");
  }
  if (t.batch_size < 1) fail("/train/batch_size", "must be >= 1");
  if (!(t.learning_rate >= 0)) fail("/train/learning_rate", "must be >= 0");
  if (!(t.beta1 >= 0 && t.beta1 < 1)) fail("/train/beta1", "must lie in [0, 1)");
  if (!(t.beta2 >= 0 && t.beta2 < 1)) fail("/train/beta2", "must lie in [0, 1)");
  if (!(t.eps > 0)) fail("/train/eps", "must be > 0");
  if (!(t.grad_clip > 0)) fail("/train/grad_clip", "must be > 0");
  if (!t.stage_weights.empty()) {
    const std::size_t stages = m.method == Method::kOneShot ? 1 : s.stages;
    if (t.stage_weights.size() != stages) fail("/train/stage_weights", "needs one weight per stage");
    double total = 0.0;
    for (std::size_t i = 0; i < t.stage_weights.size(); ++i) {
      if (!(t.stage_weights[i] >= 0)) fail("/train/stage_weights/" + std::to_string(i), "must be >= 0");
      if (i > 0 && t.stage_weights[i] < t.stage_weights[i - 1]) {
        fail("/train/stage_weights/" + std::to_string(i), "weights must be nondecreasing");
      }
      total += t.stage_weights[i];
    }
    if (!(total > 0)) fail("/train/stage_weights", "must not all be zero");
  }

  const auto& e = eval;
  if (e.budget < 1) fail("/eval/budget", "must be >= 1");
  for (std::size_t i = 0; i < e.allocations.size(); ++i) {
    const auto [st, pl] = e.allocations[i];
    if (st < 1 || pl < 1 || st * pl != e.budget) {
      fail("/eval/allocations/" + std::to_string(i),
           "stages * pilots_per_stage must equal the budget " + std::to_string(e.budget));
    }
  }
  if (e.beam_n_theta < 1) fail("/eval/beam_n_theta", "must be >= 1");
  if (e.beam_n_phi < 1) fail("/eval/beam_n_phi", "must be >= 1");
}

RunConfig RunConfig::for_method(Method m) const {
  RunConfig c = *this;
  if (model.method == Method::kOneShot && m != Method::kOneShot) {
    throw ConfigError("cannot convert a one-shot config back to a multi-stage method");
  }
  c.model.method = m;
  return c;
}

RunConfig RunConfig::with_allocation(std::size_t stages, std::size_t pilots_per_stage) const {
  RunConfig c = *this;
  c.system.stages = stages;
  c.system.pilots_per_stage = pilots_per_stage;
  if (!c.train.stage_weights.empty() && c.train.stage_weights.size() != stages) c.train.stage_weights.clear();
  c.validate();
  return c;
}

std::size_t RunConfig::episode_stages() const noexcept {
  return model.method == Method::kOneShot ? 1 : system.stages;
}

std::size_t RunConfig::episode_substages() const noexcept {
  return model.method == Method::kOneShot ? system.stages * system.pilots_per_stage : system.pilots_per_stage;
}

std::vector<double> RunConfig::stage_weights() const {
  const std::size_t stages = episode_stages();
  std::vector<double> w = train.stage_weights;
  if (w.empty()) {
    w.resize(stages);
    for (std::size_t t = 0; t < stages; ++t) w[t] = static_cast<double>(t + 1);
  }
  double total = 0.0;
  for (double v : w) total += v;
  for (double& v : w) v /= total;
  return w;
}

policy::PolicyConfig RunConfig::policy_config() const {
  policy::PolicyConfig p;
  p.antennas = system.antennas();
  p.subcarriers = system.subcarriers;
  p.substages = episode_substages();
  p.basis_size = system.basis_size();
  p.p_max = system.p_max;
  p.d_model = model.d_model;
  p.heads = model.heads;
  p.embed_dim = model.embed_dim;
  p.lstm_hidden = model.lstm_hidden;
  p.head_hidden = model.head_hidden;
  p.ff_hidden = model.ff_hidden;
  p.learn_patterns = model.method == Method::kProposed;
  p.position_scale = system.region_half_width;
  return p;
}

policy::SimContext RunConfig::sim_context() const {
  policy::SimContext ctx;
  ctx.grid.subcarriers = system.subcarriers;
  ctx.grid.subcarrier_spacing = system.subcarrier_spacing_hz;
  ctx.grid.carrier_frequency = system.carrier_hz;
  ctx.grid.validate();
  ctx.geom = array::upa_geometry(system.n_x, system.n_y, system.spacing_wavelengths, ctx.grid.wavelength());
  ctx.basis = harmonics::BasisSpec(system.max_degree);
  ctx.noise = channel::NoiseModel::from_snr(system.snr_db, system.p_max);
  return ctx;
}

RunConfig desk_profile() { return RunConfig{}; }

}  // namespace eraloc
