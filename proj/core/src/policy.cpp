// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The eraloc Authors

#include "eraloc/policy.hpp"

#include <cmath>
#include <string>

#include "eraloc/ad/ops.hpp"
#include "eraloc/errors.hpp"

namespace eraloc::policy {

using ad::Tape;
using ad::Tensor;
using ad::Var;

std::size_t PolicyConfig::raw_config_size() const noexcept {
  return 2 * antennas + (learn_patterns ? antennas * substages * basis_size : 0);
}

void PolicyConfig::validate() const {
  auto fail = [](const std::string& msg) { throw ConfigError(msg); };
  if (antennas < 1) fail("antenna count must be >= 1");
  if (subcarriers < 1) fail("subcarrier count must be >= 1");
  if (substages < 1) fail("pilots per stage must be >= 1");
  (void)harmonics::BasisSpec::from_size(basis_size);
  if (!(p_max > 0.0)) fail("p_max must be > 0");
  if (heads == 0 || d_model % heads != 0) {
    fail("d_model (" + std::to_string(d_model) + ") must be divisible by heads (" + std::to_string(heads) + ")");
  }
  if (embed_dim == 0 || embed_dim >= 2 * subcarriers * substages) {
    fail("embed_dim (" + std::to_string(embed_dim) + ") must be in [1, 2*M*L) = [1, " +
         std::to_string(2 * subcarriers * substages) + ")");
  }
  if (lstm_hidden == 0 || head_hidden == 0 || ff_hidden == 0) fail("hidden widths must be >= 1");
  if (!(position_scale > 0.0)) fail("position_scale must be > 0");
}

ActiveSensingModel::ActiveSensingModel(const PolicyConfig& config, std::uint64_t init_seed)
    : config_(config), store_(std::make_unique<ad::ParameterStore>()) {
  config_.validate();
  auto& s = *store_;
  const auto& c = config_;
  in_proj_ = ad::Linear(s, "encoder.in_proj", 2 * c.subcarriers, c.d_model);
  position_embedding_ = &s.create("encoder.position", {c.substages, c.d_model});
  ln_attn_ = ad::LayerNorm(s, "encoder.ln_attn", c.d_model);
  attn_ = ad::MultiHeadSelfAttention(s, "encoder.attn", c.d_model, c.heads);
  ln_ff_ = ad::LayerNorm(s, "encoder.ln_ff", c.d_model);
  ff1_ = ad::Linear(s, "encoder.ff1", c.d_model, c.ff_hidden);
  ff2_ = ad::Linear(s, "encoder.ff2", c.ff_hidden, c.d_model);
  pool_query_ = &s.create("encoder.pool_query", {c.d_model});
  embed_out_ = ad::Linear(s, "encoder.out", c.d_model, c.embed_dim);
  lstm_ = ad::LstmCell(s, "lstm", c.embed_dim, c.lstm_hidden);
  config_head_ = ad::Mlp(s, "config_head", c.lstm_hidden, c.head_hidden, c.raw_config_size());
  position_head_ = ad::Mlp(s, "position_head", c.lstm_hidden, c.head_hidden, 2);
  init_config_ = &s.create("initial_config", {c.raw_config_size()});

  Rng rng = make_rng(init_seed, {tag(Stream::kInit)});
  in_proj_.init(rng);
  ad::init_uniform_fan_in(*position_embedding_, c.d_model, rng);
  ln_attn_.init();
  attn_.init(rng);
  ln_ff_.init();
  ff1_.init(rng);
  ff2_.init(rng);
  ad::init_uniform_fan_in(*pool_query_, c.d_model, rng);
  embed_out_.init(rng);
  lstm_.init(rng);
  config_head_.init(rng);
  position_head_.init(rng);
  ad::init_uniform_fan_in(*init_config_, 1, rng);
}

Var ActiveSensingModel::encode_stage(Var tokens) const {
  const auto& c = config_;
  if (tokens.value().cols() != 2 * c.subcarriers || tokens.value().rows() % c.substages != 0) {
    throw ShapeError("encode_stage: tokens " + ad::shape_string(tokens.shape()) + " do not match L=" +
                     std::to_string(c.substages) + ", 2M=" + std::to_string(2 * c.subcarriers));
  }
  Tape& t = *tokens.tape;
  const std::size_t L = c.substages;
  Var x = ad::add_periodic_rows(in_proj_(tokens), t.param(*position_embedding_));
  x = ad::add(x, attn_.attend(ln_attn_(x), L));
  x = ad::add(x, ff2_(ad::gelu(ff1_(ln_ff_(x)))));
  const Var pooled = ad::attention_pool(x, t.param(*pool_query_), L);
  return embed_out_(pooled);
}

PolicyState ActiveSensingModel::initial_state(Tape& tape, std::size_t batch) const {
  return {tape.constant(Tensor({batch, config_.lstm_hidden})), tape.constant(Tensor({batch, config_.lstm_hidden}))};
}

PolicyState ActiveSensingModel::update_state(Var embedding, const PolicyState& prev) const {
  return lstm_.step(embedding, prev);
}

ConfigVars ActiveSensingModel::project(Var raw) const {
  const auto& c = config_;
  const std::size_t batch = raw.value().rows();
  if (raw.value().cols() != c.raw_config_size()) throw ShapeError("project: raw configuration width mismatch");
  ConfigVars out;
  out.w = ad::normalize_groups(ad::slice_cols(raw, 0, 2 * c.antennas), 2 * c.antennas, std::sqrt(c.p_max),
                               harmonics::kProjectEpsilon);
  const std::size_t ncoef = c.antennas * c.substages * c.basis_size;
  if (c.learn_patterns) {
    out.coeffs = ad::normalize_groups(ad::slice_cols(raw, 2 * c.antennas, ncoef), c.basis_size, 1.0,
                                      harmonics::kProjectEpsilon);
  } else {
    Tensor iso({batch, ncoef});
    for (std::size_t b = 0; b < batch; ++b)
      for (std::size_t g = 0; g < c.antennas * c.substages; ++g) iso[b * ncoef + g * c.basis_size] = 1.0;
    out.coeffs = raw.tape->constant(std::move(iso));
  }
  return out;
}

ConfigVars ActiveSensingModel::initial_config(Tape& tape, std::size_t batch) const {
  return project(ad::broadcast_rows(tape.param(*init_config_), batch));
}

ConfigVars ActiveSensingModel::next_config(Var hidden) const { return project(config_head_(hidden)); }

Var ActiveSensingModel::estimate_position(Var hidden) const {
  return ad::scale(position_head_(hidden), config_.position_scale);
}

channel::SensingConfig ActiveSensingModel::to_sensing_config(const ConfigVars& vars, std::size_t row,
                                                             int stage_index) const {
  const auto& c = config_;
  const Tensor& wv = vars.w.value();
  const Tensor& cv = vars.coeffs.value();
  channel::SensingConfig cfg;
  cfg.stage_index = stage_index;
  cfg.w.resize(c.antennas);
  for (std::size_t n = 0; n < c.antennas; ++n) cfg.w[n] = {wv.at(row, 2 * n), wv.at(row, 2 * n + 1)};
  cfg.coeffs.resize(c.substages);
  for (std::size_t l = 0; l < c.substages; ++l) {
    cfg.coeffs[l].reserve(c.antennas);
    for (std::size_t n = 0; n < c.antennas; ++n) {
      const double* p = cv.data() + row * cv.cols() + (l * c.antennas + n) * c.basis_size;
      cfg.coeffs[l].emplace_back(std::vector<double>(p, p + c.basis_size));
    }
  }
  return cfg;
}

std::vector<Tensor> draw_episode_noise(std::span<const std::uint64_t> sample_seeds, std::size_t stages,
                                       std::size_t substages, std::size_t subcarriers, double sigma) {
  const std::size_t batch = sample_seeds.size();
  std::vector<Tensor> noise(stages, Tensor({batch * substages, 2 * subcarriers}));
  for (std::size_t b = 0; b < batch; ++b) {
    Rng rng(sample_seeds[b]);
    const auto xi = channel::standard_complex_noise(stages * substages * subcarriers, rng);
    for (std::size_t t = 0; t < stages; ++t)
      for (std::size_t l = 0; l < substages; ++l)
        for (std::size_t m = 0; m < subcarriers; ++m) {
          const auto v = sigma * xi[(t * substages + l) * subcarriers + m];
          Tensor& nt = noise[t];
          nt.at(b * substages + l, m) = v.real();
          nt.at(b * substages + l, subcarriers + m) = v.imag();
        }
  }
  return noise;
}

EpisodeVars run_episode(const ActiveSensingModel& model, Tape& tape,
                        std::span<const channel::SceneResponse* const> scenes, std::size_t stages,
                        std::span<const Tensor> stage_noise) {
  if (stages < 1) throw ConfigError("an episode needs at least one stage");
  if (!stage_noise.empty() && stage_noise.size() != stages) throw ShapeError("noise tensors must cover every stage");
  const auto& c = model.config();
  const std::size_t batch = scenes.size();
  for (const auto* s : scenes) {
    if (s->antennas != c.antennas || s->subcarriers != c.subcarriers || s->basis_size != c.basis_size) {
      throw ConfigError("scene dimensions (N, M, K) do not match the model");
    }
  }

  EpisodeVars ep;
  ConfigVars cfg = model.initial_config(tape, batch);
  PolicyState state = model.initial_state(tape, batch);
  for (std::size_t t = 0; t < stages; ++t) {
    ep.configs.push_back(cfg);
    Var obs = channel::observe_tokens(cfg.w, cfg.coeffs, scenes, c.substages);
    if (!stage_noise.empty()) obs = ad::add(obs, tape.constant(stage_noise[t]));
    ep.observations.push_back(obs);
    const Var z = model.encode_stage(obs);
    state = model.update_state(z, state);
    ep.estimates.push_back(model.estimate_position(state.h));
    if (t + 1 < stages) cfg = model.next_config(state.h);
  }
  return ep;
}

EpisodeTrace run_episode(const channel::MultipathScene& scene, const ActiveSensingModel& model, std::size_t stages,
                         const SimContext& ctx, Rng& rng, bool record) {
  const auto& c = model.config();
  const std::vector<std::complex<double>> pilot(c.subcarriers, {1.0, 0.0});
  const auto response = channel::SceneResponse::build(scene, ctx.grid, ctx.geom, ctx.basis, pilot);
  const std::uint64_t seed = rng();
  const std::vector<std::uint64_t> seeds{seed};
  std::vector<Tensor> noise;
  if (ctx.noise.sigma2 > 0.0) noise = draw_episode_noise(seeds, stages, c.substages, c.subcarriers, ctx.noise.sigma());

  Tape tape(false);
  const channel::SceneResponse* ptr = &response;
  const auto ep = run_episode(model, tape, std::span<const channel::SceneResponse* const>(&ptr, 1), stages, noise);

  EpisodeTrace trace;
  for (std::size_t t = 0; t < stages; ++t) {
    const Tensor& e = ep.estimates[t].value();
    trace.estimates.push_back({e[0], e[1]});
    if (!record) continue;
    trace.configs.push_back(model.to_sensing_config(ep.configs[t], 0, static_cast<int>(t + 1)));
    const Tensor& o = ep.observations[t].value();
    channel::ObservationMatrix y(c.subcarriers, c.substages);
    for (std::size_t l = 0; l < c.substages; ++l)
      for (std::size_t m = 0; m < c.subcarriers; ++m) y(m, l) = {o.at(l, m), o.at(l, c.subcarriers + m)};
    trace.observations.push_back(std::move(y));
  }
  return trace;
}

}  // namespace eraloc::policy
