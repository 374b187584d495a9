// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The eraloc Authors

#include "eraloc/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>

#include "eraloc/ad/checkpoint.hpp"
#include "eraloc/ad/ops.hpp"
#include "eraloc/ad/optim.hpp"
#include "eraloc/errors.hpp"
#include "eraloc/measurement.hpp"
#include "eraloc/parallel.hpp"

namespace eraloc {

using ad::Tensor;
using ad::Var;

Var weighted_mse(std::span<const Var> estimates, Var truth, std::span<const double> betas) {
  if (estimates.empty() || estimates.size() != betas.size()) {
    throw ShapeError("weighted_mse: " + std::to_string(estimates.size()) + " stage estimates but " +
                     std::to_string(betas.size()) + " weights");
  }
  const std::size_t batch = truth.value().rows();
  if (truth.value().cols() != 2 || batch == 0) throw ShapeError("weighted_mse: truth must be [B x 2]");
  Var loss;
  for (std::size_t t = 0; t < estimates.size(); ++t) {
    if (estimates[t].shape() != truth.shape()) throw ShapeError("weighted_mse: estimate/truth shape mismatch");
    const Var term = ad::scale(ad::sum_squares(ad::sub(estimates[t], truth)), betas[t] / static_cast<double>(batch));
    loss = (t == 0) ? term : ad::add(loss, term);
  }
  return loss;
}

double weighted_mse(const std::vector<std::vector<std::array<double, 2>>>& estimates,
                    const std::vector<std::array<double, 2>>& truth, std::span<const double> betas) {
  if (estimates.size() != truth.size() || truth.empty()) throw ShapeError("weighted_mse: sample count mismatch");
  double total = 0.0;
  for (std::size_t b = 0; b < truth.size(); ++b) {
    if (estimates[b].size() != betas.size()) throw ShapeError("weighted_mse: stage count mismatch");
    for (std::size_t t = 0; t < betas.size(); ++t) {
      const double dx = estimates[b][t][0] - truth[b][0];
      const double dy = estimates[b][t][1] - truth[b][1];
      total += betas[t] * (dx * dx + dy * dy);
    }
  }
  return total / static_cast<double>(truth.size());
}

void TrainReport::write_csv(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  const std::size_t stages = epochs.empty() ? initial_val_rmse.size() : epochs.front().val_rmse.size();
  out << "epoch,train_loss";
  for (std::size_t t = 0; t < stages; ++t) out << ",val_rmse_stage_" << (t + 1);
  out << ",seconds\n";
  for (const auto& e : epochs) {
    out << e.epoch << ',' << format_number(e.train_loss);
    for (double r : e.val_rmse) out << ',' << format_number(r);
    out << ',' << format_number(e.seconds) << '\n';
  }
  if (!out) throw IoError("failed writing " + path.string());
}

namespace {

std::string parameter_norm_summary(const ad::ParameterStore& store) {
  std::vector<std::pair<double, std::string>> norms;
  for (const ad::Parameter* p : store.all()) norms.emplace_back(std::sqrt(p->value.squared_norm()), p->name);
  std::sort(norms.rbegin(), norms.rend());
  std::string s;
  for (std::size_t i = 0; i < std::min<std::size_t>(5, norms.size()); ++i) {
    char buf[128];
    std::snprintf(buf, sizeof buf, "%s%s=%.6g", i ? ", " : "", norms[i].second.c_str(), norms[i].first);
    s += buf;
  }
  return s;
}

}  // namespace

TrainResult train(const RunConfig& cfg, const Dataset& train_data, const Dataset& val_data,
                  const TrainOptions& options) {
  cfg.validate();
  if (train_data.empty()) throw ConfigError("training set is empty");
  if (val_data.empty()) throw ConfigError("validation set is empty");

  const std::uint64_t seed = cfg.train.seed;
  const std::size_t stages = cfg.episode_stages();
  const std::size_t substages = cfg.episode_substages();
  const std::size_t m_sub = cfg.system.subcarriers;
  const auto betas = cfg.stage_weights();
  const auto ctx = cfg.sim_context();
  const auto ap = cfg.ap_position();
  const std::vector<std::complex<double>> pilot(m_sub, {1.0, 0.0});

  TrainResult result;
  result.trained.config = cfg;
  result.trained.seed = seed;
  result.trained.model = std::make_unique<policy::ActiveSensingModel>(cfg.policy_config(), seed);
  auto& model = *result.trained.model;
  auto& store = model.parameters();
  auto params = store.all();
  ad::Adam adam(params, {cfg.train.learning_rate, cfg.train.beta1, cfg.train.beta2, cfg.train.eps});

  TrainReport& report = result.report;
  report.seed = seed;
  report.config_json = cfg.to_json();

  const std::uint64_t val_noise = substream_seed(seed, {tag(Stream::kValNoise)});
  auto validate = [&] { return rmse_per_stage(predict(model, cfg, val_data, val_noise), val_data); };

  if (!options.out_dir.empty()) {
    std::filesystem::create_directories(options.out_dir);
    std::ofstream(options.out_dir / "config.json") << report.config_json << '\n';
  }

  report.initial_val_rmse = validate();
  double best = report.initial_val_rmse.back();
  std::vector<Tensor> best_values;
  for (const auto* p : params) best_values.push_back(p->value);

  std::vector<std::size_t> order(train_data.size());
  const std::size_t batch_size = std::min(cfg.train.batch_size, train_data.size());
  std::size_t steps = 0;
  bool stop = false;

  for (std::size_t epoch = 1; epoch <= cfg.train.epochs && !stop; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng shuffle_rng = make_rng(seed, {tag(Stream::kShuffle), epoch});
    std::shuffle(order.begin(), order.end(), shuffle_rng);

    double loss_sum = 0.0;
    std::size_t loss_count = 0;
    const std::size_t batches = (train_data.size() + batch_size - 1) / batch_size;
    for (std::size_t bi = 0; bi < batches; ++bi) {
      const std::size_t begin = bi * batch_size;
      const std::size_t end = std::min(begin + batch_size, train_data.size());
      const std::size_t b = end - begin;

      std::vector<channel::SceneResponse> responses(b);
      std::vector<std::uint64_t> noise_seeds(b);
      Tensor truth({b, 2});
      parallel_for(b, [&](std::size_t k) {
        const std::size_t idx = order[begin + k];
        const Sample& s = train_data[idx];
        responses[k] = channel::SceneResponse::build(to_scene(s, ap), ctx.grid, ctx.geom, ctx.basis, pilot);
        noise_seeds[k] = substream_seed(seed, {tag(Stream::kTrainNoise), epoch, idx});
        truth.at(k, 0) = s.ue[0];
        truth.at(k, 1) = s.ue[1];
      });
      std::vector<const channel::SceneResponse*> ptrs(b);
      for (std::size_t k = 0; k < b; ++k) ptrs[k] = &responses[k];

      double loss_value = 0.0;
      try {
        std::vector<Tensor> noise;
        if (ctx.noise.sigma2 > 0.0) {
          noise = policy::draw_episode_noise(noise_seeds, stages, substages, m_sub, ctx.noise.sigma());
        }
        ad::Tape tape(true);
        const auto ep = policy::run_episode(model, tape, ptrs, stages, noise);
        const Var loss = weighted_mse(ep.estimates, tape.constant(truth), betas);
        loss_value = loss.value()[0];
        store.zero_grad();
        tape.backward(loss);
        ad::clip_grad_norm(params, cfg.train.grad_clip);
        for (const auto* p : params) {
          if (!p->grad.all_finite()) throw NumericError("non-finite gradient in " + p->name);
        }
        adam.step();
      } catch (const NumericError& e) {
        throw NumericError(std::string(e.what()) + " at epoch " + std::to_string(epoch) + ", batch " +
                           std::to_string(bi) + "; largest parameter norms: " + parameter_norm_summary(store));
      }
      report.step_losses.push_back(loss_value);
      loss_sum += loss_value * static_cast<double>(b);
      loss_count += b;
      ++steps;
      if (options.max_steps != 0 && steps >= options.max_steps) {
        stop = true;
        break;
      }
    }

    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = loss_sum / static_cast<double>(loss_count);
    rec.val_rmse = validate();
    rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    report.epochs.push_back(rec);
    if (rec.val_rmse.back() < best) {
      best = rec.val_rmse.back();
      report.best_epoch = epoch;
      for (std::size_t i = 0; i < params.size(); ++i) best_values[i] = params[i]->value;
      if (!options.out_dir.empty()) {
        ad::save_checkpoint(options.out_dir / "checkpoint", store, &adam, report.config_json);
      }
    }
    if (!options.out_dir.empty()) report.write_csv(options.out_dir / "report.csv");
    if (options.on_epoch) options.on_epoch(rec);
  }

  for (std::size_t i = 0; i < params.size(); ++i) params[i]->value = best_values[i];
  if (!options.out_dir.empty()) {
    if (report.best_epoch == 0) ad::save_checkpoint(options.out_dir / "checkpoint", store, nullptr, report.config_json);
    report.write_csv(options.out_dir / "report.csv");
  }
  return result;
}

}  // namespace eraloc
