// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The eraloc Authors

// era_loc: dataset generation, training, evaluation and figure-data export.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "eraloc/config.hpp"
#include "eraloc/dataset.hpp"
#include "eraloc/errors.hpp"
#include "eraloc/evaluation.hpp"
#include "eraloc/selftest.hpp"
#include "eraloc/training.hpp"
#include "json.hpp"

namespace fs = std::filesystem;
using namespace eraloc;

namespace {

struct Args {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::string data;
  std::vector<std::string> ckpts;
  std::size_t sample = 0;
  bool per_substage = false;
  bool in_db = false;
};

RunConfig load_config(const Args& a) {
  RunConfig cfg = a.config.empty() ? desk_profile() : RunConfig::load(a.config);
  if (a.seed) cfg.train.seed = *a.seed;
  return cfg;
}

std::uint64_t run_seed(const Args& a) { return a.seed.value_or(0); }

// Validation split of --data, or of the dataset regenerated from the config.
Dataset validation_set(const RunConfig& cfg, const std::string& data_path) {
  const Dataset all = data_path.empty() ? generate_dataset(cfg, cfg.train.seed) : read_dataset(data_path);
  return split_dataset(cfg, all).second;
}

std::vector<TrainedModel> load_models(const std::vector<std::string>& dirs) {
  if (dirs.empty()) throw ConfigError("--ckpt is required");
  std::vector<TrainedModel> models;
  for (const auto& d : dirs) models.push_back(load_model(d));
  return models;
}

std::vector<const TrainedModel*> pointers(const std::vector<TrainedModel>& models) {
  std::vector<const TrainedModel*> p;
  for (const auto& m : models) p.push_back(&m);
  return p;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << text << '\n';
}

int cmd_gen_data(const Args& a) {
  const RunConfig cfg = load_config(a);
  fs::create_directories(a.out);
  const Dataset data = generate_dataset(cfg, cfg.train.seed);
  write_dataset(fs::path(a.out) / "dataset.jsonl", data);
  write_text(fs::path(a.out) / "config.json", cfg.to_json());
  std::printf("wrote %zu samples to %s\n", data.size(), (fs::path(a.out) / "dataset.jsonl").c_str());
  return 0;
}

int cmd_train(const Args& a) {
  const RunConfig cfg = load_config(a);
  const Dataset all = a.data.empty() ? generate_dataset(cfg, cfg.train.seed) : read_dataset(a.data);
  const auto [train_set, val_set] = split_dataset(cfg, all);
  TrainOptions opts;
  opts.out_dir = a.out;
  opts.on_epoch = [](const EpochRecord& e) {
    std::fprintf(stderr, "epoch %3zu  loss %10.4f  val rmse", e.epoch, e.train_loss);
    for (double r : e.val_rmse) std::fprintf(stderr, " %8.4f", r);
    std::fprintf(stderr, "  (%.1fs)\n", e.seconds);
  };
  const auto res = train(cfg, train_set, val_set, opts);
  std::printf("best epoch %zu, final-stage validation RMSE %.4f m (untrained %.4f m)\n", res.report.best_epoch,
              res.report.best_epoch ? res.report.epochs[res.report.best_epoch - 1].val_rmse.back()
                                    : res.report.initial_val_rmse.back(),
              res.report.initial_val_rmse.back());
  return 0;
}

int cmd_eval(const Args& a) {
  const auto models = load_models(a.ckpts);
  const RunConfig& ref = models.front().config;
  const Dataset val = validation_set(ref, a.data);
  const std::uint64_t noise = substream_seed(run_seed(a), {tag(Stream::kEvalNoise)});
  const Table table = stage_table(pointers(models), val, noise);
  std::vector<std::uint64_t> seeds{run_seed(a)};
  for (const auto& m : models) seeds.push_back(m.seed);
  table.write(fs::path(a.out) / "stage_rmse.csv", ref.hash(), seeds);
  for (const auto& r : table.rows) std::printf("stage %s  %-12s  %s m\n", r[0].c_str(), r[1].c_str(), r[2].c_str());
  return 0;
}

int cmd_sweep_snr(const Args& a) {
  const auto models = load_models(a.ckpts);
  const RunConfig ref = a.config.empty() ? models.front().config : RunConfig::load(a.config);
  const Dataset val = validation_set(models.front().config, a.data);
  const std::uint64_t noise = substream_seed(run_seed(a), {tag(Stream::kEvalNoise)});
  const Table table = sweep_snr(pointers(models), val, ref.eval.snr_db, noise);
  std::vector<std::uint64_t> seeds{run_seed(a)};
  for (const auto& m : models) seeds.push_back(m.seed);
  table.write(fs::path(a.out) / "snr_sweep.csv", ref.hash(), seeds);
  for (const auto& r : table.rows) std::printf("%6s dB  %-12s  %s m\n", r[0].c_str(), r[1].c_str(), r[2].c_str());
  return 0;
}

int cmd_sweep_budget(const Args& a) {
  const RunConfig cfg = load_config(a);
  const Dataset all = a.data.empty() ? generate_dataset(cfg, cfg.train.seed) : read_dataset(a.data);
  const auto [train_set, val_set] = split_dataset(cfg, all);
  std::vector<std::uint64_t> seeds;
  for (std::uint64_t s : cfg.eval.seeds) seeds.push_back(substream_seed(cfg.train.seed, {s}));
  const std::uint64_t noise = substream_seed(cfg.train.seed, {tag(Stream::kEvalNoise)});
  const Table table = sweep_budget(cfg, cfg.eval.budget, cfg.eval.allocations, cfg.eval.methods, seeds, train_set,
                                   val_set, noise, fs::path(a.out) / "runs");
  table.write(fs::path(a.out) / "budget_sweep.csv", cfg.hash(), seeds);
  for (const auto& r : table.rows) {
    std::printf("T=%s L=%s  %-12s  %s m\n", r[0].c_str(), r[1].c_str(), r[2].c_str(), r[3].c_str());
  }
  return 0;
}

int cmd_beampattern(const Args& a) {
  if (a.ckpts.size() != 1) throw ConfigError("beampattern takes exactly one --ckpt");
  const TrainedModel tm = load_model(a.ckpts.front());
  const Dataset val = validation_set(tm.config, a.data);
  if (a.sample >= val.size()) {
    throw ConfigError("--sample " + std::to_string(a.sample) + " outside the " + std::to_string(val.size()) +
                      "-sample validation set");
  }
  BeamExportOptions opts;
  opts.per_substage = a.per_substage;
  opts.in_db = a.in_db;
  const std::uint64_t noise = substream_seed(run_seed(a), {tag(Stream::kEvalNoise), a.sample});
  const auto ex = export_beampatterns(tm, val[a.sample], tm.config.eval.beam_n_theta, tm.config.eval.beam_n_phi,
                                      noise, a.out, opts);
  for (std::size_t t = 0; t < ex.half_power_fraction.size(); ++t) {
    std::printf("stage %zu: -3 dB solid-angle fraction %.4f, estimate (%.3f, %.3f)\n", t + 1,
                ex.half_power_fraction[t], ex.estimates[t][0], ex.estimates[t][1]);
  }
  return 0;
}

int report_checks(const std::vector<SelftestResult>& results) {
  bool ok = true;
  for (const auto& r : results) {
    std::printf("%s %s: %s (%.2fs)\n", r.passed ? "PASS" : "FAIL", r.name.c_str(), r.detail.c_str(), r.seconds);
    ok = ok && r.passed;
  }
  return ok ? 0 : 2;
}

int cmd_gradcheck(const Args& a) {
  const auto rep = episode_grad_check(run_seed(a), {});
  if (!a.out.empty()) {
    fs::create_directories(a.out);
    nlohmann::json j{{"max_rel_error", rep.max_rel_error},   {"worst_param", rep.worst_param},
                     {"worst_index", rep.worst_index},       {"analytic", rep.worst_analytic},
                     {"numeric", rep.worst_numeric},         {"coords_checked", rep.coords_checked},
                     {"loss", rep.loss},                     {"seed", run_seed(a)}};
    write_text(fs::path(a.out) / "gradcheck.json", j.dump(2));
  }
  SelftestResult r{"episode_gradcheck", rep.max_rel_error < 1e-4, "", 0.0};
  char buf[192];
  std::snprintf(buf, sizeof buf, "max relative error %.3e over %zu coordinates (worst %s[%zu])", rep.max_rel_error,
                rep.coords_checked, rep.worst_param.c_str(), rep.worst_index);
  r.detail = buf;
  return report_checks({r});
}

int cmd_selftest(const Args& a) { return report_checks(run_selftests(run_seed(a))); }

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Localization with reconfigurable-pattern antennas: simulate, train, evaluate"};
  app.require_subcommand(1);
  Args a;
  std::uint64_t seed_value = 0;

  auto common = [&](CLI::App* sub, bool needs_out) {
    sub->add_option("--config", a.config, "JSON run configuration (default: desk profile)");
    sub->add_option("--seed", seed_value, "Global seed; every random stream derives from it");
    auto* out = sub->add_option("--out", a.out, "Output directory");
    if (needs_out) out->required();
  };

  auto* gen = app.add_subcommand("gen-data", "Generate a scene dataset (JSON Lines)");
  common(gen, true);
  auto* tr = app.add_subcommand("train", "Train a policy; writes checkpoint/, report.csv, config.json");
  common(tr, true);
  tr->add_option("--data", a.data, "Dataset file from gen-data (default: regenerate from the seed)");
  auto* ev = app.add_subcommand("eval", "Per-stage RMSE of one or more checkpoints");
  common(ev, true);
  ev->add_option("--ckpt", a.ckpts, "Checkpoint directory (repeatable)")->required();
  ev->add_option("--data", a.data, "Dataset file; its validation split is used");
  auto* snr = app.add_subcommand("sweep-snr", "Final-stage RMSE versus SNR");
  common(snr, true);
  snr->add_option("--ckpt", a.ckpts, "Checkpoint directory (repeatable)")->required();
  snr->add_option("--data", a.data, "Dataset file; its validation split is used");
  auto* bud = app.add_subcommand("sweep-budget", "Train and compare stage/pilot allocations at a fixed budget");
  common(bud, true);
  bud->add_option("--data", a.data, "Dataset file from gen-data");
  auto* bp = app.add_subcommand("beampattern", "Export per-stage beampatterns of one episode");
  common(bp, true);
  bp->add_option("--ckpt", a.ckpts, "Checkpoint directory")->required();
  bp->add_option("--data", a.data, "Dataset file; its validation split is used");
  bp->add_option("--sample", a.sample, "Validation sample index");
  bp->add_flag("--per-substage", a.per_substage, "Also export one file per substage pattern set");
  bp->add_flag("--db", a.in_db, "Report power in dB relative to the peak");
  auto* gc = app.add_subcommand("gradcheck", "Finite-difference check of the unrolled episode");
  common(gc, false);
  auto* st = app.add_subcommand("selftest", "Basis, channel and gradient self-tests");
  common(st, false);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }
  for (auto* sub : app.get_subcommands()) {
    if (sub->count("--seed") > 0) a.seed = seed_value;
  }

  try {
    if (gen->parsed()) return cmd_gen_data(a);
    if (tr->parsed()) return cmd_train(a);
    if (ev->parsed()) return cmd_eval(a);
    if (snr->parsed()) return cmd_sweep_snr(a);
    if (bud->parsed()) return cmd_sweep_budget(a);
    if (bp->parsed()) return cmd_beampattern(a);
    if (gc->parsed()) return cmd_gradcheck(a);
    if (st->parsed()) return cmd_selftest(a);
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "configuration error: %s\n", e.what());
    return 1;
  } catch (const DomainError& e) {
    std::fprintf(stderr, "invalid input: %s\n", e.what());
    return 1;
  } catch (const ShapeError& e) {
    std::fprintf(stderr, "invalid input: %s\n", e.what());
    return 1;
  } catch (const ConstraintError& e) {
    std::fprintf(stderr, "invalid input: %s\n", e.what());
    return 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
  return 2;
}
