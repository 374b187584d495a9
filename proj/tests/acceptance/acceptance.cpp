// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The eraloc Authors

// Acceptance run: one PASS/FAIL line per criterion, details underneath.
// Trains 18 desk-scale models plus two CLI runs; about 25 minutes on one core.

#include <sys/wait.h>

#include <chrono>
#include <cmath>
#include <complex>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "eraloc/config.hpp"
#include "eraloc/dataset.hpp"
#include "eraloc/evaluation.hpp"
#include "eraloc/harmonics.hpp"
#include "eraloc/policy.hpp"
#include "eraloc/selftest.hpp"
#include "eraloc/training.hpp"

namespace fs = std::filesystem;
using namespace eraloc;
using Clock = std::chrono::steady_clock;

namespace {

struct Outcome {
  int id;
  bool passed;
  std::string summary;
  double seconds;
};

std::vector<Outcome> g_outcomes;

double since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

void report(int id, bool passed, const std::string& summary, double seconds) {
  g_outcomes.push_back({id, passed, summary, seconds});
  std::printf("%s criterion %d: %s (%.1fs)\n", passed ? "PASS" : "FAIL", id, summary.c_str(), seconds);
  std::fflush(stdout);
}

// Evaluation examples that need trained models; reported apart from the criteria.
std::vector<std::pair<std::string, bool>> g_examples;

void example(const std::string& name, bool passed, const std::string& summary) {
  g_examples.emplace_back(name, passed);
  std::printf("%s example %s: %s\n", passed ? "PASS" : "FAIL", name.c_str(), summary.c_str());
  std::fflush(stdout);
}

void detail(const std::string& s) {
  std::printf("    %s\n", s.c_str());
  std::fflush(stdout);
}

double mean(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

// ---------------------------------------------------------------------------

void criterion_harmonics() {
  const auto t0 = Clock::now();
  double gram_err = 0.0;
  for (int u = 0; u <= 6; ++u) {
    const harmonics::BasisSpec spec(u);
    const auto g = harmonics::gram_matrix(spec, harmonics::SphereQuadrature::for_basis(spec));
    const std::size_t k = spec.size();
    for (std::size_t i = 0; i < k; ++i)
      for (std::size_t j = 0; j < k; ++j) gram_err = std::max(gram_err, std::abs(g[i * k + j] - (i == j ? 1.0 : 0.0)));
  }
  std::mt19937_64 rng(101);
  std::uniform_int_distribution<int> deg(0, 6);
  std::normal_distribution<double> g(0.0, 1.0);
  double energy_err = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const harmonics::BasisSpec spec(deg(rng));
    std::vector<double> c(spec.size());
    double sq = 0.0;
    for (double& v : c) {
      v = g(rng);
      sq += v * v;
    }
    const double e = harmonics::pattern_energy(c, harmonics::SphereQuadrature::for_basis(spec));
    energy_err = std::max(energy_err, std::abs(e - sq) / sq);
  }
  const double secs = since(t0);
  report(1, gram_err < 1e-8 && energy_err < 1e-9 && secs < 5.0,
         fmt("max |G - I| = %.2e, energy error = %.2e", gram_err, energy_err), secs);
}

// Independent scalar loop over (antenna, subcarrier, path).
void criterion_channel() {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(202);
  std::uniform_int_distribution<int> nx(1, 4), ny(1, 2), m_dist(1, 16), p_dist(1, 4), u_dist(0, 3);
  std::uniform_real_distribution<double> unit(-1.0, 1.0), pos(-30.0, 30.0);
  double worst = 0.0;
  for (int trial = 0; trial < 200; ++trial) {
    const int n_x = nx(rng), n_y = ny(rng);
    const std::size_t n = static_cast<std::size_t>(n_x * n_y);
    const channel::OfdmGrid grid{static_cast<std::size_t>(m_dist(rng)), 960e3, 30e9};
    const double lambda = 299792458.0 / 30e9;
    const auto geom = array::upa_geometry(n_x, n_y, 0.5, lambda);
    const harmonics::BasisSpec spec(u_dist(rng));
    std::vector<harmonics::PatternCoefficients> coeffs;
    for (std::size_t a = 0; a < n; ++a) {
      std::vector<double> c(spec.size());
      for (double& v : c) v = unit(rng);
      coeffs.push_back(harmonics::project_unit(c));
    }
    Rng srng(rng());
    const auto scene = channel::scene_from_position({pos(rng), pos(rng)}, {0.0, 0.0, 10.0}, p_dist(rng), srng);
    const auto h = channel::channel_matrix(scene, coeffs, grid, geom);
    double num = 0.0, den = 0.0;
    for (std::size_t a = 0; a < n; ++a) {
      // element positions rebuilt here from the lattice definition
      const double px = (static_cast<double>(a % static_cast<std::size_t>(n_x)) - (n_x - 1) / 2.0) * 0.5 * lambda;
      const double py = (static_cast<double>(a / static_cast<std::size_t>(n_x)) - (n_y - 1) / 2.0) * 0.5 * lambda;
      for (std::size_t m = 0; m < grid.subcarriers; ++m) {
        std::complex<double> acc = 0.0;
        for (const auto& p : scene.paths) {
          const double th = p.dir.theta(), ph = p.dir.phi();
          const double ux = std::sin(th) * std::cos(ph), uy = std::sin(th) * std::sin(ph);
          const double gain = harmonics::pattern_gain(coeffs[a], th, ph);
          const double steer = 2.0 * std::numbers::pi / lambda * (px * ux + py * uy);
          const double delay = -2.0 * std::numbers::pi * p.tau * static_cast<double>(m) * 960e3;
          acc += p.alpha * gain * std::exp(std::complex<double>(0.0, steer + delay));
        }
        num += std::norm(h(a, m) - acc);
        den += std::norm(acc);
      }
    }
    if (den > 0.0) worst = std::max(worst, std::sqrt(num / den));
  }
  const double secs = since(t0);
  report(2, worst < 1e-12 && secs < 10.0, fmt("max relative error %.2e over 200 scenes", worst), secs);
}

void criterion_gradcheck() {
  const auto t0 = Clock::now();
  ad::GradCheckOptions opt;
  opt.keep_entries = true;
  const auto rep = episode_grad_check(0, opt);
  const double secs = since(t0);
  bool init_path = false, pattern_path = false;
  for (const auto& e : rep.entries) {
    if (e.param == "initial_config" && e.analytic != 0.0) init_path = true;
    // raw config is [w (2N) | pattern coefficients]; N = 4 here
    if (e.param == "initial_config" && e.index >= 8 && e.analytic != 0.0) pattern_path = true;
    if (e.param.rfind("config_head", 0) == 0 && e.index >= 8 && e.analytic != 0.0) pattern_path = true;
  }
  report(3, rep.max_rel_error < 1e-4 && init_path && pattern_path && secs < 60.0,
         fmt("max relative error %.2e over %zu coordinates (worst %s[%zu])", rep.max_rel_error, rep.coords_checked,
             rep.worst_param.c_str(), rep.worst_index),
         secs);
  detail(fmt("initial_config gradients nonzero: %s, pattern-coefficient gradients nonzero: %s", init_path ? "yes" : "no",
             pattern_path ? "yes" : "no"));
}

void criterion_constraints() {
  const auto t0 = Clock::now();
  const auto cfg = desk_profile();
  bool ok = true;
  double worst_w = 0.0, worst_c = 0.0;
  for (const auto method : {Method::kProposed, Method::kDigitalOnly}) {
    const auto mc = cfg.for_method(method);
    policy::ActiveSensingModel model(mc.policy_config(), 5);
    const auto& pc = model.config();
    ad::Tensor h({1000, pc.lstm_hidden});
    std::mt19937_64 rng(303);
    std::normal_distribution<double> g(0.0, 3.0);
    for (auto& v : h.values()) v = g(rng);
    ad::Tape tape(false);
    const auto out = model.next_config(tape.constant(h));
    for (std::size_t r = 0; r < 1000; ++r) {
      const auto sc = model.to_sensing_config(out, r, 2);
      double sq = 0.0;
      for (auto v : sc.w) sq += std::norm(v);
      worst_w = std::max(worst_w, std::abs(sq - pc.p_max));
      for (const auto& set : sc.coeffs) {
        for (const auto& c : set) {
          double cs = 0.0;
          for (double v : c.values()) cs += v * v;
          worst_c = std::max(worst_c, std::abs(std::sqrt(cs) - 1.0));
        }
      }
      try {
        sc.validate(pc.antennas, pc.p_max);
      } catch (const std::exception&) {
        ok = false;
      }
    }
  }
  report(4, ok && worst_w <= 1e-12 && worst_c <= 1e-12,
         fmt("max | ||w||^2 - P | = %.2e, max | ||c|| - 1 | = %.2e over 1000 states per method", worst_w, worst_c),
         since(t0));
}

// ---------------------------------------------------------------------------

struct Trained {
  TrainResult result;
  double seconds;
};

Trained train_one(const RunConfig& cfg, const Dataset& tr, const Dataset& val, const char* label) {
  const auto t0 = Clock::now();
  TrainResult r = train(cfg, tr, val);
  const double secs = since(t0);
  detail(fmt("trained %s seed %llu in %.0fs (best epoch %zu)", label,
             static_cast<unsigned long long>(cfg.train.seed), secs, r.report.best_epoch));
  return {std::move(r), secs};
}

std::string join(const std::vector<double>& v) {
  std::string s;
  for (double x : v) s += (s.empty() ? "" : " ") + fmt("%.3f", x);
  return s;
}

// ---------------------------------------------------------------------------

int run_cli(const std::string& args) {
  const std::string cmd = "'" + std::string(ERALOC_CLI_PATH) + "' " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Loss columns of report.csv (everything except the trailing seconds).
std::vector<std::vector<double>> loss_columns(const fs::path& csv) {
  std::istringstream in(slurp(csv));
  std::string line;
  std::getline(in, line);
  std::vector<std::vector<double>> rows;
  while (std::getline(in, line)) {
    std::vector<double> row;
    std::stringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) row.push_back(std::stod(cell));
    if (!row.empty()) row.pop_back();
    rows.push_back(row);
  }
  return rows;
}

void criterion_determinism(const fs::path& work) {
  const auto t0 = Clock::now();
  const fs::path a = work / "det_a", b = work / "det_b";
  bool ok = run_cli("gen-data --seed 7 --out '" + (a / "data").string() + "'") == 0 &&
            run_cli("gen-data --seed 7 --out '" + (b / "data").string() + "'") == 0;
  const bool data_same = ok && slurp(a / "data" / "dataset.jsonl") == slurp(b / "data" / "dataset.jsonl") &&
                         !slurp(a / "data" / "dataset.jsonl").empty();
  ok = run_cli("train --seed 7 --data '" + (a / "data" / "dataset.jsonl").string() + "' --out '" +
               (a / "run").string() + "'") == 0 &&
       run_cli("train --seed 7 --data '" + (b / "data" / "dataset.jsonl").string() + "' --out '" +
               (b / "run").string() + "'") == 0;
  double worst = ok ? 0.0 : 1.0;
  std::size_t epochs = 0;
  if (ok) {
    const auto ra = loss_columns(a / "run" / "report.csv"), rb = loss_columns(b / "run" / "report.csv");
    epochs = ra.size();
    if (ra.size() != rb.size() || ra.empty()) worst = 1.0;
    for (std::size_t i = 0; i < std::min(ra.size(), rb.size()); ++i) {
      for (std::size_t j = 0; j < ra[i].size(); ++j)
        worst = std::max(worst, std::abs(ra[i][j] - rb[i][j]) / std::max(std::abs(ra[i][j]), 1e-300));
    }
  }
  const bool ckpt_same = ok && slurp(a / "run" / "checkpoint" / "data.bin") == slurp(b / "run" / "checkpoint" / "data.bin");
  report(9, data_same && worst <= 1e-9,
         fmt("datasets identical: %s, loss curves over %zu epochs differ by %.1e relative, checkpoints identical: %s",
             data_same ? "yes" : "no", epochs, worst, ckpt_same ? "yes" : "no"),
         since(t0));
}

}  // namespace

int main() {
  const auto start = Clock::now();
  const fs::path work = fs::temp_directory_path() / ("eraloc_acceptance_" + std::to_string(std::random_device{}()));
  fs::create_directories(work);

  criterion_harmonics();
  criterion_channel();
  criterion_gradcheck();
  criterion_constraints();

  // Shared desk-scale data: one dataset, three training seeds per method.
  const RunConfig desk = desk_profile();
  const Dataset all = generate_dataset(desk, 0);
  const auto [train_set, val_set] = split_dataset(desk, all);
  const std::vector<std::uint64_t> seeds{0, 1, 2};
  const std::uint64_t noise = substream_seed(0, {tag(Stream::kEvalNoise)});
  detail(fmt("desk profile: %zu training / %zu validation samples", train_set.size(), val_set.size()));

  auto train_method = [&](const RunConfig& base, const char* label, double* total_secs) {
    std::vector<Trained> out;
    for (auto s : seeds) {
      RunConfig c = base;
      c.train.seed = s;
      out.push_back(train_one(c, train_set, val_set, label));
      *total_secs += out.back().seconds;
    }
    return out;
  };
  auto final_rmse = [&](const std::vector<Trained>& models) {
    std::vector<double> r;
    for (const auto& m : models)
      r.push_back(eval_rmse(*m.result.trained.model, m.result.trained.config, val_set, {noise}).back());
    return r;
  };

  // Criterion 5
  double proposed_secs = 0.0;
  const auto proposed = train_method(desk, "proposed", &proposed_secs);
  {
    std::vector<double> first, last, untrained;
    double slowest = 0.0;
    for (const auto& m : proposed) {
      const auto r = eval_rmse(*m.result.trained.model, m.result.trained.config, val_set, {noise});
      first.push_back(r.front());
      last.push_back(r.back());
      const policy::ActiveSensingModel fresh(m.result.trained.config.policy_config(), m.result.trained.seed);
      untrained.push_back(eval_rmse(fresh, m.result.trained.config, val_set, {noise}).back());
      slowest = std::max(slowest, m.seconds);
    }
    const double f = mean(last), s1 = mean(first), u = mean(untrained);
    report(5, f < 0.4 * s1 && f < 0.5 * u && slowest <= 1200.0,
           fmt("seed-mean final %.3f m vs stage-1 %.3f m (ratio %.3f) and untrained %.3f m (ratio %.3f)", f, s1,
               f / s1, u, f / u),
           proposed_secs);
    detail("per-seed final: " + join(last) + "; stage 1: " + join(first) + "; untrained: " + join(untrained));
  }

  // Criterion 6
  {
    double secs = 0.0;
    const auto digital = train_method(desk.for_method(Method::kDigitalOnly), "digital_only", &secs);
    const auto oneshot = train_method(desk.for_method(Method::kOneShot), "one_shot", &secs);
    const auto rp = final_rmse(proposed), rd = final_rmse(digital), ro = final_rmse(oneshot);
    const double p = mean(rp), d = mean(rd), o = mean(ro);
    secs += proposed_secs;
    report(6, p <= 0.9 * d && d <= 0.9 * o && secs <= 5400.0,
           fmt("seed-mean final RMSE proposed %.3f m, digital-only %.3f m, one-shot %.3f m", p, d, o), secs);
    detail("per-seed proposed: " + join(rp) + "; digital-only: " + join(rd) + "; one-shot: " + join(ro));
  }

  // Criterion 7
  {
    const auto t0 = Clock::now();
    std::vector<const TrainedModel*> ptrs;
    for (const auto& m : proposed) ptrs.push_back(&m.result.trained);
    const auto table = sweep_snr(ptrs, val_set, desk.eval.snr_db, noise);
    std::vector<double> curve;
    for (const auto& row : table.rows) curve.push_back(std::stod(row[2]));
    int violations = 0;
    double worst_rise = 0.0;
    for (std::size_t i = 1; i < curve.size(); ++i) {
      if (curve[i] > curve[i - 1]) {
        ++violations;
        worst_rise = std::max(worst_rise, curve[i] / curve[i - 1] - 1.0);
      }
    }
    const bool ok = violations == 0 || (violations == 1 && worst_rise <= 0.05);
    report(7, ok, fmt("%d increase(s), largest %.1f%%; RMSE at -5..20 dB: %s", violations, 100.0 * worst_rise,
                      join(curve).c_str()),
           since(t0));
    const auto limit = sweep_snr(ptrs, val_set, {0.0, 60.0}, noise);
    const double at0 = std::stod(limit.rows[0][2]), at60 = std::stod(limit.rows[1][2]);
    example("snr_limit", at60 <= at0, fmt("RMSE %.3f m at +60 dB vs %.3f m at 0 dB", at60, at0));
  }

  // Criterion 8
  {
    double secs = 0.0;
    const auto t0 = Clock::now();
    const auto wide = train_method(desk.with_allocation(3, 6), "proposed T=3 L=6", &secs);
    int narrower = 0;
    std::string per_seed;
    for (const auto& m : wide) {
      const auto spread = mean_beam_spread(m.result.trained, val_set, desk.eval.beam_n_theta, desk.eval.beam_n_phi,
                                           substream_seed(noise, {8}));
      narrower += spread.back() < spread.front();
      per_seed += fmt(" [%s]", join(spread).c_str());
    }
    report(8, narrower >= 2, fmt("stage-3 spread below stage-1 in %d of 3 seeds", narrower), since(t0));
    detail("-3 dB solid-angle fraction per stage:" + per_seed);
  }

  // Budget example: proposed at (3, 4) no worse than proposed at (1, 12).
  {
    double secs = 0.0;
    const auto single = train_method(desk.with_allocation(1, 12), "proposed T=1 L=12", &secs);
    const double multi = mean(final_rmse(proposed)), one = mean(final_rmse(single));
    example("budget_allocation", multi <= one,
            fmt("seed-mean final RMSE %.3f m at (3, 4) vs %.3f m at (1, 12)", multi, one));
  }

  criterion_determinism(work);

  std::error_code ec;
  fs::remove_all(work, ec);

  int failed = 0;
  std::printf("\nsummary (%.0fs total)\n", since(start));
  for (const auto& o : g_outcomes) {
    std::printf("%s criterion %d\n", o.passed ? "PASS" : "FAIL", o.id);
    failed += !o.passed;
  }
  for (const auto& [name, passed] : g_examples) {
    std::printf("%s example %s\n", passed ? "PASS" : "FAIL", name.c_str());
    failed += !passed;
  }
  return failed == 0 ? 0 : 1;
}
