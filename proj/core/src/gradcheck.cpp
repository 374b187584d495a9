// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The eraloc Authors

#include "eraloc/ad/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "eraloc/rng.hpp"

namespace eraloc::ad {

namespace {
double evaluate(const LossBuilder& loss) {
  Tape tape(false);
  return loss(tape).value()[0];
}
}  // namespace

GradCheckReport grad_check(const LossBuilder& loss, std::span<Parameter* const> params,
                           const GradCheckOptions& options) {
  for (Parameter* p : params) p->zero_grad();
  double loss_value = 0.0;
  {
    Tape tape(true);
    const Var l = loss(tape);
    tape.backward(l);
    loss_value = l.value()[0];
  }

  GradCheckReport report;
  report.loss = loss_value;
  const double floor = std::max(options.abs_floor, options.loss_relative_floor * std::abs(loss_value));
  Rng rng(substream_seed(options.seed, {tag(Stream::kGradCheck)}));
  for (Parameter* p : params) {
    std::vector<std::size_t> coords(p->value.size());
    std::iota(coords.begin(), coords.end(), 0);
    if (options.coords_per_param > 0 && coords.size() > options.coords_per_param) {
      std::shuffle(coords.begin(), coords.end(), rng);
      coords.resize(options.coords_per_param);
    }
    for (std::size_t k : coords) {
      const double saved = p->value[k];
      p->value[k] = saved + options.step;
      const double up = evaluate(loss);
      p->value[k] = saved - options.step;
      const double down = evaluate(loss);
      p->value[k] = saved;
      const double numeric = (up - down) / (2.0 * options.step);
      const double analytic = p->grad[k];
      const double denom = std::max({std::abs(analytic), std::abs(numeric), floor});
      const double rel = std::abs(analytic - numeric) / denom;
      ++report.coords_checked;
      if (options.keep_entries) report.entries.push_back({p->name, k, analytic, numeric, rel});
      if (report.worst_param.empty() || rel > report.max_rel_error) {
        report.max_rel_error = rel;
        report.worst_param = p->name;
        report.worst_index = k;
        report.worst_analytic = analytic;
        report.worst_numeric = numeric;
      }
    }
  }
  return report;
}

}  // namespace eraloc::ad
