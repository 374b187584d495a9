// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The eraloc Authors

#include "eraloc/dataset.hpp"

#include <cstdio>
#include <fstream>
#include <random>
#include <string>

#include "eraloc/errors.hpp"
#include "eraloc/parallel.hpp"
#include "json.hpp"

namespace eraloc {

Dataset generate_dataset(const RunConfig& cfg, std::uint64_t seed, std::size_t count) {
  Dataset out(count);
  const double r = cfg.system.region_half_width;
  const auto ap = cfg.ap_position();
  const int paths = cfg.system.paths;
  parallel_for(count, [&](std::size_t i) {
    const std::uint64_t s = substream_seed(seed, {tag(Stream::kDataset), i});
    Rng rng(s);
    std::uniform_real_distribution<double> pos(-r, r);
    Sample& sample = out[i];
    sample.seed = s;
    sample.ue[0] = pos(rng);
    sample.ue[1] = pos(rng);
    sample.paths = channel::scene_from_position(sample.ue, ap, paths, rng).paths;
    // Keep the unit vectors exactly as a reader rebuilds them from the stored angles.
    for (auto& p : sample.paths) p.dir = array::Direction::from_angles(p.dir.theta(), p.dir.phi());
  });
  return out;
}

std::pair<Dataset, Dataset> split_dataset(const RunConfig& cfg, const Dataset& all) {
  const std::size_t n = cfg.train.train_count();
  if (all.size() <= n) {
    throw ConfigError("dataset has " + std::to_string(all.size()) + " samples, need more than " + std::to_string(n) +
                      " for the configured split");
  }
  return {Dataset(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(n)),
          Dataset(all.begin() + static_cast<std::ptrdiff_t>(n), all.end())};
}

namespace {

void put(std::string& line, const char* key, double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  line += '"';
  line += key;
  line += "\":";
  line += buf;
}

}  // namespace

void write_dataset(const std::filesystem::path& path, const Dataset& data) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write dataset " + path.string());
  std::string line;
  for (const auto& s : data) {
    line.clear();
    line += "{\"ue\":[";
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", s.ue[0]);
    line += buf;
    line += ',';
    std::snprintf(buf, sizeof buf, "%.17g", s.ue[1]);
    line += buf;
    line += "],\"paths\":[";
    for (std::size_t p = 0; p < s.paths.size(); ++p) {
      const auto& pp = s.paths[p];
      if (p) line += ',';
      line += '{';
      put(line, "alpha_re", pp.alpha.real());
      line += ',';
      put(line, "alpha_im", pp.alpha.imag());
      line += ',';
      put(line, "tau", pp.tau);
      line += ',';
      put(line, "theta", pp.dir.theta());
      line += ',';
      put(line, "phi", pp.dir.phi());
      line += '}';
    }
    line += "],\"seed\":";
    line += std::to_string(s.seed);
    line += "}\n";
    out << line;
  }
  if (!out) throw IoError("failed writing dataset " + path.string());
}

Dataset read_dataset(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read dataset " + path.string());
  Dataset data;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      Sample s;
      s.ue = {j.at("ue").at(0).get<double>(), j.at("ue").at(1).get<double>()};
      for (const auto& p : j.at("paths")) {
        channel::PathParams pp;
        pp.alpha = {p.at("alpha_re").get<double>(), p.at("alpha_im").get<double>()};
        pp.tau = p.at("tau").get<double>();
        pp.dir = array::Direction::from_angles(p.at("theta").get<double>(), p.at("phi").get<double>());
        s.paths.push_back(pp);
      }
      s.seed = j.at("seed").get<std::uint64_t>();
      data.push_back(std::move(s));
    } catch (const nlohmann::json::exception& e) {
      throw IoError(path.string() + ":" + std::to_string(lineno) + ": malformed sample: " + e.what());
    } catch (const DomainError& e) {
      throw IoError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return data;
}

channel::MultipathScene to_scene(const Sample& s, const array::Vec3& ap) {
  return channel::scene_from_paths(s.ue, ap, s.paths);
}

}  // namespace eraloc
