// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The eraloc Authors

#include "eraloc/ad/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <vector>

#include "eraloc/errors.hpp"
#include "json.hpp"

namespace eraloc::ad {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

static_assert(std::endian::native == std::endian::little || std::endian::native == std::endian::big);

void append_le(std::vector<char>& out, const Tensor& t) {
  const std::size_t start = out.size();
  out.resize(start + t.size() * sizeof(double));
  std::memcpy(out.data() + start, t.data(), t.size() * sizeof(double));
  if constexpr (std::endian::native == std::endian::big) {
    for (std::size_t i = 0; i < t.size(); ++i) {
      char* p = out.data() + start + i * sizeof(double);
      for (std::size_t b = 0; b < sizeof(double) / 2; ++b) std::swap(p[b], p[sizeof(double) - 1 - b]);
    }
  }
}

Tensor read_le(const std::vector<char>& blob, std::size_t offset, std::size_t length, const Shape& shape) {
  if ((offset + length) * sizeof(double) > blob.size()) throw IoError("checkpoint blob truncated");
  std::vector<double> data(length);
  std::memcpy(data.data(), blob.data() + offset * sizeof(double), length * sizeof(double));
  if constexpr (std::endian::native == std::endian::big) {
    for (auto& v : data) {
      auto* p = reinterpret_cast<char*>(&v);
      for (std::size_t b = 0; b < sizeof(double) / 2; ++b) std::swap(p[b], p[sizeof(double) - 1 - b]);
    }
  }
  return Tensor(shape, std::move(data));
}

void write_file(const fs::path& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("failed writing " + path.string());
}

void write_blob(const fs::path& path, const std::vector<char>& blob) {
  write_file(path, std::string(blob.begin(), blob.end()));
}

std::vector<char> read_blob(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path.string());
  return std::vector<char>(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

json read_manifest(const fs::path& dir) {
  std::ifstream in(dir / "manifest.json");
  if (!in) throw IoError("cannot read " + (dir / "manifest.json").string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw IoError("malformed checkpoint manifest: " + std::string(e.what()));
  }
}

json entry(const std::string& name, const Shape& shape, std::size_t offset, std::size_t length) {
  return json{{"name", name}, {"shape", shape}, {"dtype", "f64"}, {"offset", offset}, {"length", length}};
}

}  // namespace

void save_checkpoint(const fs::path& dir, const ParameterStore& params, const Adam* optimizer,
                     const std::string& config_json) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());

  json manifest;
  try {
    manifest["config"] = json::parse(config_json);
  } catch (const json::exception& e) {
    throw ConfigError("checkpoint config is not valid JSON: " + std::string(e.what()));
  }
  manifest["params"] = json::array();
  std::vector<char> blob;
  std::size_t offset = 0;
  for (const Parameter* p : params.all()) {
    manifest["params"].push_back(entry(p->name, p->value.shape(), offset, p->value.size()));
    append_le(blob, p->value);
    offset += p->value.size();
  }
  write_blob(dir / "data.bin", blob);

  if (optimizer != nullptr) {
    json opt;
    opt["step"] = optimizer->step_count();
    opt["entries"] = json::array();
    std::vector<char> oblob;
    std::size_t ooff = 0;
    const auto& ps = optimizer->parameters();
    for (std::size_t i = 0; i < ps.size(); ++i) {
      const Tensor& m = optimizer->first_moments()[i];
      const Tensor& v = optimizer->second_moments()[i];
      opt["entries"].push_back(entry(ps[i]->name + ".m", m.shape(), ooff, m.size()));
      append_le(oblob, m);
      ooff += m.size();
      opt["entries"].push_back(entry(ps[i]->name + ".v", v.shape(), ooff, v.size()));
      append_le(oblob, v);
      ooff += v.size();
    }
    manifest["optimizer"] = opt;
    write_blob(dir / "optimizer.bin", oblob);
  }
  write_file(dir / "manifest.json", manifest.dump(2) + "\n");
}

void load_checkpoint(const fs::path& dir, ParameterStore& params, Adam* optimizer) {
  const json manifest = read_manifest(dir);
  const auto blob = read_blob(dir / "data.bin");
  const auto& entries = manifest.at("params");
  auto targets = params.all();
  if (entries.size() != targets.size()) {
    throw ConfigError("checkpoint has " + std::to_string(entries.size()) + " tensors, model expects " +
                      std::to_string(targets.size()));
  }
  for (std::size_t i = 0; i < targets.size(); ++i) {
    const auto& e = entries[i];
    const auto name = e.at("name").get<std::string>();
    const auto shape = e.at("shape").get<Shape>();
    if (name != targets[i]->name || shape != targets[i]->value.shape()) {
      throw ConfigError("checkpoint tensor '" + name + "' " + shape_string(shape) + " does not match model tensor '" +
                        targets[i]->name + "' " + shape_string(targets[i]->value.shape()));
    }
    if (e.at("dtype").get<std::string>() != "f64") throw ConfigError("unsupported dtype in checkpoint");
    targets[i]->value = read_le(blob, e.at("offset").get<std::size_t>(), e.at("length").get<std::size_t>(), shape);
  }

  if (optimizer != nullptr && manifest.contains("optimizer")) {
    const auto oblob = read_blob(dir / "optimizer.bin");
    const auto& opt = manifest.at("optimizer");
    const auto& oentries = opt.at("entries");
    std::vector<Tensor> m, v;
    for (std::size_t i = 0; i + 1 < oentries.size(); i += 2) {
      const auto& em = oentries[i];
      const auto& ev = oentries[i + 1];
      m.push_back(read_le(oblob, em.at("offset").get<std::size_t>(), em.at("length").get<std::size_t>(),
                          em.at("shape").get<Shape>()));
      v.push_back(read_le(oblob, ev.at("offset").get<std::size_t>(), ev.at("length").get<std::size_t>(),
                          ev.at("shape").get<Shape>()));
    }
    optimizer->restore(std::move(m), std::move(v), opt.at("step").get<std::uint64_t>());
  }
}

std::string read_checkpoint_config(const fs::path& dir) { return read_manifest(dir).at("config").dump(); }

}  // namespace eraloc::ad
