#pragma once

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "clad/checkpoint.hpp"
#include "clad/dataset.hpp"

namespace clad {

/// Dataset-level metadata carried alongside the samples.
struct ManifestHeader {
  std::size_t num_tasks = 0;
  std::size_t num_actions = 0;
  std::size_t obs_dim = 0;
  std::size_t text_dim = 0;
  std::size_t horizon = 0;
  std::string curation = "pdpp";
  std::string source = "synthetic";
};

struct ManifestData {
  ManifestHeader header;
  std::vector<Sample> samples;
};

// Manifest layout (JSON):
//   { "format": "clad-manifest", "version": 1,
//     "num_tasks": C, "num_actions": A, "horizon": T, "curation": "pdpp",
//     "dims": {"obs": d_o, "text": d_t},
//     "samples": [ { "task": c, "actions": [...], "feature_file": "features.f32",
//                    "offsets": {"obs_start": i, "obs_goal": j, "text_start": k, "text_goal": l},
//                    "dims": {"obs": d_o, "text": d_t} }, ... ] }
// Offsets count float32 elements from the start of the feature file, which
// holds raw little-endian float32 values. feature_file is relative to the
// manifest's directory.
inline constexpr const char* kFeatureFileName = "features.f32";

namespace detail {

inline void put_f32(std::string& out, double v) {
  const auto f = static_cast<float>(v);
  std::uint32_t bits;
  std::memcpy(&bits, &f, sizeof bits);
  put_u32(out, bits);
}

inline std::vector<float> decode_f32(const std::string& bytes, const std::string& source) {
  if (bytes.size() % 4 != 0) throw FormatError(source + ": feature file length is not a multiple of 4 bytes");
  std::vector<float> out(bytes.size() / 4);
  for (std::size_t i = 0; i < out.size(); ++i) {
    std::uint32_t bits = 0;
    for (int b = 0; b < 4; ++b) bits |= static_cast<std::uint32_t>(static_cast<unsigned char>(bytes[4 * i + b])) << (8 * b);
    std::memcpy(&out[i], &bits, sizeof bits);
  }
  return out;
}

}  // namespace detail

/// Writes `manifest.json` and the feature blob into `dir`.
inline void write_manifest(const std::filesystem::path& dir, const ManifestData& data) {
  const auto& h = data.header;
  nlohmann::json j;
  j["format"] = "clad-manifest";
  j["version"] = 1;
  j["source"] = h.source;
  j["num_tasks"] = h.num_tasks;
  j["num_actions"] = h.num_actions;
  j["horizon"] = h.horizon;
  j["curation"] = h.curation;
  j["dims"] = {{"obs", h.obs_dim}, {"text", h.text_dim}};
  j["samples"] = nlohmann::json::array();
  std::string blob;
  std::size_t offset = 0;
  for (const Sample& s : data.samples) {
    if (s.obs_start.size() != h.obs_dim || s.obs_goal.size() != h.obs_dim || s.text_start.size() != h.text_dim ||
        s.text_goal.size() != h.text_dim) {
      throw DimensionError("write_manifest: sample dims disagree with header");
    }
    nlohmann::json e;
    e["task"] = s.task;
    e["actions"] = s.actions;
    e["feature_file"] = kFeatureFileName;
    e["dims"] = {{"obs", h.obs_dim}, {"text", h.text_dim}};
    nlohmann::json offsets;
    for (const auto& [key, vec] : {std::pair{"obs_start", &s.obs_start}, std::pair{"obs_goal", &s.obs_goal},
                                   std::pair{"text_start", &s.text_start}, std::pair{"text_goal", &s.text_goal}}) {
      offsets[key] = offset;
      for (double v : *vec) detail::put_f32(blob, v);
      offset += vec->size();
    }
    e["offsets"] = offsets;
    j["samples"].push_back(std::move(e));
  }
  write_file_atomic(dir / kFeatureFileName, blob);
  write_file_atomic(dir / "manifest.json", j.dump(1) + "\n");
}

/// Reads a manifest (path to manifest.json or its directory).
inline ManifestData read_manifest(const std::filesystem::path& path) {
  const std::filesystem::path file = std::filesystem::is_directory(path) ? path / "manifest.json" : path;
  const std::filesystem::path dir = file.parent_path();
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_file(file));
  } catch (const nlohmann::json::parse_error& e) {
    throw FormatError(file.string() + ": malformed JSON: " + e.what());
  }
  ManifestData out;
  try {
    auto& h = out.header;
    h.num_tasks = j.at("num_tasks").get<std::size_t>();
    h.num_actions = j.at("num_actions").get<std::size_t>();
    h.obs_dim = j.at("dims").at("obs").get<std::size_t>();
    h.text_dim = j.at("dims").at("text").get<std::size_t>();
    h.horizon = j.value("horizon", std::size_t{0});
    h.curation = j.value("curation", std::string("pdpp"));
    h.source = j.value("source", std::string("external"));

    std::map<std::string, std::vector<float>> blobs;
    for (const auto& e : j.at("samples")) {
      Sample s;
      s.task = e.at("task").get<std::size_t>();
      s.actions = e.at("actions").get<std::vector<std::size_t>>();
      if (s.task >= h.num_tasks) throw LabelError(file.string() + ": task label out of range");
      for (std::size_t a : s.actions) {
        if (a >= h.num_actions) throw LabelError(file.string() + ": action label out of range");
      }
      const auto obs = e.at("dims").at("obs").get<std::size_t>();
      const auto text = e.at("dims").at("text").get<std::size_t>();
      if (obs != h.obs_dim || text != h.text_dim) {
        throw DimensionError(file.string() + ": sample dims (" + std::to_string(obs) + ", " + std::to_string(text) +
                             ") do not match header (" + std::to_string(h.obs_dim) + ", " +
                             std::to_string(h.text_dim) + ")");
      }
      const auto name = e.at("feature_file").get<std::string>();
      auto it = blobs.find(name);
      if (it == blobs.end()) {
        it = blobs.emplace(name, detail::decode_f32(read_file(dir / name), (dir / name).string())).first;
      }
      const auto& blob = it->second;
      auto take = [&](const char* key, std::size_t n) {
        const auto at = e.at("offsets").at(key).get<std::size_t>();
        if (at + n > blob.size()) {
          throw FormatError((dir / name).string() + ": feature file has " + std::to_string(blob.size()) +
                            " values, sample needs " + std::to_string(at + n));
        }
        return std::vector<double>(blob.begin() + static_cast<std::ptrdiff_t>(at),
                                   blob.begin() + static_cast<std::ptrdiff_t>(at + n));
      };
      s.obs_start = take("obs_start", obs);
      s.obs_goal = take("obs_goal", obs);
      s.text_start = take("text_start", text);
      s.text_goal = take("text_goal", text);
      out.samples.push_back(std::move(s));
    }
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(file.string() + ": bad manifest: " + e.what());
  }
  return out;
}

}  // namespace clad
