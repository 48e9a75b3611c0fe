#include "mtvqa/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iostream>
#include <sstream>

#include <json.hpp>

#include "mtvqa/config.hpp"

namespace mtvqa {

using nlohmann::json;

namespace {

std::uint32_t to_le(std::uint32_t v) {
  if constexpr (std::endian::native == std::endian::big)
    v = ((v & 0xFFu) << 24) | ((v & 0xFF00u) << 8) | ((v >> 8) & 0xFF00u) | (v >> 24);
  return v;
}

}  // namespace

void save_checkpoint(const std::filesystem::path& manifest, const Model<float>& model,
                     std::int64_t step, const std::string& config_hash) {
  if (manifest.has_parent_path()) std::filesystem::create_directories(manifest.parent_path());
  auto blob_path = manifest;
  blob_path.replace_extension(".bin");

  std::string blob;
  json entries = json::array();
  for (const auto& p : model.parameters()) {
    const auto vals = p.tensor.values();
    entries.push_back({{"name", p.name},
                       {"shape", p.tensor.shape()},
                       {"offset", blob.size()},
                       {"count", vals.size()}});
    for (float f : vals) {
      std::uint32_t u;
      std::memcpy(&u, &f, 4);
      u = to_le(u);
      blob.append(reinterpret_cast<const char*>(&u), 4);
    }
  }
  json j = {{"format", "mtvqa-checkpoint-v1"},
            {"dtype", "float32-le"},
            {"step", step},
            {"config_hash", config_hash},
            {"model", model_config_json(model.config())},
            {"blob", blob_path.filename().string()},
            {"blob_bytes", blob.size()},
            {"params", entries}};
  std::ofstream b(blob_path, std::ios::binary);
  if (!b) throw LoadError("cannot write " + blob_path.string());
  b << blob;
  std::ofstream m(manifest);
  if (!m) throw LoadError("cannot write " + manifest.string());
  m << j.dump(2) << '\n';
}

CheckpointManifest read_manifest(const std::filesystem::path& manifest) {
  std::ifstream in(manifest);
  if (!in) throw LoadError("cannot open checkpoint manifest " + manifest.string());
  std::stringstream ss;
  ss << in.rdbuf();
  try {
    const json j = json::parse(ss.str());
    CheckpointManifest m;
    m.step = j.at("step").get<std::int64_t>();
    m.config_hash = j.at("config_hash").get<std::string>();
    m.model = model_config_from_json(j.at("model"));
    m.blob = j.at("blob").get<std::string>();
    for (const auto& e : j.at("params"))
      m.entries.push_back({e.at("name").get<std::string>(), e.at("shape").get<Shape>(),
                           e.at("offset").get<std::uint64_t>(), e.at("count").get<std::uint64_t>()});
    return m;
  } catch (const json::exception& e) {
    throw LoadError("malformed checkpoint manifest " + manifest.string() + ": " + e.what());
  }
}

LoadedCheckpoint load_checkpoint(const std::filesystem::path& manifest,
                                 const std::optional<std::string>& expected_hash) {
  auto man = read_manifest(manifest);
  LoadedCheckpoint out{Model<float>(man.model, 0), man, {}};
  if (expected_hash && *expected_hash != man.config_hash) {
    out.warnings.push_back("checkpoint config hash " + man.config_hash + " differs from the current config (" +
                           *expected_hash + ")");
    std::cerr << "warning: " << out.warnings.back() << '\n';
  }

  const auto blob_path = manifest.parent_path() / man.blob;
  std::ifstream in(blob_path, std::ios::binary);
  if (!in) throw LoadError("cannot open checkpoint blob " + blob_path.string());
  std::string blob((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());

  auto params = out.model.parameters();
  if (params.size() != man.entries.size())
    throw LoadError("checkpoint has " + std::to_string(man.entries.size()) + " tensors, model expects " +
                    std::to_string(params.size()));
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto& e = man.entries[i];
    auto& p = params[i];
    if (e.name != p.name) throw LoadError("checkpoint tensor " + std::to_string(i) + " is '" + e.name + "', expected '" + p.name + "'");
    if (e.shape != p.tensor.shape())
      throw LoadError("checkpoint tensor '" + e.name + "' has shape " + shape_str(e.shape) + ", model expects " +
                      shape_str(p.tensor.shape()));
    if (e.count != p.tensor.numel() || e.offset + 4 * e.count > blob.size())
      throw LoadError("checkpoint tensor '" + e.name + "' lies outside the blob");
    auto dst = p.tensor.mutable_values();
    for (std::size_t k = 0; k < e.count; ++k) {
      std::uint32_t u;
      std::memcpy(&u, blob.data() + e.offset + 4 * k, 4);
      u = to_le(u);
      std::memcpy(&dst[k], &u, 4);
    }
  }
  return out;
}

}  // namespace mtvqa
