#pragma once

#include <algorithm>
#include <array>
#include <bit>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "coacor/core/error.hpp"
#include "coacor/core/optim.hpp"

namespace coacor::io {

inline constexpr std::array<char, 8> kMagic = {'C', 'O', 'A', 'C', 'O', 'R', 'C', 'K'};
inline constexpr std::uint32_t kFormatVersion = 1;

/// Model kinds stored in a checkpoint.
inline const std::vector<std::string>& model_kinds() {
  static const std::vector<std::string> kinds = {"QC", "QN", "CA", "CA-RL"};
  return kinds;
}

inline std::string hash_hex(std::uint64_t h) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

struct Section {
  std::string name;
  const ParameterStore* store = nullptr;
};

struct SaveRequest {
  std::string model_kind;
  nlohmann::json hyperparams = nlohmann::json::object();
  std::map<std::string, std::uint64_t> vocab_hashes;  // e.g. "code", "nl"
  std::vector<Section> sections;
};

namespace detail {

inline void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

inline std::uint64_t get_u64(const std::string& in, std::size_t& pos, std::size_t width = 8) {
  if (pos + width > in.size()) fail(ErrorKind::kCheckpoint, "truncated checkpoint");
  std::uint64_t v = 0;
  for (std::size_t i = 0; i < width; ++i) {
    v |= static_cast<std::uint64_t>(static_cast<unsigned char>(in[pos + i])) << (8 * i);
  }
  pos += width;
  return v;
}

}  // namespace detail

/// Writes a checkpoint file. An existing file is left untouched: writing
/// identical bytes again is a no-op, anything else is an error.
inline void save_checkpoint(const std::string& path, const SaveRequest& req) {
  const auto& kinds = model_kinds();
  if (std::find(kinds.begin(), kinds.end(), req.model_kind) == kinds.end()) {
    fail(ErrorKind::kArgument, "unknown model kind '" + req.model_kind + "'");
  }
  nlohmann::json manifest;
  manifest["format_version"] = kFormatVersion;
  manifest["model_kind"] = req.model_kind;
  manifest["hyperparams"] = req.hyperparams;
  manifest["created_by"] = "coacor";
  nlohmann::json hashes = nlohmann::json::object();
  for (const auto& [side, h] : req.vocab_hashes) hashes[side] = hash_hex(h);
  manifest["vocab_hashes"] = hashes;
  nlohmann::json sections = nlohmann::json::array();
  std::string payload;
  for (const auto& sec : req.sections) {
    nlohmann::json params = nlohmann::json::array();
    for (const Parameter* p : sec.store->all()) {
      params.push_back({{"name", p->name}, {"shape", p->tensor.shape()}});
      for (double v : p->tensor.values()) detail::put_u64(payload, std::bit_cast<std::uint64_t>(v));
    }
    sections.push_back({{"name", sec.name}, {"parameters", params}});
  }
  manifest["sections"] = sections;

  const std::string text = manifest.dump();
  std::string bytes(kMagic.begin(), kMagic.end());
  for (int i = 0; i < 4; ++i) bytes.push_back(static_cast<char>((kFormatVersion >> (8 * i)) & 0xff));
  detail::put_u64(bytes, text.size());
  bytes += text;
  bytes += payload;

  if (std::filesystem::exists(path)) {
    std::ifstream old(path, std::ios::binary);
    const std::string existing((std::istreambuf_iterator<char>(old)), std::istreambuf_iterator<char>());
    if (existing == bytes) return;
    fail(ErrorKind::kCheckpoint, "refusing to overwrite existing checkpoint " + path);
  }
  const auto parent = std::filesystem::path(path).parent_path();
  if (!parent.empty()) std::filesystem::create_directories(parent);
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorKind::kIo, "cannot write checkpoint " + path);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) fail(ErrorKind::kIo, "short write to " + path);
}

struct StoredParameter {
  std::vector<std::size_t> shape;
  std::vector<double> values;
};

class Checkpoint {
 public:
  nlohmann::json manifest;
  std::map<std::string, std::vector<std::pair<std::string, StoredParameter>>> sections;

  const std::string model_kind() const { return manifest.at("model_kind").get<std::string>(); }
  const nlohmann::json& hyperparams() const { return manifest.at("hyperparams"); }

  /// Hard error unless the stored hash for `side` equals `hash`.
  void verify_vocab(const std::string& side, std::uint64_t hash) const {
    const auto& hashes = manifest.at("vocab_hashes");
    if (!hashes.contains(side)) {
      fail(ErrorKind::kCheckpoint, "checkpoint has no '" + side + "' vocabulary hash");
    }
    const auto stored = hashes.at(side).get<std::string>();
    if (stored != hash_hex(hash)) {
      fail(ErrorKind::kCheckpoint, "'" + side + "' vocabulary hash mismatch: checkpoint " + stored +
                                       ", current " + hash_hex(hash));
    }
  }

  /// Copies section `name` into `store`, which must have the same layout.
  void restore(const std::string& name, ParameterStore& store) const {
    auto it = sections.find(name);
    if (it == sections.end()) fail(ErrorKind::kCheckpoint, "checkpoint has no section '" + name + "'");
    const auto& stored = it->second;
    auto params = store.all();
    if (params.size() != stored.size()) {
      fail(ErrorKind::kCheckpoint, "section '" + name + "' holds " + std::to_string(stored.size()) +
                                       " parameters, model expects " + std::to_string(params.size()));
    }
    for (std::size_t i = 0; i < params.size(); ++i) {
      if (params[i]->name != stored[i].first || params[i]->tensor.shape() != stored[i].second.shape) {
        fail(ErrorKind::kCheckpoint, "section '" + name + "': parameter '" + stored[i].first +
                                         "' does not match model parameter '" + params[i]->name + "'");
      }
    }
    for (std::size_t i = 0; i < params.size(); ++i) {
      auto dst = params[i]->tensor.mutable_values();
      std::copy(stored[i].second.values.begin(), stored[i].second.values.end(), dst.begin());
      params[i]->reset_optimizer_state();
    }
  }
};

inline Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::kDependency, "missing checkpoint " + path);
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (bytes.size() < kMagic.size() || !std::equal(kMagic.begin(), kMagic.end(), bytes.begin())) {
    fail(ErrorKind::kCheckpoint, path + " is not a checkpoint file");
  }
  std::size_t pos = kMagic.size();
  const auto version = detail::get_u64(bytes, pos, 4);
  if (version != kFormatVersion) {
    fail(ErrorKind::kCheckpoint, path + ": unsupported format version " + std::to_string(version));
  }
  const auto length = detail::get_u64(bytes, pos);
  if (pos + length > bytes.size()) fail(ErrorKind::kCheckpoint, path + ": truncated manifest");
  Checkpoint ck;
  try {
    ck.manifest = nlohmann::json::parse(bytes.substr(pos, length));
    pos += length;
    if (ck.manifest.at("format_version").get<std::uint32_t>() != kFormatVersion) {
      fail(ErrorKind::kCheckpoint, path + ": manifest format version mismatch");
    }
    for (const auto& sec : ck.manifest.at("sections")) {
      auto& dst = ck.sections[sec.at("name").get<std::string>()];
      for (const auto& p : sec.at("parameters")) {
        StoredParameter sp;
        sp.shape = p.at("shape").get<std::vector<std::size_t>>();
        std::size_t n = 1;
        for (auto d : sp.shape) n *= d;
        sp.values.resize(n);
        for (double& v : sp.values) v = std::bit_cast<double>(detail::get_u64(bytes, pos));
        dst.emplace_back(p.at("name").get<std::string>(), std::move(sp));
      }
    }
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::kCheckpoint, path + ": bad manifest: " + e.what());
  }
  if (pos != bytes.size()) fail(ErrorKind::kCheckpoint, path + ": trailing bytes after payload");
  return ck;
}

}  // namespace coacor::io
