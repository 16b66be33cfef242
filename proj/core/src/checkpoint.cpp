#include "bendr/checkpoint.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>

#include "bendr/errors.hpp"
#include "bendr/rng.hpp"

namespace bendr {

namespace {

constexpr char kMagic[8] = {'B', 'N', 'D', 'R', 'C', 'K', 'P', 'T'};

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

std::uint64_t get_u64(const std::string& in, std::size_t pos) {
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) {
    v |= static_cast<std::uint64_t>(static_cast<unsigned char>(in[pos + i])) << (8 * i);
  }
  return v;
}

std::uint32_t get_u32(const std::string& in, std::size_t pos) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) {
    v |= static_cast<std::uint32_t>(static_cast<unsigned char>(in[pos + i])) << (8 * i);
  }
  return v;
}

}  // namespace

std::string config_hash(const nlohmann::json& config) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(fnv1a64(config.dump())));
  return buf;
}

std::string serialize_checkpoint(const ParamStore& params, const nlohmann::json& config) {
  nlohmann::json manifest;
  manifest["format"] = "bendr-checkpoint";
  manifest["version"] = 1;
  manifest["config"] = config;
  manifest["config_hash"] = config_hash(config);
  nlohmann::json arrays = nlohmann::json::array();
  std::uint64_t offset = 0;
  for (const auto& p : params.items()) {
    arrays.push_back({{"name", p.name}, {"shape", p.value.shape()}, {"offset", offset}});
    offset += 4 * p.value.size();
  }
  manifest["arrays"] = arrays;
  const std::string text = manifest.dump();

  std::string out(kMagic, sizeof(kMagic));
  put_u64(out, text.size());
  out += text;
  out.reserve(out.size() + offset);
  for (const auto& p : params.items()) {
    for (double v : p.value.values()) put_u32(out, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
  }
  return out;
}

Checkpoint deserialize_checkpoint(const std::string& bytes) {
  if (bytes.size() < 16 || std::memcmp(bytes.data(), kMagic, sizeof(kMagic)) != 0) {
    throw CheckpointError("not a bendr checkpoint (bad magic)");
  }
  const std::uint64_t len = get_u64(bytes, 8);
  if (16 + len > bytes.size()) throw CheckpointError("truncated checkpoint manifest");
  nlohmann::json manifest;
  try {
    manifest = nlohmann::json::parse(bytes.substr(16, len));
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError(std::string("malformed checkpoint manifest: ") + e.what());
  }
  const std::size_t data_start = 16 + len;
  Checkpoint ck;
  ck.config = manifest.value("config", nlohmann::json::object());
  ck.config_hash = manifest.value("config_hash", "");
  if (ck.config_hash != config_hash(ck.config)) {
    throw CheckpointError("checkpoint config hash does not match its config");
  }
  for (const auto& a : manifest.at("arrays")) {
    Shape shape = a.at("shape").get<Shape>();
    const std::uint64_t off = a.at("offset").get<std::uint64_t>();
    const std::size_t n = shape_numel(shape);
    if (data_start + off + 4 * n > bytes.size()) {
      throw CheckpointError("truncated checkpoint data for " + a.at("name").get<std::string>());
    }
    std::vector<double> values(n);
    for (std::size_t i = 0; i < n; ++i) {
      values[i] = std::bit_cast<float>(get_u32(bytes, data_start + off + 4 * i));
    }
    ck.params.add(a.at("name").get<std::string>(), Tensor(std::move(shape), std::move(values)));
  }
  return ck;
}

void save_checkpoint(const std::filesystem::path& path, const ParamStore& params,
                     const nlohmann::json& config) {
  const std::string bytes = serialize_checkpoint(params, config);
  const auto tmp = std::filesystem::path(path.string() + ".tmp");
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) throw CheckpointError("cannot write checkpoint: " + tmp.string());
    f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!f) throw CheckpointError("write failed: " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw CheckpointError("cannot open checkpoint: " + path.string());
  std::ostringstream ss;
  ss << f.rdbuf();
  return deserialize_checkpoint(ss.str());
}

void quantize_to_float(ParamStore& params) {
  for (auto& p : params.items()) {
    for (double& v : p.value.values()) v = static_cast<float>(v);
  }
}

}  // namespace bendr
