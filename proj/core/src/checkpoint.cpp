#include "xsdepth/checkpoint.hpp"

#include <cstring>
#include <fstream>

#include <nlohmann/json.hpp>

namespace xsdepth {

namespace {

constexpr char kMagic[8] = {'X', 'S', 'D', 'C', 'K', 'P', 'T', '\0'};

void write_u32(std::ostream& os, uint32_t v) { os.write(reinterpret_cast<const char*>(&v), 4); }
void write_u64(std::ostream& os, uint64_t v) { os.write(reinterpret_cast<const char*>(&v), 8); }
void write_string(std::ostream& os, const std::string& s) {
  write_u64(os, s.size());
  os.write(s.data(), static_cast<std::streamsize>(s.size()));
}

uint32_t read_u32(std::istream& is, const char* field) {
  uint32_t v = 0;
  is.read(reinterpret_cast<char*>(&v), 4);
  if (!is) throw CheckpointError(std::string("checkpoint truncated while reading ") + field);
  return v;
}
uint64_t read_u64(std::istream& is, const char* field) {
  uint64_t v = 0;
  is.read(reinterpret_cast<char*>(&v), 8);
  if (!is) throw CheckpointError(std::string("checkpoint truncated while reading ") + field);
  return v;
}
std::string read_string(std::istream& is, const char* field) {
  const uint64_t n = read_u64(is, field);
  if (n > (1ULL << 32))
    throw CheckpointError(std::string("checkpoint corrupt: implausible length for ") + field);
  std::string s(n, '\0');
  is.read(s.data(), static_cast<std::streamsize>(n));
  if (!is) throw CheckpointError(std::string("checkpoint truncated while reading ") + field);
  return s;
}

void write_tensor(std::ostream& os, const Tensor& t) {
  write_u32(os, static_cast<uint32_t>(t.ndim()));
  for (int i = 0; i < t.ndim(); ++i) write_u64(os, static_cast<uint64_t>(t.dim(i)));
  os.write(reinterpret_cast<const char*>(t.data()),
           static_cast<std::streamsize>(t.numel() * sizeof(Scalar)));
}

Tensor read_tensor(std::istream& is, const std::string& name) {
  const uint32_t ndim = read_u32(is, name.c_str());
  if (ndim == 0 || ndim > 8)
    throw CheckpointError("checkpoint corrupt: bad rank for array " + name);
  std::vector<long> shape(ndim);
  for (uint32_t i = 0; i < ndim; ++i) {
    const uint64_t d = read_u64(is, name.c_str());
    if (d == 0 || d > (1ULL << 32))
      throw CheckpointError("checkpoint corrupt: bad dimension for array " + name);
    shape[i] = static_cast<long>(d);
  }
  Tensor t(shape);
  is.read(reinterpret_cast<char*>(t.data()),
          static_cast<std::streamsize>(t.numel() * sizeof(Scalar)));
  if (!is) throw CheckpointError("checkpoint truncated while reading array " + name);
  return t;
}

}  // namespace

std::string network_config_to_json(const NetworkConfig& cfg) {
  nlohmann::json j;
  j["encoder_depth"] = cfg.encoder_depth == EncoderDepth::tiny ? "tiny" : "resnet18-like";
  j["num_scales"] = cfg.num_scales;
  j["num_disparity_scales"] = cfg.num_disparity_scales;
  j["base_channels"] = cfg.base_channels;
  j["input_width"] = cfg.input_width;
  j["input_height"] = cfg.input_height;
  j["d_max"] = cfg.d_max;
  j["init_std"] = cfg.init_std;
  j["pretrained_encoder"] = cfg.pretrained_encoder;
  j["pretrained_encoder_path"] = cfg.pretrained_encoder_path;
  return j.dump();
}

NetworkConfig network_config_from_json(const std::string& json_text) {
  nlohmann::json j = nlohmann::json::parse(json_text, nullptr, /*allow_exceptions=*/false);
  if (j.is_discarded()) throw CheckpointError("checkpoint corrupt: config is not valid JSON");
  NetworkConfig cfg;
  const std::string depth = j.value("encoder_depth", "tiny");
  if (depth == "tiny")
    cfg.encoder_depth = EncoderDepth::tiny;
  else if (depth == "resnet18-like")
    cfg.encoder_depth = EncoderDepth::resnet18_like;
  else
    throw CheckpointError("checkpoint corrupt: unknown encoder_depth '" + depth + "'");
  cfg.num_scales = j.value("num_scales", 5);
  cfg.num_disparity_scales = j.value("num_disparity_scales", 4);
  cfg.base_channels = j.value("base_channels", 16);
  cfg.input_width = j.value("input_width", 64L);
  cfg.input_height = j.value("input_height", 48L);
  cfg.d_max = j.value("d_max", 0.3);
  cfg.init_std = j.value("init_std", 0.02);
  cfg.pretrained_encoder = j.value("pretrained_encoder", false);
  cfg.pretrained_encoder_path = j.value("pretrained_encoder_path", std::string());
  return cfg;
}

void save_checkpoint(const NetworkBundle& bundle, long step, const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open checkpoint for writing: " + path.string());
  os.write(kMagic, 8);
  write_u32(os, kCheckpointVersion);
  write_u64(os, static_cast<uint64_t>(step));
  write_string(os, network_config_to_json(bundle.config));
  const auto params = bundle.named_parameters();
  write_u64(os, params.size());
  for (const NamedParam& p : params) {
    write_string(os, p.name);
    write_tensor(os, p.var->value);
  }
  os.write(kMagic, 8);  // trailing sentinel catches truncation
  if (!os) throw IoError("failed writing checkpoint: " + path.string());
}

namespace {

struct RawCheckpoint {
  uint64_t step = 0;
  std::string config_json;
  std::vector<std::pair<std::string, Tensor>> arrays;
};

RawCheckpoint read_raw(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open checkpoint: " + path.string());
  char magic[8] = {};
  is.read(magic, 8);
  if (!is || std::memcmp(magic, kMagic, 8) != 0)
    throw CheckpointError("checkpoint corrupt: bad magic in " + path.string());
  const uint32_t version = read_u32(is, "version");
  if (version != kCheckpointVersion)
    throw CheckpointError("checkpoint version mismatch: file has " + std::to_string(version) +
                          ", expected " + std::to_string(kCheckpointVersion));
  RawCheckpoint raw;
  raw.step = read_u64(is, "step");
  raw.config_json = read_string(is, "config");
  const uint64_t count = read_u64(is, "parameter count");
  if (count > (1ULL << 24))
    throw CheckpointError("checkpoint corrupt: implausible parameter count");
  raw.arrays.reserve(count);
  for (uint64_t i = 0; i < count; ++i) {
    std::string name = read_string(is, "parameter name");
    Tensor t = read_tensor(is, name);
    raw.arrays.emplace_back(std::move(name), std::move(t));
  }
  is.read(magic, 8);
  if (!is || std::memcmp(magic, kMagic, 8) != 0)
    throw CheckpointError("checkpoint truncated: missing trailing sentinel in " + path.string());
  return raw;
}

}  // namespace

LoadedCheckpoint load_checkpoint(const std::filesystem::path& path) {
  RawCheckpoint raw = read_raw(path);
  LoadedCheckpoint out;
  NetworkConfig cfg = network_config_from_json(raw.config_json);
  // The stored arrays overwrite every parameter; skip re-reading any
  // pretrained encoder file the original run may have used.
  NetworkConfig build_cfg = cfg;
  build_cfg.pretrained_encoder = false;
  out.bundle = build_networks(build_cfg, /*seed=*/0);
  out.bundle.config = cfg;
  out.step = static_cast<long>(raw.step);
  auto params = out.bundle.named_parameters();
  if (params.size() != raw.arrays.size())
    throw CheckpointError("checkpoint corrupt: parameter count mismatch (file has " +
                          std::to_string(raw.arrays.size()) + ", config implies " +
                          std::to_string(params.size()) + ")");
  for (size_t i = 0; i < params.size(); ++i) {
    if (params[i].name != raw.arrays[i].first)
      throw CheckpointError("checkpoint corrupt: unexpected array '" + raw.arrays[i].first +
                            "', expected '" + params[i].name + "'");
    if (!params[i].var->value.same_shape(raw.arrays[i].second))
      throw CheckpointError("checkpoint corrupt: shape mismatch for array " + params[i].name);
    params[i].var->value = std::move(raw.arrays[i].second);
  }
  return out;
}

std::map<std::string, Tensor> read_parameter_arrays(const std::filesystem::path& path) {
  RawCheckpoint raw = read_raw(path);
  std::map<std::string, Tensor> out;
  for (auto& [name, tensor] : raw.arrays) out.emplace(std::move(name), std::move(tensor));
  return out;
}

void save_parameter_arrays(const std::vector<NamedParam>& params,
                           const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open parameter file for writing: " + path.string());
  os.write(kMagic, 8);
  write_u32(os, kCheckpointVersion);
  write_u64(os, 0);
  write_string(os, "{}");
  write_u64(os, params.size());
  for (const NamedParam& p : params) {
    write_string(os, p.name);
    write_tensor(os, p.var->value);
  }
  os.write(kMagic, 8);
  if (!os) throw IoError("failed writing parameter file: " + path.string());
}

}  // namespace xsdepth
