#pragma once

#include <filesystem>
#include <map>
#include <string>

#include "xsdepth/networks.hpp"

namespace xsdepth {

// Binary checkpoint container: magic + format version, NetworkConfig (JSON),
// training step counter, and every named parameter array. Round trips are
// bit exact. Loads of truncated or version-mismatched files throw
// CheckpointError naming the offending field.

inline constexpr uint32_t kCheckpointVersion = 1;

void save_checkpoint(const NetworkBundle& bundle, long step, const std::filesystem::path& path);

struct LoadedCheckpoint {
  NetworkBundle bundle;
  long step = 0;
};

LoadedCheckpoint load_checkpoint(const std::filesystem::path& path);

// Raw named-array container used for pretrained encoder weights (same binary
// format as checkpoints; config and step are ignored on read). Encoder files
// name their arrays with the generic "encoder." prefix.
std::map<std::string, Tensor> read_parameter_arrays(const std::filesystem::path& path);
void save_parameter_arrays(const std::vector<NamedParam>& params,
                           const std::filesystem::path& path);

// JSON (de)serialization of the network configuration, shared by checkpoints
// and the CLI run config.
std::string network_config_to_json(const NetworkConfig& cfg);
NetworkConfig network_config_from_json(const std::string& json_text);

}  // namespace xsdepth
