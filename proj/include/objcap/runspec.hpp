#ifndef OBJCAP_RUNSPEC_HPP
#define OBJCAP_RUNSPEC_HPP

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

#include "objcap/data.hpp"
#include "objcap/models.hpp"
#include "objcap/train.hpp"

namespace objcap {

/// A training run described by one JSON file. Every key is optional except
/// "records" and "output_dir"; unknown keys are rejected. Relative paths are
/// resolved against the directory of the config file.
struct RunSpec {
  ModelConfig model;
  TrainConfig train;
  std::filesystem::path records;
  std::filesystem::path glove;  // required for m3
  std::filesystem::path output_dir;
  std::size_t min_count = 1;
  std::uint64_t split_seed = 0;
  std::optional<SplitSizes> split;  // default: paper ratio over the whole corpus
};

RunSpec parse_runspec(const std::string& json_text, const std::filesystem::path& base_dir);
RunSpec load_runspec(const std::filesystem::path& path);
std::string runspec_to_json(const RunSpec& spec);

}  // namespace objcap

#endif  // OBJCAP_RUNSPEC_HPP
