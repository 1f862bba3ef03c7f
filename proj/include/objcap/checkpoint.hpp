#ifndef OBJCAP_CHECKPOINT_HPP
#define OBJCAP_CHECKPOINT_HPP

#include <filesystem>
#include <string>

#include "objcap/data.hpp"
#include "objcap/models.hpp"

namespace objcap {

inline constexpr int kCheckpointFormatVersion = 1;

/// Everything needed to reproduce inference: configuration, vocabulary,
/// every parameter array (including the frozen label table for m3) and
/// provenance hashes.
struct Checkpoint {
  Model model;
  Vocabulary vocab;
  std::string glove_hash;    // m3 only
  std::string records_path;  // dataset the model was trained from
};

/// Single JSON document; parameters are decimal arrays written with the
/// shortest representation that parses back to the same double.
std::string checkpoint_to_json(const Checkpoint& ckpt);
/// Throws ValidationError on version, hash or shape inconsistencies.
Checkpoint checkpoint_from_json(const std::string& text);

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace objcap

#endif  // OBJCAP_CHECKPOINT_HPP
