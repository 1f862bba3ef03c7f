#ifndef OBJCAP_DATA_HPP
#define OBJCAP_DATA_HPP

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace objcap {

/// Malformed or inconsistent input data. Messages carry file and line context
/// when the data came from a file.
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr std::size_t kCaptionsPerImage = 5;
inline constexpr double kDistanceTolerance = 1e-6;

/// Pixel box; (x, y) is the top-left corner.
struct BoundingBox {
  double x = 0;
  double y = 0;
  double w = 0;
  double h = 0;
};

/// Euclidean distance of the box center from the image origin (0, 0).
double center_distance(const BoundingBox& box);

struct ObjectInstance {
  std::string label;
  std::vector<double> feature;
  BoundingBox bbox;
  double distance = 0;
};

struct ImageRecord {
  std::string id;
  std::size_t num_objects = 0;
  std::vector<ObjectInstance> objects;
  std::vector<std::string> captions;
};

/// Throws ValidationError naming the record id. When expected_feature_dim is
/// set every object feature must have that length.
void validate_record(const ImageRecord& record,
                     std::optional<std::size_t> expected_feature_dim = std::nullopt);

// JSON-lines records: one object per line with keys id, num_objects,
// objects[{label, feature, bbox:[x,y,w,h], distance}], captions.
std::vector<ImageRecord> read_records(std::istream& in, std::string_view source = "<stream>");
std::vector<ImageRecord> load_records(const std::filesystem::path& path);
void write_records(std::ostream& out, const std::vector<ImageRecord>& records);
void save_records(const std::filesystem::path& path, const std::vector<ImageRecord>& records);

/// Lowercase, split on whitespace, trim .,!?;:"() from token edges, drop empties.
std::vector<std::string> tokenize(std::string_view caption);

/// Token <-> index mapping. Indices 0..3 are reserved for <pad>, <start>,
/// <end> and <unk>.
class Vocabulary {
 public:
  static constexpr std::size_t kPad = 0;
  static constexpr std::size_t kStart = 1;
  static constexpr std::size_t kEnd = 2;
  static constexpr std::size_t kUnk = 3;
  static constexpr std::size_t kReserved = 4;

  Vocabulary();
  /// Rebuilds from a full token list whose first four entries are the reserved tokens.
  static Vocabulary from_tokens(std::vector<std::string> tokens);

  std::size_t size() const { return tokens_.size(); }
  std::size_t index(std::string_view token) const;
  bool contains(std::string_view token) const;
  const std::string& token(std::size_t index) const;
  const std::vector<std::string>& tokens() const { return tokens_; }

  /// 64-bit FNV-1a over the ordered token list, as 16 hex digits.
  std::string hash() const;

  void add(const std::string& token);

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, std::size_t> lookup_;
};

/// Counts tokens over every caption; keeps tokens seen at least min_count
/// times, ordered by descending frequency then ascending spelling.
Vocabulary build_vocab(const std::vector<ImageRecord>& records, std::size_t min_count);

/// <start> tokens <end>, truncated so <end> is always kept, then <pad>-filled to max_len.
std::vector<std::size_t> encode_caption(const Vocabulary& vocab,
                                        const std::vector<std::string>& tokens,
                                        std::size_t max_len);

/// Inverse of encode_caption: skips <start>, stops at <end>, drops <pad>.
std::vector<std::string> decode_caption(const Vocabulary& vocab,
                                        const std::vector<std::size_t>& indices);

/// Word vectors in the plain text format `word v1 v2 ... vd`.
class GloveTable {
 public:
  GloveTable() = default;
  explicit GloveTable(std::size_t dim) : dim_(dim) {}

  std::size_t dim() const { return dim_; }
  std::size_t size() const { return words_.size(); }
  bool contains(std::string_view word) const;
  /// Unknown words map to the zero vector.
  std::vector<double> lookup(std::string_view word) const;
  void insert(const std::string& word, std::vector<double> vector);
  const std::vector<std::string>& words() const { return words_; }

  std::string hash() const;

 private:
  std::size_t dim_ = 0;
  std::vector<std::string> words_;
  std::unordered_map<std::string, std::vector<double>> vectors_;
};

GloveTable read_glove(std::istream& in, std::string_view source = "<stream>");
GloveTable load_glove(const std::filesystem::path& path);
void write_glove(std::ostream& out, const GloveTable& table);
void save_glove(const std::filesystem::path& path, const GloveTable& table);

struct SplitSizes {
  std::size_t train = 12000;
  std::size_t val = 6000;
  std::size_t test = 1000;
};

struct DatasetSplit {
  std::vector<ImageRecord> train;
  std::vector<ImageRecord> val;
  std::vector<ImageRecord> test;
};

/// Seeded shuffle, then the full corpus partitioned in the 12000:6000:1000
/// ratio (at least one record per split).
DatasetSplit split_dataset(std::vector<ImageRecord> records, std::uint64_t seed);

/// Seeded shuffle, then exactly sizes.train/val/test records; any remainder is dropped.
DatasetSplit split_dataset(std::vector<ImageRecord> records, std::uint64_t seed,
                           const SplitSizes& sizes);

/// Objects in canonical order: ascending distance, ties broken by label then feature.
std::vector<ObjectInstance> sorted_by_distance(std::vector<ObjectInstance> objects);

struct CocoConversion {
  std::vector<ImageRecord> records;
  std::size_t skipped_few_captions = 0;
  std::size_t skipped_no_features = 0;
};

/// Joins an MSCOCO-style caption file ({"images": [...], "annotations": [...]})
/// with a JSON-lines feature file keyed by image_id. Distances are derived
/// from the boxes. Images with fewer than five captions or no features are skipped.
CocoConversion convert_coco(const std::filesystem::path& captions_json,
                            const std::filesystem::path& features_jsonl);

}  // namespace objcap

#endif  // OBJCAP_DATA_HPP
