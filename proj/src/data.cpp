#include "objcap/data.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>

#include <json.hpp>

namespace objcap {

using nlohmann::json;

namespace {

constexpr std::uint64_t kFnvOffset = 0xcbf29ce484222325ULL;
constexpr std::uint64_t kFnvPrime = 0x100000001b3ULL;

void fnv_mix(std::uint64_t& h, std::string_view bytes) {
  for (unsigned char c : bytes) {
    h ^= c;
    h *= kFnvPrime;
  }
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

std::string format_double(double v) {
  char buf[32];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

std::ifstream open_input(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open " + path.string());
  return in;
}

std::ofstream open_output(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot write " + path.string());
  return out;
}

ObjectInstance object_from_json(const json& j) {
  ObjectInstance o;
  o.label = j.at("label").get<std::string>();
  o.feature = j.at("feature").get<std::vector<double>>();
  const auto box = j.at("bbox").get<std::vector<double>>();
  if (box.size() != 4) throw ValidationError("bbox must have 4 entries [x, y, w, h]");
  o.bbox = {box[0], box[1], box[2], box[3]};
  o.distance = j.at("distance").get<double>();
  return o;
}

ImageRecord record_from_json(const json& j) {
  ImageRecord r;
  r.id = j.at("id").get<std::string>();
  r.num_objects = j.at("num_objects").get<std::size_t>();
  for (const auto& o : j.at("objects")) r.objects.push_back(object_from_json(o));
  r.captions = j.at("captions").get<std::vector<std::string>>();
  return r;
}

json record_to_json(const ImageRecord& r) {
  json objects = json::array();
  for (const auto& o : r.objects) {
    objects.push_back({{"label", o.label},
                       {"feature", o.feature},
                       {"bbox", {o.bbox.x, o.bbox.y, o.bbox.w, o.bbox.h}},
                       {"distance", o.distance}});
  }
  return {{"id", r.id}, {"num_objects", r.num_objects}, {"objects", objects},
          {"captions", r.captions}};
}

bool is_edge_punct(char c) { return std::strchr(".,!?;:\"()", c) != nullptr && c != '\0'; }

}  // namespace

double center_distance(const BoundingBox& box) {
  return std::hypot(box.x + box.w / 2.0, box.y + box.h / 2.0);
}

void validate_record(const ImageRecord& r, std::optional<std::size_t> expected_feature_dim) {
  const std::string who = "record '" + r.id + "'";
  if (r.id.empty()) throw ValidationError("record with empty id");
  if (r.num_objects != r.objects.size()) {
    throw ValidationError(who + ": num_objects is " + std::to_string(r.num_objects) + " but " +
                          std::to_string(r.objects.size()) + " objects are listed");
  }
  if (r.captions.size() != kCaptionsPerImage) {
    throw ValidationError(who + ": expected " + std::to_string(kCaptionsPerImage) +
                          " captions, found " + std::to_string(r.captions.size()));
  }
  std::optional<std::size_t> dim = expected_feature_dim;
  for (std::size_t i = 0; i < r.objects.size(); ++i) {
    const auto& o = r.objects[i];
    const std::string obj = who + " object " + std::to_string(i);
    if (o.label.empty()) throw ValidationError(obj + ": empty label");
    if (o.feature.empty()) throw ValidationError(obj + ": empty feature vector");
    if (!dim) dim = o.feature.size();
    if (o.feature.size() != *dim) {
      throw ValidationError(obj + ": feature length " + std::to_string(o.feature.size()) +
                            " differs from expected " + std::to_string(*dim));
    }
    if (!std::all_of(o.feature.begin(), o.feature.end(), [](double v) { return std::isfinite(v); })) {
      throw ValidationError(obj + ": non-finite feature value");
    }
    const auto& b = o.bbox;
    if (!(b.x >= 0 && b.y >= 0 && b.w > 0 && b.h > 0)) {
      throw ValidationError(obj + ": bbox needs x, y >= 0 and w, h > 0");
    }
    if (!(o.distance >= 0) || std::abs(o.distance - center_distance(b)) > kDistanceTolerance) {
      throw ValidationError(obj + ": distance " + format_double(o.distance) +
                            " inconsistent with bbox center distance " +
                            format_double(center_distance(b)));
    }
  }
}

std::vector<ImageRecord> read_records(std::istream& in, std::string_view source) {
  std::vector<ImageRecord> records;
  std::optional<std::size_t> dim;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (std::all_of(line.begin(), line.end(), [](unsigned char c) { return std::isspace(c); })) {
      continue;
    }
    const std::string where = std::string(source) + ":" + std::to_string(line_no) + ": ";
    try {
      ImageRecord r = record_from_json(json::parse(line));
      validate_record(r, dim);
      if (!dim && !r.objects.empty()) dim = r.objects.front().feature.size();
      records.push_back(std::move(r));
    } catch (const json::exception& e) {
      throw ValidationError(where + e.what());
    } catch (const ValidationError& e) {
      throw ValidationError(where + e.what());
    }
  }
  return records;
}

std::vector<ImageRecord> load_records(const std::filesystem::path& path) {
  auto in = open_input(path);
  return read_records(in, path.string());
}

void write_records(std::ostream& out, const std::vector<ImageRecord>& records) {
  for (const auto& r : records) out << record_to_json(r).dump() << '\n';
}

void save_records(const std::filesystem::path& path, const std::vector<ImageRecord>& records) {
  auto out = open_output(path);
  write_records(out, records);
}

std::vector<std::string> tokenize(std::string_view caption) {
  std::vector<std::string> tokens;
  std::string current;
  auto flush = [&] {
    std::size_t b = 0;
    std::size_t e = current.size();
    while (b < e && is_edge_punct(current[b])) ++b;
    while (e > b && is_edge_punct(current[e - 1])) --e;
    if (e > b) tokens.push_back(current.substr(b, e - b));
    current.clear();
  };
  for (char ch : caption) {
    const auto c = static_cast<unsigned char>(ch);
    if (std::isspace(c)) {
      flush();
    } else {
      current.push_back(static_cast<char>(std::tolower(c)));
    }
  }
  flush();
  return tokens;
}

Vocabulary::Vocabulary() {
  for (const char* t : {"<pad>", "<start>", "<end>", "<unk>"}) add(t);
}

Vocabulary Vocabulary::from_tokens(std::vector<std::string> tokens) {
  Vocabulary v;
  if (tokens.size() < kReserved) throw ValidationError("vocabulary lacks reserved tokens");
  for (std::size_t i = 0; i < kReserved; ++i) {
    if (tokens[i] != v.tokens_[i]) {
      throw ValidationError("vocabulary reserved slot " + std::to_string(i) + " holds '" +
                            tokens[i] + "', expected '" + v.tokens_[i] + "'");
    }
  }
  for (std::size_t i = kReserved; i < tokens.size(); ++i) {
    if (v.contains(tokens[i])) throw ValidationError("duplicate vocabulary token '" + tokens[i] + "'");
    v.add(tokens[i]);
  }
  return v;
}

void Vocabulary::add(const std::string& token) {
  if (lookup_.count(token)) return;
  lookup_.emplace(token, tokens_.size());
  tokens_.push_back(token);
}

std::size_t Vocabulary::index(std::string_view token) const {
  auto it = lookup_.find(std::string(token));
  return it == lookup_.end() ? kUnk : it->second;
}

bool Vocabulary::contains(std::string_view token) const {
  return lookup_.count(std::string(token)) != 0;
}

const std::string& Vocabulary::token(std::size_t index) const {
  if (index >= tokens_.size()) {
    throw std::out_of_range("vocabulary index " + std::to_string(index) + " out of range");
  }
  return tokens_[index];
}

std::string Vocabulary::hash() const {
  std::uint64_t h = kFnvOffset;
  for (const auto& t : tokens_) {
    fnv_mix(h, t);
    fnv_mix(h, std::string_view("\n", 1));
  }
  return hex64(h);
}

Vocabulary build_vocab(const std::vector<ImageRecord>& records, std::size_t min_count) {
  if (min_count == 0) throw std::invalid_argument("build_vocab: min_count must be >= 1");
  std::map<std::string, std::size_t> counts;
  for (const auto& r : records) {
    for (const auto& c : r.captions) {
      for (auto& t : tokenize(c)) ++counts[t];
    }
  }
  std::vector<std::pair<std::string, std::size_t>> kept;
  for (auto& [tok, n] : counts) {
    if (n >= min_count) kept.emplace_back(tok, n);
  }
  std::stable_sort(kept.begin(), kept.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  Vocabulary v;
  for (auto& [tok, n] : kept) v.add(tok);
  return v;
}

std::vector<std::size_t> encode_caption(const Vocabulary& vocab,
                                        const std::vector<std::string>& tokens,
                                        std::size_t max_len) {
  if (max_len < 2) throw std::invalid_argument("encode_caption: max_len must be >= 2");
  std::vector<std::size_t> out;
  out.reserve(max_len);
  out.push_back(Vocabulary::kStart);
  const std::size_t words = std::min(tokens.size(), max_len - 2);
  for (std::size_t i = 0; i < words; ++i) out.push_back(vocab.index(tokens[i]));
  out.push_back(Vocabulary::kEnd);
  out.resize(max_len, Vocabulary::kPad);
  return out;
}

std::vector<std::string> decode_caption(const Vocabulary& vocab,
                                        const std::vector<std::size_t>& indices) {
  std::vector<std::string> words;
  for (std::size_t idx : indices) {
    if (idx == Vocabulary::kEnd) break;
    if (idx == Vocabulary::kStart || idx == Vocabulary::kPad) continue;
    words.push_back(vocab.token(idx));
  }
  return words;
}

bool GloveTable::contains(std::string_view word) const {
  return vectors_.count(std::string(word)) != 0;
}

std::vector<double> GloveTable::lookup(std::string_view word) const {
  auto it = vectors_.find(std::string(word));
  if (it == vectors_.end()) return std::vector<double>(dim_, 0.0);
  return it->second;
}

void GloveTable::insert(const std::string& word, std::vector<double> vector) {
  if (dim_ == 0) dim_ = vector.size();
  if (vector.size() != dim_) {
    throw ValidationError("word '" + word + "' has dimension " + std::to_string(vector.size()) +
                          ", table dimension is " + std::to_string(dim_));
  }
  auto [it, fresh] = vectors_.insert_or_assign(word, std::move(vector));
  if (fresh) words_.push_back(word);
}

std::string GloveTable::hash() const {
  std::uint64_t h = kFnvOffset;
  for (const auto& w : words_) {
    fnv_mix(h, w);
    for (double v : vectors_.at(w)) {
      fnv_mix(h, " ");
      fnv_mix(h, format_double(v));
    }
    fnv_mix(h, "\n");
  }
  return hex64(h);
}

GloveTable read_glove(std::istream& in, std::string_view source) {
  GloveTable table;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::istringstream fields(line);
    std::string word;
    if (!(fields >> word)) continue;
    std::vector<double> values;
    std::string tok;
    while (fields >> tok) {
      double v = 0;
      auto res = std::from_chars(tok.data(), tok.data() + tok.size(), v);
      if (res.ec != std::errc() || res.ptr != tok.data() + tok.size()) {
        throw ValidationError(std::string(source) + ":" + std::to_string(line_no) +
                              ": cannot parse value '" + tok + "'");
      }
      values.push_back(v);
    }
    if (values.empty() || (table.dim() != 0 && values.size() != table.dim())) {
      throw ValidationError(std::string(source) + ":" + std::to_string(line_no) + ": word '" +
                            word + "' has " + std::to_string(values.size()) +
                            " values, expected " + std::to_string(table.dim()));
    }
    table.insert(word, std::move(values));
  }
  return table;
}

GloveTable load_glove(const std::filesystem::path& path) {
  auto in = open_input(path);
  return read_glove(in, path.string());
}

void write_glove(std::ostream& out, const GloveTable& table) {
  for (const auto& w : table.words()) {
    out << w;
    for (double v : table.lookup(w)) out << ' ' << format_double(v);
    out << '\n';
  }
}

void save_glove(const std::filesystem::path& path, const GloveTable& table) {
  auto out = open_output(path);
  write_glove(out, table);
}

namespace {

void seeded_shuffle(std::vector<ImageRecord>& records, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  for (std::size_t i = records.size(); i > 1; --i) {
    std::uniform_int_distribution<std::size_t> pick(0, i - 1);
    std::swap(records[i - 1], records[pick(rng)]);
  }
}

DatasetSplit take(std::vector<ImageRecord>& records, const SplitSizes& s) {
  DatasetSplit out;
  auto it = std::make_move_iterator(records.begin());
  out.train.assign(it, it + static_cast<std::ptrdiff_t>(s.train));
  it += static_cast<std::ptrdiff_t>(s.train);
  out.val.assign(it, it + static_cast<std::ptrdiff_t>(s.val));
  it += static_cast<std::ptrdiff_t>(s.val);
  out.test.assign(it, it + static_cast<std::ptrdiff_t>(s.test));
  return out;
}

}  // namespace

DatasetSplit split_dataset(std::vector<ImageRecord> records, std::uint64_t seed) {
  const std::size_t n = records.size();
  if (n < 3) {
    throw ValidationError("corpus of " + std::to_string(n) + " records is too small for a 1/1/1 split");
  }
  const SplitSizes reference;
  const double total = static_cast<double>(reference.train + reference.val + reference.test);
  auto scaled = [&](std::size_t part) {
    return std::max<std::size_t>(1, static_cast<std::size_t>(
                                        std::llround(static_cast<double>(n) * part / total)));
  };
  SplitSizes s;
  s.test = scaled(reference.test);
  s.val = scaled(reference.val);
  if (s.test + s.val >= n) s.val = n - s.test - 1;
  s.train = n - s.val - s.test;
  seeded_shuffle(records, seed);
  return take(records, s);
}

DatasetSplit split_dataset(std::vector<ImageRecord> records, std::uint64_t seed,
                           const SplitSizes& sizes) {
  if (sizes.train == 0 || sizes.val == 0 || sizes.test == 0) {
    throw ValidationError("every split needs at least one record");
  }
  if (sizes.train + sizes.val + sizes.test > records.size()) {
    throw ValidationError("corpus of " + std::to_string(records.size()) +
                          " records is too small for split " + std::to_string(sizes.train) + "/" +
                          std::to_string(sizes.val) + "/" + std::to_string(sizes.test));
  }
  seeded_shuffle(records, seed);
  return take(records, sizes);
}

std::vector<ObjectInstance> sorted_by_distance(std::vector<ObjectInstance> objects) {
  std::stable_sort(objects.begin(), objects.end(), [](const auto& a, const auto& b) {
    if (a.distance != b.distance) return a.distance < b.distance;
    if (a.label != b.label) return a.label < b.label;
    return a.feature < b.feature;
  });
  return objects;
}

CocoConversion convert_coco(const std::filesystem::path& captions_json,
                            const std::filesystem::path& features_jsonl) {
  json coco;
  {
    auto in = open_input(captions_json);
    try {
      coco = json::parse(in);
    } catch (const json::exception& e) {
      throw ValidationError(captions_json.string() + ": " + e.what());
    }
  }

  auto key_of = [](const json& id) {
    return id.is_string() ? id.get<std::string>() : std::to_string(id.get<long long>());
  };

  std::map<std::string, std::vector<ObjectInstance>> features;
  {
    auto in = open_input(features_jsonl);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
      try {
        const json j = json::parse(line);
        std::vector<ObjectInstance> objs;
        for (const auto& o : j.at("objects")) {
          ObjectInstance inst;
          inst.label = o.at("label").get<std::string>();
          inst.feature = o.at("feature").get<std::vector<double>>();
          const auto box = o.at("bbox").get<std::vector<double>>();
          if (box.size() != 4) throw ValidationError("bbox must have 4 entries");
          inst.bbox = {box[0], box[1], box[2], box[3]};
          inst.distance = center_distance(inst.bbox);
          objs.push_back(std::move(inst));
        }
        features[key_of(j.at("image_id"))] = std::move(objs);
      } catch (const std::exception& e) {
        throw ValidationError(features_jsonl.string() + ":" + std::to_string(line_no) + ": " +
                              e.what());
      }
    }
  }

  CocoConversion out;
  try {
    std::map<std::string, std::string> names;  // image id -> record id
    std::vector<std::string> order;
    for (const auto& img : coco.at("images")) {
      const std::string key = key_of(img.at("id"));
      names[key] = img.contains("file_name") ? img.at("file_name").get<std::string>() : key;
      order.push_back(key);
    }
    std::map<std::string, std::vector<std::string>> captions;
    for (const auto& ann : coco.at("annotations")) {
      captions[key_of(ann.at("image_id"))].push_back(ann.at("caption").get<std::string>());
    }
    for (const auto& key : order) {
      auto& caps = captions[key];
      if (caps.size() < kCaptionsPerImage) {
        ++out.skipped_few_captions;
        continue;
      }
      auto f = features.find(key);
      if (f == features.end()) {
        ++out.skipped_no_features;
        continue;
      }
      ImageRecord r;
      r.id = names[key];
      r.objects = f->second;
      r.num_objects = r.objects.size();
      r.captions.assign(caps.begin(), caps.begin() + kCaptionsPerImage);
      validate_record(r);
      out.records.push_back(std::move(r));
    }
  } catch (const json::exception& e) {
    throw ValidationError(captions_json.string() + ": " + e.what());
  }
  return out;
}

}  // namespace objcap
