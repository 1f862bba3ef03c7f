#include "objcap/checkpoint.hpp"

#include <fstream>
#include <sstream>

#include <json.hpp>

namespace objcap {

using nlohmann::json;
using nlohmann::ordered_json;

namespace {

ordered_json config_to_json(const ModelConfig& c) {
  return {{"variant", std::string(variant_name(c.variant))},
          {"visual_dim", c.visual_dim},
          {"reduced_dim", c.reduced_dim},
          {"text_embed_dim", c.text_embed_dim},
          {"lang_hidden", c.lang_hidden},
          {"decoder_hidden", c.decoder_hidden},
          {"label_embed_dim", c.label_embed_dim},
          {"max_objects", c.max_objects},
          {"vocab_size", c.vocab_size},
          {"max_caption_len", c.max_caption_len},
          {"rng_seed", c.rng_seed}};
}

ModelConfig config_from_json(const json& j) {
  ModelConfig c;
  c.variant = parse_variant(j.at("variant").get<std::string>());
  c.visual_dim = j.at("visual_dim").get<std::size_t>();
  c.reduced_dim = j.at("reduced_dim").get<std::size_t>();
  c.text_embed_dim = j.at("text_embed_dim").get<std::size_t>();
  c.lang_hidden = j.at("lang_hidden").get<std::size_t>();
  c.decoder_hidden = j.at("decoder_hidden").get<std::size_t>();
  c.label_embed_dim = j.at("label_embed_dim").get<std::size_t>();
  c.max_objects = j.at("max_objects").get<std::size_t>();
  c.vocab_size = j.at("vocab_size").get<std::size_t>();
  c.max_caption_len = j.at("max_caption_len").get<std::size_t>();
  c.rng_seed = j.at("rng_seed").get<std::uint64_t>();
  return c;
}

ordered_json tensor_to_json(const std::string& name, const Tensor& t) {
  const Matrix& m = t.value();
  return {{"name", name},
          {"shape", t.shape()},
          {"data", std::vector<double>(m.data(), m.data() + m.size())}};
}

Matrix matrix_from_json(const json& j, const Tensor& like) {
  const auto shape = j.at("shape").get<Shape>();
  if (shape != like.shape()) {
    throw ValidationError("parameter '" + j.at("name").get<std::string>() + "' has shape " +
                          shape_string(shape) + ", config implies " + shape_string(like.shape()));
  }
  const auto data = j.at("data").get<std::vector<double>>();
  if (data.size() != like.size()) {
    throw ValidationError("parameter '" + j.at("name").get<std::string>() + "' has " +
                          std::to_string(data.size()) + " values for shape " + shape_string(shape));
  }
  Matrix m(like.rows(), like.cols());
  std::copy(data.begin(), data.end(), m.data());
  return m;
}

}  // namespace

std::string checkpoint_to_json(const Checkpoint& ckpt) {
  ordered_json doc;
  doc["format_version"] = kCheckpointFormatVersion;
  doc["config"] = config_to_json(ckpt.model.config());
  doc["vocabulary"] = {{"hash", ckpt.vocab.hash()}, {"tokens", ckpt.vocab.tokens()}};
  doc["records_path"] = ckpt.records_path;
  if (ckpt.model.config().variant == Variant::m3) {
    doc["labels"] = ckpt.model.labels();
    doc["glove_hash"] = ckpt.glove_hash;
  }
  ordered_json params = ordered_json::array();
  for (const auto& p : ckpt.model.parameters()) params.push_back(tensor_to_json(p.name, p.tensor));
  if (ckpt.model.config().variant == Variant::m3) {
    params.push_back(tensor_to_json("label_embedding", ckpt.model.label_table().table));
  }
  doc["parameters"] = std::move(params);
  return doc.dump() + "\n";
}

Checkpoint checkpoint_from_json(const std::string& text) {
  try {
    const json doc = json::parse(text);
    const int version = doc.at("format_version").get<int>();
    if (version != kCheckpointFormatVersion) {
      throw ValidationError("unsupported checkpoint format version " + std::to_string(version));
    }
    const ModelConfig config = config_from_json(doc.at("config"));
    Vocabulary vocab =
        Vocabulary::from_tokens(doc.at("vocabulary").at("tokens").get<std::vector<std::string>>());
    const auto stored_hash = doc.at("vocabulary").at("hash").get<std::string>();
    if (vocab.hash() != stored_hash) {
      throw ValidationError("vocabulary hash mismatch: checkpoint records " + stored_hash +
                            " but its token list hashes to " + vocab.hash());
    }
    if (vocab.size() != config.vocab_size) {
      throw ValidationError("vocabulary has " + std::to_string(vocab.size()) +
                            " tokens but config says " + std::to_string(config.vocab_size));
    }

    Checkpoint ckpt{Model::build(config), std::move(vocab), "", ""};
    ckpt.records_path = doc.value("records_path", std::string());

    std::map<std::string, const json*> stored;
    for (const auto& p : doc.at("parameters")) stored[p.at("name").get<std::string>()] = &p;

    if (config.variant == Variant::m3) {
      ckpt.glove_hash = doc.value("glove_hash", std::string());
      auto labels = doc.at("labels").get<std::vector<std::string>>();
      auto it = stored.find("label_embedding");
      if (it == stored.end()) throw ValidationError("checkpoint lacks label_embedding");
      const Tensor like =
          Tensor::zeros({labels.size() + 1, config.label_embed_dim});
      ckpt.model.set_label_table(std::move(labels), matrix_from_json(*it->second, like));
      stored.erase(it);
    }
    for (auto& p : ckpt.model.parameters()) {
      auto it = stored.find(p.name);
      if (it == stored.end()) throw ValidationError("checkpoint lacks parameter '" + p.name + "'");
      p.tensor.mutable_value() = matrix_from_json(*it->second, p.tensor);
      stored.erase(it);
    }
    if (!stored.empty()) {
      throw ValidationError("checkpoint has unexpected parameter '" + stored.begin()->first + "'");
    }
    return ckpt;
  } catch (const json::exception& e) {
    throw ValidationError(std::string("malformed checkpoint: ") + e.what());
  }
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot write " + path.string());
  out << checkpoint_to_json(ckpt);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open checkpoint " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return checkpoint_from_json(buf.str());
}

}  // namespace objcap
