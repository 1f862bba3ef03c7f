#include "objcap/models.hpp"

#include <algorithm>
#include <stdexcept>

#include "objcap/init.hpp"
#include "objcap/ops.hpp"

namespace objcap {

std::string_view variant_name(Variant v) {
  switch (v) {
    case Variant::m1: return "m1";
    case Variant::m2: return "m2";
    case Variant::m3: return "m3";
  }
  return "?";
}

Variant parse_variant(std::string_view name) {
  if (name == "m1" || name == "M1") return Variant::m1;
  if (name == "m2" || name == "M2") return Variant::m2;
  if (name == "m3" || name == "M3") return Variant::m3;
  throw ValidationError("unknown model variant '" + std::string(name) + "'");
}

ModelConfig ModelConfig::defaults(Variant variant, std::size_t vocab_size) {
  ModelConfig c;
  c.variant = variant;
  c.vocab_size = vocab_size;
  switch (variant) {
    case Variant::m1:
      c.visual_dim = 4096;
      c.decoder_hidden = 1000;
      break;
    case Variant::m2:
      c.visual_dim = 2048;
      c.decoder_hidden = 256;
      break;
    case Variant::m3:
      c.visual_dim = 4096;
      c.decoder_hidden = 256;
      break;
  }
  return c;
}

std::size_t ModelConfig::encoding_dim() const {
  return variant == Variant::m3 ? reduced_dim + label_embed_dim : reduced_dim;
}

std::size_t ModelConfig::head_input_dim() const {
  return variant == Variant::m2 ? 2 * decoder_hidden : decoder_hidden;
}

void ModelConfig::validate() const {
  auto positive = [](std::size_t v, const char* name) {
    if (v == 0) throw ValidationError(std::string("model config: ") + name + " must be positive");
  };
  positive(visual_dim, "visual_dim");
  positive(reduced_dim, "reduced_dim");
  positive(text_embed_dim, "text_embed_dim");
  positive(decoder_hidden, "decoder_hidden");
  positive(vocab_size, "vocab_size");
  positive(max_caption_len, "max_caption_len");
  if (vocab_size < Vocabulary::kReserved) {
    throw ValidationError("model config: vocab_size must cover the 4 reserved tokens");
  }
  if (variant != Variant::m3) positive(lang_hidden, "lang_hidden");
  if (variant == Variant::m3) {
    positive(label_embed_dim, "label_embed_dim");
    positive(max_objects, "max_objects");
  }
}

Model Model::build(const ModelConfig& config) {
  config.validate();
  Model m;
  m.config_ = config;
  const auto seed = [&](std::uint64_t component) { return derive_seed(config.rng_seed, component); };

  m.reduce = DenseParams::create(config.visual_dim, config.reduced_dim, seed(0));
  m.word_embedding = EmbeddingTable::create(config.vocab_size, config.text_embed_dim, seed(1));
  const std::size_t enc = config.encoding_dim();
  switch (config.variant) {
    case Variant::m1:
      m.language = LstmParams::create(config.text_embed_dim, config.lang_hidden, seed(2));
      m.decoder = LstmParams::create(enc + config.lang_hidden, config.decoder_hidden, seed(3));
      break;
    case Variant::m2:
      m.language = LstmParams::create(config.text_embed_dim, config.lang_hidden, seed(2));
      m.decoder = LstmParams::create(enc + config.lang_hidden, config.decoder_hidden, seed(3));
      m.decoder_backward =
          LstmParams::create(enc + config.lang_hidden, config.decoder_hidden, seed(4));
      break;
    case Variant::m3:
      m.decoder = LstmParams::create(enc + config.text_embed_dim, config.decoder_hidden, seed(3));
      for (std::uint64_t k = 0; k < 3; ++k) {
        m.object_conv.push_back(seeded_init(InitKind::uniform_glorot, {enc, enc}, seed(5 + k)));
      }
      m.object_conv_bias = seeded_init(InitKind::zeros, {enc}, seed(8));
      m.set_label_table({}, Matrix::Zero(1, static_cast<Eigen::Index>(config.label_embed_dim)));
      break;
  }
  m.head = DenseParams::create(config.head_input_dim(), config.vocab_size, seed(9));
  return m;
}

std::vector<NamedParameter> Model::parameters() const {
  std::vector<NamedParameter> out;
  auto add_dense = [&](const std::string& prefix, const DenseParams& p) {
    out.push_back({prefix + ".weight", p.weight});
    out.push_back({prefix + ".bias", p.bias});
  };
  auto add_lstm = [&](const std::string& prefix, const LstmParams& p) {
    out.push_back({prefix + ".input_weight", p.input_weight});
    out.push_back({prefix + ".recurrent_weight", p.recurrent_weight});
    out.push_back({prefix + ".bias", p.bias});
  };
  add_dense("reduce", reduce);
  out.push_back({"word_embedding", word_embedding.table});
  switch (config_.variant) {
    case Variant::m1:
      add_lstm("language", language);
      add_lstm("decoder", decoder);
      break;
    case Variant::m2:
      add_lstm("language", language);
      add_lstm("decoder_forward", decoder);
      add_lstm("decoder_backward", decoder_backward);
      break;
    case Variant::m3:
      out.push_back({"object_conv.kernel_prev", object_conv[0]});
      out.push_back({"object_conv.kernel_center", object_conv[1]});
      out.push_back({"object_conv.kernel_next", object_conv[2]});
      out.push_back({"object_conv.bias", object_conv_bias});
      add_lstm("decoder", decoder);
      break;
  }
  add_dense("head", head);
  return out;
}

std::size_t Model::parameter_count() const {
  std::size_t n = 0;
  for (const auto& p : parameters()) n += p.tensor.size();
  return n;
}

Tensor Model::parameter(std::string_view name) const {
  if (name == "label_embedding" && config_.variant == Variant::m3) return label_table_.table;
  for (auto& p : parameters()) {
    if (p.name == name) return p.tensor;
  }
  throw std::out_of_range("model has no parameter '" + std::string(name) + "'");
}

void Model::set_label_table(std::vector<std::string> labels, const GloveTable& glove) {
  const auto dim = static_cast<Eigen::Index>(config_.label_embed_dim);
  if (glove.dim() != config_.label_embed_dim) {
    throw ValidationError("GLOVE dimension " + std::to_string(glove.dim()) +
                          " does not match label_embed_dim " +
                          std::to_string(config_.label_embed_dim));
  }
  Matrix rows = Matrix::Zero(static_cast<Eigen::Index>(labels.size()) + 1, dim);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const auto v = glove.lookup(labels[i]);
    for (Eigen::Index c = 0; c < dim; ++c) rows(static_cast<Eigen::Index>(i) + 1, c) = v[c];
  }
  set_label_table(std::move(labels), std::move(rows));
}

void Model::set_label_table(std::vector<std::string> labels, Matrix rows) {
  if (rows.rows() != static_cast<Eigen::Index>(labels.size()) + 1 ||
      rows.cols() != static_cast<Eigen::Index>(config_.label_embed_dim)) {
    throw DimensionError("label table must be (labels + 1) x label_embed_dim");
  }
  rows.row(0).setZero();
  labels_ = std::move(labels);
  label_table_ = EmbeddingTable::frozen(std::move(rows));
}

std::size_t Model::label_index(std::string_view label) const {
  auto it = std::find(labels_.begin(), labels_.end(), label);
  return it == labels_.end() ? 0 : static_cast<std::size_t>(it - labels_.begin()) + 1;
}

Example make_example(const Model& model, const ImageRecord& record, const Vocabulary& vocab,
                     std::optional<std::size_t> caption_index) {
  const auto& cfg = model.config();
  Example ex;
  ex.id = record.id;
  for (const auto& o : record.objects) {
    if (o.feature.size() != cfg.visual_dim) {
      throw ValidationError("record '" + record.id + "': feature length " +
                            std::to_string(o.feature.size()) + " but model expects " +
                            std::to_string(cfg.visual_dim));
    }
  }
  if (cfg.variant == Variant::m3) {
    if (record.objects.empty()) {
      throw ValidationError("record '" + record.id + "' has no objects to encode");
    }
    for (const auto& o : record.objects) {
      ex.objects.push_back(ObjectInput{
          Eigen::Map<const RowVector>(o.feature.data(), static_cast<Eigen::Index>(o.feature.size())),
          model.label_index(o.label), o.distance});
    }
  } else {
    if (record.objects.empty()) {
      throw ValidationError("record '" + record.id + "' has no features for an image descriptor");
    }
    RowVector mean = RowVector::Zero(static_cast<Eigen::Index>(cfg.visual_dim));
    for (const auto& o : record.objects) {
      mean += Eigen::Map<const RowVector>(o.feature.data(), mean.size());
    }
    ex.image_feature = mean / static_cast<double>(record.objects.size());
  }
  if (caption_index) {
    auto idx = encode_caption(vocab, tokenize(record.captions.at(*caption_index)),
                              cfg.max_caption_len + 1);
    while (!idx.empty() && idx.back() == Vocabulary::kPad) idx.pop_back();
    ex.caption = std::move(idx);
  }
  return ex;
}

Tensor encode_objects_m3(Tape& tape, const Model& model, std::span<const ObjectInput> objects) {
  const auto& cfg = model.config();
  if (cfg.variant != Variant::m3) throw ValidationError("object encoder belongs to variant m3");
  if (objects.empty()) throw ValidationError("object encoder needs at least one object");
  if (objects.size() > cfg.max_objects) {
    throw ValidationError(std::to_string(objects.size()) + " objects exceed max_objects " +
                          std::to_string(cfg.max_objects));
  }

  std::vector<const ObjectInput*> order;
  for (const auto& o : objects) order.push_back(&o);
  std::stable_sort(order.begin(), order.end(), [](const ObjectInput* a, const ObjectInput* b) {
    if (a->distance != b->distance) return a->distance < b->distance;
    if (a->label != b->label) return a->label < b->label;
    return std::lexicographical_compare(a->feature.begin(), a->feature.end(), b->feature.begin(),
                                        b->feature.end());
  });

  const auto n = static_cast<Eigen::Index>(order.size());
  const auto slots = static_cast<Eigen::Index>(cfg.max_objects);
  Matrix features(n, static_cast<Eigen::Index>(cfg.visual_dim));
  for (Eigen::Index i = 0; i < n; ++i) {
    if (order[i]->feature.size() != features.cols()) {
      throw DimensionError("object feature length " + std::to_string(order[i]->feature.size()) +
                           " does not match visual_dim " + std::to_string(cfg.visual_dim));
    }
    features.row(i) = order[i]->feature;
  }

  Tensor reduced = dense(tape, model.reduce, Tensor(std::move(features)));
  std::vector<Tensor> label_rows;
  for (const auto* o : order) label_rows.push_back(embed(tape, model.label_table(), o->label));
  Tensor fused = concat(tape, {reduced, concat(tape, label_rows, 0)}, 1);
  if (n < slots) {
    fused = concat(tape, {fused, Tensor::zeros({static_cast<std::size_t>(slots - n), cfg.encoding_dim()})}, 0);
  }

  // Same-padded width-3 convolution along the object axis: row t sees t-1, t, t+1.
  Tensor mixed = matmul(tape, shift_rows(tape, fused, 1), model.object_conv[0]);
  mixed = add(tape, mixed, matmul(tape, fused, model.object_conv[1]));
  mixed = add(tape, mixed, matmul(tape, shift_rows(tape, fused, -1), model.object_conv[2]));
  mixed = add_rowvector(tape, mixed, model.object_conv_bias);

  Matrix mask = Matrix::Zero(1, slots);
  mask.leftCols(n).setConstant(1.0 / static_cast<double>(n));
  return matmul(tape, Tensor(std::move(mask)), mixed);
}

Tensor encode(Tape& tape, const Model& model, const Example& example) {
  const auto& cfg = model.config();
  if (cfg.variant == Variant::m3) {
    if (example.objects.empty()) {
      throw ValidationError("example '" + example.id + "' has no objects but the model is m3");
    }
    return encode_objects_m3(tape, model, example.objects);
  }
  if (!example.image_feature) {
    throw ValidationError("example '" + example.id + "' lacks an image feature required by " +
                          std::string(variant_name(cfg.variant)));
  }
  return dense(tape, model.reduce, Tensor(Matrix(*example.image_feature)));
}

Tensor forward_teacher_forced(Tape& tape, const Model& model, const Example& example) {
  const auto& cfg = model.config();
  if (example.caption.size() < 2) {
    throw ValidationError("example '" + example.id + "' needs at least <start> and one target");
  }
  if (example.caption.size() - 1 > cfg.max_caption_len) {
    throw ValidationError("example '" + example.id + "' caption exceeds max_caption_len");
  }
  const Tensor encoding = encode(tape, model, example);
  const std::size_t steps = example.caption.size() - 1;

  std::vector<Tensor> words;
  words.reserve(steps);
  for (std::size_t t = 0; t < steps; ++t) {
    words.push_back(embed(tape, model.word_embedding, example.caption[t]));
  }

  std::vector<Tensor> text = words;
  if (cfg.variant != Variant::m3) {
    text = lstm_unroll(tape, model.language, words, LstmState::zeros(cfg.lang_hidden));
  }
  std::vector<Tensor> inputs;
  inputs.reserve(steps);
  for (const auto& w : text) inputs.push_back(concat(tape, {encoding, w}, 1));

  std::vector<Tensor> hidden =
      cfg.variant == Variant::m2
          ? bilstm(tape, model.decoder, model.decoder_backward, inputs)
          : lstm_unroll(tape, model.decoder, inputs, LstmState::zeros(cfg.decoder_hidden));
  const Tensor stacked = hidden.size() == 1 ? hidden[0] : concat(tape, hidden, 0);
  return vocab_head(tape, model.head, stacked);
}

Tensor caption_loss(Tape& tape, const Model& model, const Example& example) {
  Tensor logits = forward_teacher_forced(tape, model, example);
  std::vector<std::size_t> targets(example.caption.begin() + 1, example.caption.end());
  return cross_entropy_rows(tape, logits, targets);
}

}  // namespace objcap
