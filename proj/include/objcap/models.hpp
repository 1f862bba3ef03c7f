#ifndef OBJCAP_MODELS_HPP
#define OBJCAP_MODELS_HPP

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "objcap/data.hpp"
#include "objcap/layers.hpp"
#include "objcap/tensor.hpp"

namespace objcap {

/// The three encoder-decoder arrangements.
///
///  m1: whole-image feature -> dense reduction; caption words -> embedding ->
///      language LSTM; decoder LSTM over concat(reduced image, language state).
///  m2: as m1, but the decoder is a bidirectional LSTM whose two directions
///      are concatenated before the vocabulary head.
///  m3: per-object features reduced and concatenated with frozen label word
///      vectors, mixed across objects by a width-3 convolution, mean-pooled;
///      decoder LSTM over concat(pooled encoding, word embedding).
enum class Variant { m1, m2, m3 };

std::string_view variant_name(Variant v);
Variant parse_variant(std::string_view name);

struct ModelConfig {
  Variant variant = Variant::m3;
  std::size_t visual_dim = 4096;
  std::size_t reduced_dim = 128;
  std::size_t text_embed_dim = 256;
  std::size_t lang_hidden = 256;
  std::size_t decoder_hidden = 256;
  std::size_t label_embed_dim = 50;
  std::size_t max_objects = 8;
  std::size_t vocab_size = 0;
  std::size_t max_caption_len = 16;
  std::uint64_t rng_seed = 1;

  /// Dimensions stated for each architecture: m1 reduces 4096 -> 128 and
  /// decodes with 1000 units, m2 reduces 2048 -> 128 and decodes with 256
  /// units per direction, m3 reduces AlexNet FC features (4096) and decodes
  /// with 256 units.
  static ModelConfig defaults(Variant variant, std::size_t vocab_size);

  /// Width of the vector that conditions every decoder step.
  std::size_t encoding_dim() const;
  /// Width of the decoder output fed to the vocabulary head.
  std::size_t head_input_dim() const;

  void validate() const;
};

struct NamedParameter {
  std::string name;
  Tensor tensor;
};

/// One object as the m3 encoder sees it.
struct ObjectInput {
  RowVector feature;
  std::size_t label = 0;  // row of the label table; 0 is the unknown label
  double distance = 0;
};

/// Model input for one image. m1/m2 read image_feature, m3 reads objects.
/// caption holds <start> ... <end> without padding.
struct Example {
  std::string id;
  std::optional<RowVector> image_feature;
  std::vector<ObjectInput> objects;
  std::vector<std::size_t> caption;
};

class Model {
 public:
  static Model build(const ModelConfig& config);

  const ModelConfig& config() const { return config_; }

  /// Trainable parameters in a stable order with stable names.
  std::vector<NamedParameter> parameters() const;
  std::size_t parameter_count() const;
  /// Looks up a trainable or frozen tensor by name; throws if absent.
  Tensor parameter(std::string_view name) const;

  /// Installs the frozen label table (m3). Row 0 is reserved for unknown
  /// labels and is forced to zero; row i + 1 holds labels[i].
  void set_label_table(std::vector<std::string> labels, const GloveTable& glove);
  void set_label_table(std::vector<std::string> labels, Matrix rows);
  const std::vector<std::string>& labels() const { return labels_; }
  const EmbeddingTable& label_table() const { return label_table_; }
  std::size_t label_index(std::string_view label) const;

  // Components are public to keep layer-level tests direct.
  DenseParams reduce;
  EmbeddingTable word_embedding;
  LstmParams language;          // m1, m2
  LstmParams decoder;           // m1, m3; forward direction for m2
  LstmParams decoder_backward;  // m2
  std::vector<Tensor> object_conv;  // m3: kernels for offsets -1, 0, +1
  Tensor object_conv_bias;          // m3
  DenseParams head;

 private:
  ModelConfig config_;
  std::vector<std::string> labels_;
  EmbeddingTable label_table_;
};

/// Converts a record into model input. m1/m2 use the mean object feature as
/// the image descriptor. caption_index selects which reference is encoded;
/// nullopt leaves the caption empty (inference).
Example make_example(const Model& model, const ImageRecord& record, const Vocabulary& vocab,
                     std::optional<std::size_t> caption_index);

/// Joint object encoding (1 x (reduced_dim + label_embed_dim)).
Tensor encode_objects_m3(Tape& tape, const Model& model, std::span<const ObjectInput> objects);

/// Conditioning vector for any variant.
Tensor encode(Tape& tape, const Model& model, const Example& example);

/// T x vocab_size logits for a caption of T + 1 tokens; row t predicts caption[t + 1].
Tensor forward_teacher_forced(Tape& tape, const Model& model, const Example& example);

/// Summed cross-entropy over the caption's predicted tokens.
Tensor caption_loss(Tape& tape, const Model& model, const Example& example);

}  // namespace objcap

#endif  // OBJCAP_MODELS_HPP
