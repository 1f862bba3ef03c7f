#include <gtest/gtest.h>

#include <algorithm>
#include <map>
#include <set>

#include "objcap/decode.hpp"
#include "objcap/models.hpp"
#include "objcap/synth.hpp"
#include "test_util.hpp"

using namespace objcap;
using namespace objcap::testing;

namespace {

std::map<std::string, Shape> shapes_of(const Model& m) {
  std::map<std::string, Shape> out;
  for (const auto& p : m.parameters()) out[p.name] = p.tensor.shape();
  return out;
}

std::vector<Tensor> tensors_of(const Model& m) {
  std::vector<Tensor> out;
  for (const auto& p : m.parameters()) out.push_back(p.tensor);
  return out;
}

// Direct Eigen evaluation of the object encoder for already-sorted objects.
RowVector reference_object_encoding(const Model& m, const std::vector<ObjectInput>& sorted) {
  const auto n = static_cast<Eigen::Index>(sorted.size());
  const auto enc = static_cast<Eigen::Index>(m.config().encoding_dim());
  const auto red = static_cast<Eigen::Index>(m.config().reduced_dim);
  Matrix fused = Matrix::Zero(n, enc);
  for (Eigen::Index i = 0; i < n; ++i) {
    fused.row(i).head(red) =
        sorted[i].feature * m.reduce.weight.value() + RowVector(m.reduce.bias.value().row(0));
    fused.row(i).tail(enc - red) =
        m.label_table().table.value().row(static_cast<Eigen::Index>(sorted[i].label));
  }
  RowVector pooled = RowVector::Zero(enc);
  for (Eigen::Index t = 0; t < n; ++t) {
    RowVector row = fused.row(t) * m.object_conv[1].value() + RowVector(m.object_conv_bias.value().row(0));
    if (t > 0) row += fused.row(t - 1) * m.object_conv[0].value();
    if (t + 1 < n) row += fused.row(t + 1) * m.object_conv[2].value();
    pooled += row;
  }
  return pooled / static_cast<double>(n);
}

}  // namespace

TEST(ModelStructure, Model1Dimensions) {
  const Model m = Model::build(ModelConfig::defaults(Variant::m1, 30));
  auto s = shapes_of(m);
  EXPECT_EQ(s["reduce.weight"], (Shape{4096, 128}));
  EXPECT_EQ(s["decoder.recurrent_weight"], (Shape{1000, 4000}));
  EXPECT_EQ(s["decoder.input_weight"], (Shape{128 + 256, 4000}));
  EXPECT_EQ(s["head.weight"], (Shape{1000, 30}));
  EXPECT_EQ(s["word_embedding"], (Shape{30, 256}));
  EXPECT_EQ(s.count("decoder_backward.bias"), 0u);
}

TEST(ModelStructure, Model2Dimensions) {
  const Model m = Model::build(ModelConfig::defaults(Variant::m2, 30));
  auto s = shapes_of(m);
  EXPECT_EQ(s["reduce.weight"], (Shape{2048, 128}));
  EXPECT_EQ(s["decoder_forward.recurrent_weight"], (Shape{256, 1024}));
  EXPECT_EQ(s["decoder_backward.recurrent_weight"], (Shape{256, 1024}));
  EXPECT_EQ(s["head.weight"], (Shape{512, 30}));
}

TEST(ModelStructure, Model3Dimensions) {
  const Model m = Model::build(ModelConfig::defaults(Variant::m3, 30));
  auto s = shapes_of(m);
  EXPECT_EQ(s["reduce.weight"], (Shape{4096, 128}));
  EXPECT_EQ(s["object_conv.kernel_center"], (Shape{178, 178}));
  EXPECT_EQ(s["decoder.input_weight"], (Shape{178 + 256, 1024}));
  EXPECT_EQ(m.parameter("label_embedding").cols(), 50);
  EXPECT_EQ(m.config().encoding_dim(), 178u);
  EXPECT_EQ(s.count("language.bias"), 0u);
}

TEST(ModelStructure, NamesAreUniqueAndLookupWorks) {
  for (Variant v : {Variant::m1, Variant::m2, Variant::m3}) {
    const Model m = tiny_model(tiny_config(v));
    auto params = m.parameters();
    std::set<std::string> names;
    for (const auto& p : params) {
      EXPECT_TRUE(names.insert(p.name).second) << p.name;
      EXPECT_TRUE(m.parameter(p.name).same_node(p.tensor));
    }
    EXPECT_THROW(m.parameter("nope"), std::exception);
  }
}

TEST(ModelConfig, Validation) {
  ModelConfig c = tiny_config(Variant::m3);
  c.vocab_size = 3;
  EXPECT_THROW(Model::build(c), ValidationError);
  c = tiny_config(Variant::m1);
  c.reduced_dim = 0;
  EXPECT_THROW(Model::build(c), ValidationError);
  EXPECT_EQ(parse_variant("m2"), Variant::m2);
  EXPECT_THROW(parse_variant("m4"), std::exception);
}

TEST(ModelBuild, SameSeedSameWeights) {
  const Model a = tiny_model(tiny_config(Variant::m2, 7, 5));
  const Model b = tiny_model(tiny_config(Variant::m2, 7, 5));
  const Model c = tiny_model(tiny_config(Variant::m2, 7, 6));
  const auto pa = a.parameters();
  const auto pb = b.parameters();
  const auto pc = c.parameters();
  bool any_diff = false;
  for (std::size_t i = 0; i < pa.size(); ++i) {
    EXPECT_EQ(pa[i].tensor.value(), pb[i].tensor.value()) << pa[i].name;
    any_diff = any_diff || pa[i].tensor.value() != pc[i].tensor.value();
  }
  EXPECT_TRUE(any_diff);
}

TEST(ObjectEncoder, MatchesReferenceAndOrdering) {
  const Model m = tiny_model(tiny_config(Variant::m3));
  sharpen(m, 1.5);
  std::vector<ObjectInput> objs = {{random_matrix(1, 5, 1), 2, 3.0},
                                   {random_matrix(1, 5, 2), 1, 1.0}};
  Tape tape(false);
  const Tensor enc = encode_objects_m3(tape, m, objs);
  EXPECT_EQ(enc.shape(), (Shape{1, 5}));
  const RowVector expected = reference_object_encoding(m, {objs[1], objs[0]});
  EXPECT_TRUE(enc.value().row(0).isApprox(expected, 1e-13));

  std::vector<ObjectInput> swapped = {objs[1], objs[0]};
  EXPECT_EQ(encode_objects_m3(tape, m, swapped).value(), enc.value());
}

TEST(ObjectEncoder, PaddingSlotsDoNotLeak) {
  ModelConfig small = tiny_config(Variant::m3);
  ModelConfig roomy = small;
  roomy.max_objects = 6;
  const Model a = tiny_model(small);
  const Model b = tiny_model(roomy);
  std::vector<ObjectInput> one = {{random_matrix(1, 5, 3), 1, 0.5}};
  Tape tape(false);
  EXPECT_TRUE(encode_objects_m3(tape, a, one).value().isApprox(encode_objects_m3(tape, b, one).value(), 1e-14));
  EXPECT_TRUE(encode_objects_m3(tape, a, one).value().row(0).isApprox(reference_object_encoding(a, one), 1e-13));
}

TEST(ObjectEncoder, Errors) {
  const Model m = tiny_model(tiny_config(Variant::m3));
  Tape tape(false);
  std::vector<ObjectInput> none;
  EXPECT_THROW(encode_objects_m3(tape, m, none), ValidationError);
  std::vector<ObjectInput> three(3, ObjectInput{random_matrix(1, 5, 1), 1, 1.0});
  EXPECT_THROW(encode_objects_m3(tape, m, three), ValidationError);
  std::vector<ObjectInput> wrong = {{random_matrix(1, 4, 1), 1, 1.0}};
  EXPECT_THROW(encode_objects_m3(tape, m, wrong), DimensionError);
  const Model m1 = tiny_model(tiny_config(Variant::m1));
  EXPECT_THROW(encode_objects_m3(tape, m1, wrong), ValidationError);
}

TEST(LabelTable, RowZeroIsUnknownAndFrozen) {
  Model m = tiny_model(tiny_config(Variant::m3));
  EXPECT_EQ(m.label_index("cat"), 1u);
  EXPECT_EQ(m.label_index("dog"), 2u);
  EXPECT_EQ(m.label_index("zebra"), 0u);
  EXPECT_TRUE(m.label_table().table.value().row(0).isZero(0));
  EXPECT_FALSE(m.label_table().trainable);
  for (const auto& p : m.parameters()) EXPECT_NE(p.name, "label_embedding");

  GloveTable glove(3);
  glove.insert("cat", {1, 2, 3});
  EXPECT_THROW(m.set_label_table({"cat"}, glove), ValidationError);
  EXPECT_THROW(m.set_label_table({"cat"}, Matrix::Zero(1, 2)), DimensionError);
}

TEST(MakeExample, PerVariantInputs) {
  SynthOptions opt;
  opt.images = 3;
  opt.visual_dim = 5;
  opt.glove_dim = 2;
  const SynthCorpus corpus = synth_corpus(opt);
  const Vocabulary vocab = build_vocab(corpus.records, 1);
  const ImageRecord& r = corpus.records[0];

  const Model m1 = tiny_model(tiny_config(Variant::m1, vocab.size()));
  const Example e1 = make_example(m1, r, vocab, 0);
  ASSERT_TRUE(e1.image_feature.has_value());
  RowVector mean = RowVector::Zero(5);
  for (const auto& o : r.objects) mean += Eigen::Map<const RowVector>(o.feature.data(), 5);
  EXPECT_TRUE(e1.image_feature->isApprox(mean / static_cast<double>(r.objects.size()), 1e-14));
  EXPECT_EQ(e1.caption.front(), Vocabulary::kStart);
  EXPECT_EQ(e1.caption.back(), Vocabulary::kEnd);
  EXPECT_EQ(std::count(e1.caption.begin(), e1.caption.end(), Vocabulary::kPad), 0);

  ModelConfig c3 = tiny_config(Variant::m3, vocab.size());
  c3.max_objects = 5;
  Model m3 = Model::build(c3);
  m3.set_label_table(corpus.label_names, corpus.glove);
  const Example e3 = make_example(m3, r, vocab, std::nullopt);
  EXPECT_TRUE(e3.caption.empty());
  ASSERT_EQ(e3.objects.size(), r.objects.size());
  for (std::size_t i = 0; i < r.objects.size(); ++i) {
    EXPECT_EQ(m3.labels()[e3.objects[i].label - 1], r.objects[i].label);
  }

  ImageRecord bad = r;
  bad.objects[0].feature.push_back(0.0);
  EXPECT_THROW(make_example(m3, bad, vocab, 0), ValidationError);
}

TEST(Forward, TeacherForcedShapeAndErrors) {
  for (Variant v : {Variant::m1, Variant::m2, Variant::m3}) {
    const Model m = tiny_model(tiny_config(v));
    Tape tape(false);
    const Tensor logits = forward_teacher_forced(tape, m, tiny_example(m, 1, {1, 4, 5, 2}));
    EXPECT_EQ(logits.shape(), (Shape{3, 7}));
    EXPECT_THROW(forward_teacher_forced(tape, m, tiny_example(m, 1, {1})), ValidationError);
    EXPECT_THROW(forward_teacher_forced(tape, m, tiny_example(m, 1, {1, 4, 4, 4, 2})),
                 ValidationError);
    EXPECT_GT(caption_loss(tape, m, tiny_example(m, 1, {1, 4, 2})).item(), 0.0);
  }
  const Model m1 = tiny_model(tiny_config(Variant::m1));
  Example no_feature = tiny_example(m1, 1, {1, 4, 2});
  no_feature.image_feature.reset();
  Tape tape(false);
  EXPECT_THROW(forward_teacher_forced(tape, m1, no_feature), ValidationError);
}

// For the unidirectional variants the step decoder and the teacher-forced
// pass are the same function of the prefix.
TEST(Forward, StepDecoderAgreesWithTeacherForcing) {
  for (Variant v : {Variant::m1, Variant::m3}) {
    const Model m = tiny_model(tiny_config(v));
    sharpen(m, 2.0);
    const Example ex = tiny_example(m, 9, {1, 5, 6, 2});
    Tape tape(false);
    const Matrix logits = forward_teacher_forced(tape, m, ex).value();
    const Tensor enc = inference_encoding(m, ex);
    DecodeState state = initial_decode_state(m);
    for (std::size_t t = 0; t + 1 < ex.caption.size(); ++t) {
      const RowVector lp = next_token_log_probs(m, enc, state, ex.caption[t]);
      EXPECT_TRUE(lp.isApprox(log_softmax_row(logits.row(static_cast<Eigen::Index>(t))), 1e-12));
    }
  }
}

TEST(Forward, Model2StepUsesForwardDirectionOnly) {
  const Model m = tiny_model(tiny_config(Variant::m2));
  const Example ex = tiny_example(m, 4, {1, 5});
  const Tensor enc = inference_encoding(m, ex);
  DecodeState state = initial_decode_state(m);
  const RowVector lp = next_token_log_probs(m, enc, state, Vocabulary::kStart);
  // Changing the backward direction must not move generation.
  Tensor backward_weight = m.decoder_backward.input_weight;
  backward_weight.mutable_value() *= -3.0;
  DecodeState again = initial_decode_state(m);
  EXPECT_EQ(next_token_log_probs(m, enc, again, Vocabulary::kStart), lp);
  EXPECT_NEAR(lp.array().exp().sum(), 1.0, 1e-12);
}

TEST(GradientCheck, EndToEndAllVariants) {
  for (Variant v : {Variant::m1, Variant::m2, Variant::m3}) {
    const Model m = tiny_model(tiny_config(v));
    sharpen(m, 1.5);
    // 3 word tokens (4, 5, 6), 2 objects, 2 predicted steps.
    const Example ex = tiny_example(m, 13, {1, 5, 2});
    const double err =
        gradient_check([&](Tape& t) { return caption_loss(t, m, ex); }, tensors_of(m));
    EXPECT_LT(err, 1e-4) << variant_name(v);
  }
}
