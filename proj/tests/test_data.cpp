#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "objcap/data.hpp"
#include "objcap/synth.hpp"

using namespace objcap;
namespace fs = std::filesystem;

namespace {

ObjectInstance make_object(std::string label, std::vector<double> feature, BoundingBox box) {
  ObjectInstance o{std::move(label), std::move(feature), box, 0};
  o.distance = center_distance(box);
  return o;
}

ImageRecord make_record(std::string id) {
  ImageRecord r;
  r.id = std::move(id);
  r.objects = {make_object("dog", {0.5, -1.0}, {10, 20, 30, 40}),
               make_object("cat", {0.25, 2.0}, {0, 0, 4, 6})};
  r.num_objects = 2;
  r.captions = {"A dog and a cat.", "Two pets.", "A cat near a dog!", "Animals", "Pets (two)"};
  return r;
}

fs::path scratch_dir() {
  const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
  fs::path dir = fs::temp_directory_path() /
                 (std::string("objcap_data_") + info->test_suite_name() + "_" + info->name());
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

void expect_message(const std::function<void()>& fn, const std::string& fragment) {
  try {
    fn();
    ADD_FAILURE() << "expected ValidationError containing '" << fragment << "'";
  } catch (const ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find(fragment), std::string::npos) << e.what();
  }
}

}  // namespace

TEST(BoundingBox, CenterDistance) {
  EXPECT_DOUBLE_EQ(center_distance({0, 0, 6, 8}), 5.0);  // center (3, 4)
  EXPECT_DOUBLE_EQ(center_distance({1, 1, 4, 2}), std::hypot(3.0, 2.0));
}

TEST(ValidateRecord, AcceptsGoodRecord) { EXPECT_NO_THROW(validate_record(make_record("a"))); }

TEST(ValidateRecord, RejectsEachInvariantBreak) {
  auto broken = [](auto mutate) {
    ImageRecord r = make_record("img7");
    mutate(r);
    return r;
  };
  expect_message([&] { validate_record(broken([](ImageRecord& r) { r.num_objects = 3; })); },
                 "num_objects");
  expect_message([&] { validate_record(broken([](ImageRecord& r) { r.captions.pop_back(); })); },
                 "expected 5 captions");
  expect_message(
      [&] { validate_record(broken([](ImageRecord& r) { r.objects[1].distance += 0.01; })); },
      "distance");
  expect_message(
      [&] { validate_record(broken([](ImageRecord& r) { r.objects[0].bbox.w = 0; })); }, "bbox");
  expect_message(
      [&] { validate_record(broken([](ImageRecord& r) { r.objects[1].feature.push_back(1); })); },
      "feature length");
  expect_message(
      [&] { validate_record(broken([](ImageRecord& r) { r.objects[0].feature[0] = NAN; })); },
      "non-finite");
  expect_message([&] { validate_record(make_record("img7"), 3); }, "img7");
  expect_message([&] { validate_record(broken([](ImageRecord& r) { r.id.clear(); })); },
                 "empty id");
}

TEST(ValidateRecord, DistanceWithinToleranceAccepted) {
  ImageRecord r = make_record("a");
  r.objects[0].distance += 0.5 * kDistanceTolerance;
  EXPECT_NO_THROW(validate_record(r));
}

TEST(Records, JsonLinesRoundTrip) {
  const std::vector<ImageRecord> records = {make_record("x1"), make_record("x2")};
  std::stringstream ss;
  write_records(ss, records);
  const auto back = read_records(ss);
  ASSERT_EQ(back.size(), 2u);
  for (std::size_t i = 0; i < 2; ++i) {
    EXPECT_EQ(back[i].id, records[i].id);
    EXPECT_EQ(back[i].captions, records[i].captions);
    ASSERT_EQ(back[i].objects.size(), 2u);
    for (std::size_t k = 0; k < 2; ++k) {
      EXPECT_EQ(back[i].objects[k].feature, records[i].objects[k].feature);
      EXPECT_EQ(back[i].objects[k].label, records[i].objects[k].label);
      EXPECT_EQ(back[i].objects[k].distance, records[i].objects[k].distance);
    }
  }
  std::stringstream again;
  write_records(again, back);
  std::stringstream first;
  write_records(first, records);
  EXPECT_EQ(again.str(), first.str());
}

TEST(Records, ErrorsCarryLineNumbers) {
  std::stringstream good;
  write_records(good, {make_record("ok")});
  std::string text = good.str() + "\n{not json}\n";
  std::istringstream in(text);
  expect_message([&] { read_records(in, "recs.jsonl"); }, "recs.jsonl:3:");

  // Second record with a different feature length than the first.
  ImageRecord odd = make_record("odd");
  for (auto& o : odd.objects) o.feature.push_back(0.0);
  std::stringstream mixed;
  write_records(mixed, {make_record("ok"), odd});
  expect_message([&] { read_records(mixed, "mix"); }, "mix:2:");

  std::istringstream missing_key(R"({"id":"q","num_objects":0,"objects":[]})");
  expect_message([&] { read_records(missing_key, "m"); }, "m:1:");
}

TEST(Records, FileRoundTripAndMissingFile) {
  const fs::path dir = scratch_dir();
  save_records(dir / "r.jsonl", {make_record("f1")});
  EXPECT_EQ(load_records(dir / "r.jsonl").at(0).id, "f1");
  EXPECT_THROW(load_records(dir / "absent.jsonl"), ValidationError);
}

TEST(Tokenize, LowercasesAndStripsPunctuation) {
  EXPECT_EQ(tokenize("A Dog, and (a) CAT!"),
            (std::vector<std::string>{"a", "dog", "and", "a", "cat"}));
  EXPECT_EQ(tokenize("  \t \n"), std::vector<std::string>{});
  EXPECT_EQ(tokenize("don't stop."), (std::vector<std::string>{"don't", "stop"}));
  EXPECT_EQ(tokenize("... !"), std::vector<std::string>{});
}

TEST(Vocabulary, ReservedTokensFirst) {
  const Vocabulary v;
  EXPECT_EQ(v.size(), 4u);
  EXPECT_EQ(v.token(Vocabulary::kPad), "<pad>");
  EXPECT_EQ(v.token(Vocabulary::kStart), "<start>");
  EXPECT_EQ(v.token(Vocabulary::kEnd), "<end>");
  EXPECT_EQ(v.token(Vocabulary::kUnk), "<unk>");
  EXPECT_EQ(v.index("zebra"), Vocabulary::kUnk);
  EXPECT_THROW(v.token(4), std::out_of_range);
}

TEST(Vocabulary, FrequencyThenAlphabeticalOrder) {
  ImageRecord r = make_record("v");
  r.captions = {"b b a c", "b a d", "c", "a", "e"};
  // counts: a 3, b 3, c 2, d 1, e 1
  const Vocabulary v = build_vocab({r}, 1);
  EXPECT_EQ(std::vector<std::string>(v.tokens().begin() + 4, v.tokens().end()),
            (std::vector<std::string>{"a", "b", "c", "d", "e"}));
  const Vocabulary pruned = build_vocab({r}, 2);
  EXPECT_EQ(pruned.size(), 7u);
  EXPECT_EQ(pruned.index("d"), Vocabulary::kUnk);
  EXPECT_THROW(build_vocab({r}, 0), std::invalid_argument);
}

TEST(Vocabulary, StableAcrossRebuildAndHashSensitive) {
  SynthOptions opt;
  opt.images = 20;
  opt.visual_dim = 4;
  const auto corpus = synth_corpus(opt);
  const Vocabulary a = build_vocab(corpus.records, 1);
  const Vocabulary b = build_vocab(corpus.records, 1);
  EXPECT_EQ(a.tokens(), b.tokens());
  EXPECT_EQ(a.hash(), b.hash());
  EXPECT_EQ(a.hash().size(), 16u);
  const Vocabulary c = Vocabulary::from_tokens(a.tokens());
  EXPECT_EQ(c.hash(), a.hash());
  Vocabulary d = a;
  d.add("extra");
  EXPECT_NE(d.hash(), a.hash());
}

TEST(Vocabulary, FromTokensValidates) {
  EXPECT_THROW(Vocabulary::from_tokens({"<pad>", "<start>"}), ValidationError);
  EXPECT_THROW(Vocabulary::from_tokens({"<pad>", "<start>", "<end>", "x"}), ValidationError);
  EXPECT_THROW(Vocabulary::from_tokens({"<pad>", "<start>", "<end>", "<unk>", "a", "a"}),
               ValidationError);
}

TEST(EncodeCaption, ExampleAndRoundTrip) {
  const Vocabulary v = Vocabulary::from_tokens({"<pad>", "<start>", "<end>", "<unk>", "a", "dog"});
  EXPECT_EQ(encode_caption(v, {"a", "dog"}, 6), (std::vector<std::size_t>{1, 4, 5, 2, 0, 0}));
  EXPECT_EQ(decode_caption(v, encode_caption(v, {"a", "dog"}, 6)),
            (std::vector<std::string>{"a", "dog"}));
  EXPECT_EQ(encode_caption(v, {"a", "cat"}, 4), (std::vector<std::size_t>{1, 4, 3, 2}));
  // Truncation keeps <end>.
  EXPECT_EQ(encode_caption(v, {"a", "dog", "a", "dog"}, 4), (std::vector<std::size_t>{1, 4, 5, 2}));
  EXPECT_THROW(encode_caption(v, {"a"}, 1), std::invalid_argument);
}

TEST(EncodeCaption, RoundTripOverSynthCaptions) {
  SynthOptions opt;
  opt.images = 30;
  opt.visual_dim = 4;
  const auto corpus = synth_corpus(opt);
  const Vocabulary v = build_vocab(corpus.records, 1);
  for (const auto& r : corpus.records) {
    for (const auto& c : r.captions) {
      const auto tokens = tokenize(c);
      EXPECT_EQ(decode_caption(v, encode_caption(v, tokens, tokens.size() + 5)), tokens);
    }
  }
}

TEST(Glove, ParseLookupAndRoundTrip) {
  std::istringstream in("cat 0.1 0.2 0.3\ndog -1 0 1e-3\n\n");
  const GloveTable g = read_glove(in);
  EXPECT_EQ(g.dim(), 3u);
  EXPECT_EQ(g.size(), 2u);
  EXPECT_EQ(g.lookup("dog"), (std::vector<double>{-1, 0, 1e-3}));
  EXPECT_EQ(g.lookup("zebra"), (std::vector<double>{0, 0, 0}));
  std::stringstream out;
  write_glove(out, g);
  const GloveTable back = read_glove(out);
  EXPECT_EQ(back.lookup("cat"), g.lookup("cat"));
  EXPECT_EQ(back.hash(), g.hash());
}

TEST(Glove, DimensionMismatchNamesLine) {
  std::istringstream in("cat 0.1 0.2 0.3\ndog 1 2\n");
  expect_message([&] { read_glove(in, "vec.txt"); }, "vec.txt:2");
  std::istringstream bad("cat 0.1 x\n");
  EXPECT_THROW(read_glove(bad, "b"), ValidationError);
}

TEST(Split, RatioPartitionIsExactAndSeeded) {
  SynthOptions opt;
  opt.images = 190;
  opt.visual_dim = 4;
  const auto corpus = synth_corpus(opt);
  const DatasetSplit s = split_dataset(corpus.records, 3);
  EXPECT_EQ(s.train.size(), 120u);
  EXPECT_EQ(s.val.size(), 60u);
  EXPECT_EQ(s.test.size(), 10u);
  std::set<std::string> ids;
  for (const auto* part : {&s.train, &s.val, &s.test}) {
    for (const auto& r : *part) EXPECT_TRUE(ids.insert(r.id).second) << r.id;
  }
  EXPECT_EQ(ids.size(), corpus.records.size());

  const DatasetSplit again = split_dataset(corpus.records, 3);
  const DatasetSplit other = split_dataset(corpus.records, 4);
  EXPECT_EQ(again.train.front().id, s.train.front().id);
  EXPECT_EQ(again.test.back().id, s.test.back().id);
  bool differs = false;
  for (std::size_t i = 0; i < s.train.size(); ++i) differs |= other.train[i].id != s.train[i].id;
  EXPECT_TRUE(differs);
}

TEST(Split, SmallCorporaAndExplicitSizes) {
  std::vector<ImageRecord> three = {make_record("a"), make_record("b"), make_record("c")};
  const DatasetSplit s = split_dataset(three, 1);
  EXPECT_EQ(s.train.size() + s.val.size() + s.test.size(), 3u);
  EXPECT_GE(s.test.size(), 1u);
  EXPECT_THROW(split_dataset({make_record("a"), make_record("b")}, 1), ValidationError);

  std::vector<ImageRecord> ten;
  for (int i = 0; i < 10; ++i) ten.push_back(make_record("r" + std::to_string(i)));
  const DatasetSplit exact = split_dataset(ten, 2, SplitSizes{5, 2, 2});
  EXPECT_EQ(exact.train.size(), 5u);
  EXPECT_EQ(exact.val.size(), 2u);
  EXPECT_EQ(exact.test.size(), 2u);
  EXPECT_THROW(split_dataset(ten, 2, SplitSizes{8, 2, 1}), ValidationError);
  EXPECT_THROW(split_dataset(ten, 2, SplitSizes{8, 0, 1}), ValidationError);
}

TEST(SortedByDistance, OrdersAndBreaksTies) {
  std::vector<ObjectInstance> objs = {make_object("b", {1}, {10, 10, 2, 2}),
                                      make_object("a", {2}, {0, 0, 2, 2}),
                                      make_object("c", {0}, {10, 10, 2, 2}),
                                      make_object("b", {0}, {10, 10, 2, 2})};
  const auto s = sorted_by_distance(objs);
  EXPECT_EQ(s[0].label, "a");
  EXPECT_EQ(s[1].label, "b");
  EXPECT_EQ(s[1].feature, std::vector<double>{0});
  EXPECT_EQ(s[2].feature, std::vector<double>{1});
  EXPECT_EQ(s[3].label, "c");
  for (std::size_t i = 1; i < s.size(); ++i) EXPECT_LE(s[i - 1].distance, s[i].distance);
}

TEST(ConvertCoco, JoinsCaptionsAndFeatures) {
  const fs::path dir = scratch_dir();
  {
    std::ofstream caps(dir / "captions.json");
    caps << R"({"images":[{"id":1,"file_name":"one.jpg"},{"id":2,"file_name":"two.jpg"},{"id":3}],
               "annotations":[)";
    int n = 0;
    for (int img : {1, 1, 1, 1, 1, 1, 2, 2, 3, 3, 3, 3, 3}) {
      caps << (n ? "," : "") << R"({"image_id":)" << img << R"(,"caption":"c)" << n << "\"}";
      ++n;
    }
    caps << "]}";
    std::ofstream feats(dir / "features.jsonl");
    feats << R"({"image_id":1,"objects":[{"label":"dog","feature":[1,2],"bbox":[0,0,6,8]}]})" << "\n";
    feats << R"({"image_id":2,"objects":[{"label":"cat","feature":[3,4],"bbox":[1,1,2,2]}]})" << "\n";
  }
  const CocoConversion out = convert_coco(dir / "captions.json", dir / "features.jsonl");
  ASSERT_EQ(out.records.size(), 1u);
  EXPECT_EQ(out.records[0].id, "one.jpg");
  EXPECT_EQ(out.records[0].captions.size(), 5u);
  EXPECT_DOUBLE_EQ(out.records[0].objects[0].distance, 5.0);
  EXPECT_EQ(out.skipped_few_captions, 1u);
  EXPECT_EQ(out.skipped_no_features, 1u);

  std::ofstream(dir / "bad.jsonl") << R"({"image_id":1,"objects":[{"label":"d","feature":[1],"bbox":[0,0]}]})"
                                   << "\n";
  expect_message([&] { convert_coco(dir / "captions.json", dir / "bad.jsonl"); }, "bad.jsonl:1");
}

TEST(Synth, DeterministicAndValid) {
  SynthOptions opt;
  opt.images = 40;
  opt.visual_dim = 16;
  opt.glove_dim = 6;
  const auto a = synth_corpus(opt);
  const auto b = synth_corpus(opt);
  std::stringstream sa, sb;
  write_records(sa, a.records);
  write_records(sb, b.records);
  EXPECT_EQ(sa.str(), sb.str());
  EXPECT_EQ(a.glove.hash(), b.glove.hash());
  opt.seed = 43;
  std::stringstream sc;
  write_records(sc, synth_corpus(opt).records);
  EXPECT_NE(sa.str(), sc.str());

  for (const auto& r : a.records) {
    EXPECT_NO_THROW(validate_record(r, 16));
    EXPECT_GE(r.objects.size(), 1u);
    EXPECT_LE(r.objects.size(), 5u);
    for (const auto& o : r.objects) EXPECT_TRUE(a.glove.contains(o.label));
  }
  for (const auto& label : a.label_names) EXPECT_EQ(a.glove.lookup(label).size(), 6u);
}

TEST(Synth, CaptionsArePureFunctionOfLabels) {
  SynthOptions opt;
  opt.images = 60;
  opt.visual_dim = 8;
  const auto corpus = synth_corpus(opt);
  for (const auto& r : corpus.records) {
    std::set<std::string> labels;
    for (const auto& o : r.objects) labels.insert(o.label);
    const std::vector<std::string> sorted(labels.begin(), labels.end());
    for (std::size_t k = 0; k < kCaptionsPerImage; ++k) {
      EXPECT_EQ(r.captions[k], template_caption(sorted, k));
    }
  }
  EXPECT_EQ(template_caption({"cat"}, 0), "A photo of cat.");
  EXPECT_EQ(template_caption({"cat", "dog", "bus"}, 0), "A photo of cat, dog and bus.");
}

// Nearest-prototype classification of every object feature.
TEST(Synth, NearestPrototypeRecoversLabels) {
  SynthOptions opt;
  opt.images = 300;
  opt.visual_dim = 256;
  opt.noise_sigma = 0.1;
  const auto corpus = synth_corpus(opt);
  std::size_t total = 0;
  std::size_t correct = 0;
  for (const auto& r : corpus.records) {
    for (const auto& o : r.objects) {
      std::size_t best = 0;
      double best_d = INFINITY;
      for (std::size_t p = 0; p < corpus.prototypes.size(); ++p) {
        double d = 0;
        for (std::size_t i = 0; i < o.feature.size(); ++i) {
          const double diff = o.feature[i] - corpus.prototypes[p][i];
          d += diff * diff;
        }
        if (d < best_d) {
          best_d = d;
          best = p;
        }
      }
      ++total;
      correct += corpus.label_names[best] == o.label;
    }
  }
  EXPECT_GE(static_cast<double>(correct) / static_cast<double>(total), 0.99);
  double norm = 0;
  for (double v : corpus.prototypes[0]) norm += v * v;
  EXPECT_NEAR(norm, 1.0, 1e-12);
}
