#include "objcap/synth.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <random>
#include <stdexcept>

namespace objcap {

namespace {

constexpr std::array<const char*, 40> kLabelPool = {
    "person", "bicycle",  "car",      "motorcycle", "airplane", "bus",     "train",  "truck",
    "boat",   "bench",    "bird",     "cat",        "dog",      "horse",   "sheep",  "cow",
    "bear",   "zebra",    "giraffe",  "backpack",   "umbrella", "handbag", "tie",    "suitcase",
    "kite",   "skis",     "bottle",   "cup",        "fork",     "knife",   "spoon",  "bowl",
    "banana", "apple",    "sandwich", "orange",     "broccoli", "carrot",  "pizza",  "chair"};

std::string join_labels(const std::vector<std::string>& labels) {
  std::string out;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (i > 0) out += (i + 1 == labels.size()) ? " and " : ", ";
    out += labels[i];
  }
  return out;
}

}  // namespace

std::string template_caption(const std::vector<std::string>& sorted_labels, std::size_t variant) {
  const std::string list = join_labels(sorted_labels);
  switch (variant) {
    case 0: return "A photo of " + list + ".";
    case 1: return "An image showing " + list + ".";
    case 2: return "A picture that contains " + list + ".";
    case 3: return "There is " + list + " in this scene.";
    case 4: return "This image has " + list + ".";
    default: throw std::out_of_range("caption template index must be 0..4");
  }
}

SynthCorpus synth_corpus(const SynthOptions& opt) {
  if (opt.images == 0 || opt.labels == 0 || opt.visual_dim == 0 || opt.glove_dim == 0 ||
      opt.max_objects_per_image == 0) {
    throw std::invalid_argument("synth_corpus: all counts must be positive");
  }
  std::mt19937_64 rng(opt.seed);
  std::normal_distribution<double> gauss(0.0, 1.0);

  SynthCorpus corpus;
  corpus.glove = GloveTable(opt.glove_dim);
  for (std::size_t l = 0; l < opt.labels; ++l) {
    corpus.label_names.push_back(l < kLabelPool.size() ? std::string(kLabelPool[l])
                                                       : "thing" + std::to_string(l));
    std::vector<double> proto(opt.visual_dim);
    double norm = 0;
    for (auto& v : proto) {
      v = gauss(rng);
      norm += v * v;
    }
    norm = std::sqrt(norm);
    for (auto& v : proto) v /= norm;
    corpus.prototypes.push_back(std::move(proto));

    std::vector<double> word(opt.glove_dim);
    for (auto& v : word) v = 0.5 * gauss(rng);
    corpus.glove.insert(corpus.label_names.back(), std::move(word));
  }

  const std::size_t max_k = std::min(opt.max_objects_per_image, opt.labels);
  std::uniform_int_distribution<std::size_t> count_dist(1, max_k);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<std::size_t> label_ids(opt.labels);

  for (std::size_t n = 0; n < opt.images; ++n) {
    ImageRecord rec;
    char id[32];
    std::snprintf(id, sizeof id, "synth_%05zu", n);
    rec.id = id;

    const std::size_t k = count_dist(rng);
    for (std::size_t i = 0; i < opt.labels; ++i) label_ids[i] = i;
    // partial Fisher-Yates: first k entries become a uniform k-subset
    for (std::size_t i = 0; i < k; ++i) {
      std::uniform_int_distribution<std::size_t> pick(i, opt.labels - 1);
      std::swap(label_ids[i], label_ids[pick(rng)]);
    }

    std::vector<std::string> names;
    for (std::size_t i = 0; i < k; ++i) {
      const std::size_t l = label_ids[i];
      ObjectInstance obj;
      obj.label = corpus.label_names[l];
      obj.feature = corpus.prototypes[l];
      for (auto& v : obj.feature) v += opt.noise_sigma * gauss(rng);
      const double w = 20.0 + unit(rng) * 180.0;
      const double h = 20.0 + unit(rng) * 180.0;
      obj.bbox = {unit(rng) * (opt.image_width - w), unit(rng) * (opt.image_height - h), w, h};
      obj.distance = center_distance(obj.bbox);
      names.push_back(obj.label);
      rec.objects.push_back(std::move(obj));
    }
    rec.num_objects = rec.objects.size();
    std::sort(names.begin(), names.end());
    for (std::size_t t = 0; t < kCaptionsPerImage; ++t) rec.captions.push_back(template_caption(names, t));
    corpus.records.push_back(std::move(rec));
  }
  return corpus;
}

}  // namespace objcap
