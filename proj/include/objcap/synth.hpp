#ifndef OBJCAP_SYNTH_HPP
#define OBJCAP_SYNTH_HPP

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "objcap/data.hpp"

namespace objcap {

struct SynthOptions {
  std::uint64_t seed = 42;
  std::size_t images = 100;
  std::size_t labels = 8;
  std::size_t visual_dim = 256;
  std::size_t glove_dim = 50;
  double noise_sigma = 0.1;
  std::size_t max_objects_per_image = 5;
  double image_width = 640;
  double image_height = 480;
};

/// A desk-scale stand-in for the object-level corpus. Each label owns a
/// unit-norm prototype feature; object features are prototype plus Gaussian
/// noise. All five captions are templates over the image's label set in
/// sorted order, so captions depend on object identities alone.
struct SynthCorpus {
  std::vector<ImageRecord> records;
  GloveTable glove;
  std::vector<std::string> label_names;
  std::vector<std::vector<double>> prototypes;  // parallel to label_names
};

SynthCorpus synth_corpus(const SynthOptions& options);

/// Caption for a sorted label list using paraphrase template `variant` (0..4).
std::string template_caption(const std::vector<std::string>& sorted_labels, std::size_t variant);

}  // namespace objcap

#endif  // OBJCAP_SYNTH_HPP
