#include "objcap/init.hpp"

#include <cmath>
#include <random>

namespace objcap {

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream) {
  // splitmix64 finalizer over the combined value
  std::uint64_t z = base + 0x9e3779b97f4a7c15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

Tensor seeded_init(InitKind kind, const Shape& shape, std::uint64_t seed, bool requires_grad) {
  Tensor t = Tensor::zeros(shape, requires_grad);
  if (kind == InitKind::zeros) return t;

  const double fan_in = shape.size() == 1 ? 1.0 : static_cast<double>(shape[0]);
  const double fan_out = static_cast<double>(shape.back());
  const double bound = std::sqrt(6.0 / (fan_in + fan_out));
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> dist(-bound, bound);
  Matrix& m = t.mutable_value();
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = dist(rng);
  return t;
}

}  // namespace objcap
