#ifndef OBJCAP_INIT_HPP
#define OBJCAP_INIT_HPP

#include <cstdint>

#include "objcap/tensor.hpp"

namespace objcap {

enum class InitKind { uniform_glorot, zeros };

/// Deterministic parameter initialization. Glorot draws are uniform in
/// +-sqrt(6 / (fan_in + fan_out)), with fan_in = rows and fan_out = cols
/// (a rank-1 shape {n} uses fan_in = 1).
Tensor seeded_init(InitKind kind, const Shape& shape, std::uint64_t seed,
                   bool requires_grad = true);

/// Mixes a base seed with a stream index so sibling parameters draw from
/// independent, reproducible streams.
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream);

}  // namespace objcap

#endif  // OBJCAP_INIT_HPP
