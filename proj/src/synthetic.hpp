#ifndef NPMIX_SYNTHETIC_HPP
#define NPMIX_SYNTHETIC_HPP

#include <cstdint>
#include <vector>

#include "data_model.hpp"

namespace npmix::io {

/// Equal-weight normal mixture design: supports are all p-fold combinations
/// of the given coordinates, and draws are support + N(0, I).
struct SyntheticDesign {
  long n = 270;
  int p = 3;
  std::vector<double> coords = {-5.0, 0.0, 5.0};
};

struct SyntheticResult {
  RawDataset data;
  Matrix true_supports;  // |coords|^p x p
  Vector true_weights;
};

/// Deterministic for a given seed (mt19937_64 + Box-Muller, no
/// implementation-defined distributions).
SyntheticResult generate_synthetic(const SyntheticDesign& design, std::uint64_t seed);

}  // namespace npmix::io

#endif
