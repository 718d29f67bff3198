#include "synthetic.hpp"

#include <cmath>
#include <random>
#include <stdexcept>

namespace npmix::io {

namespace {

double u53(std::mt19937_64& eng) {
  return static_cast<double>(eng() >> 11) * 0x1.0p-53;  // [0, 1)
}

double standard_normal(std::mt19937_64& eng) {
  double u1 = 1.0 - u53(eng);  // (0, 1]
  double u2 = u53(eng);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
}

}  // namespace

SyntheticResult generate_synthetic(const SyntheticDesign& design, std::uint64_t seed) {
  if (design.n < 1 || design.p < 1 || design.coords.empty()) {
    throw std::invalid_argument("invalid synthetic design");
  }
  const int c = static_cast<int>(design.coords.size());
  long m = 1;
  for (int k = 0; k < design.p; ++k) m *= c;

  SyntheticResult out;
  out.true_supports.resize(m, design.p);
  for (long j = 0; j < m; ++j) {
    long rem = j;
    for (int k = design.p - 1; k >= 0; --k) {
      out.true_supports(j, k) = design.coords[static_cast<size_t>(rem % c)];
      rem /= c;
    }
  }
  out.true_weights = Vector::Constant(m, 1.0 / static_cast<double>(m));

  std::mt19937_64 eng(seed);
  Matrix rows(design.n, design.p);
  for (long i = 0; i < design.n; ++i) {
    long j = std::min<long>(static_cast<long>(u53(eng) * static_cast<double>(m)), m - 1);
    for (int k = 0; k < design.p; ++k) {
      rows(i, k) = out.true_supports(j, k) + standard_normal(eng);
    }
  }
  out.data = make_raw(std::move(rows));
  return out;
}

}  // namespace npmix::io
