#ifndef NPMIX_DATA_MODEL_HPP
#define NPMIX_DATA_MODEL_HPP

#include <stdexcept>

#include "types.hpp"

namespace npmix {

/// Raw observation matrix, one observation vector per row.
struct RawDataset {
  Matrix rows;  // n x p

  Index n() const { return rows.rows(); }
  Index p() const { return rows.cols(); }
};

/// Distinct observation vectors with multiplicities. counts(i) is the number
/// of raw rows equal to y.row(i); total is the raw sample size n.
struct DistinctDataset {
  Matrix y;       // d x p
  Vector counts;  // d, each >= 1
  double total = 0.0;

  Index d() const { return y.rows(); }
  Index p() const { return y.cols(); }
};

/// Candidate support vectors approximating the parameter space.
struct SupportSet {
  Matrix theta;  // m x p

  Index m() const { return theta.rows(); }
  Index p() const { return theta.cols(); }
};

struct SampleCovariance {
  Matrix S;  // p x p, symmetric PSD
};

RawDataset make_raw(Matrix rows);

/// Merge rows equal within tol (max-norm); first-appearance order is kept.
/// tol = 0 means exact equality and is mandatory for discrete families.
DistinctDataset deduplicate(const RawDataset& raw, double tol = 0.0);

/// Repeat each distinct row counts(i) times, in first-appearance order.
RawDataset expand(const DistinctDataset& data);

/// The distinct observations themselves as the support set (m = d).
SupportSet support_from_data(const DistinctDataset& data);

/// Evenly spaced 1-D supports including both endpoints,
/// m = round((hi - lo)/step) + 1.
SupportSet support_grid_1d(double lo, double hi, double step);

SupportSet make_support(Matrix theta);

/// Unbiased sample covariance (divisor n - 1) of the raw rows.
SampleCovariance sample_covariance(const RawDataset& raw);

/// Throws if the rows are not non-negative integers (Poisson-family data).
void require_counts_data(const Matrix& rows);

}  // namespace npmix

#endif
