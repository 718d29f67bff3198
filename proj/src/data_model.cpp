#include "data_model.hpp"

#include <cmath>
#include <vector>

namespace npmix {

namespace {

void check_finite(const Matrix& rows) {
  if (!rows.allFinite()) {
    throw std::invalid_argument("dataset contains non-finite entries");
  }
}

}  // namespace

RawDataset make_raw(Matrix rows) {
  if (rows.rows() < 1 || rows.cols() < 1) {
    throw std::invalid_argument("dataset must have at least one row and one column");
  }
  check_finite(rows);
  return RawDataset{std::move(rows)};
}

DistinctDataset deduplicate(const RawDataset& raw, double tol) {
  if (raw.rows.rows() == 0) throw std::invalid_argument("empty dataset");
  if (tol < 0.0) throw std::invalid_argument("dedup tolerance must be >= 0");
  check_finite(raw.rows);

  const Index n = raw.n();
  const Index p = raw.p();
  std::vector<Index> rep;    // representative raw-row index per distinct row
  std::vector<double> cnts;
  rep.reserve(static_cast<size_t>(n));
  for (Index i = 0; i < n; ++i) {
    bool merged = false;
    for (size_t k = 0; k < rep.size(); ++k) {
      double dist = (raw.rows.row(i) - raw.rows.row(rep[k])).cwiseAbs().maxCoeff();
      if (dist <= tol) {
        cnts[k] += 1.0;
        merged = true;
        break;
      }
    }
    if (!merged) {
      rep.push_back(i);
      cnts.push_back(1.0);
    }
  }

  DistinctDataset out;
  out.y.resize(static_cast<Index>(rep.size()), p);
  out.counts.resize(static_cast<Index>(rep.size()));
  for (size_t k = 0; k < rep.size(); ++k) {
    out.y.row(static_cast<Index>(k)) = raw.rows.row(rep[k]);
    out.counts(static_cast<Index>(k)) = cnts[k];
  }
  out.total = static_cast<double>(n);
  return out;
}

RawDataset expand(const DistinctDataset& data) {
  Matrix rows(static_cast<Index>(data.total), data.p());
  Index r = 0;
  for (Index i = 0; i < data.d(); ++i) {
    for (long c = 0; c < static_cast<long>(data.counts(i)); ++c) {
      rows.row(r++) = data.y.row(i);
    }
  }
  return RawDataset{std::move(rows)};
}

SupportSet support_from_data(const DistinctDataset& data) {
  if (data.d() < 1) throw std::invalid_argument("empty dataset");
  return SupportSet{data.y};
}

SupportSet support_grid_1d(double lo, double hi, double step) {
  if (step <= 0.0) throw std::invalid_argument("grid step must be positive");
  if (lo >= hi) throw std::invalid_argument("grid requires lo < hi");
  const Index m = static_cast<Index>(std::lround((hi - lo) / step)) + 1;
  SupportSet out;
  out.theta.resize(m, 1);
  for (Index j = 0; j < m; ++j) out.theta(j, 0) = lo + static_cast<double>(j) * step;
  out.theta(m - 1, 0) = hi;  // both endpoints exactly
  return out;
}

SupportSet make_support(Matrix theta) {
  if (theta.rows() < 1 || theta.cols() < 1) {
    throw std::invalid_argument("support set must be non-empty");
  }
  if (!theta.allFinite()) throw std::invalid_argument("support set has non-finite entries");
  return SupportSet{std::move(theta)};
}

SampleCovariance sample_covariance(const RawDataset& raw) {
  const Index n = raw.n();
  if (n < 2) throw std::invalid_argument("sample covariance needs n >= 2");
  Eigen::RowVectorXd mean = raw.rows.colwise().mean();
  Matrix centered = raw.rows.rowwise() - mean;
  Matrix S = (centered.transpose() * centered) / static_cast<double>(n - 1);
  S = 0.5 * (S + S.transpose());  // exact symmetry
  return SampleCovariance{std::move(S)};
}

void require_counts_data(const Matrix& rows) {
  for (Index i = 0; i < rows.rows(); ++i) {
    for (Index j = 0; j < rows.cols(); ++j) {
      double v = rows(i, j);
      if (v < 0.0 || std::rint(v) != v) {
        throw std::invalid_argument("Poisson-family data must be non-negative integers");
      }
    }
  }
}

}  // namespace npmix
