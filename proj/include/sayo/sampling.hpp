#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "sayo/distribution.hpp"
#include "sayo/rng.hpp"

namespace sayo {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

struct SampleTuple {
  Vector values;
  std::string asset_id;
  std::uint64_t seed = 0;
  // Revision counter: bumped each time a session regenerates the tuple.
  std::uint64_t generation = 0;

  Eigen::Index size() const { return values.size(); }
};

bool operator==(const SampleTuple& a, const SampleTuple& b);

// Symmetric, unit-diagonal, entries in [-1, 1]. Positive semidefiniteness is
// established by cholesky_factor.
class CorrelationMatrix {
 public:
  static CorrelationMatrix identity(Eigen::Index dim);
  explicit CorrelationMatrix(Matrix entries);

  Eigen::Index dim() const { return entries_.rows(); }
  const Matrix& entries() const { return entries_; }
  double operator()(Eigen::Index i, Eigen::Index j) const { return entries_(i, j); }
  bool is_diagonal() const;

 private:
  Matrix entries_;
};

struct PriceObservation {
  std::string timestamp;  // ISO-8601 as supplied
  std::int64_t epoch_ms = 0;
  double price = 0.0;

  bool operator==(const PriceObservation&) const = default;
};

struct PriceHistory {
  std::string asset_id;
  std::vector<PriceObservation> observations;

  bool operator==(const PriceHistory&) const = default;
};

void validate(const PriceHistory& history);

Vector standard_normal(Eigen::Index n, const CounterRng& rng);

SampleTuple sample_marginal(const MarginalDistribution& d, Eigen::Index n, std::uint64_t seed);

Matrix cholesky_factor(const CorrelationMatrix& corr);

// Gaussian copula. Rows are processed in ascending asset_id order (ties keep
// input order) and returned in input order, so permuting the assets together
// with the matrix permutes the output exactly.
std::vector<SampleTuple> correlate_tuples(const std::vector<SampleTuple>& normals, const CorrelationMatrix& corr,
                                          const std::vector<MarginalDistribution>& marginals);

// Arithmetic returns over `horizon` observation steps.
SampleTuple historical_returns(const PriceHistory& history, int horizon);

SampleTuple bootstrap(const SampleTuple& source, Eigen::Index n, std::uint64_t seed);

}  // namespace sayo
