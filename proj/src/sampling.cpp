#include "sayo/sampling.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <numeric>

#include "sayo/cholesky.hpp"
#include "sayo/error.hpp"
#include "sayo/normal.hpp"

namespace sayo {

bool operator==(const SampleTuple& a, const SampleTuple& b) {
  return a.asset_id == b.asset_id && a.seed == b.seed && a.generation == b.generation &&
         a.values.size() == b.values.size() &&
         std::equal(a.values.begin(), a.values.end(), b.values.begin(),
                    [](double x, double y) { return std::bit_cast<std::uint64_t>(x) == std::bit_cast<std::uint64_t>(y); });
}

CorrelationMatrix CorrelationMatrix::identity(Eigen::Index dim) { return CorrelationMatrix(Matrix::Identity(dim, dim)); }

CorrelationMatrix::CorrelationMatrix(Matrix entries) : entries_(std::move(entries)) {
  require(entries_.rows() == entries_.cols(), ErrorCode::shape, "correlation matrix must be square");
  for (Eigen::Index i = 0; i < dim(); ++i) {
    require(entries_(i, i) == 1.0, ErrorCode::parameter, "correlation matrix must have a unit diagonal");
    for (Eigen::Index j = 0; j < i; ++j) {
      const double v = entries_(i, j);
      require(std::isfinite(v) && v == entries_(j, i), ErrorCode::parameter, "correlation matrix must be symmetric");
      require(std::abs(v) <= 1.0, ErrorCode::decomposition,
              "correlation coefficient outside [-1, 1] at (" + std::to_string(i) + ", " + std::to_string(j) +
                  "); matrix is not positive semidefinite");
    }
  }
}

bool CorrelationMatrix::is_diagonal() const { return entries_.isDiagonal(0.0); }

void validate(const PriceHistory& history) {
  const auto& obs = history.observations;
  require(obs.size() >= 2, ErrorCode::insufficient_data, "price history for '" + history.asset_id +
                                                             "' needs at least 2 observations");
  for (std::size_t i = 0; i < obs.size(); ++i) {
    require(std::isfinite(obs[i].price) && obs[i].price > 0.0, ErrorCode::parameter,
            "price history for '" + history.asset_id + "' has a non-positive price at index " + std::to_string(i));
    if (i > 0) {
      require(obs[i].epoch_ms > obs[i - 1].epoch_ms, ErrorCode::ordering,
              "price history for '" + history.asset_id + "' is not strictly increasing at index " + std::to_string(i));
    }
  }
}

Vector standard_normal(Eigen::Index n, const CounterRng& rng) {
  Vector z(n);
  for (Eigen::Index j = 0; j < n; ++j) z[j] = normal_quantile(rng.uniform(static_cast<std::uint64_t>(j)));
  return z;
}

SampleTuple sample_marginal(const MarginalDistribution& d, Eigen::Index n, std::uint64_t seed) {
  require(n >= 2, ErrorCode::precondition, "sample count must be at least 2");
  validate(d);
  const CounterRng rng(seed);
  SampleTuple out{Vector(n), "", seed, 0};
  for (Eigen::Index j = 0; j < n; ++j) out.values[j] = inverse_cdf(d, rng.uniform(static_cast<std::uint64_t>(j)));
  return out;
}

Matrix cholesky_factor(const CorrelationMatrix& corr) { return cholesky_lower(corr.entries()); }

std::vector<SampleTuple> correlate_tuples(const std::vector<SampleTuple>& normals, const CorrelationMatrix& corr,
                                          const std::vector<MarginalDistribution>& marginals) {
  const auto m = static_cast<Eigen::Index>(normals.size());
  require(corr.dim() == m, ErrorCode::shape, "correlation dimension does not match the number of tuples");
  require(marginals.size() == normals.size(), ErrorCode::shape, "one marginal per tuple is required");
  const Eigen::Index n = m == 0 ? 0 : normals.front().size();
  for (const auto& t : normals) require(t.size() == n, ErrorCode::shape, "all tuples must have the same length");
  for (const auto& d : marginals) validate(d);

  std::vector<Eigen::Index> order(static_cast<std::size_t>(m));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::stable_sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) {
    return normals[static_cast<std::size_t>(a)].asset_id < normals[static_cast<std::size_t>(b)].asset_id;
  });

  Matrix canonical(m, m);
  for (Eigen::Index i = 0; i < m; ++i)
    for (Eigen::Index j = 0; j < m; ++j) canonical(i, j) = corr(order[i], order[j]);
  const Matrix l = cholesky_lower(canonical);

  Matrix z(m, n);
  for (Eigen::Index i = 0; i < m; ++i) z.row(i) = normals[static_cast<std::size_t>(order[i])].values.transpose();
  const Matrix mixed = l.triangularView<Eigen::Lower>() * z;

  std::vector<SampleTuple> out(normals.size());
  for (Eigen::Index i = 0; i < m; ++i) {
    const auto slot = static_cast<std::size_t>(order[i]);
    const auto& marginal = marginals[slot];
    SampleTuple& t = out[slot];
    t.asset_id = normals[slot].asset_id;
    t.seed = normals[slot].seed;
    t.generation = normals[slot].generation;
    t.values.resize(n);
    for (Eigen::Index j = 0; j < n; ++j) t.values[j] = from_normal_score(marginal, mixed(i, j));
  }
  return out;
}

SampleTuple historical_returns(const PriceHistory& history, int horizon) {
  require(horizon >= 1, ErrorCode::parameter, "horizon must be at least 1");
  const auto& obs = history.observations;
  require(obs.size() > static_cast<std::size_t>(horizon), ErrorCode::insufficient_data,
          "price history for '" + history.asset_id + "' has " + std::to_string(obs.size()) +
              " observations, need more than the horizon " + std::to_string(horizon));
  const auto n = static_cast<Eigen::Index>(obs.size()) - horizon;
  SampleTuple out{Vector(n), history.asset_id, 0, 0};
  for (Eigen::Index j = 0; j < n; ++j) {
    const double p0 = obs[static_cast<std::size_t>(j)].price;
    const double p1 = obs[static_cast<std::size_t>(j + horizon)].price;
    out.values[j] = (p1 - p0) / p0;
  }
  return out;
}

SampleTuple bootstrap(const SampleTuple& source, Eigen::Index n, std::uint64_t seed) {
  require(source.size() > 0, ErrorCode::insufficient_data, "cannot resample an empty tuple");
  require(n >= 1, ErrorCode::precondition, "bootstrap sample count must be at least 1");
  const CounterRng rng(seed);
  const auto m = static_cast<unsigned __int128>(source.size());
  SampleTuple out{Vector(n), source.asset_id, seed, source.generation};
  for (Eigen::Index j = 0; j < n; ++j) {
    const auto pick = static_cast<Eigen::Index>((rng.bits64(static_cast<std::uint64_t>(j)) * m) >> 64);
    out.values[j] = source.values[pick];
  }
  return out;
}

}  // namespace sayo
