#include "sayo/sensitivity.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "sayo/error.hpp"
#include "sayo/rng.hpp"
#include "sayo/sampling.hpp"

namespace sayo {

std::string to_string(Estimator e) { return e == Estimator::pick_freeze ? "pick_freeze" : "binned_anova"; }

double check_sum_to_one(const SensitivityReport& report) {
  double sum = report.main.sum();
  for (const auto& [pair, s] : report.interactions) sum += s;
  return std::abs(sum - 1.0);
}

namespace {

double population_variance(const Eigen::VectorXd& y) {
  const double mean = y.mean();
  return (y.array() - mean).square().mean();
}

}  // namespace

SensitivityReport pick_freeze(const BatchModel& model, const std::vector<MarginalDistribution>& inputs,
                              Eigen::Index n, std::uint64_t seed) {
  require(n >= 64, ErrorCode::precondition, "pick-freeze needs at least 64 samples");
  require(!inputs.empty(), ErrorCode::precondition, "pick-freeze needs at least one input");
  const auto k = static_cast<Eigen::Index>(inputs.size());

  Eigen::MatrixXd a(n, k), b(n, k);
  for (Eigen::Index i = 0; i < k; ++i) {
    const auto& d = inputs[static_cast<std::size_t>(i)];
    a.col(i) = sample_marginal(d, n, mix64(seed ^ mix64(2 * static_cast<std::uint64_t>(i)))).values;
    b.col(i) = sample_marginal(d, n, mix64(seed ^ mix64(2 * static_cast<std::uint64_t>(i) + 1))).values;
  }
  const Eigen::VectorXd ya = model(a);
  const Eigen::VectorXd yb = model(b);
  require(ya.size() == n && yb.size() == n, ErrorCode::shape, "model returned the wrong number of outputs");

  Eigen::VectorXd both(2 * n);
  both << ya, yb;
  const double variance = population_variance(both);
  require(both.maxCoeff() > both.minCoeff() && std::isfinite(variance), ErrorCode::degenerate_model,
          "model output has zero variance; sensitivity indices are undefined");

  SensitivityReport report;
  report.variance = variance;
  report.n = n;
  report.estimator = Estimator::pick_freeze;
  report.main.resize(k);
  report.total.resize(k);
  for (Eigen::Index i = 0; i < k; ++i) {
    Eigen::MatrixXd hybrid = a;
    hybrid.col(i) = b.col(i);
    const Eigen::VectorXd yab = model(hybrid);
    require(yab.size() == n, ErrorCode::shape, "model returned the wrong number of outputs");
    report.main[i] = (yb.array() * (yab - ya).array()).mean() / variance;
    report.total[i] = 0.5 * (ya - yab).array().square().mean() / variance;
    report.inputs.push_back("x" + std::to_string(i + 1));
  }
  return report;
}

int default_bin_count(Eigen::Index n) {
  const auto b = static_cast<int>(std::ceil(std::cbrt(static_cast<double>(n)) - 1e-9));
  return std::clamp(b, 1, 64);
}

int pair_bin_count(Eigen::Index n, int bins) {
  const auto cap = static_cast<int>(std::floor(std::sqrt(static_cast<double>(n) / 20.0)));
  return std::max(1, std::min(bins, cap));
}

namespace {

std::vector<std::uint16_t> rank_bins(const std::vector<Eigen::Index>& order, const Eigen::VectorXd& x, int bins) {
  const auto n = static_cast<Eigen::Index>(order.size());
  std::vector<std::uint16_t> out(static_cast<std::size_t>(n));
  Eigen::Index group_start = 0;
  for (Eigen::Index r = 0; r < n; ++r) {
    if (r > 0 && x[order[static_cast<std::size_t>(r)]] != x[order[static_cast<std::size_t>(r - 1)]]) group_start = r;
    out[static_cast<std::size_t>(order[static_cast<std::size_t>(r)])] =
        static_cast<std::uint16_t>((group_start * bins) / n);
  }
  return out;
}

struct OneWay {
  Eigen::VectorXd effect;  // bin mean - f0, zero for empty bins
  Eigen::VectorXd mass;
  double ss_between = 0.0;
  int occupied = 0;
};

OneWay one_way(const std::vector<std::uint16_t>& bin, int bins, const Eigen::VectorXd& y, double f0) {
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(bins);
  Eigen::VectorXd count = Eigen::VectorXd::Zero(bins);
  for (Eigen::Index s = 0; s < y.size(); ++s) {
    sum[bin[static_cast<std::size_t>(s)]] += y[s];
    count[bin[static_cast<std::size_t>(s)]] += 1.0;
  }
  OneWay w;
  w.effect = Eigen::VectorXd::Zero(bins);
  w.mass = count / static_cast<double>(y.size());
  for (int b = 0; b < bins; ++b) {
    if (count[b] == 0.0) continue;
    ++w.occupied;
    w.effect[b] = sum[b] / count[b] - f0;
    w.ss_between += count[b] * w.effect[b] * w.effect[b];
  }
  return w;
}

}  // namespace

BinnedInput bin_input(const Eigen::VectorXd& x, int bins) {
  const Eigen::Index n = x.size();
  require(n > 0, ErrorCode::insufficient_data, "cannot bin an empty sample");
  require(bins >= 1 && bins <= 65535, ErrorCode::parameter, "bin count out of range");
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::stable_sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) { return x[a] < x[b]; });
  BinnedInput out;
  out.fine_bins = bins;
  out.fine = rank_bins(order, x, bins);
  out.coarse_bins = pair_bin_count(n, bins);
  out.coarse = out.coarse_bins == bins ? out.fine : rank_bins(order, x, out.coarse_bins);
  return out;
}

AnovaResult anova_from_bins(const std::vector<const BinnedInput*>& inputs, const Eigen::VectorXd& y, int order) {
  require(order == 1 || order == 2, ErrorCode::parameter, "truncation order must be 1 or 2");
  const Eigen::Index n = y.size();
  const auto k = static_cast<int>(inputs.size());
  for (const auto* in : inputs) require(static_cast<Eigen::Index>(in->fine.size()) == n, ErrorCode::shape,
                                        "input and output sample sizes differ");
  const double f0 = y.mean();
  const double ss_total = (y.array() - f0).square().sum();
  const double variance = ss_total / static_cast<double>(n);
  require(y.maxCoeff() > y.minCoeff() && std::isfinite(variance), ErrorCode::degenerate_model,
          "output has zero variance; sensitivity indices are undefined");
  const auto nd = static_cast<double>(n);

  AnovaResult result;
  result.terms.f0 = f0;
  SensitivityReport& rep = result.report;
  rep.variance = variance;
  rep.n = n;
  rep.estimator = Estimator::binned_anova;
  rep.main = Eigen::VectorXd::Zero(k);

  for (int i = 0; i < k; ++i) {
    const OneWay w = one_way(inputs[static_cast<std::size_t>(i)]->fine, inputs[static_cast<std::size_t>(i)]->fine_bins,
                             y, f0);
    require(nd / w.occupied >= 20.0, ErrorCode::insufficient_data,
            "fewer than 20 samples per occupied bin; use more samples or fewer bins");
    const double mse = (ss_total - w.ss_between) / (nd - w.occupied);
    rep.main[i] = (w.ss_between - (w.occupied - 1) * mse) / nd / variance;
    result.terms.first.push_back(w.effect);
    result.terms.first_mass.push_back(w.mass);
  }
  rep.total = rep.main;

  if (order == 2) {
    for (int i = 0; i < k; ++i) {
      for (int j = i + 1; j < k; ++j) {
        const BinnedInput& xi = *inputs[static_cast<std::size_t>(i)];
        const BinnedInput& xj = *inputs[static_cast<std::size_t>(j)];
        require(xi.coarse_bins >= 2 && xj.coarse_bins >= 2, ErrorCode::insufficient_data,
                "too few samples for second-order terms (need >= 20 per pair cell)");
        const OneWay wi = one_way(xi.coarse, xi.coarse_bins, y, f0);
        const OneWay wj = one_way(xj.coarse, xj.coarse_bins, y, f0);
        Eigen::MatrixXd sum = Eigen::MatrixXd::Zero(xi.coarse_bins, xj.coarse_bins);
        Eigen::MatrixXd count = Eigen::MatrixXd::Zero(xi.coarse_bins, xj.coarse_bins);
        for (Eigen::Index s = 0; s < n; ++s) {
          const auto a = xi.coarse[static_cast<std::size_t>(s)];
          const auto b = xj.coarse[static_cast<std::size_t>(s)];
          sum(a, b) += y[s];
          count(a, b) += 1.0;
        }
        Eigen::MatrixXd effect = Eigen::MatrixXd::Zero(xi.coarse_bins, xj.coarse_bins);
        double ss_cells = 0.0;
        double ss_interaction = 0.0;
        int occupied = 0;
        for (int a = 0; a < xi.coarse_bins; ++a) {
          for (int b = 0; b < xj.coarse_bins; ++b) {
            if (count(a, b) == 0.0) continue;
            ++occupied;
            const double cell = sum(a, b) / count(a, b) - f0;
            effect(a, b) = cell - wi.effect[a] - wj.effect[b];
            ss_cells += count(a, b) * cell * cell;
            ss_interaction += count(a, b) * effect(a, b) * effect(a, b);
          }
        }
        const int dof = std::max(0, occupied - wi.occupied - wj.occupied + 1);
        const double mse = occupied < n ? (ss_total - ss_cells) / (nd - occupied) : 0.0;
        const double s_ij = (ss_interaction - dof * mse) / nd / variance;
        rep.interactions[{i, j}] = s_ij;
        rep.total[i] += s_ij;
        rep.total[j] += s_ij;
        result.terms.second[{i, j}] = std::move(effect);
      }
    }
  }
  for (int i = 0; i < k; ++i) rep.inputs.push_back("x" + std::to_string(i + 1));
  rep.unattributed = 1.0 - rep.main.sum();
  for (const auto& [pair, s] : rep.interactions) rep.unattributed -= s;
  return result;
}

AnovaResult binned_anova(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, int bins, int order) {
  require(x.rows() == y.size(), ErrorCode::shape, "input rows and outputs differ in length");
  require(x.cols() >= 1, ErrorCode::precondition, "binned ANOVA needs at least one input");
  if (bins <= 0) bins = default_bin_count(y.size());
  std::vector<BinnedInput> binned;
  binned.reserve(static_cast<std::size_t>(x.cols()));
  for (Eigen::Index i = 0; i < x.cols(); ++i) binned.push_back(bin_input(x.col(i), bins));
  std::vector<const BinnedInput*> view;
  for (const auto& b : binned) view.push_back(&b);
  return anova_from_bins(view, y, order);
}

double component_correlation(const AnovaTerms& terms, const BinnedInput& xi, int i, const BinnedInput& xj, int j) {
  const auto& fi = terms.first.at(static_cast<std::size_t>(i));
  const auto& fj = terms.first.at(static_cast<std::size_t>(j));
  const auto n = static_cast<Eigen::Index>(xi.fine.size());
  Eigen::ArrayXd a(n), b(n);
  for (Eigen::Index s = 0; s < n; ++s) {
    a[s] = fi[xi.fine[static_cast<std::size_t>(s)]];
    b[s] = fj[xj.fine[static_cast<std::size_t>(s)]];
  }
  a -= a.mean();
  b -= b.mean();
  const double denom = std::sqrt(a.square().sum() * b.square().sum());
  return denom > 0.0 ? (a * b).sum() / denom : 0.0;
}

void IncrementalAnova::set_input(const std::string& id, const Eigen::VectorXd& driver) {
  const int bins = bins_ > 0 ? bins_ : default_bin_count(driver.size());
  inputs_[id] = bin_input(driver, bins);
}

void IncrementalAnova::remove_input(const std::string& id) { inputs_.erase(id); }

AnovaResult IncrementalAnova::evaluate(const Eigen::VectorXd& y) const {
  require(!inputs_.empty(), ErrorCode::precondition, "no parameterized inputs yet");
  std::vector<const BinnedInput*> view;
  std::vector<std::string> ids;
  for (const auto& [id, b] : inputs_) {
    view.push_back(&b);
    ids.push_back(id);
  }
  AnovaResult r = anova_from_bins(view, y, order_);
  r.report.inputs = std::move(ids);
  return r;
}

}  // namespace sayo
