#pragma once

// Variance-based global sensitivity analysis.
//
// Two estimators share one report type:
//  * pick_freeze: Saltelli's first-order and Jansen's total-effect estimators
//    over paired sample matrices A, B and the hybrids A_B^(i).
//  * binned_anova: the conditional-expectation recursion f0 = E[Y],
//    f_i = E[Y|X_i] - f0, f_ij = E[Y|X_i,X_j] - f0 - f_i - f_j, with the
//    conditional means estimated over equal-probability bins. Variance
//    shares are debiased with the usual two-way ANOVA degrees of freedom, so
//    small negative indices are possible and reported as they are.

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "sayo/distribution.hpp"

namespace sayo {

enum class Estimator { pick_freeze, binned_anova };

std::string to_string(Estimator e);

struct SensitivityReport {
  double variance = 0.0;
  std::vector<std::string> inputs;
  Eigen::VectorXd main;
  Eigen::VectorXd total;
  std::map<std::pair<int, int>, double> interactions;
  Eigen::Index n = 0;
  Estimator estimator = Estimator::pick_freeze;
  // 1 - sum of all estimated indices (binned only).
  double unattributed = 0.0;
};

// |sum of all indices - 1|.
double check_sum_to_one(const SensitivityReport& report);

// Evaluates a batch of input rows (n x k) into n outputs.
using BatchModel = std::function<Eigen::VectorXd(const Eigen::MatrixXd&)>;

SensitivityReport pick_freeze(const BatchModel& model, const std::vector<MarginalDistribution>& inputs,
                              Eigen::Index n, std::uint64_t seed);

struct AnovaTerms {
  double f0 = 0.0;
  std::vector<Eigen::VectorXd> first;       // f_i per bin
  std::vector<Eigen::VectorXd> first_mass;  // bin probabilities
  std::map<std::pair<int, int>, Eigen::MatrixXd> second;  // f_ij per (coarse) cell
};

struct AnovaResult {
  AnovaTerms terms;
  SensitivityReport report;
};

// Equal-probability bin index per sample. Ties always share a bin.
struct BinnedInput {
  std::vector<std::uint16_t> fine;
  int fine_bins = 0;
  std::vector<std::uint16_t> coarse;
  int coarse_bins = 0;
};

// ceil(n^(1/3)) capped at 64.
int default_bin_count(Eigen::Index n);
// Pair tables keep >= 20 samples per cell on average.
int pair_bin_count(Eigen::Index n, int bins);

BinnedInput bin_input(const Eigen::VectorXd& x, int bins);

AnovaResult anova_from_bins(const std::vector<const BinnedInput*>& inputs, const Eigen::VectorXd& y, int order);

// x is n x k. bins <= 0 selects default_bin_count(n). order is 1 or 2.
AnovaResult binned_anova(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, int bins = 0, int order = 2);

// Empirical correlation of f_i(X_i) and f_j(X_j) over the sample.
double component_correlation(const AnovaTerms& terms, const BinnedInput& xi, int i, const BinnedInput& xj, int j);

// The recursion driven by parameterization: inputs are registered as they
// are defined and f-terms over the registered inputs are recomputed against
// the current output. Inputs are kept in id order.
class IncrementalAnova {
 public:
  explicit IncrementalAnova(int bins = 0, int order = 2) : bins_(bins), order_(order) {}

  void set_input(const std::string& id, const Eigen::VectorXd& driver);
  void remove_input(const std::string& id);
  void clear() { inputs_.clear(); }
  bool empty() const { return inputs_.empty(); }
  std::size_t size() const { return inputs_.size(); }

  AnovaResult evaluate(const Eigen::VectorXd& y) const;

 private:
  int bins_;
  int order_;
  std::map<std::string, BinnedInput> inputs_;
};

}  // namespace sayo
