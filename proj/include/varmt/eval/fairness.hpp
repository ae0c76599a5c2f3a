#pragma once

#include <filesystem>
#include <set>
#include <span>
#include <string>
#include <vector>

namespace varmt {

/// One user group (e.g. a dialect community) and the benefit it receives.
struct GroupBenefit {
  std::string name;
  double population = 1.0;
  double benefit = 0.0;
};

using BenefitVector = std::vector<GroupBenefit>;

double macro_avg(const BenefitVector& benefits);
double pop_weighted_avg(const BenefitVector& benefits);
double max_min(const BenefitVector& benefits);

/// Generalized entropy index
///   E^a(b) = 1 / (n a (a - 1)) * sum_i [(b_i / mu)^a - 1],  a not in {0, 1}.
/// At a = 2 this is half the squared coefficient of variation.
double generalized_entropy(std::span<const double> benefits, double alpha);

struct EntropyDecomposition {
  double total = 0.0;
  double within = 0.0;
  double between = 0.0;
};

/// Splits E^a of the pooled individuals into the weighted within-group term
///   sum_g (n_g/n) (mu_g/mu)^a E^a(b^g)
/// and the between-group term
///   sum_g n_g / (n a (a-1)) [(mu_g/mu)^a - 1].
/// `total` is within + between.
EntropyDecomposition entropy_decomposition(const std::vector<std::vector<double>>& groups,
                                           double alpha);

struct FairnessReport {
  double avg_l = 0.0;
  double avg_pop = 0.0;
  double max_min = 0.0;
  double unfair_total = 0.0;
  double unfair_within = 0.0;
  double unfair_between = 0.0;
};

/// Every member of group g receives benefit BLEU_g / 100; the group stands
/// for population_g identical individuals, so the within-group term is 0.
/// avg_l, avg_pop and max_min stay on the BLEU scale.
FairnessReport unfairness_from_bleu(const BenefitVector& benefits, double alpha);

/// As unfairness_from_bleu, but avg_l and avg_pop are computed only over the
/// groups not named in `average_exclude` (e.g. the standard variety).
FairnessReport fairness_report(const BenefitVector& benefits, double alpha,
                               const std::set<std::string>& average_exclude);

/// Decimal rounding with ties to even, after removing binary representation
/// noise below 1e-9 (so 10.05 -> 10.0 and 7.675 -> 7.7 at one digit).
double round_half_even(double x, int digits);

/// Fixed-precision text rendering: one decimal for BLEU-scale values, three
/// for unfairness terms.
std::string format_report(const FairnessReport& report);

/// Scores file: "group<TAB>bleu" lines. Population file: "group<TAB>population".
/// Every scored group must have a population entry.
BenefitVector read_benefits(const std::filesystem::path& scores,
                            const std::filesystem::path& populations);

}  // namespace varmt
