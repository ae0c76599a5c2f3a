#include "varmt/eval/fairness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <numeric>

#include "varmt/common/error.hpp"
#include "varmt/common/files.hpp"

namespace varmt {
namespace {

void check_nonempty(const BenefitVector& b) {
  if (b.empty()) throw Error("fairness: no groups");
  for (const auto& g : b)
    if (!(g.population > 0)) throw Error("fairness: population of '" + g.name + "' must be positive");
}

void check_alpha(double alpha) {
  if (alpha == 0.0 || alpha == 1.0) throw Error("generalized entropy: alpha must not be 0 or 1");
}

std::vector<std::pair<std::string, std::string>> read_tsv(const std::filesystem::path& path) {
  std::vector<std::pair<std::string, std::string>> out;
  for (const auto& line : files::read_lines(path)) {
    if (line.empty() || line[0] == '#') continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos) throw FormatError(path.string() + ": expected name<TAB>value");
    out.emplace_back(line.substr(0, tab), line.substr(tab + 1));
  }
  return out;
}

}  // namespace

double macro_avg(const BenefitVector& benefits) {
  check_nonempty(benefits);
  double s = 0.0;
  for (const auto& g : benefits) s += g.benefit;
  return s / static_cast<double>(benefits.size());
}

double pop_weighted_avg(const BenefitVector& benefits) {
  check_nonempty(benefits);
  double num = 0.0, den = 0.0;
  for (const auto& g : benefits) {
    num += g.population * g.benefit;
    den += g.population;
  }
  if (!(den > 0)) throw Error("pop_weighted_avg: zero total population");
  return num / den;
}

double max_min(const BenefitVector& benefits) {
  check_nonempty(benefits);
  auto [lo, hi] = std::minmax_element(benefits.begin(), benefits.end(),
                                      [](const auto& a, const auto& b) { return a.benefit < b.benefit; });
  return hi->benefit - lo->benefit;
}

double generalized_entropy(std::span<const double> benefits, double alpha) {
  check_alpha(alpha);
  if (benefits.empty()) throw Error("generalized entropy: no individuals");
  const double n = static_cast<double>(benefits.size());
  const double mu = std::accumulate(benefits.begin(), benefits.end(), 0.0) / n;
  if (!(mu > 0)) throw Error("generalized entropy: mean benefit must be positive");
  double s = 0.0;
  for (double b : benefits) s += std::pow(b / mu, alpha) - 1.0;
  return s / (n * alpha * (alpha - 1.0));
}

EntropyDecomposition entropy_decomposition(const std::vector<std::vector<double>>& groups,
                                           double alpha) {
  check_alpha(alpha);
  if (groups.empty()) throw Error("entropy decomposition: no groups");
  double n = 0.0, sum = 0.0;
  for (const auto& g : groups) {
    if (g.empty()) throw Error("entropy decomposition: empty group");
    n += static_cast<double>(g.size());
    sum += std::accumulate(g.begin(), g.end(), 0.0);
  }
  const double mu = sum / n;
  if (!(mu > 0)) throw Error("entropy decomposition: mean benefit must be positive");

  EntropyDecomposition d;
  for (const auto& g : groups) {
    const double ng = static_cast<double>(g.size());
    const double mug = std::accumulate(g.begin(), g.end(), 0.0) / ng;
    const double ratio = std::pow(mug / mu, alpha);
    if (mug > 0) d.within += (ng / n) * ratio * generalized_entropy(g, alpha);
    d.between += ng / (n * alpha * (alpha - 1.0)) * (ratio - 1.0);
  }
  d.total = d.within + d.between;
  return d;
}

FairnessReport unfairness_from_bleu(const BenefitVector& benefits, double alpha) {
  return fairness_report(benefits, alpha, {});
}

FairnessReport fairness_report(const BenefitVector& benefits, double alpha,
                               const std::set<std::string>& average_exclude) {
  check_nonempty(benefits);
  check_alpha(alpha);
  BenefitVector averaged;
  for (const auto& g : benefits)
    if (!average_exclude.count(g.name)) averaged.push_back(g);
  if (averaged.empty()) throw Error("fairness report: every group excluded from averages");

  FairnessReport r;
  r.avg_l = macro_avg(averaged);
  r.avg_pop = pop_weighted_avg(averaged);
  r.max_min = max_min(benefits);

  // Groups of identical individuals: only the between-group term survives.
  double n = 0.0, weighted = 0.0;
  for (const auto& g : benefits) {
    n += g.population;
    weighted += g.population * g.benefit / 100.0;
  }
  const double mu = weighted / n;
  if (!(mu > 0)) throw Error("fairness report: mean benefit must be positive");
  for (const auto& g : benefits) {
    const double ratio = std::pow(g.benefit / 100.0 / mu, alpha);
    r.unfair_between += g.population / (n * alpha * (alpha - 1.0)) * (ratio - 1.0);
  }
  r.unfair_within = 0.0;
  r.unfair_total = r.unfair_within + r.unfair_between;
  return r;
}

double round_half_even(double x, int digits) {
  const double scale = std::pow(10.0, digits);
  // Decimal inputs like 10.05 are stored slightly off; snap to 1e-9 first.
  const double scaled = std::round(x * scale * 1e9) / 1e9;
  const double lower = std::floor(scaled);
  const double frac = scaled - lower;
  double rounded;
  if (std::abs(frac - 0.5) < 1e-9) {
    rounded = std::fmod(lower, 2.0) == 0.0 ? lower : lower + 1.0;
  } else {
    rounded = std::round(scaled);
  }
  return rounded / scale;
}

std::string format_report(const FairnessReport& r) {
  char buf[512];
  std::snprintf(buf, sizeof buf,
                "avg_L\t%.1f\navg_pop\t%.1f\nmax_min\t%.1f\nunfair\t%.3f\n"
                "unfair_within\t%.3f\nunfair_between\t%.3f\n",
                round_half_even(r.avg_l, 1), round_half_even(r.avg_pop, 1),
                round_half_even(r.max_min, 1), round_half_even(r.unfair_total, 3),
                round_half_even(r.unfair_within, 3), round_half_even(r.unfair_between, 3));
  return buf;
}

BenefitVector read_benefits(const std::filesystem::path& scores,
                            const std::filesystem::path& populations) {
  const auto s = read_tsv(scores);
  std::map<std::string, std::string> p;
  for (auto& [name, value] : read_tsv(populations)) p[name] = value;
  BenefitVector out;
  for (const auto& [name, value] : s) {
    auto it = p.find(name);
    if (it == p.end()) throw Error("no population for group '" + name + "'");
    out.push_back(GroupBenefit{name, std::stod(it->second), std::stod(value)});
  }
  return out;
}

}  // namespace varmt
