#include "varmt/mt/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "varmt/common/error.hpp"

namespace varmt::mt {

double gradient_check(Seq2SeqModel& model, const std::vector<EncodedPair>& pairs,
                      std::size_t samples, double h, std::uint64_t seed) {
  require(!pairs.empty() && samples > 0, "gradient_check: nothing to check");
  std::vector<const EncodedPair*> ptrs;
  for (const auto& p : pairs) ptrs.push_back(&p);
  const Batch batch = make_batch(ptrs);
  const LossOptions opts;
  const auto loss = [&] {
    Graph g(false);
    return g.scalar(loss_node(g, model, batch, opts, 0.0, nullptr));
  };

  auto params = model.parameters();
  for (auto* p : params) p->zero_grad();
  Graph g;
  g.backward(loss_node(g, model, batch, opts, 0.0, nullptr));

  std::mt19937_64 rng(seed);
  double num = 0, den = 0;
  for (std::size_t s = 0; s < samples; ++s) {
    auto* p = params[rng() % params.size()];
    const auto idx = static_cast<Eigen::Index>(rng() % static_cast<std::uint64_t>(p->value.size()));
    double& x = p->value.data()[idx];
    const double orig = x;
    x = orig + h;
    const double up = loss();
    x = orig - h;
    const double down = loss();
    x = orig;
    const double fd = (up - down) / (2 * h);
    const double an = p->grad.data()[idx];
    num += (fd - an) * (fd - an);
    den += an * an;
  }
  return std::sqrt(num) / std::max(std::sqrt(den), 1e-300);
}

}  // namespace varmt::mt
