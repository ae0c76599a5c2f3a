#pragma once

#include <cstdint>
#include <vector>

#include "varmt/mt/model.hpp"

namespace varmt::mt {

/// Relative 2-norm error between backprop and central differences of the
/// training loss (dropout off) on `samples` randomly drawn parameter entries.
double gradient_check(Seq2SeqModel& model, const std::vector<EncodedPair>& pairs,
                      std::size_t samples, double h, std::uint64_t seed);

}  // namespace varmt::mt
