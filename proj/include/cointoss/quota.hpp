#pragma once

// Deterministic proportional interleaving.
//
// Given target frequencies lambda_1..lambda_k (summing to 1), produce a word
// over {0..k-1} such that every prefix of length n holds either
// floor(lambda_i n) or ceil(lambda_i n) copies of symbol i. Slot t is given
// to the eligible symbol with the earliest pseudo-deadline: the j-th copy of
// symbol i may not appear before slot floor((j-1)/lambda_i)+1 and must appear
// by slot ceil(j/lambda_i). With total frequency 1 on a single sequence this
// earliest-deadline rule meets every deadline.

#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <vector>

namespace cointoss {

inline std::vector<std::uint32_t> quota_word(const std::vector<double>& frequencies, std::size_t length) {
  if (frequencies.empty()) throw std::invalid_argument("quota word needs at least one frequency");
  double total = 0.0;
  for (double f : frequencies) {
    if (!(f > 0.0)) throw std::invalid_argument("quota frequencies must be positive");
    total += f;
  }
  if (std::abs(total - 1.0) > 1e-9) throw std::invalid_argument("quota frequencies must sum to 1");

  constexpr double eps = 1e-9;
  const std::size_t k = frequencies.size();
  std::vector<std::uint64_t> count(k, 0);
  std::vector<std::uint32_t> word;
  word.reserve(length);
  for (std::size_t t = 1; t <= length; ++t) {
    std::size_t pick = k;
    double best_deadline = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < k; ++i) {
      const double j = static_cast<double>(count[i] + 1);
      const double release = std::floor((j - 1.0) / frequencies[i] + eps);
      if (static_cast<double>(t) <= release) continue;
      const double deadline = std::ceil(j / frequencies[i] - eps);
      if (deadline < best_deadline) {
        best_deadline = deadline;
        pick = i;
      }
    }
    if (pick == k) {
      // Only reachable through rounding of the frequencies: fall back to the
      // symbol furthest behind its quota.
      double lag = -std::numeric_limits<double>::infinity();
      for (std::size_t i = 0; i < k; ++i) {
        const double l = frequencies[i] * static_cast<double>(t) - static_cast<double>(count[i]);
        if (l > lag) {
          lag = l;
          pick = i;
        }
      }
    }
    ++count[pick];
    word.push_back(static_cast<std::uint32_t>(pick));
  }
  return word;
}

}  // namespace cointoss
