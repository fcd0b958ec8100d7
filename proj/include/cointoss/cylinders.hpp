#pragma once

#include <cmath>
#include <concepts>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "cointoss/error.hpp"
#include "cointoss/weights.hpp"

namespace cointoss {

inline constexpr unsigned kDefaultEnumerationCap = 22;

// Finite 0/1 word e_1 ... e_n naming the depth-n cylinder of all infinite
// words with that prefix. The empty path is the whole space.
class CylinderPath {
 public:
  CylinderPath() = default;
  explicit CylinderPath(std::vector<std::uint8_t> bits) : bits_(std::move(bits)) {
    for (auto b : bits_) {
      if (b > 1) throw std::invalid_argument("cylinder digits must be 0 or 1");
    }
  }

  static CylinderPath parse(std::string_view text) {
    std::vector<std::uint8_t> bits;
    bits.reserve(text.size());
    for (char c : text) {
      if (c != '0' && c != '1') throw std::invalid_argument("cylinder path may only contain '0' and '1'");
      bits.push_back(static_cast<std::uint8_t>(c - '0'));
    }
    return CylinderPath(std::move(bits));
  }

  // Path of depth n whose digits are the bits of `code`, most significant first.
  static CylinderPath from_code(std::uint64_t code, unsigned depth) {
    std::vector<std::uint8_t> bits(depth);
    for (unsigned j = 0; j < depth; ++j) bits[j] = static_cast<std::uint8_t>((code >> (depth - 1 - j)) & 1U);
    return CylinderPath(std::move(bits));
  }

  Depth depth() const { return bits_.size(); }
  std::uint8_t operator[](std::size_t j) const { return bits_[j]; }
  const std::vector<std::uint8_t>& bits() const { return bits_; }

  CylinderPath prefix(std::size_t n) const {
    return CylinderPath(std::vector<std::uint8_t>(bits_.begin(), bits_.begin() + static_cast<std::ptrdiff_t>(n)));
  }

  std::string str() const {
    std::string s;
    s.reserve(bits_.size());
    for (auto b : bits_) s.push_back(static_cast<char>('0' + b));
    return s;
  }

  friend bool operator==(const CylinderPath&, const CylinderPath&) = default;

 private:
  std::vector<std::uint8_t> bits_;
};

inline double digit_weight(double p, std::uint8_t digit) { return digit == 0 ? p : 1.0 - p; }

// mu(I) = prod_j p_j^(1-e_j) (1-p_j)^(e_j). Underflows to 0 for very deep
// paths; use cylinder_log2_measure there.
inline double cylinder_measure(const WeightSequence& w, const CylinderPath& path) {
  double m = 1.0;
  for (std::size_t j = 0; j < path.depth(); ++j) m *= digit_weight(w.at(j + 1), path[j]);
  return m;
}

inline double cylinder_log2_measure(const WeightSequence& w, const CylinderPath& path) {
  double s = 0.0;
  for (std::size_t j = 0; j < path.depth(); ++j) {
    const double p = w.at(j + 1);
    s += path[j] == 0 ? std::log2(p) : detail::log2_complement(p);
  }
  return s;
}

// alpha_n = -log2 mu(I_n) / n.
inline double local_exponent(const WeightSequence& w, const CylinderPath& path) {
  if (path.depth() == 0) throw std::invalid_argument("local exponent needs a path of depth >= 1");
  return -cylinder_log2_measure(w, path) / static_cast<double>(path.depth());
}

// All 2^n cylinders of depth n. Entry i is the cylinder whose digits are the
// binary expansion of i (most significant digit first).
class CylinderTable {
 public:
  CylinderTable(unsigned depth, std::vector<double> measures) : depth_(depth), measures_(std::move(measures)) {}

  unsigned depth() const { return depth_; }
  std::size_t size() const { return measures_.size(); }
  double measure(std::size_t i) const { return measures_[i]; }
  CylinderPath path(std::size_t i) const { return CylinderPath::from_code(i, depth_); }
  const std::vector<double>& measures() const { return measures_; }

  // Compensated (Neumaier) sum; plain summation of 2^20 terms drifts past 1e-12.
  double total_mass() const {
    double sum = 0.0, carry = 0.0;
    for (double m : measures_) {
      const double t = sum + m;
      carry += std::abs(sum) >= std::abs(m) ? (sum - t) + m : (m - t) + sum;
      sum = t;
    }
    return sum + carry;
  }

 private:
  unsigned depth_;
  std::vector<double> measures_;
};

inline CylinderTable enumerate_cylinders(const WeightSequence& w, unsigned depth,
                                         unsigned cap = kDefaultEnumerationCap) {
  if (depth > cap) {
    throw BudgetError("enumeration depth " + std::to_string(depth) + " exceeds the cap of " + std::to_string(cap) +
                      " (2^depth cylinders)");
  }
  if (depth > 40) throw BudgetError("enumeration depth above 40 is not supported");
  std::vector<double> level{1.0};
  for (unsigned j = 1; j <= depth; ++j) {
    const double p = w.at(j);
    std::vector<double> next(level.size() * 2);
    for (std::size_t i = 0; i < level.size(); ++i) {
      next[2 * i] = level[i] * p;
      next[2 * i + 1] = level[i] * (1.0 - p);
    }
    level = std::move(next);
  }
  return CylinderTable(depth, std::move(level));
}

// Portable uniform draw in [0,1) from a 64-bit engine.
template <std::uniform_random_bit_generator Engine>
double uniform01(Engine& gen) {
  return static_cast<double>(gen() >> 11) * 0x1.0p-53;
}

// mu-typical path: digit j is 0 with probability p_j, independently.
template <std::uniform_random_bit_generator Engine>
CylinderPath sample_path(const WeightSequence& w, Depth depth, Engine& gen) {
  if (depth == 0) throw std::invalid_argument("sample depth must be >= 1");
  std::vector<std::uint8_t> bits(depth);
  for (Depth j = 0; j < depth; ++j) bits[j] = uniform01(gen) < w.at(j + 1) ? 0 : 1;
  return CylinderPath(std::move(bits));
}

inline CylinderPath sample_path(const WeightSequence& w, Depth depth, std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  return sample_path(w, depth, gen);
}

}  // namespace cointoss
