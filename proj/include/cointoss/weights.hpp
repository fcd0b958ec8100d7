#pragma once

// Weight sequences (p_n)_{n>=1} that define inhomogeneous Bernoulli products.
//
// Digit convention: at depth j digit 0 carries weight p_j and digit 1 carries
// 1 - p_j. Depths are 1-based.
//
// A WeightSequence is an immutable value backed by a shared node, so copies
// are cheap and sequences can be nested (block schedules of block schedules,
// Gibbs reweightings of diagonal sequences, ...). Weights are produced lazily
// at any depth up to kMaxDepth.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <memory>
#include <stdexcept>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "cointoss/error.hpp"
#include "cointoss/kernels.hpp"

namespace cointoss {

using Depth = std::uint64_t;

inline constexpr Depth kMaxDepth = Depth{1} << 62;

// Block lengths l_1, l_2, ... used to splice sequences on consecutive depth
// ranges. Block k covers depths (end(k-1), end(k)].
class BlockRule {
 public:
  enum class Kind { superexponential, geometric };

  // l_k = ceil(base^(k^2)). The growth ratio l_{k+1} / (l_1 + ... + l_k) must
  // be non-decreasing; this is checked over every representable block.
  static BlockRule superexponential(double base = 2.0) { return BlockRule(Kind::superexponential, base); }

  // l_k = ceil(base^k). Shallow-depth demo schedule: its growth ratio tends to
  // base - 1 instead of diverging, so limits over it are only approximate.
  static BlockRule geometric(double base) { return BlockRule(Kind::geometric, base); }

  Kind kind() const { return kind_; }
  double base() const { return base_; }
  bool weakly_divergent() const { return kind_ == Kind::geometric; }

  std::size_t block_count() const { return ends_.size() - 1; }

  std::uint64_t length(std::size_t k) const {
    check_block(k);
    return ends_[k] - ends_[k - 1];
  }

  // Last depth of block k; end(0) = 0.
  Depth end(std::size_t k) const {
    if (k >= ends_.size()) throw BudgetError("block index " + std::to_string(k) + " beyond representable depth");
    return ends_[k];
  }

  // 1-based block index containing depth n >= 1.
  std::size_t block_of(Depth n) const {
    if (n == 0) throw std::invalid_argument("depth must be >= 1");
    if (n > ends_.back()) throw BudgetError("depth " + std::to_string(n) + " exceeds the block rule's range");
    return static_cast<std::size_t>(std::lower_bound(ends_.begin(), ends_.end(), n) - ends_.begin());
  }

  // l_{k+1} / (l_1 + ... + l_k) for k = 1 .. block_count()-2 (the last,
  // truncated block is excluded).
  std::vector<double> growth_ratios() const {
    std::vector<double> out;
    for (std::size_t k = 1; k + 2 <= block_count(); ++k) {
      out.push_back(static_cast<double>(length(k + 1)) / static_cast<double>(ends_[k]));
    }
    return out;
  }

  // Block-end depths in [lo, hi].
  std::vector<Depth> ends_between(Depth lo, Depth hi) const {
    std::vector<Depth> out;
    for (std::size_t k = 1; k < ends_.size(); ++k) {
      if (ends_[k] >= lo && ends_[k] <= hi) out.push_back(ends_[k]);
    }
    return out;
  }

  friend bool operator==(const BlockRule& a, const BlockRule& b) {
    return a.kind_ == b.kind_ && a.base_ == b.base_;
  }

 private:
  BlockRule(Kind kind, double base) : kind_(kind), base_(base) {
    if (!(base > 1.0) || !std::isfinite(base)) {
      throw std::invalid_argument("block rule base must be a finite number > 1");
    }
    ends_.push_back(0);
    for (std::uint64_t k = 1;; ++k) {
      const long double exponent = kind == Kind::superexponential ? static_cast<long double>(k) * k : k;
      const long double raw = std::ceil(std::pow(static_cast<long double>(base), exponent));
      const long double room = static_cast<long double>(kMaxDepth - ends_.back());
      if (raw >= room) {
        ends_.push_back(kMaxDepth);
        break;
      }
      ends_.push_back(ends_.back() + static_cast<Depth>(raw));
    }
    if (kind == Kind::superexponential) {
      const auto ratios = growth_ratios();
      for (std::size_t i = 1; i < ratios.size(); ++i) {
        if (ratios[i] < ratios[i - 1]) {
          throw std::invalid_argument("superexponential block rule with base " + std::to_string(base) +
                                      " has a decreasing growth ratio at block " + std::to_string(i + 2));
        }
      }
    }
  }

  void check_block(std::size_t k) const {
    if (k == 0 || k >= ends_.size()) throw BudgetError("block index " + std::to_string(k) + " out of range");
  }

  Kind kind_;
  double base_;
  std::vector<Depth> ends_;
};

// Multiset of weights over a depth range, keyed by the exact weight value.
using WeightCounts = std::map<double, std::uint64_t>;

namespace detail {
struct Node;
}

class WeightSequence {
 public:
  enum class Kind { constant, explicit_list, periodic, block_schedule, diagonal, gibbs };

  static WeightSequence constant(double p);
  // Finite list; querying beyond its length is an error.
  static WeightSequence explicit_list(std::vector<double> weights);
  // p_n = weights[(n-1) mod period].
  static WeightSequence periodic(std::vector<double> weights);
  // Part (k-1) mod m is active on block k. Each part keeps its own position
  // counter, so consecutive blocks of the same part continue where the
  // previous one stopped.
  static WeightSequence block_schedule(std::vector<WeightSequence> parts, BlockRule rule);
  // On block k the weights of stage min(k, m) are used at the same absolute
  // depth; beyond block m the sequence coincides with the last stage.
  static WeightSequence diagonal(std::vector<WeightSequence> stages, BlockRule rule);
  // p'_n = p_n^q / (p_n^q + (1-p_n)^q).
  static WeightSequence gibbs(WeightSequence source, double q);

  Kind kind() const;

  // p_n for n >= 1.
  double at(Depth n) const;

  // Number of defined depths (kMaxDepth unless the sequence is finite).
  Depth horizon() const;

  // Counts of each weight value over depths [first, last] (1-based, inclusive).
  WeightCounts counts(Depth first, Depth last) const;
  WeightCounts prefix_counts(Depth n) const { return n == 0 ? WeightCounts{} : counts(1, n); }

  const detail::Node& node() const { return *node_; }

 private:
  explicit WeightSequence(std::shared_ptr<const detail::Node> node) : node_(std::move(node)) {}
  std::shared_ptr<const detail::Node> node_;
};

namespace detail {

struct ConstantNode {
  double p;
};

// Distinct values of a finite word plus per-value prefix counts, so range
// counts cost O(#distinct values).
struct ListNode {
  std::vector<double> weights;
  bool periodic = false;
  std::vector<double> palette;
  std::vector<std::uint32_t> index;
  std::vector<std::vector<std::uint64_t>> prefix;  // prefix[j][i]: occurrences of palette[j] in [0, i)

  void build() {
    palette = weights;
    std::sort(palette.begin(), palette.end());
    palette.erase(std::unique(palette.begin(), palette.end()), palette.end());
    index.resize(weights.size());
    for (std::size_t i = 0; i < weights.size(); ++i) {
      index[i] = static_cast<std::uint32_t>(std::lower_bound(palette.begin(), palette.end(), weights[i]) -
                                            palette.begin());
    }
    if (palette.size() * (weights.size() + 1) <= (std::size_t{1} << 24)) {
      prefix.assign(palette.size(), std::vector<std::uint64_t>(weights.size() + 1, 0));
      for (std::size_t i = 0; i < weights.size(); ++i) {
        for (std::size_t j = 0; j < palette.size(); ++j) prefix[j][i + 1] = prefix[j][i];
        ++prefix[index[i]][i + 1];
      }
    }
  }

  // Counts over positions [b, e) of the underlying word, 0 <= b <= e <= size.
  void add_word_range(std::uint64_t b, std::uint64_t e, std::uint64_t times, WeightCounts& out) const {
    if (b >= e || times == 0) return;
    if (!prefix.empty()) {
      for (std::size_t j = 0; j < palette.size(); ++j) {
        const auto c = prefix[j][e] - prefix[j][b];
        if (c) out[palette[j]] += c * times;
      }
    } else {
      std::vector<std::uint64_t> local(palette.size(), 0);
      for (auto i = b; i < e; ++i) ++local[index[i]];
      for (std::size_t j = 0; j < palette.size(); ++j) {
        if (local[j]) out[palette[j]] += local[j] * times;
      }
    }
  }
};

struct BlockNode {
  std::vector<WeightSequence> parts;
  BlockRule rule;
  // part_start[k]: 0-based position inside its part where block k begins.
  std::vector<std::uint64_t> part_start;
};

struct DiagonalNode {
  std::vector<WeightSequence> stages;
  BlockRule rule;
};

struct GibbsNode {
  WeightSequence source;
  double q;
};

struct Node {
  std::variant<ConstantNode, ListNode, BlockNode, DiagonalNode, GibbsNode> data;
};

inline void add_counts(const WeightSequence& w, Depth first, Depth last, WeightCounts& out);

inline void add_counts_node(const Node& node, Depth first, Depth last, WeightCounts& out) {
  if (first > last) return;
  std::visit(
      [&](const auto& n) {
        using T = std::decay_t<decltype(n)>;
        if constexpr (std::is_same_v<T, ConstantNode>) {
          out[n.p] += last - first + 1;
        } else if constexpr (std::is_same_v<T, ListNode>) {
          const std::uint64_t len = n.weights.size();
          const std::uint64_t b = first - 1;
          const std::uint64_t e = last;
          if (!n.periodic) {
            if (e > len) throw std::out_of_range("explicit weight list has only " + std::to_string(len) + " entries");
            n.add_word_range(b, e, 1, out);
            return;
          }
          const auto bq = b / len, br = b % len, eq = e / len, er = e % len;
          if (bq == eq) {
            n.add_word_range(br, er, 1, out);
          } else {
            n.add_word_range(br, len, 1, out);
            n.add_word_range(0, len, eq - bq - 1, out);
            n.add_word_range(0, er, 1, out);
          }
        } else if constexpr (std::is_same_v<T, BlockNode>) {
          const std::size_t m = n.parts.size();
          for (std::size_t k = n.rule.block_of(first); k <= n.rule.block_count(); ++k) {
            const Depth lo = std::max(first, n.rule.end(k - 1) + 1);
            const Depth hi = std::min(last, n.rule.end(k));
            if (lo > hi) break;
            const Depth base = n.rule.end(k - 1);
            add_counts(n.parts[(k - 1) % m], n.part_start[k] + (lo - base), n.part_start[k] + (hi - base), out);
            if (hi == last) break;
          }
        } else if constexpr (std::is_same_v<T, DiagonalNode>) {
          const std::size_t m = n.stages.size();
          for (std::size_t k = n.rule.block_of(first); k <= n.rule.block_count(); ++k) {
            const Depth lo = std::max(first, n.rule.end(k - 1) + 1);
            const Depth hi = k >= m ? last : std::min(last, n.rule.end(k));
            if (lo > hi) break;
            add_counts(n.stages[std::min(k, m) - 1], lo, hi, out);
            if (hi == last) break;
          }
        } else {
          WeightCounts source;
          add_counts(n.source, first, last, source);
          for (const auto& [p, c] : source) out[gibbs_weight(p, n.q)] += c;
        }
      },
      node.data);
}

inline void add_counts(const WeightSequence& w, Depth first, Depth last, WeightCounts& out) {
  add_counts_node(w.node(), first, last, out);
}

}  // namespace detail

inline WeightSequence WeightSequence::constant(double p) {
  require_probability(p);
  return WeightSequence(std::make_shared<const detail::Node>(detail::Node{detail::ConstantNode{p}}));
}

inline WeightSequence WeightSequence::explicit_list(std::vector<double> weights) {
  if (weights.empty()) throw std::invalid_argument("explicit weight list is empty");
  for (double p : weights) require_probability(p);
  detail::ListNode n{std::move(weights), false, {}, {}, {}};
  n.build();
  return WeightSequence(std::make_shared<const detail::Node>(detail::Node{std::move(n)}));
}

inline WeightSequence WeightSequence::periodic(std::vector<double> weights) {
  if (weights.empty()) throw std::invalid_argument("periodic weight list is empty");
  for (double p : weights) require_probability(p);
  detail::ListNode n{std::move(weights), true, {}, {}, {}};
  n.build();
  return WeightSequence(std::make_shared<const detail::Node>(detail::Node{std::move(n)}));
}

inline WeightSequence WeightSequence::block_schedule(std::vector<WeightSequence> parts, BlockRule rule) {
  if (parts.empty()) throw std::invalid_argument("block schedule needs at least one part");
  const std::size_t m = parts.size();
  std::vector<std::uint64_t> start(rule.block_count() + 1, 0);
  std::vector<std::uint64_t> used(m, 0);
  for (std::size_t k = 1; k <= rule.block_count(); ++k) {
    const std::size_t i = (k - 1) % m;
    start[k] = used[i];
    used[i] += rule.length(k);
  }
  detail::BlockNode n{std::move(parts), std::move(rule), std::move(start)};
  return WeightSequence(std::make_shared<const detail::Node>(detail::Node{std::move(n)}));
}

inline WeightSequence WeightSequence::diagonal(std::vector<WeightSequence> stages, BlockRule rule) {
  if (stages.empty()) throw std::invalid_argument("diagonal sequence needs at least one stage");
  detail::DiagonalNode n{std::move(stages), std::move(rule)};
  return WeightSequence(std::make_shared<const detail::Node>(detail::Node{std::move(n)}));
}

inline WeightSequence WeightSequence::gibbs(WeightSequence source, double q) {
  if (!std::isfinite(q)) throw std::invalid_argument("Gibbs parameter must be finite");
  detail::GibbsNode n{std::move(source), q};
  return WeightSequence(std::make_shared<const detail::Node>(detail::Node{std::move(n)}));
}

inline WeightSequence::Kind WeightSequence::kind() const {
  return std::visit(
      [](const auto& n) {
        using T = std::decay_t<decltype(n)>;
        if constexpr (std::is_same_v<T, detail::ConstantNode>) return Kind::constant;
        if constexpr (std::is_same_v<T, detail::ListNode>) return n.periodic ? Kind::periodic : Kind::explicit_list;
        if constexpr (std::is_same_v<T, detail::BlockNode>) return Kind::block_schedule;
        if constexpr (std::is_same_v<T, detail::DiagonalNode>) return Kind::diagonal;
        if constexpr (std::is_same_v<T, detail::GibbsNode>) return Kind::gibbs;
      },
      node_->data);
}

inline double WeightSequence::at(Depth n) const {
  if (n == 0) throw std::invalid_argument("depth must be >= 1");
  return std::visit(
      [n](const auto& d) -> double {
        using T = std::decay_t<decltype(d)>;
        if constexpr (std::is_same_v<T, detail::ConstantNode>) {
          return d.p;
        } else if constexpr (std::is_same_v<T, detail::ListNode>) {
          if (d.periodic) return d.weights[(n - 1) % d.weights.size()];
          if (n > d.weights.size()) {
            throw std::out_of_range("explicit weight list has only " + std::to_string(d.weights.size()) +
                                    " entries, depth " + std::to_string(n) + " requested");
          }
          return d.weights[n - 1];
        } else if constexpr (std::is_same_v<T, detail::BlockNode>) {
          const std::size_t k = d.rule.block_of(n);
          const Depth within = n - d.rule.end(k - 1);
          return d.parts[(k - 1) % d.parts.size()].at(d.part_start[k] + within);
        } else if constexpr (std::is_same_v<T, detail::DiagonalNode>) {
          const std::size_t k = d.rule.block_of(n);
          return d.stages[std::min(k, d.stages.size()) - 1].at(n);
        } else {
          return gibbs_weight(d.source.at(n), d.q);
        }
      },
      node_->data);
}

inline Depth WeightSequence::horizon() const {
  return std::visit(
      [](const auto& d) -> Depth {
        using T = std::decay_t<decltype(d)>;
        if constexpr (std::is_same_v<T, detail::ListNode>) {
          return d.periodic ? kMaxDepth : d.weights.size();
        } else if constexpr (std::is_same_v<T, detail::GibbsNode>) {
          return d.source.horizon();
        } else if constexpr (std::is_same_v<T, detail::BlockNode>) {
          // A finite part limits the schedule to the blocks it can fill.
          Depth h = kMaxDepth;
          const std::size_t m = d.parts.size();
          for (std::size_t k = 1; k <= d.rule.block_count(); ++k) {
            const auto& part = d.parts[(k - 1) % m];
            if (part.horizon() < d.part_start[k] + d.rule.length(k)) {
              h = d.rule.end(k - 1) + (part.horizon() > d.part_start[k] ? part.horizon() - d.part_start[k] : 0);
              break;
            }
          }
          return h;
        } else if constexpr (std::is_same_v<T, detail::DiagonalNode>) {
          return d.stages.back().horizon() < kMaxDepth ? d.stages.back().horizon() : kMaxDepth;
        } else {
          return kMaxDepth;
        }
      },
      node_->data);
}

inline WeightCounts WeightSequence::counts(Depth first, Depth last) const {
  if (first == 0) throw std::invalid_argument("depth must be >= 1");
  if (last > kMaxDepth) throw BudgetError("depth " + std::to_string(last) + " exceeds the maximum depth");
  WeightCounts out;
  detail::add_counts(*this, first, last, out);
  return out;
}

// p_n of the sequence; n >= 1.
inline double weight_at(const WeightSequence& w, Depth n) { return w.at(n); }

// (1/n) sum_{j<=n} f(p_j), evaluated through the weight multiset so deep
// depths cost O(#distinct weights) instead of O(n).
template <typename F>
double depth_average(const WeightSequence& w, Depth n, F&& f) {
  if (n == 0) throw std::invalid_argument("depth must be >= 1");
  double acc = 0.0;
  for (const auto& [p, c] : w.prefix_counts(n)) acc += static_cast<double>(c) * f(p);
  return acc / static_cast<double>(n);
}

}  // namespace cointoss
