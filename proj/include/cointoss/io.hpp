#pragma once

// JSON serialization of sequences, block rules, curves and construction
// states, plus the CSV writer used by the command-line tool.
//
// Sequence schema (recursive):
//   {"kind": "constant", "p": 0.3}
//   {"kind": "explicit", "weights": [...]}
//   {"kind": "periodic", "weights": [...]}
//   {"kind": "block_schedule", "parts": [<sequence>...], "rule": <rule>}
//   {"kind": "diagonal", "stages": [<sequence>...], "rule": <rule>}
//   {"kind": "gibbs", "source": <sequence>, "q": 2.0}
//   {"kind": "curve", "components": [{"lambda": 0.5, "p": 0.2}, ...], "horizon": 65536}
//   {"kind": "construction", "state": <state>}  or  {"kind": "construction", "state_file": "path"}
// Rule schema: {"kind": "superexponential", "base": 2} or {"kind": "geometric", "base": 4}.

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>
#include <type_traits>
#include <vector>

#include <json.hpp>

#include "cointoss/error.hpp"
#include "cointoss/spectrum.hpp"
#include "cointoss/transitions.hpp"
#include "cointoss/weights.hpp"

namespace cointoss::io {

using json = nlohmann::json;

// Shortest round-trip decimal form; "inf" / "-inf" / "nan" for non-finite values.
inline std::string format_number(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[32];
  for (int prec = 15; prec <= 17; ++prec) {
    std::snprintf(buf, sizeof buf, "%.*g", prec, x);
    if (std::strtod(buf, nullptr) == x) break;
  }
  return buf;
}

class CsvTable {
 public:
  explicit CsvTable(std::vector<std::string> header) : header_(std::move(header)) {}

  template <typename... T>
  void row(const T&... cells) {
    static_assert(sizeof...(T) > 0);
    std::vector<std::string> r;
    (r.push_back(cell(cells)), ...);
    if (r.size() != header_.size()) throw std::logic_error("CSV row width does not match the header");
    rows_.push_back(std::move(r));
  }

  std::size_t size() const { return rows_.size(); }

  std::string str() const {
    std::string out;
    auto line = [&](const std::vector<std::string>& cells) {
      for (std::size_t i = 0; i < cells.size(); ++i) {
        if (i) out.push_back(',');
        out += cells[i];
      }
      out.push_back('\n');
    };
    line(header_);
    for (const auto& r : rows_) line(r);
    return out;
  }

 private:
  template <typename T>
  static std::string cell(const T& x) {
    if constexpr (std::is_floating_point_v<T>) {
      return format_number(static_cast<double>(x));
    } else if constexpr (std::is_integral_v<T>) {
      return std::to_string(x);
    } else {
      return std::string(x);
    }
  }

  std::vector<std::string> header_;
  std::vector<std::vector<std::string>> rows_;
};

inline void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  out << content;
  out.flush();
  if (!out) throw IoError("failed writing '" + path + "'");
}

inline std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "' for reading");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline json parse_json(const std::string& text, const std::string& origin) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError("malformed JSON in " + origin + ": " + e.what());
  }
}

inline json read_json_file(const std::string& path) { return parse_json(read_text_file(path), "'" + path + "'"); }

// ---------------------------------------------------------------------------
// Field access with configuration errors instead of library exceptions

namespace detail {

template <typename T>
T get(const json& j, const char* key) {
  if (!j.is_object() || !j.contains(key)) throw ConfigError(std::string("missing field '") + key + "'");
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("field '") + key + "' has the wrong type: " + e.what());
  }
}

template <typename T>
T get_or(const json& j, const char* key, T fallback) {
  if (!j.is_object() || !j.contains(key)) return fallback;
  return get<T>(j, key);
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Block rules and curves

inline json to_json(const BlockRule& r) {
  return {{"kind", r.kind() == BlockRule::Kind::superexponential ? "superexponential" : "geometric"},
          {"base", r.base()}};
}

inline BlockRule rule_from_json(const json& j) {
  const auto kind = detail::get_or<std::string>(j, "kind", "superexponential");
  const double base = detail::get_or<double>(j, "base", 2.0);
  try {
    if (kind == "superexponential") return BlockRule::superexponential(base);
    if (kind == "geometric") return BlockRule::geometric(base);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  throw ConfigError("unknown block rule kind '" + kind + "'");
}

inline json to_json(const TauCurve& c) {
  json a = json::array();
  for (const auto& comp : c.components()) a.push_back({{"lambda", comp.lambda}, {"p", comp.p}});
  return a;
}

inline TauCurve curve_from_json(const json& j) {
  if (!j.is_array()) throw ConfigError("curve must be an array of {lambda, p} components");
  std::vector<TauComponent> comps;
  for (const auto& c : j) comps.push_back({detail::get<double>(c, "lambda"), detail::get<double>(c, "p")});
  try {
    return TauCurve(std::move(comps));
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("invalid curve: ") + e.what());
  }
}

// ---------------------------------------------------------------------------
// Construction state

inline json to_json(const ConstructionOptions& o) {
  return {{"p_high_fraction", o.p_high_fraction}, {"shrink_factor", o.shrink_factor},
          {"shrink_budget", o.shrink_budget},     {"slope_tolerance", o.slope_tolerance},
          {"match_tolerance", o.match_tolerance}, {"q_lower", o.q_lower},
          {"q_upper", o.q_upper},                 {"max_stages", o.max_stages},
          {"verify_points", o.verify_points},     {"horizon", o.horizon}};
}

inline ConstructionOptions options_from_json(const json& j) {
  ConstructionOptions o;
  if (j.is_null()) return o;
  o.p_high_fraction = detail::get_or(j, "p_high_fraction", o.p_high_fraction);
  o.shrink_factor = detail::get_or(j, "shrink_factor", o.shrink_factor);
  o.shrink_budget = detail::get_or(j, "shrink_budget", o.shrink_budget);
  o.slope_tolerance = detail::get_or(j, "slope_tolerance", o.slope_tolerance);
  o.match_tolerance = detail::get_or(j, "match_tolerance", o.match_tolerance);
  o.q_lower = detail::get_or(j, "q_lower", o.q_lower);
  o.q_upper = detail::get_or(j, "q_upper", o.q_upper);
  o.max_stages = detail::get_or(j, "max_stages", o.max_stages);
  o.verify_points = detail::get_or(j, "verify_points", o.verify_points);
  o.horizon = detail::get_or(j, "horizon", o.horizon);
  if (!(o.p_high_fraction > 0.0 && o.p_high_fraction < 1.0)) throw ConfigError("p_high_fraction must lie in (0,1)");
  if (!(o.shrink_factor > 0.0 && o.shrink_factor < 1.0)) throw ConfigError("shrink_factor must lie in (0,1)");
  if (!(o.slope_tolerance > 0.0) || !(o.match_tolerance > 0.0)) throw ConfigError("tolerances must be positive");
  if (o.horizon == 0 || o.verify_points < 10) throw ConfigError("horizon and verify_points must be positive");
  return o;
}

inline json to_json(const StageRecord& s) {
  json j{{"stage", s.stage},
         {"q_low", s.q_low},
         {"q_high", s.q_high},
         {"owner", s.owner},
         {"case", s.case_taken},
         {"p_high", s.p_high},
         {"shrink_steps", s.shrink_steps},
         {"slope_gap_low", s.slope_gap_low},
         {"slope_gap_high", s.slope_gap_high}};
  if (s.replaced_targets) {
    j["replaced_targets"] = {s.replaced_targets->first, s.replaced_targets->second};
  } else {
    j["replaced_targets"] = nullptr;
  }
  return j;
}

inline StageRecord stage_from_json(const json& j) {
  StageRecord s;
  s.stage = detail::get<std::size_t>(j, "stage");
  s.q_low = detail::get<double>(j, "q_low");
  s.q_high = detail::get<double>(j, "q_high");
  s.owner = detail::get<std::size_t>(j, "owner");
  s.case_taken = detail::get<int>(j, "case");
  s.p_high = detail::get<double>(j, "p_high");
  s.shrink_steps = detail::get_or<std::size_t>(j, "shrink_steps", 0);
  s.slope_gap_low = detail::get<double>(j, "slope_gap_low");
  s.slope_gap_high = detail::get<double>(j, "slope_gap_high");
  if (j.contains("replaced_targets") && !j.at("replaced_targets").is_null()) {
    const auto r = j.at("replaced_targets").get<std::vector<double>>();
    if (r.size() != 2) throw ConfigError("replaced_targets must hold two values");
    s.replaced_targets = std::make_pair(r[0], r[1]);
  }
  return s;
}

inline json to_json(const ConstructionState& s) {
  json curves = json::array();
  for (const auto& c : s.curves) curves.push_back(to_json(c));
  json stages = json::array();
  for (const auto& st : s.stages) stages.push_back(to_json(st));
  return {{"initial_targets", s.initial_targets},
          {"targets", s.targets},
          {"active_targets", s.active_targets()},
          {"curves", curves},
          {"stages", stages},
          {"rule", to_json(s.rule)},
          {"options", to_json(s.options)}};
}

inline ConstructionState state_from_json(const json& j) {
  ConstructionState s;
  s.initial_targets = detail::get<std::vector<double>>(j, "initial_targets");
  s.targets = detail::get<std::vector<double>>(j, "targets");
  if (!j.contains("curves") || !j.at("curves").is_array()) throw ConfigError("construction state needs a 'curves' array");
  for (const auto& c : j.at("curves")) s.curves.push_back(curve_from_json(c));
  if (j.contains("stages")) {
    for (const auto& st : j.at("stages")) s.stages.push_back(stage_from_json(st));
  }
  s.rule = rule_from_json(j.value("rule", json::object()));
  s.options = options_from_json(j.value("options", json()));
  if (s.curves.empty()) throw ConfigError("construction state holds no curves");
  if (s.stages.size() + 1 != s.curves.size()) throw ConfigError("construction state: stage and curve counts disagree");
  if (s.targets.size() < 2 * (s.curves.size() - 1)) throw ConfigError("construction state: too few targets");
  try {
    validate_nesting(s.targets, s.options.q_lower);
  } catch (const ConstructionError& e) {
    throw ConfigError(std::string("construction state: ") + e.what());
  }
  return s;
}

// ---------------------------------------------------------------------------
// Weight sequences

inline json to_json(const WeightSequence& w) {
  return std::visit(
      [](const auto& n) -> json {
        using T = std::decay_t<decltype(n)>;
        if constexpr (std::is_same_v<T, cointoss::detail::ConstantNode>) {
          return {{"kind", "constant"}, {"p", n.p}};
        } else if constexpr (std::is_same_v<T, cointoss::detail::ListNode>) {
          return {{"kind", n.periodic ? "periodic" : "explicit"}, {"weights", n.weights}};
        } else if constexpr (std::is_same_v<T, cointoss::detail::BlockNode>) {
          json parts = json::array();
          for (const auto& p : n.parts) parts.push_back(to_json(p));
          return {{"kind", "block_schedule"}, {"parts", parts}, {"rule", to_json(n.rule)}};
        } else if constexpr (std::is_same_v<T, cointoss::detail::DiagonalNode>) {
          json stages = json::array();
          for (const auto& s : n.stages) stages.push_back(to_json(s));
          return {{"kind", "diagonal"}, {"stages", stages}, {"rule", to_json(n.rule)}};
        } else {
          return {{"kind", "gibbs"}, {"source", to_json(n.source)}, {"q", n.q}};
        }
      },
      w.node().data);
}

inline WeightSequence sequence_from_json(const json& j) {
  const auto kind = detail::get<std::string>(j, "kind");
  try {
    if (kind == "constant") return WeightSequence::constant(detail::get<double>(j, "p"));
    if (kind == "explicit") return WeightSequence::explicit_list(detail::get<std::vector<double>>(j, "weights"));
    if (kind == "periodic") return WeightSequence::periodic(detail::get<std::vector<double>>(j, "weights"));
    if (kind == "block_schedule" || kind == "diagonal") {
      const char* key = kind == "diagonal" ? "stages" : "parts";
      if (!j.contains(key) || !j.at(key).is_array()) throw ConfigError(std::string("missing array '") + key + "'");
      std::vector<WeightSequence> parts;
      for (const auto& p : j.at(key)) parts.push_back(sequence_from_json(p));
      const auto rule = rule_from_json(j.value("rule", json::object()));
      return kind == "diagonal" ? WeightSequence::diagonal(std::move(parts), rule)
                                : WeightSequence::block_schedule(std::move(parts), rule);
    }
    if (kind == "gibbs") return WeightSequence::gibbs(sequence_from_json(j.at("source")), detail::get<double>(j, "q"));
    if (kind == "curve") {
      return realize_curve_periodic(curve_from_json(j.at("components")),
                                    detail::get_or<std::size_t>(j, "horizon", std::size_t{1} << 16));
    }
    if (kind == "construction") {
      if (j.contains("state")) return state_from_json(j.at("state")).realize();
      return state_from_json(read_json_file(detail::get<std::string>(j, "state_file"))).realize();
    }
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("invalid ") + kind + " sequence: " + e.what());
  }
  throw ConfigError("unknown sequence kind '" + kind + "'");
}

// ---------------------------------------------------------------------------
// Grids and schedules

// [q0, q1, ...] or {"from": a, "to": b, "count": n}; must be sorted.
inline std::vector<double> grid_from_json(const json& j, const char* what) {
  std::vector<double> g;
  if (j.is_array()) {
    try {
      g = j.get<std::vector<double>>();
    } catch (const json::exception&) {
      throw ConfigError(std::string(what) + " must be an array of numbers");
    }
  } else if (j.is_object()) {
    const auto count = detail::get<std::size_t>(j, "count");
    if (count == 0) throw ConfigError(std::string(what) + " count must be positive");
    g = linspace(detail::get<double>(j, "from"), detail::get<double>(j, "to"), count);
  } else {
    throw ConfigError(std::string(what) + " must be an array or {from, to, count}");
  }
  if (g.empty()) throw ConfigError(std::string(what) + " is empty");
  for (std::size_t i = 1; i < g.size(); ++i) {
    if (!(g[i] > g[i - 1])) throw ConfigError(std::string(what) + " must be strictly increasing");
  }
  for (double x : g) {
    if (!std::isfinite(x)) throw ConfigError(std::string(what) + " holds a non-finite value");
  }
  return g;
}

// [n0, n1, ...], {"linear": {first, last, step}}, {"geometric": {first, last, ratio}},
// or {"block_ends": {"rule": <rule>, "first": a, "last": b}}.
inline DepthSchedule schedule_from_json(const json& j) {
  try {
    if (j.is_array()) return DepthSchedule(j.get<std::vector<Depth>>());
    if (j.contains("linear")) {
      const auto& l = j.at("linear");
      return DepthSchedule::linear(detail::get<Depth>(l, "first"), detail::get<Depth>(l, "last"),
                                   detail::get_or<Depth>(l, "step", 1));
    }
    if (j.contains("geometric")) {
      const auto& g = j.at("geometric");
      return DepthSchedule::geometric(detail::get<Depth>(g, "first"), detail::get<Depth>(g, "last"),
                                      detail::get<double>(g, "ratio"));
    }
    if (j.contains("block_ends")) {
      const auto& b = j.at("block_ends");
      return DepthSchedule::block_ends(rule_from_json(b.value("rule", json::object())), detail::get<Depth>(b, "first"),
                                       detail::get<Depth>(b, "last"));
    }
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("invalid depth schedule: ") + e.what());
  } catch (const json::exception& e) {
    throw ConfigError(std::string("invalid depth schedule: ") + e.what());
  }
  throw ConfigError("depth schedule must be an array or one of linear / geometric / block_ends");
}

}  // namespace cointoss::io
