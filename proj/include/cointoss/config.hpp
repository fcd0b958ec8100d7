#pragma once

// Run configuration shared by the command-line subcommands.
//
// Top-level JSON keys (all optional; each subcommand states which it needs):
//   sequence      weight sequence (schema in io.hpp)
//   q             q grid: [..] or {"from", "to", "count"}
//   s             second grid for the composition identity (gibbs)
//   alpha         alpha grid (legendre)
//   alpha_bins    {"from", "to", "count"} (coarse-spectrum)
//   depths        depth schedule (schema in io.hpp)
//   depth         single depth
//   tail_start    first depth counted by limit estimates
//   gibbs_q       reweighting parameter (gibbs, entropy)
//   seed, samples Monte Carlo controls (sample)
//   construction  {"targets", "stages", "initial", "rule", "options"} (construct)
//   state_file    saved construction state (construct resume, kinks)
//   curves        list of curves whose maximum is analysed (kinks)
//   verify        overrides for the verify suite
//   tolerances    {"near", "residual", "consistency", "enumeration_cap"}
//   output        output path

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "cointoss/coarse.hpp"
#include "cointoss/error.hpp"
#include "cointoss/io.hpp"
#include "cointoss/spectrum.hpp"
#include "cointoss/transitions.hpp"
#include "cointoss/verify.hpp"

namespace cointoss {

struct ConstructionRequest {
  std::vector<double> targets;
  std::size_t stages = 1;
  TauCurve initial = TauCurve({{0.5, 0.2}, {0.5, 0.4}});
  BlockRule rule = BlockRule::superexponential(2.0);
  ConstructionOptions options;
};

struct RunConfig {
  io::json raw = io::json::object();

  std::optional<io::json> sequence_spec;
  std::vector<double> q_grid;
  std::vector<double> s_grid;
  std::vector<double> alpha_grid;
  std::optional<AlphaBins> alpha_bins;
  std::optional<DepthSchedule> depths;
  std::optional<Depth> depth;
  Depth tail_start = 1;
  std::optional<double> gibbs_q;
  std::uint64_t seed = 1;
  std::size_t samples = 1000;
  std::optional<ConstructionRequest> construction;
  std::optional<std::string> state_file;
  std::vector<TauCurve> curves;
  VerifyConfig verify;
  std::string output;

  double near_tolerance = 1e-3;
  double residual_tolerance = 1e-10;
  double consistency_tolerance = 1e-12;
  unsigned enumeration_cap = kDefaultEnumerationCap;

  WeightSequence sequence() const {
    if (!sequence_spec) throw ConfigError("this command needs a 'sequence'");
    return io::sequence_from_json(*sequence_spec);
  }
  const DepthSchedule& schedule() const {
    if (!depths) throw ConfigError("this command needs 'depths'");
    return *depths;
  }
  Depth single_depth() const {
    if (!depth) throw ConfigError("this command needs 'depth'");
    return *depth;
  }
  const std::vector<double>& require_q() const {
    if (q_grid.empty()) throw ConfigError("this command needs a 'q' grid");
    return q_grid;
  }

  static RunConfig from_json(const io::json& j) {
    using io::detail::get;
    using io::detail::get_or;
    if (!j.is_object()) throw ConfigError("configuration must be a JSON object");
    RunConfig c;
    c.raw = j;
    if (j.contains("sequence")) c.sequence_spec = j.at("sequence");
    if (j.contains("q")) c.q_grid = io::grid_from_json(j.at("q"), "q grid");
    if (j.contains("s")) c.s_grid = io::grid_from_json(j.at("s"), "s grid");
    if (j.contains("alpha")) c.alpha_grid = io::grid_from_json(j.at("alpha"), "alpha grid");
    if (j.contains("alpha_bins")) {
      const auto& b = j.at("alpha_bins");
      AlphaBins bins{get<double>(b, "from"), get<double>(b, "to"), get<std::size_t>(b, "count")};
      try {
        bins.validate();
      } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
      }
      c.alpha_bins = bins;
    }
    if (j.contains("depths")) c.depths = io::schedule_from_json(j.at("depths"));
    if (j.contains("depth")) {
      c.depth = get<Depth>(j, "depth");
      if (*c.depth == 0) throw ConfigError("depth must be >= 1");
    }
    c.tail_start = get_or<Depth>(j, "tail_start", 1);
    if (j.contains("gibbs_q")) c.gibbs_q = get<double>(j, "gibbs_q");
    c.seed = get_or<std::uint64_t>(j, "seed", 1);
    c.samples = get_or<std::size_t>(j, "samples", 1000);
    if (c.samples == 0) throw ConfigError("samples must be >= 1");
    if (j.contains("construction")) {
      const auto& k = j.at("construction");
      ConstructionRequest r;
      r.targets = get_or<std::vector<double>>(k, "targets", {});
      r.stages = get_or<std::size_t>(k, "stages", 1);
      if (k.contains("initial")) r.initial = io::curve_from_json(k.at("initial"));
      if (k.contains("rule")) r.rule = io::rule_from_json(k.at("rule"));
      r.options = io::options_from_json(k.value("options", io::json()));
      c.construction = std::move(r);
    }
    if (j.contains("state_file")) c.state_file = get<std::string>(j, "state_file");
    if (j.contains("curves")) {
      if (!j.at("curves").is_array()) throw ConfigError("'curves' must be an array of curves");
      for (const auto& curve : j.at("curves")) c.curves.push_back(io::curve_from_json(curve));
    }
    if (j.contains("verify")) {
      const auto& v = j.at("verify");
      auto& o = c.verify;
      o.seed = get_or(v, "seed", o.seed);
      o.enumeration_depth = get_or(v, "enumeration_depth", o.enumeration_depth);
      o.enumeration_cap = get_or(v, "enumeration_cap", o.enumeration_cap);
      o.random_instances = get_or(v, "random_instances", o.random_instances);
      o.stages = get_or(v, "stages", o.stages);
      o.fault_injection = get_or(v, "fault_injection", o.fault_injection);
      o.oracle_tolerance = get_or(v, "oracle_tolerance", o.oracle_tolerance);
      o.conservation_tolerance = get_or(v, "conservation_tolerance", o.conservation_tolerance);
      o.derivative_tolerance = get_or(v, "derivative_tolerance", o.derivative_tolerance);
      o.consistency_tolerance = get_or(v, "consistency_tolerance", o.consistency_tolerance);
      o.composition_tolerance = get_or(v, "composition_tolerance", o.composition_tolerance);
      o.interpolation_tolerance = get_or(v, "interpolation_tolerance", o.interpolation_tolerance);
      o.limit_tolerance = get_or(v, "limit_tolerance", o.limit_tolerance);
      o.kink_tolerance = get_or(v, "kink_tolerance", o.kink_tolerance);
      o.construction_tolerance = get_or(v, "construction_tolerance", o.construction_tolerance);
    }
    if (j.contains("tolerances")) {
      const auto& t = j.at("tolerances");
      c.near_tolerance = get_or(t, "near", c.near_tolerance);
      c.residual_tolerance = get_or(t, "residual", c.residual_tolerance);
      c.consistency_tolerance = get_or(t, "consistency", c.consistency_tolerance);
      c.enumeration_cap = get_or(t, "enumeration_cap", c.enumeration_cap);
      if (!(c.near_tolerance > 0.0 && c.residual_tolerance > 0.0 && c.consistency_tolerance > 0.0)) {
        throw ConfigError("tolerances must be positive");
      }
    }
    c.output = get_or<std::string>(j, "output", "");
    return c;
  }
};

}  // namespace cointoss
