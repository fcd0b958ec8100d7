#pragma once

// Subcommands of the `cointoss` tool. Each one reads a RunConfig (JSON file
// via --config, overridden by flags), writes its CSV or JSON to --output (or
// stdout) and prints a one-line summary.
//
// Exit status: 0 success, 1 check failure, 2 configuration error,
// 3 budget error, 4 I/O error.

#include <algorithm>
#include <cmath>
#include <functional>
#include <iostream>
#include <map>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "cointoss/cointoss.hpp"

namespace cointoss::cli {

enum Status { kOk = 0, kCheckFailed = 1, kConfigError = 2, kBudgetError = 3, kIoError = 4 };

struct Outcome {
  std::string data;
  std::string summary;
  int status = kOk;
};

namespace detail {

inline std::string num(double x) { return io::format_number(x); }

inline std::vector<Depth> depths_of(const RunConfig& c) {
  if (c.depths) return c.depths->depths();
  if (c.depth) return {*c.depth};
  throw ConfigError("this command needs 'depths' or 'depth'");
}

// "a,b,c" -> [a, b, c]; "from:to:count" -> {"from", "to", "count"}.
inline io::json grid_flag(const std::string& text, const char* what) {
  try {
    if (text.find(':') != std::string::npos) {
      std::vector<std::string> parts;
      std::stringstream ss(text);
      for (std::string item; std::getline(ss, item, ':');) parts.push_back(item);
      if (parts.size() != 3) throw ConfigError(std::string(what) + " range must be from:to:count");
      return {{"from", std::stod(parts[0])}, {"to", std::stod(parts[1])}, {"count", std::stoull(parts[2])}};
    }
    io::json a = io::json::array();
    std::stringstream ss(text);
    for (std::string item; std::getline(ss, item, ',');) a.push_back(std::stod(item));
    return a;
  } catch (const std::logic_error&) {
    throw ConfigError(std::string("cannot parse ") + what + " '" + text + "'");
  }
}

// "n1,n2,..." or "first:last[:step]".
inline io::json depths_flag(const std::string& text) {
  try {
    if (text.find(':') != std::string::npos) {
      std::vector<std::string> parts;
      std::stringstream ss(text);
      for (std::string item; std::getline(ss, item, ':');) parts.push_back(item);
      if (parts.size() < 2 || parts.size() > 3) throw ConfigError("depth range must be first:last[:step]");
      io::json l{{"first", std::stoull(parts[0])}, {"last", std::stoull(parts[1])}};
      if (parts.size() == 3) l["step"] = std::stoull(parts[2]);
      return {{"linear", l}};
    }
    io::json a = io::json::array();
    std::stringstream ss(text);
    for (std::string item; std::getline(ss, item, ',');) a.push_back(std::stoull(item));
    return a;
  } catch (const std::logic_error&) {
    throw ConfigError("cannot parse depths '" + text + "'");
  }
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Commands

inline Outcome cmd_tau(const RunConfig& c) {
  const auto w = c.sequence();
  const auto depths = detail::depths_of(c);
  io::CsvTable t({"q", "depth", "value"});
  for (double q : c.require_q()) {
    for (Depth n : depths) t.row(q, n, tau_n(w, q, n));
  }
  return {t.str(), "tau: " + std::to_string(t.size()) + " values over " + std::to_string(c.q_grid.size()) +
                       " q and " + std::to_string(depths.size()) + " depths"};
}

inline Outcome cmd_limits(const RunConfig& c) {
  const auto w = c.sequence();
  io::CsvTable t({"q", "liminf", "limsup", "liminf_depth", "limsup_depth"});
  double widest = 0.0;
  for (double q : c.require_q()) {
    const auto lim = tau_limits(w, q, c.schedule(), {c.tail_start, c.near_tolerance});
    t.row(q, lim.lower, lim.upper, lim.lower_depth, lim.upper_depth);
    widest = std::max(widest, lim.upper - lim.lower);
  }
  return {t.str(), "limits: " + std::to_string(t.size()) + " q values, widest limsup-liminf gap " +
                       detail::num(widest)};
}

inline Outcome cmd_legendre(const RunConfig& c) {
  const auto w = c.sequence();
  const auto& q = c.require_q();
  if (c.alpha_grid.empty()) throw ConfigError("legendre needs an 'alpha' grid");
  std::vector<double> tau;
  for (double x : q) {
    tau.push_back(c.depths ? tau_limits(w, x, *c.depths, {c.tail_start, c.near_tolerance}).upper
                           : tau_n(w, x, c.single_depth()));
  }
  io::CsvTable t({"alpha", "value", "argmin_q"});
  std::size_t boundary = 0;
  for (double a : c.alpha_grid) {
    const auto pt = legendre(q, tau, a);
    t.row(a, pt.value, pt.argmin_q);
    if (pt.at_boundary) ++boundary;
  }
  return {t.str(), "legendre: " + std::to_string(t.size()) + " alpha values, " + std::to_string(boundary) +
                       " minimized at the edge of the q grid"};
}

inline Outcome cmd_gibbs(const RunConfig& c) {
  const auto w = c.sequence();
  if (!c.gibbs_q) throw ConfigError("gibbs needs 'gibbs_q'");
  const double q = *c.gibbs_q;
  const Depth n = c.single_depth();
  const auto& s_grid = c.s_grid.empty() ? c.require_q() : c.s_grid;
  io::CsvTable t({"s", "depth", "reweighted", "composed", "residual"});
  double worst = 0.0;
  for (double s : s_grid) {
    const auto r = verify_tau_composition(w, q, s, n);
    t.row(s, n, r.reweighted, r.composed, r.residual());
    worst = std::max(worst, r.residual());
  }
  const unsigned cdepth = static_cast<unsigned>(std::min<Depth>(n - 1, 10));  // uses levels up to cdepth + 1
  const double disc =
      cdepth + 1 <= c.enumeration_cap ? verify_consistency(w, q, cdepth, c.enumeration_cap).max_discrepancy : 0.0;
  const bool ok = worst < c.residual_tolerance && disc < c.consistency_tolerance;
  return {t.str(),
          std::string("gibbs: ") + (ok ? "ok" : "FAILED") + ", composition residual " + detail::num(worst) +
              ", consistency discrepancy " + detail::num(disc) + " at depth " + std::to_string(cdepth),
          ok ? kOk : kCheckFailed};
}

inline Outcome cmd_entropy(const RunConfig& c) {
  const auto w = c.sequence();
  const auto& sched = c.schedule();
  std::vector<std::string> header{"depth", "entropy"};
  if (c.gibbs_q) header.push_back("level_set_bound");
  io::CsvTable t(header);
  for (Depth n : sched.depths()) {
    const double h = depth_average(w, n, [](double p) { return binary_entropy(p); });
    if (c.gibbs_q) {
      t.row(n, h, level_set_bound_at(w, *c.gibbs_q, n));
    } else {
      t.row(n, h);
    }
  }
  const auto e = entropy_dimension(w, sched, c.tail_start);
  return {t.str(), "entropy: lower " + detail::num(e.lower) + ", upper " + detail::num(e.upper)};
}

inline std::string describe(const ConstructionState& s) {
  std::string cases;
  for (const auto& st : s.stages) cases += (cases.empty() ? "" : ",") + std::to_string(st.case_taken);
  const auto kinks = detect_kinks(s.sup(), linspace(1.001, s.q_upper(), 8000)).kinks;
  return std::to_string(s.curves.size()) + " curves, cases [" + cases + "], " + std::to_string(kinks.size()) +
         " kinks for " + std::to_string(s.active_targets().size()) + " active targets";
}

inline Outcome cmd_construct(const RunConfig& c) {
  ConstructionState state;
  if (c.state_file) {
    state = io::state_from_json(io::read_json_file(*c.state_file));
    const std::size_t stages = c.construction ? c.construction->stages : state.curves.size();
    if (c.construction && !c.construction->targets.empty()) {
      throw ConfigError("resuming keeps the saved targets; drop 'construction.targets'");
    }
    advance_construction(state, std::max(stages, state.curves.size()));
  } else {
    if (!c.construction) throw ConfigError("construct needs a 'construction' block or a 'state_file'");
    const auto& r = *c.construction;
    state = build_dense_transitions(r.targets, r.stages, r.initial, r.rule, r.options);
  }
  return {io::to_json(state).dump(2) + "\n", "construct: " + describe(state)};
}

inline Outcome cmd_kinks(const RunConfig& c) {
  SupTau sup;
  std::vector<double> grid = c.q_grid;
  if (c.state_file) {
    const auto state = io::state_from_json(io::read_json_file(*c.state_file));
    sup = state.sup();
    if (grid.empty()) grid = linspace(1.001, state.q_upper(), 8000);
  } else if (!c.curves.empty()) {
    sup = SupTau(c.curves);
    if (grid.empty()) throw ConfigError("kinks over explicit curves needs a 'q' grid");
  } else {
    throw ConfigError("kinks needs a 'state_file' or 'curves'");
  }
  if (grid.size() < 3) throw ConfigError("kink detection needs a q grid of at least 3 points");
  const auto report = detect_kinks(sup, grid);
  io::CsvTable t({"q_loc", "left_slope", "right_slope", "gap"});
  double smallest = std::numeric_limits<double>::infinity();
  for (const auto& k : report.kinks) {
    t.row(k.q, k.left_slope, k.right_slope, k.gap);
    smallest = std::min(smallest, k.gap);
  }
  return {t.str(), "kinks: " + std::to_string(report.kinks.size()) + " found" +
                       (report.kinks.empty() ? std::string() : ", smallest gap " + detail::num(smallest))};
}

inline Outcome cmd_sample(const RunConfig& c) {
  const auto w = c.sequence();
  const Depth n = c.single_depth();
  std::mt19937_64 gen(c.seed);
  io::CsvTable t({"sample", "alpha"});
  double sum = 0.0, sq = 0.0;
  for (std::size_t i = 0; i < c.samples; ++i) {
    const double a = local_exponent(w, sample_path(w, n, gen));
    t.row(i, a);
    sum += a;
    sq += a * a;
  }
  const double m = sum / static_cast<double>(c.samples);
  const double var = c.samples > 1 ? (sq - sum * m) / static_cast<double>(c.samples - 1) : 0.0;
  return {t.str(), "sample: " + std::to_string(c.samples) + " paths at depth " + std::to_string(n) +
                       ", mean local exponent " + detail::num(m) + ", sd " + detail::num(std::sqrt(std::max(var, 0.0)))};
}

inline Outcome cmd_coarse(const RunConfig& c) {
  const auto w = c.sequence();
  if (!c.alpha_bins) throw ConfigError("coarse-spectrum needs 'alpha_bins'");
  const Depth n = c.single_depth();
  if (n > c.enumeration_cap) {
    throw BudgetError("coarse spectrum depth " + std::to_string(n) + " exceeds the cap of " +
                      std::to_string(c.enumeration_cap));
  }
  const auto cs = coarse_spectrum(w, static_cast<unsigned>(n), *c.alpha_bins, c.enumeration_cap);
  io::CsvTable t({"alpha_bin", "count", "normalized"});
  std::size_t occupied = 0;
  for (std::size_t i = 0; i < cs.counts.size(); ++i) {
    t.row(cs.bins.center(i), cs.counts[i], cs.normalized(i));
    if (cs.counts[i]) ++occupied;
  }
  return {t.str(), "coarse-spectrum: " + std::to_string(occupied) + " occupied bins at depth " + std::to_string(n) +
                       ", " + std::to_string(cs.below) + " below and " + std::to_string(cs.above) +
                       " above the bin range"};
}

inline Outcome cmd_verify(const RunConfig& c) {
  const auto report = run_verify_suite(c.verify);
  io::json checks = io::json::array();
  std::size_t failed = 0;
  for (const auto& r : report.checks) {
    checks.push_back({{"name", r.name},
                      {"subject", r.subject},
                      {"passed", r.passed},
                      {"residual", r.residual},
                      {"tolerance", r.tolerance},
                      {"detail", r.detail}});
    if (!r.passed) ++failed;
  }
  io::json out{{"passed", report.passed()}, {"fault_injection", c.verify.fault_injection}, {"checks", checks}};
  std::string summary = "verify: " + std::to_string(report.checks.size() - failed) + "/" +
                        std::to_string(report.checks.size()) + " checks passed";
  if (failed) {
    summary += "; failed:";
    for (const auto& r : report.checks) {
      if (!r.passed) summary += " " + r.name;
    }
  }
  return {out.dump(2) + "\n", summary, report.passed() ? kOk : kCheckFailed};
}

inline const std::map<std::string, std::pair<std::string, std::function<Outcome(const RunConfig&)>>>& commands() {
  static const std::map<std::string, std::pair<std::string, std::function<Outcome(const RunConfig&)>>> table{
      {"tau", {"depth-n L^q-spectrum on a q grid (CSV q,depth,value)", cmd_tau}},
      {"limits", {"liminf / limsup of tau_n over a depth schedule", cmd_limits}},
      {"legendre", {"Legendre transform of the spectrum (CSV alpha,value,argmin_q)", cmd_legendre}},
      {"gibbs", {"reweighted product: composition and consistency identities", cmd_gibbs}},
      {"entropy", {"entropy -tau_n'(1) along a depth schedule", cmd_entropy}},
      {"construct", {"staged construction of nested phase transitions (JSON state)", cmd_construct}},
      {"kinks", {"kinks of a maximum of spectra (CSV q_loc,left_slope,right_slope,gap)", cmd_kinks}},
      {"sample", {"local exponents of sampled paths", cmd_sample}},
      {"coarse-spectrum", {"histogram of local exponents over all cylinders", cmd_coarse}},
      {"verify", {"run the self-check suite (JSON report)", cmd_verify}},
  };
  return table;
}

// ---------------------------------------------------------------------------
// Dispatch

inline int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Multifractal analysis of inhomogeneous Bernoulli products", "cointoss"};
  app.require_subcommand(1);

  struct Flags {
    std::string config, output, sequence, weights, periodic, q, s, alpha, alpha_bins, depths, targets, state, fault;
    std::optional<double> p, gibbs_q;
    std::optional<Depth> depth, tail_start;
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> samples, stages;
    std::optional<unsigned> cap;
  } f;

  for (const auto& [name, entry] : commands()) {
    auto* sub = app.add_subcommand(name, entry.first);
    sub->add_option("--config", f.config, "JSON run configuration");
    sub->add_option("-o,--output", f.output, "output file (default: stdout)");
    sub->add_option("--sequence", f.sequence, "weight sequence as inline JSON");
    sub->add_option("--p", f.p, "constant weight sequence");
    sub->add_option("--weights", f.weights, "explicit weights a,b,c");
    sub->add_option("--periodic", f.periodic, "periodic weights a,b,c");
    sub->add_option("--q", f.q, "q grid: a,b,c or from:to:count (use --q=-1:2:7 for negative starts)");
    sub->add_option("--s", f.s, "s grid for the composition identity");
    sub->add_option("--alpha", f.alpha, "alpha grid");
    sub->add_option("--alpha-bins", f.alpha_bins, "alpha bins from:to:count");
    sub->add_option("--depth", f.depth, "single depth");
    sub->add_option("--depths", f.depths, "depths n1,n2,... or first:last[:step]");
    sub->add_option("--tail-start", f.tail_start, "first depth counted by limit estimates");
    sub->add_option("--gibbs-q", f.gibbs_q, "reweighting parameter");
    sub->add_option("--seed", f.seed, "random seed");
    sub->add_option("--samples", f.samples, "number of sampled paths");
    sub->add_option("--stages", f.stages, "construction stages");
    sub->add_option("--targets", f.targets, "construction targets q1,q2,...");
    sub->add_option("--state", f.state, "saved construction state");
    sub->add_option("--fault", f.fault, "verify: perturb one kernel (tau, d1, d2, gibbs)");
    sub->add_option("--cap", f.cap, "enumeration depth cap");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return kConfigError;
  }

  const auto chosen = app.get_subcommands().front()->get_name();
  try {
    io::json j = f.config.empty() ? io::json::object() : io::read_json_file(f.config);
    if (!j.is_object()) throw ConfigError("configuration must be a JSON object");
    if (!f.output.empty()) j["output"] = f.output;
    if (!f.sequence.empty()) j["sequence"] = io::parse_json(f.sequence, "--sequence");
    if (f.p) j["sequence"] = {{"kind", "constant"}, {"p", *f.p}};
    if (!f.weights.empty()) j["sequence"] = {{"kind", "explicit"}, {"weights", detail::grid_flag(f.weights, "weights")}};
    if (!f.periodic.empty()) {
      j["sequence"] = {{"kind", "periodic"}, {"weights", detail::grid_flag(f.periodic, "weights")}};
    }
    if (!f.q.empty()) j["q"] = detail::grid_flag(f.q, "q grid");
    if (!f.s.empty()) j["s"] = detail::grid_flag(f.s, "s grid");
    if (!f.alpha.empty()) j["alpha"] = detail::grid_flag(f.alpha, "alpha grid");
    if (!f.alpha_bins.empty()) {
      const auto b = detail::grid_flag(f.alpha_bins, "alpha bins");
      if (!b.is_object()) throw ConfigError("alpha bins must be from:to:count");
      j["alpha_bins"] = b;
    }
    if (f.depth) j["depth"] = *f.depth;
    if (!f.depths.empty()) j["depths"] = detail::depths_flag(f.depths);
    if (f.tail_start) j["tail_start"] = *f.tail_start;
    if (f.gibbs_q) j["gibbs_q"] = *f.gibbs_q;
    if (f.seed) j["seed"] = *f.seed;
    if (f.samples) j["samples"] = *f.samples;
    if (f.stages || !f.targets.empty()) {
      if (!j.contains("construction")) j["construction"] = io::json::object();
      if (f.stages) j["construction"]["stages"] = *f.stages;
      if (!f.targets.empty()) j["construction"]["targets"] = detail::grid_flag(f.targets, "targets");
    }
    if (!f.state.empty()) j["state_file"] = f.state;
    if (!f.fault.empty()) j["verify"]["fault_injection"] = f.fault;
    if (f.cap) {
      j["tolerances"]["enumeration_cap"] = *f.cap;
      j["verify"]["enumeration_cap"] = *f.cap;
    }

    const auto config = RunConfig::from_json(j);
    const auto outcome = commands().at(chosen).second(config);
    if (config.output.empty()) {
      out << outcome.data;
      err << outcome.summary << "\n";
    } else {
      io::write_text_file(config.output, outcome.data);
      out << outcome.summary << " -> " << config.output << "\n";
    }
    return outcome.status;
  } catch (const ConfigError& e) {
    err << "configuration error: " << e.what() << "\n";
    return kConfigError;
  } catch (const BudgetError& e) {
    err << "budget exceeded: " << e.what() << "\n";
    return kBudgetError;
  } catch (const IoError& e) {
    err << "i/o error: " << e.what() << "\n";
    return kIoError;
  } catch (const ConstructionError& e) {
    err << "construction failed: " << e.what() << "\n";
    return kCheckFailed;
  } catch (const std::invalid_argument& e) {
    err << "configuration error: " << e.what() << "\n";
    return kConfigError;
  } catch (const std::out_of_range& e) {
    err << "configuration error: " << e.what() << "\n";
    return kConfigError;
  } catch (const io::json::exception& e) {
    err << "configuration error: " << e.what() << "\n";
    return kConfigError;
  }
}

}  // namespace cointoss::cli
