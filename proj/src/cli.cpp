#include "gml/cli.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iostream>
#include <memory>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "gml/bestresponse.hpp"
#include "gml/empirics.hpp"
#include "gml/equilibrium.hpp"
#include "gml/errors.hpp"
#include "gml/io.hpp"
#include "gml/parallel.hpp"
#include "gml/random.hpp"

#ifndef GML_VERSION
#define GML_VERSION "dev"
#endif

namespace gml {

namespace {

using nlohmann::json;

constexpr std::pair<Command, std::string_view> kCommands[] = {
    {Command::Simulate, "simulate"},       {Command::SolveEquilibrium, "solve-equilibrium"},
    {Command::NashGap, "nash-gap"},        {Command::Rates, "rates"},
    {Command::GraphonNorms, "graphon-norms"}, {Command::Validate, "validate"}};

// Typed access to one config block; every error names "block.key".
class Block {
 public:
  Block(const json& root, std::string name) : name_(std::move(name)) {
    if (root.contains(name_)) {
      doc_ = root.at(name_);
      if (!doc_.is_object()) throw ConfigError(name_, "expected an object");
    }
  }

  std::string field(std::string_view key) const { return fmt::format("{}.{}", name_, key); }
  bool has(std::string_view key) const { return doc_.contains(key); }
  const json& raw(std::string_view key) const { return doc_.at(key); }

  int integer(std::string_view key, int def) const {
    if (!has(key)) return def;
    const json& v = doc_.at(key);
    if (!v.is_number_integer()) throw ConfigError(field(key), "expected an integer");
    return v.get<int>();
  }
  double real(std::string_view key, double def) const {
    if (!has(key)) return def;
    const json& v = doc_.at(key);
    if (!v.is_number()) throw ConfigError(field(key), "expected a number");
    const double x = v.get<double>();
    if (!std::isfinite(x)) throw ConfigError(field(key), "must be finite");
    return x;
  }
  bool flag(std::string_view key, bool def) const {
    if (!has(key)) return def;
    const json& v = doc_.at(key);
    if (!v.is_boolean()) throw ConfigError(field(key), "expected true or false");
    return v.get<bool>();
  }
  std::string text(std::string_view key, std::string def) const {
    if (!has(key)) return def;
    const json& v = doc_.at(key);
    if (!v.is_string()) throw ConfigError(field(key), "expected a string");
    return v.get<std::string>();
  }
  std::vector<int> integers(std::string_view key) const {
    if (!has(key)) return {};
    const json& v = doc_.at(key);
    if (!v.is_array()) throw ConfigError(field(key), "expected an array of integers");
    std::vector<int> out;
    for (const json& x : v) {
      if (!x.is_number_integer()) throw ConfigError(field(key), "expected an array of integers");
      out.push_back(x.get<int>());
    }
    return out;
  }
  std::vector<std::string> strings(std::string_view key) const {
    if (!has(key)) return {};
    const json& v = doc_.at(key);
    if (!v.is_array()) throw ConfigError(field(key), "expected an array of strings");
    std::vector<std::string> out;
    for (const json& x : v) {
      if (!x.is_string()) throw ConfigError(field(key), "expected an array of strings");
      out.push_back(x.get<std::string>());
    }
    return out;
  }

 private:
  std::string name_;
  json doc_ = json::object();
};

void require(bool ok, const std::string& field, std::string_view msg) {
  if (!ok) throw ConfigError(field, std::string(msg));
}

Graphon graphon_block(const json& doc, const std::string& field) {
  try {
    return Graphon::from_json(doc);
  } catch (const ConfigError& e) {
    // Re-root nested blocks such as experiment.compare_to.
    std::string f = e.field();
    if (field != "graphon" && f.starts_with("graphon")) f = field + f.substr(7);
    throw ConfigError(f, e.what());
  }
}

PicardConfig picard_config(const ExperimentConfig& c) {
  PicardConfig pc;
  pc.labels = c.m;
  pc.particles = c.p;
  pc.time = TimeGrid(c.T, c.K);
  pc.state = c.state;
  pc.state_points = c.state_points;
  pc.action_points = c.action_points;
  pc.refine = c.refine;
  pc.damping = c.damping;
  pc.tol = c.tol;
  pc.max_iter = c.max_iter;
  pc.seed = stream_key(c.seed, {1});
  return pc;
}

class Artifacts {
 public:
  explicit Artifacts(std::filesystem::path dir) : dir_(std::move(dir)) {}

  void write(const std::string& name, std::string_view content) {
    write_text(dir_ / name, content);
    files_.push_back(name);
  }
  const std::filesystem::path& dir() const { return dir_; }
  std::vector<std::string> files() const {
    auto f = files_;
    std::sort(f.begin(), f.end());
    return f;
  }

 private:
  std::filesystem::path dir_;
  std::vector<std::string> files_;
};

struct Outcome {
  int status = kExitOk;
  json summary = json::object();
};

void write_equilibrium(Artifacts& out, const EquilibriumResult& eq) {
  out.write("policy.csv", policy_csv(eq.policy));
  out.write("law_summary.csv", law_summary_csv(eq.law));
  out.write("residual_history.csv", eq.residual_csv());
}

json equilibrium_summary(const EquilibriumResult& eq) {
  return {{"converged", eq.converged},
          {"iterations", eq.residual_history.size()},
          {"final_residual_avg", eq.residual_history.empty() ? 0.0 : eq.residual_history.back().avg},
          {"noise_floor", eq.noise_floor},
          {"solver", eq.config}};
}

Outcome run_simulate(const ExperimentConfig& c, Artifacts& out) {
  const double a = c.action.value_or(c.model.actions.midpoint());
  const TimeGrid grid(c.T, c.K);
  GraphonRun run;
  run.labels = label_grid(c.m);
  run.particles = c.p;
  run.grid = grid;
  run.coupling = c.coupling;
  run.seed = stream_key(c.seed, {0});
  const PolicyField pol = PolicyField::constant(grid, run.labels, StateGrid(-1.0, 1.0, 3), c.model.actions, a);
  const PathEnsemble e = simulate_graphon(c.model, *c.graphon, pol, run);
  out.write("law_summary.csv", law_summary_csv(LawFamily::from_ensemble(e)));
  return {kExitOk, {{"action", a}, {"coupling", to_string(c.coupling)}}};
}

Outcome run_equilibrium(const ExperimentConfig& c, const RunOptions& o, Artifacts& out) {
  const EquilibriumResult eq = picard_solve(c.model, *c.graphon, picard_config(c));
  write_equilibrium(out, eq);
  Outcome res{kExitOk, equilibrium_summary(eq)};
  if (c.monotonicity_pairs > 0) {
    const MonotonicityReport mr = check_monotonicity(c.model, *c.graphon, c.monotonicity_pairs, c.m, c.p,
                                                     TimeGrid(c.T, c.K), stream_key(c.seed, {2}));
    out.write("monotonicity.json", mr.to_json().dump(2) + "\n");
  }
  out.write("equilibrium.json", res.summary.dump(2) + "\n");
  if (!eq.converged && o.require_converged) res.status = kExitNotConverged;
  return res;
}

Outcome run_nash(const ExperimentConfig& c, const RunOptions& o, Artifacts& out) {
  const EquilibriumResult eq = picard_solve(c.model, *c.graphon, picard_config(c));
  write_equilibrium(out, eq);
  Outcome res{kExitOk, {{"equilibrium", equilibrium_summary(eq)}}};
  if (!eq.converged && o.require_converged) {
    res.status = kExitNotConverged;
    return res;
  }
  const InteractionMatrix zeta = sample_interaction(*c.graphon, c.n, c.sampling, stream_key(c.seed, {3}));
  const std::vector<double> labels =
      assign_labels(c.n, c.label_mode, stream_key(c.seed, {4}), piece_boundaries(*c.graphon));
  const std::vector<int> probes = c.probes.empty() ? probe_players(c.n) : c.probes;
  for (int i : probes) require(i >= 0 && i < c.n, "experiment.probes", "player index out of range");
  BestResponseConfig br;
  br.time = eq.policy.time();
  br.state = eq.policy.state();
  br.action_points = c.action_points;
  br.refine = c.refine;
  // An unconverged equilibrium is still usable when convergence is not required.
  const auto field = std::make_shared<const PolicyField>(eq.policy);
  NashGapReport rep = nash_gap(c.model, zeta, stitch_policies(field, labels), probes, c.R, stream_key(c.seed, {5}), br);
  rep.graphon = c.graphon->name();
  out.write("nash_gap.csv", rep.to_csv());
  out.write("nash_gap.txt", rep.to_text());
  json doc = rep.to_json();
  doc["equilibrium_converged"] = eq.converged;
  out.write("nash_gap.json", doc.dump(2) + "\n");
  res.summary["max_gap"] = rep.max_gap.value;
  return res;
}

Outcome run_rates(const ExperimentConfig& c, const RunOptions& o, Artifacts& out) {
  const EquilibriumResult eq = picard_solve(c.model, *c.graphon, picard_config(c));
  write_equilibrium(out, eq);
  Outcome res{kExitOk, {{"equilibrium", equilibrium_summary(eq)}}};
  if (!eq.converged && o.require_converged) {
    res.status = kExitNotConverged;
    return res;
  }
  RateConfig rc;
  rc.n_list = c.n_list;
  rc.sampling = c.sampling;
  rc.replications = c.R;
  rc.seed = stream_key(c.seed, {6});
  rc.label_mode = c.label_mode;
  rc.metrics = c.metrics;
  rc.nash_replications = c.nash_replications;
  EquilibriumResult usable = eq;
  usable.converged = true;  // nash metrics on an unconverged run are allowed unless required
  const RateTable t = rate_experiment(c.model, *c.graphon, usable, rc);
  out.write("rate_table.csv", t.to_csv());
  out.write("slopes.csv", t.slopes_csv());
  for (const SlopeFit& s : t.slopes) {
    std::vector<double> x, y, e;
    for (const RateRow& r : t.metric_rows(s.metric)) {
      x.push_back(r.n);
      y.push_back(r.value);
      e.push_back(r.mc_error);
    }
    std::optional<LineFit> fit;
    if (std::isfinite(s.slope)) {
      double mx = 0.0, my = 0.0;
      int count = 0;
      for (std::size_t i = 0; i < x.size(); ++i)
        if (x[i] >= rc.min_fit_n && y[i] > 0.0 && std::isfinite(y[i])) {
          mx += std::log10(x[i]);
          my += std::log10(y[i]);
          ++count;
        }
      fit = LineFit{s.slope, my / count - s.slope * mx / count};
    }
    out.write(s.metric + ".svg", loglog_svg(s.metric, x, y, e, fit));
  }
  for (const NashGapReport& r : t.nash_reports) out.write(fmt::format("nash_gap_n{}.csv", r.n), r.to_csv());
  json slopes = json::object();
  for (const SlopeFit& s : t.slopes) slopes[s.metric] = {{"slope", s.slope}, {"ci", {s.ci_lo, s.ci_hi}}};
  res.summary["slopes"] = slopes;
  return res;
}

Outcome run_norms(const ExperimentConfig& c, Artifacts& out) {
  const Graphon other = c.compare_to.value_or(Graphon::constant(0.0));
  const NormResult cut = cut_norm_diff(*c.graphon, other, c.resolution);
  const NormResult one = inf_one_norm_diff(*c.graphon, other, c.resolution);
  const double inf = inf_inf_norm_diff(*c.graphon, other, c.resolution);
  std::string csv = "norm,value,lower_bound\n";
  csv += fmt::format("cut,{:.17g},{}\n", cut.value, cut.lower_bound ? 1 : 0);
  csv += fmt::format("inf_to_one,{:.17g},{}\n", one.value, one.lower_bound ? 1 : 0);
  csv += fmt::format("inf_to_inf,{:.17g},0\n", inf);
  out.write("norms.csv", csv);
  return {kExitOk, {{"cut", cut.value}, {"inf_to_one", one.value}, {"inf_to_inf", inf}}};
}

Outcome run_validate(const ExperimentConfig& c, Artifacts& out) {
  const ValidationReport rep = validate_model(c.model, c.validation_probes, stream_key(c.seed, {7}));
  out.write("validation.json", rep.to_json().dump(2) + "\n");
  return {kExitOk, {{"violations", rep.violations.size()}, {"ok", rep.ok()}}};
}

}  // namespace

std::string to_string(Command c) {
  for (const auto& [cmd, name] : kCommands)
    if (cmd == c) return std::string(name);
  return "unknown";
}

std::optional<Command> command_from_string(std::string_view s) {
  for (const auto& [cmd, name] : kCommands)
    if (name == s) return cmd;
  return std::nullopt;
}

ExperimentConfig parse_config(const json& doc, Command command) {
  if (!doc.is_object()) throw ConfigError("config", "expected a JSON object");
  ExperimentConfig c;
  c.command = command;

  if (!doc.contains("seed")) throw ConfigError("seed", "required");
  const json& seed = doc.at("seed");
  if (!seed.is_number_integer() || (!seed.is_number_unsigned() && seed.get<std::int64_t>() < 0))
    throw ConfigError("seed", "expected a non-negative integer");
  c.seed = doc.at("seed").get<std::uint64_t>();

  if (!doc.contains("model")) throw ConfigError("model", "missing");
  c.model_doc = doc.at("model");
  c.model = model_from_json(c.model_doc);

  if (doc.contains("graphon"))
    c.graphon = graphon_block(doc.at("graphon"), "graphon");
  else if (command != Command::Validate)
    throw ConfigError("graphon", "missing");

  const Block grids(doc, "grids");
  c.m = grids.integer("m", c.m);
  c.p = grids.integer("p", c.p);
  c.K = grids.integer("K", c.K);
  c.T = grids.real("T", c.T);
  c.state_points = grids.integer("state_points", c.state_points);
  require(c.m >= 1, grids.field("m"), "must be >= 1");
  require(c.p >= 2, grids.field("p"), "must be >= 2");
  require(c.K >= 1, grids.field("K"), "must be >= 1");
  require(c.T > 0.0, grids.field("T"), "must be > 0");
  require(c.state_points >= 3, grids.field("state_points"), "must be >= 3");
  if (grids.has("state")) {
    const json& s = grids.raw("state");
    if (!s.is_array() || s.size() != 3 || !s[0].is_number() || !s[1].is_number() || !s[2].is_number_integer())
      throw ConfigError(grids.field("state"), "expected [lo, hi, points]");
    const double lo = s[0].get<double>(), hi = s[1].get<double>();
    const int pts = s[2].get<int>();
    require(hi > lo && pts >= 3, grids.field("state"), "need lo < hi and points >= 3");
    c.state = StateGrid(lo, hi, pts);
  }

  const Block solver(doc, "solver");
  c.damping = solver.real("damping", c.damping);
  c.tol = solver.real("tol", c.tol);
  c.max_iter = solver.integer("max_iter", c.max_iter);
  c.action_points = solver.integer("action_points", c.action_points);
  c.refine = solver.flag("refine", c.refine);
  require(c.damping > 0.0 && c.damping <= 1.0, solver.field("damping"), "must lie in (0, 1]");
  require(c.tol > 0.0, solver.field("tol"), "must be > 0");
  require(c.max_iter >= 1, solver.field("max_iter"), "must be >= 1");
  require(c.action_points >= 1, solver.field("action_points"), "must be >= 1");

  const Block ex(doc, "experiment");
  c.n_list = ex.integers("n_list");
  c.R = ex.integer("R", c.R);
  c.n = ex.integer("n", c.n);
  c.probes = ex.integers("probes");
  c.metrics = ex.strings("metrics");
  c.nash_replications = ex.integer("nash_replications", c.nash_replications);
  c.validation_probes = ex.integer("validation_probes", c.validation_probes);
  c.resolution = ex.integer("resolution", c.resolution);
  c.monotonicity_pairs = ex.integer("monotonicity_pairs", c.monotonicity_pairs);
  if (ex.has("action")) c.action = ex.real("action", 0.0);
  try {
    c.sampling = sampling_mode_from_string(ex.text("sampling", "exact_weights"));
  } catch (const std::exception& e) {
    throw ConfigError(ex.field("sampling"), e.what());
  }
  try {
    c.label_mode = label_mode_from_string(ex.text("label_mode", "right_endpoint"));
  } catch (const std::exception& e) {
    throw ConfigError(ex.field("label_mode"), e.what());
  }
  const std::string coupling = ex.text("coupling", "independent");
  if (coupling == "independent")
    c.coupling = Coupling::Independent;
  else if (coupling == "canonical")
    c.coupling = Coupling::Canonical;
  else
    throw ConfigError(ex.field("coupling"), "expected 'independent' or 'canonical'");
  if (ex.has("compare_to")) c.compare_to = graphon_block(ex.raw("compare_to"), ex.field("compare_to"));

  require(c.R >= 2, ex.field("R"), "must be >= 2");
  require(c.n >= 1, ex.field("n"), "must be >= 1");
  require(c.nash_replications >= 0, ex.field("nash_replications"), "must be >= 0");
  require(c.validation_probes >= 1, ex.field("validation_probes"), "must be >= 1");
  require(c.resolution >= 1, ex.field("resolution"), "must be >= 1");
  require(c.monotonicity_pairs >= 0, ex.field("monotonicity_pairs"), "must be >= 0");
  if (c.action)
    require(*c.action >= c.model.actions.lo && *c.action <= c.model.actions.hi, ex.field("action"),
            "must lie in the action set");
  for (const std::string& m : c.metrics)
    require(std::find(rate_metrics().begin(), rate_metrics().end(), m) != rate_metrics().end(), ex.field("metrics"),
            fmt::format("unknown metric '{}'", m));
  if (command == Command::Rates) {
    require(c.n_list.size() >= 3, ex.field("n_list"), "need at least 3 values");
    for (std::size_t i = 0; i < c.n_list.size(); ++i)
      require(c.n_list[i] >= 1 && (i == 0 || c.n_list[i] > c.n_list[i - 1]), ex.field("n_list"),
              "must be positive and strictly increasing");
  }

  if (doc.contains("output")) {
    if (!doc.at("output").is_string()) throw ConfigError("output", "expected a string");
    c.output = doc.at("output").get<std::string>();
  }
  return c;
}

json ExperimentConfig::echo() const {
  json doc;
  doc["command"] = to_string(command);
  doc["seed"] = seed;
  doc["model"] = model_to_json(model);
  if (graphon) doc["graphon"] = graphon->to_json();
  doc["grids"] = {{"m", m}, {"p", p}, {"K", K}, {"T", T}, {"state_points", state_points}};
  if (state) doc["grids"]["state"] = {state->lo, state->hi, state->points};
  doc["solver"] = {{"damping", damping},
                   {"tol", tol},
                   {"max_iter", max_iter},
                   {"action_points", action_points},
                   {"refine", refine}};
  json ex = {{"n_list", n_list},
             {"sampling", to_string(sampling)},
             {"R", R},
             {"label_mode", to_string(label_mode)},
             {"metrics", metrics},
             {"n", n},
             {"probes", probes},
             {"nash_replications", nash_replications},
             {"coupling", to_string(coupling)},
             {"validation_probes", validation_probes},
             {"resolution", resolution},
             {"monotonicity_pairs", monotonicity_pairs}};
  if (action) ex["action"] = *action;
  if (compare_to) ex["compare_to"] = compare_to->to_json();
  doc["experiment"] = ex;
  if (!output.empty()) doc["output"] = output;
  return doc;
}

int run_experiment(const ExperimentConfig& cfg, const RunOptions& options) {
  if (options.threads > 0) set_max_threads(options.threads);
  Artifacts out(options.output);
  const auto start = std::chrono::steady_clock::now();
  out.write("config.json", cfg.echo().dump(2) + "\n");
  Outcome res;
  auto finish = [&](json extra) {
    const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    json manifest = {{"command", to_string(cfg.command)},
                     {"code_version", GML_VERSION},
                     {"seed", cfg.seed},
                     {"threads", options.threads},
                     {"exit_status", res.status},
                     {"summary", std::move(extra)},
                     {"wall_time_seconds", wall}};
    auto files = out.files();
    files.push_back("manifest.json");
    std::sort(files.begin(), files.end());
    manifest["files"] = files;
    write_text(out.dir() / "manifest.json", manifest.dump(2) + "\n");
  };
  try {
    switch (cfg.command) {
      case Command::Simulate: res = run_simulate(cfg, out); break;
      case Command::SolveEquilibrium: res = run_equilibrium(cfg, options, out); break;
      case Command::NashGap: res = run_nash(cfg, options, out); break;
      case Command::Rates: res = run_rates(cfg, options, out); break;
      case Command::GraphonNorms: res = run_norms(cfg, out); break;
      case Command::Validate: res = run_validate(cfg, out); break;
    }
  } catch (const NumericalError& e) {
    res.status = kExitNumerical;
    out.write("diagnostics.json", json{{"error", "numerical"}, {"message", e.what()}, {"seed", cfg.seed}}.dump(2) + "\n");
    std::cerr << "gml: numerical failure: " << e.what() << "\n";
    finish(json::object());
    if (options.threads > 0) set_max_threads(0);
    return res.status;
  }
  finish(res.summary);
  if (options.threads > 0) set_max_threads(0);
  if (res.status == kExitNotConverged) std::cerr << "gml: equilibrium did not converge\n";
  return res.status;
}

int cli_main(int argc, char** argv) {
  CLI::App app{"Graphon mean field games with jumps: experiments"};
  app.require_subcommand(1);
  std::string config_path, output;
  int threads = 0;
  bool require_converged = false;
  for (const auto& [cmd, name] : kCommands) {
    CLI::App* sub = app.add_subcommand(std::string(name));
    sub->add_option("--config", config_path, "JSON experiment config")->required();
    sub->add_option("--output", output, "output directory (overrides the config)");
    sub->add_option("--threads", threads, "worker cap; 0 uses all cores")->check(CLI::NonNegativeNumber);
    sub->add_flag("--require-converged", require_converged, "exit 4 when the equilibrium does not converge");
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kExitOk : kExitConfig;
  }
  const Command command = *command_from_string(app.get_subcommands().front()->get_name());

  ExperimentConfig cfg;
  try {
    std::ifstream in(config_path);
    if (!in) throw ConfigError("config", fmt::format("cannot read '{}'", config_path));
    json doc;
    try {
      doc = json::parse(in);
    } catch (const json::parse_error& e) {
      throw ConfigError("config", e.what());
    }
    cfg = parse_config(doc, command);
  } catch (const ConfigError& e) {
    std::cerr << fmt::format("gml: invalid config field {}\n", e.what());
    return kExitConfig;
  } catch (const PreconditionError& e) {
    std::cerr << "gml: invalid config: " << e.what() << "\n";
    return kExitConfig;
  }
  RunOptions opts;
  opts.output = !output.empty() ? output : (!cfg.output.empty() ? cfg.output : "gml-out");
  opts.threads = threads;
  opts.require_converged = require_converged;
  try {
    return run_experiment(cfg, opts);
  } catch (const ConfigError& e) {
    std::cerr << fmt::format("gml: invalid config field {}\n", e.what());
    return kExitConfig;
  } catch (const PreconditionError& e) {
    std::cerr << "gml: invalid input: " << e.what() << "\n";
    return kExitConfig;
  }
}

}  // namespace gml
