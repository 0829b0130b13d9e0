#include "hda/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <fstream>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>
#include <tuple>

#include "hda/model.hpp"
#include "hda/rng.hpp"

namespace hda {

using json = nlohmann::json;

// ---------------------------------------------------------------------------
// Schemes
// ---------------------------------------------------------------------------

namespace {

std::string format_number(double x) {
  std::ostringstream os;
  os << x;
  return os.str();
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t");
  return s.substr(b, e - b + 1);
}

double parse_double(const std::string& text, const std::string& what) {
  std::size_t used = 0;
  double value = 0.0;
  try {
    value = std::stod(text, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != text.size()) {
    throw ValidationError(what + ": '" + text + "' is not a number");
  }
  return value;
}

}  // namespace

std::string SchemeSpec::name() const {
  switch (kind) {
    case SchemeKind::hda_optimized: return "hda-optimized";
    case SchemeKind::hda_fixed:
      return "hda-fixed(R=" + format_number(rate) + ",alpha=" + format_number(alpha) + ")";
    case SchemeKind::pure_analog: return "pure-analog";
    case SchemeKind::pure_digital: return "pure-digital";
    case SchemeKind::opta: return "opta";
    case SchemeKind::mesh_grid: return "mesh-grid";
  }
  return "unknown";
}

SchemeSpec parse_scheme(const std::string& raw) {
  const std::string text = trim(raw);
  if (text == "hda-optimized") return {SchemeKind::hda_optimized};
  if (text == "pure-analog") return {SchemeKind::pure_analog};
  if (text == "pure-digital") return {SchemeKind::pure_digital};
  if (text == "opta") return {SchemeKind::opta};
  if (text == "mesh-grid") return {SchemeKind::mesh_grid};
  const std::string prefix = "hda-fixed(";
  if (text.rfind(prefix, 0) == 0 && text.back() == ')') {
    const std::string body = text.substr(prefix.size(), text.size() - prefix.size() - 1);
    const auto comma = body.find(',');
    if (comma == std::string::npos) {
      throw ValidationError("schemes: hda-fixed needs two arguments, got '" + text + "'");
    }
    auto value_of = [&](std::string part, const std::string& key) {
      part = trim(part);
      const auto eq = part.find('=');
      if (eq != std::string::npos) {
        if (trim(part.substr(0, eq)) != key) {
          throw ValidationError("schemes: expected '" + key + "=' in '" + text + "'");
        }
        part = trim(part.substr(eq + 1));
      }
      return parse_double(part, "schemes: " + key);
    };
    SchemeSpec spec{SchemeKind::hda_fixed};
    spec.rate = value_of(body.substr(0, comma), "R");
    spec.alpha = value_of(body.substr(comma + 1), "alpha");
    if (!(spec.rate >= 0.0)) throw ValidationError("schemes: hda-fixed R must be >= 0");
    if (!(spec.alpha >= 0.0 && spec.alpha <= 1.0)) {
      throw ValidationError("schemes: hda-fixed alpha must lie in [0, 1]");
    }
    if (spec.rate > 0.0 && spec.alpha == 0.0) {
      throw ValidationError("schemes: hda-fixed with R > 0 needs alpha > 0");
    }
    return spec;
  }
  throw ValidationError("schemes: unknown scheme '" + text + "'");
}

// ---------------------------------------------------------------------------
// Config
// ---------------------------------------------------------------------------

namespace {

void reject_unknown(const json& obj, const std::string& path, std::set<std::string> allowed) {
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    if (!allowed.count(it.key())) {
      throw ValidationError(path + it.key() + ": unknown key");
    }
  }
}

const json* child(const json& obj, const std::string& key, const std::string& path) {
  if (!obj.contains(key)) return nullptr;
  const json& c = obj.at(key);
  if (!c.is_object()) throw ValidationError(path + key + ": expected an object");
  return &c;
}

double number(const json& obj, const std::string& key, const std::string& path) {
  const json& v = obj.at(key);
  if (!v.is_number()) throw ValidationError(path + key + ": expected a number");
  return v.get<double>();
}

long integer(const json& obj, const std::string& key, const std::string& path) {
  const json& v = obj.at(key);
  if (v.is_number_integer() || v.is_number_unsigned()) return v.get<long>();
  if (v.is_number_float()) {
    const double d = v.get<double>();
    if (d == std::floor(d) && std::abs(d) < 9e15) return static_cast<long>(d);
  }
  throw ValidationError(path + key + ": expected an integer");
}

std::vector<double> numbers(const json& obj, const std::string& key, const std::string& path) {
  const json& v = obj.at(key);
  if (!v.is_array()) throw ValidationError(path + key + ": expected an array of numbers");
  std::vector<double> out;
  for (const auto& item : v) {
    if (!item.is_number()) throw ValidationError(path + key + ": expected an array of numbers");
    out.push_back(item.get<double>());
  }
  return out;
}

template <typename T>
void maybe(const json& obj, const std::string& key, T& target, T (*read)(const json&, const std::string&, const std::string&),
           const std::string& path) {
  if (obj.contains(key)) target = read(obj, key, path);
}

void read_single(const json& obj, SingleOptConfig& cfg, const std::string& path) {
  reject_unknown(obj, path,
                 {"tolerance", "step", "gradient_tolerance", "max_outer_iters", "max_inner_iters",
                  "rate_ceiling", "initial_rate", "initial_alpha", "analog_fallback"});
  maybe<double>(obj, "tolerance", cfg.tolerance, number, path);
  maybe<double>(obj, "step", cfg.step, number, path);
  maybe<double>(obj, "gradient_tolerance", cfg.gradient_tolerance, number, path);
  if (obj.contains("max_outer_iters")) cfg.max_outer_iters = static_cast<int>(integer(obj, "max_outer_iters", path));
  if (obj.contains("max_inner_iters")) cfg.max_inner_iters = static_cast<int>(integer(obj, "max_inner_iters", path));
  maybe<double>(obj, "rate_ceiling", cfg.rate_ceiling, number, path);
  maybe<double>(obj, "initial_rate", cfg.initial_rate, number, path);
  maybe<double>(obj, "initial_alpha", cfg.initial_alpha, number, path);
  if (obj.contains("analog_fallback")) {
    if (!obj.at("analog_fallback").is_boolean()) {
      throw ValidationError(path + "analog_fallback: expected true or false");
    }
    cfg.analog_fallback = obj.at("analog_fallback").get<bool>();
  }
}

void read_multi(const json& obj, MultiOptConfig& cfg, const std::string& path) {
  reject_unknown(obj, path,
                 {"tolerance", "initial_penalty", "penalty_decay", "penalty_floor",
                  "max_penalty_rounds", "max_inner_iters", "inner_gradient_tolerance",
                  "max_rounds"});
  maybe<double>(obj, "tolerance", cfg.tolerance, number, path);
  maybe<double>(obj, "initial_penalty", cfg.initial_penalty, number, path);
  maybe<double>(obj, "penalty_decay", cfg.penalty_decay, number, path);
  maybe<double>(obj, "penalty_floor", cfg.penalty_floor, number, path);
  if (obj.contains("max_penalty_rounds")) cfg.max_penalty_rounds = static_cast<int>(integer(obj, "max_penalty_rounds", path));
  if (obj.contains("max_inner_iters")) cfg.max_inner_iters = static_cast<int>(integer(obj, "max_inner_iters", path));
  maybe<double>(obj, "inner_gradient_tolerance", cfg.inner_gradient_tolerance, number, path);
  if (obj.contains("max_rounds")) cfg.max_rounds = static_cast<int>(integer(obj, "max_rounds", path));
}

// Wraps a core-model ValidationError with the config field it came from.
template <typename F>
void field_check(const std::string& field, F&& f) {
  try {
    f();
  } catch (const ValidationError& e) {
    throw ValidationError(field + ": " + e.what());
  }
}

}  // namespace

ExperimentConfig ExperimentConfig::from_json(const json& doc) {
  if (!doc.is_object()) throw ValidationError("config: top level must be an object");
  reject_unknown(doc, "",
                 {"source", "channel", "sweep", "target_snr_db", "optimizer", "simulation",
                  "schemes"});
  ExperimentConfig cfg;

  const json* source = child(doc, "source", "");
  if (!source) throw ValidationError("source: missing");
  reject_unknown(*source, "source.", {"samples", "variances", "m"});
  if (!source->contains("samples")) throw ValidationError("source.samples: missing");
  const long samples = integer(*source, "samples", "source.");
  if (samples < 1) throw ValidationError("source.samples: must be at least 1");
  cfg.samples = static_cast<std::size_t>(samples);
  if (!source->contains("variances")) throw ValidationError("source.variances: missing");
  cfg.variances = numbers(*source, "variances", "source.");
  if (source->contains("m")) {
    const long m = integer(*source, "m", "source.");
    if (m != static_cast<long>(cfg.variances.size())) {
      throw ValidationError("source.m: does not match the number of variances");
    }
  }

  const json* channel = child(doc, "channel", "");
  if (!channel) throw ValidationError("channel: missing");
  reject_unknown(*channel, "channel.", {"channel_uses", "K", "eta", "power", "P", "snr_db", "noise_power"});
  for (const char* k : {"channel_uses", "K"}) {
    if (channel->contains(k)) {
      if (cfg.channel_uses) throw ValidationError("channel: give K only once");
      cfg.channel_uses = integer(*channel, k, "channel.");
    }
  }
  if (channel->contains("eta")) cfg.eta = number(*channel, "eta", "channel.");
  for (const char* k : {"power", "P"}) {
    if (channel->contains(k)) {
      if (cfg.power) throw ValidationError("channel: give P only once");
      cfg.power = number(*channel, k, "channel.");
    }
  }
  if (channel->contains("snr_db")) cfg.snr_db = number(*channel, "snr_db", "channel.");
  if (channel->contains("noise_power")) cfg.noise_power = number(*channel, "noise_power", "channel.");

  if (const json* sweep = child(doc, "sweep", "")) {
    reject_unknown(*sweep, "sweep.", {"snr_db", "eta"});
    if (sweep->contains("snr_db")) {
      cfg.sweep_snr_db = numbers(*sweep, "snr_db", "sweep.");
      if (cfg.sweep_snr_db.empty()) throw ValidationError("sweep.snr_db: list is empty");
    }
    if (sweep->contains("eta")) {
      cfg.sweep_eta = numbers(*sweep, "eta", "sweep.");
      if (cfg.sweep_eta.empty()) throw ValidationError("sweep.eta: list is empty");
    }
    if (!sweep->contains("snr_db") && !sweep->contains("eta")) {
      throw ValidationError("sweep: needs an snr_db or eta list");
    }
  }
  if (doc.contains("target_snr_db") && !doc.at("target_snr_db").is_null()) {
    cfg.target_snr_db = number(doc, "target_snr_db", "");
  }

  if (const json* opt = child(doc, "optimizer", "")) {
    reject_unknown(*opt, "optimizer.", {"single", "multi", "grid"});
    if (const json* s = child(*opt, "single", "optimizer.")) read_single(*s, cfg.single, "optimizer.single.");
    if (const json* m = child(*opt, "multi", "optimizer.")) read_multi(*m, cfg.multi, "optimizer.multi.");
    if (const json* g = child(*opt, "grid", "optimizer.")) {
      reject_unknown(*g, "optimizer.grid.", {"rate_points", "alpha_points"});
      if (g->contains("rate_points")) {
        const long n = integer(*g, "rate_points", "optimizer.grid.");
        if (n < 2) throw ValidationError("optimizer.grid.rate_points: must be at least 2");
        cfg.grid_rate_points = static_cast<std::size_t>(n);
      }
      if (g->contains("alpha_points")) {
        const long n = integer(*g, "alpha_points", "optimizer.grid.");
        if (n < 2) throw ValidationError("optimizer.grid.alpha_points: must be at least 2");
        cfg.grid_alpha_points = static_cast<std::size_t>(n);
      }
    }
  }
  cfg.multi.single = cfg.single;

  if (const json* sim = child(doc, "simulation", "")) {
    reject_unknown(*sim, "simulation.", {"n_trials", "seed", "mode", "threads"});
    if (sim->contains("n_trials")) cfg.n_trials = integer(*sim, "n_trials", "simulation.");
    if (sim->contains("seed")) {
      const json& s = sim->at("seed");
      if (!(s.is_number_unsigned() || (s.is_number_integer() && s.get<long>() >= 0))) {
        throw ValidationError("simulation.seed: expected a nonnegative integer");
      }
      cfg.seed = s.get<std::uint64_t>();
    }
    if (sim->contains("mode")) {
      if (!sim->at("mode").is_string()) throw ValidationError("simulation.mode: expected a string");
      field_check("simulation.mode",
                  [&] { cfg.mode = parse_quantizer_mode(sim->at("mode").get<std::string>()); });
    }
    if (sim->contains("threads")) {
      const long t = integer(*sim, "threads", "simulation.");
      if (t < 0) throw ValidationError("simulation.threads: must be >= 0");
      cfg.threads = static_cast<unsigned>(t);
    }
  }

  if (!doc.contains("schemes")) {
    cfg.schemes = {SchemeSpec{SchemeKind::hda_optimized}};
  } else {
    const json& schemes = doc.at("schemes");
    if (!schemes.is_array()) throw ValidationError("schemes: expected an array of names");
    for (const auto& s : schemes) {
      if (!s.is_string()) throw ValidationError("schemes: expected an array of names");
      cfg.schemes.push_back(parse_scheme(s.get<std::string>()));
    }
  }
  cfg.validate();
  return cfg;
}

void ExperimentConfig::validate() const {
  field_check("source.variances", [&] { SourceSpec(samples, variances); });
  if (channel_uses.has_value() == eta.has_value()) {
    throw ValidationError("channel: give exactly one of K (channel_uses) and eta");
  }
  if (power.has_value() == snr_db.has_value()) {
    throw ValidationError("channel: give exactly one of P (power) and snr_db");
  }
  if (!(noise_power > 0.0)) throw ValidationError("channel.noise_power: must be positive");
  const double ml = static_cast<double>(variances.size() * samples);
  if (channel_uses && *channel_uses <= static_cast<long>(ml)) {
    throw ValidationError("channel.channel_uses: must exceed m*L");
  }
  if (eta && !(*eta > 1.0)) throw ValidationError("channel.eta: must exceed 1");
  if (power && !(*power > 0.0)) throw ValidationError("channel.power: must be positive");
  if (channel_uses && !sweep_eta.empty()) {
    throw ValidationError("sweep.eta: conflicts with a fixed channel.channel_uses");
  }
  if (power && !sweep_snr_db.empty()) {
    throw ValidationError("sweep.snr_db: conflicts with a fixed channel.power");
  }
  for (double e : sweep_eta) {
    if (!(e > 1.0)) throw ValidationError("sweep.eta: every entry must exceed 1");
    if (std::llround(e * ml) <= static_cast<long long>(ml)) {
      throw ValidationError("sweep.eta: entry leaves no digital channel uses");
    }
  }
  for (double s : sweep_snr_db) {
    if (!std::isfinite(s)) throw ValidationError("sweep.snr_db: entries must be finite");
  }
  if (target_snr_db && !std::isfinite(*target_snr_db)) {
    throw ValidationError("target_snr_db: must be finite");
  }
  if (eta && std::llround(*eta * ml) <= static_cast<long long>(ml)) {
    throw ValidationError("channel.eta: leaves no digital channel uses");
  }
  field_check("optimizer.single", [&] { single.validate(); });
  field_check("optimizer.multi", [&] { multi.validate(); });
  if (grid_rate_points < 2 || grid_alpha_points < 2) {
    throw ValidationError("optimizer.grid: need at least two points per axis");
  }
  if (n_trials < 0) throw ValidationError("simulation.n_trials: must be >= 0");
  if (schemes.empty()) throw ValidationError("schemes: list is empty");
  for (const auto& s : schemes) {
    if (s.kind == SchemeKind::hda_fixed && s.rate > single.rate_ceiling) {
      throw ValidationError("schemes: " + s.name() + " exceeds the rate ceiling");
    }
  }
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("config: cannot open '" + path + "'");
  json doc;
  try {
    doc = json::parse(in, nullptr, true, true);
  } catch (const json::parse_error& e) {
    throw ValidationError(std::string("config: ") + e.what());
  }
  return ExperimentConfig::from_json(doc);
}

void apply_override(json& doc, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) {
    throw ValidationError("--set: expected path=value, got '" + assignment + "'");
  }
  const std::string path = assignment.substr(0, eq);
  const std::string text = assignment.substr(eq + 1);
  json value;
  try {
    value = json::parse(text);
  } catch (const json::parse_error&) {
    value = text;
  }
  json* node = &doc;
  std::size_t start = 0;
  while (true) {
    const auto dot = path.find('.', start);
    const std::string key = path.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (key.empty()) throw ValidationError("--set: empty path component in '" + path + "'");
    if (!node->is_object()) {
      if (!node->is_null()) throw ValidationError("--set: '" + path + "' crosses a non-object");
      *node = json::object();
    }
    if (dot == std::string::npos) {
      (*node)[key] = value;
      return;
    }
    node = &(*node)[key];
    start = dot + 1;
  }
}

// ---------------------------------------------------------------------------
// Running
// ---------------------------------------------------------------------------

std::uint64_t row_seed(std::uint64_t seed, const std::string& scheme, std::size_t snr_index,
                       std::size_t eta_index, std::size_t vector_index) {
  std::uint64_t h = 0xcbf29ce484222325ULL;  // FNV-1a
  for (unsigned char c : scheme) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  std::uint64_t state = seed;
  std::uint64_t out = splitmix64(state) ^ h;
  for (std::uint64_t part : {static_cast<std::uint64_t>(snr_index),
                             static_cast<std::uint64_t>(eta_index),
                             static_cast<std::uint64_t>(vector_index)}) {
    state = out + part;
    out = splitmix64(state);
  }
  return out;
}

namespace {

struct Task {
  std::size_t scheme;
  std::size_t snr;
  std::size_t eta;
};

struct SweepAxes {
  std::vector<double> snr_db;
  std::vector<double> eta;
};

SweepAxes sweep_axes(const ExperimentConfig& cfg) {
  const double ml = static_cast<double>(cfg.variances.size() * cfg.samples);
  SweepAxes axes;
  if (!cfg.sweep_eta.empty()) {
    axes.eta = cfg.sweep_eta;
  } else {
    axes.eta = {cfg.eta ? *cfg.eta : static_cast<double>(*cfg.channel_uses) / ml};
  }
  if (!cfg.sweep_snr_db.empty()) {
    axes.snr_db = cfg.sweep_snr_db;
  } else if (cfg.snr_db) {
    axes.snr_db = {*cfg.snr_db};
  }
  return axes;
}

std::vector<ResultRow> run_task(const ExperimentConfig& cfg, const SourceSpec& source,
                                const SchemeSpec& scheme, std::size_t snr_index,
                                std::size_t eta_index, double snr_db_in, double eta_in,
                                unsigned mc_threads) {
  const std::size_t m = source.count();
  const double ml = static_cast<double>(m * source.samples());
  const long total_uses = cfg.channel_uses ? *cfg.channel_uses
                                           : static_cast<long>(std::llround(eta_in * ml));
  double snr_db = snr_db_in;
  ChannelSpec design = cfg.power ? ChannelSpec(total_uses, *cfg.power, cfg.noise_power)
                                 : ChannelSpec::from_snr_db(total_uses, snr_db, cfg.noise_power);
  if (cfg.power) snr_db = 10.0 * std::log10(design.snr());
  if (cfg.target_snr_db) {
    design = ChannelSpec::from_snr_db(total_uses, *cfg.target_snr_db, cfg.noise_power);
  }
  const ChannelSpec actual = design.with_snr_db(snr_db);
  design.check_bandwidth_expansion(source);
  const double eta = static_cast<double>(total_uses) / ml;

  // Resource split and per-vector (R, alpha), decided on the design channel.
  Allocation alloc;
  const double ceiling = cfg.single.rate_ceiling;
  auto budget = [&](const AllocationEntry& e) {
    return VectorBudget{e.power, static_cast<double>(e.channel_uses), source.samples(),
                        design.noise_power()};
  };
  switch (scheme.kind) {
    case SchemeKind::hda_optimized:
      if (m == 1) {
        const VectorBudget b{design.power_budget(), static_cast<double>(total_uses),
                             source.samples(), design.noise_power()};
        const auto r = bcd_joint_allocate(b, source.variance(0), cfg.single);
        alloc.entries.push_back({r.rate, r.alpha, design.power_budget(), total_uses});
      } else {
        alloc = two_stage_optimize(source, design, cfg.multi).allocation();
      }
      break;
    case SchemeKind::hda_fixed:
      alloc = equal_resource_allocation(source, design, {scheme.rate, scheme.alpha});
      break;
    case SchemeKind::pure_analog:
    case SchemeKind::opta:
      alloc = equal_resource_allocation(source, design, {0.0, 0.0});
      break;
    case SchemeKind::pure_digital:
      alloc = equal_resource_allocation(source, design, {0.0, 1.0});
      for (auto& e : alloc.entries) e.rate = optimal_rate_closed_form(1.0, budget(e), ceiling);
      break;
    case SchemeKind::mesh_grid: {
      alloc = equal_resource_allocation(source, design, {0.0, 0.0});
      const auto rates = linear_grid(0.0, ceiling, cfg.grid_rate_points);
      const auto alphas = linear_grid(0.0, 1.0, cfg.grid_alpha_points);
      for (std::size_t i = 0; i < m; ++i) {
        auto& e = alloc.entries[i];
        const auto best = mesh_grid_oracle(budget(e), source.variance(i), rates, alphas, true);
        e.rate = best.rate;
        e.alpha = best.alpha;
      }
      break;
    }
  }
  alloc.validate(source, design, ceiling);

  const std::string name = scheme.name();
  const LinkSetup link{source.samples(), actual.noise_power()};
  std::vector<ResultRow> rows;
  double ed_total = 0.0;
  double sim_total = 0.0;
  double sim_var = 0.0;
  const bool simulate = cfg.n_trials > 0 && scheme.kind != SchemeKind::opta;
  for (std::size_t i = 0; i < m; ++i) {
    const auto& e = alloc.entries[i];
    const double var = source.variance(i);
    ResultRow row;
    row.scheme = name;
    row.snr_db = snr_db;
    row.eta = eta;
    row.vector_index = static_cast<long>(i);
    row.channel_uses = static_cast<double>(e.channel_uses);
    row.power = e.power;
    if (scheme.kind == SchemeKind::opta) {
      const double snr = e.power / (static_cast<double>(e.channel_uses) * actual.noise_power());
      const double eta_i = static_cast<double>(e.channel_uses) / static_cast<double>(source.samples());
      row.ed_analytic = var * opta_distortion(snr, eta_i);
    } else {
      row.rate = e.rate;
      row.alpha = e.alpha;
      row.ed_analytic = expected_distortion_exact(e.point(), link, var).total;
    }
    if (simulate) {
      const auto report = run_monte_carlo(HdaLink(e.point(), var, link, cfg.mode), cfg.n_trials,
                                          row_seed(cfg.seed, name, snr_index, eta_index, i),
                                          mc_threads);
      row.ed_sim = report.mean_distortion;
      row.ed_sim_ci = report.distortion_ci;
      sim_total += report.mean_distortion;
      sim_var += report.distortion_se * report.distortion_se;
    }
    row.sdr_db = sdr_db(var, *row.ed_analytic);
    ed_total += *row.ed_analytic;
    rows.push_back(row);
  }
  if (m > 1) {
    ResultRow total;
    total.scheme = name;
    total.snr_db = snr_db;
    total.eta = eta;
    total.vector_index = -1;
    total.channel_uses = static_cast<double>(alloc.total_channel_uses());
    total.power = alloc.total_power();
    total.ed_analytic = ed_total;
    if (simulate) {
      total.ed_sim = sim_total;
      total.ed_sim_ci = 1.96 * std::sqrt(sim_var);
    }
    total.sdr_db = sdr_db(source.total_variance(), ed_total);
    rows.push_back(total);
  }
  return rows;
}

}  // namespace

ResultTable run_experiment(const ExperimentConfig& cfg) {
  cfg.validate();
  const SourceSpec source(cfg.samples, cfg.variances);
  const auto axes = sweep_axes(cfg);

  std::vector<Task> tasks;
  for (std::size_t s = 0; s < cfg.schemes.size(); ++s) {
    for (std::size_t i = 0; i < axes.snr_db.size(); ++i) {
      for (std::size_t j = 0; j < axes.eta.size(); ++j) tasks.push_back({s, i, j});
    }
  }
  // A power-specified channel has no SNR list; run_task derives it.
  const std::vector<double> snr_axis = axes.snr_db.empty() ? std::vector<double>{0.0} : axes.snr_db;
  if (axes.snr_db.empty()) {
    for (std::size_t s = 0; s < cfg.schemes.size(); ++s) {
      for (std::size_t j = 0; j < axes.eta.size(); ++j) tasks.push_back({s, 0, j});
    }
  }

  unsigned workers = cfg.threads ? cfg.threads : std::max(1u, std::thread::hardware_concurrency());
  workers = static_cast<unsigned>(std::min<std::size_t>(workers, tasks.size()));
  const unsigned mc_threads = workers > 1 ? 1 : (cfg.threads ? cfg.threads : 0);

  std::vector<std::vector<ResultRow>> results(tasks.size());
  std::vector<std::string> warnings(tasks.size());
  std::vector<std::exception_ptr> errors(tasks.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t k = next++; k < tasks.size(); k = next++) {
      const Task& t = tasks[k];
      const auto& scheme = cfg.schemes[t.scheme];
      try {
        results[k] = run_task(cfg, source, scheme, t.snr, t.eta, snr_axis[t.snr], axes.eta[t.eta],
                              mc_threads);
      } catch (const InfeasibleError& e) {
        std::ostringstream os;
        os << scheme.name() << " at snr_db=" << snr_axis[t.snr] << ", eta=" << axes.eta[t.eta]
           << ": " << e.what();
        warnings[k] = os.str();
      } catch (...) {
        errors[k] = std::current_exception();
      }
    }
  };
  if (workers <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < workers; ++w) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }

  ResultTable table;
  for (std::size_t k = 0; k < tasks.size(); ++k) {
    table.rows.insert(table.rows.end(), results[k].begin(), results[k].end());
    if (!warnings[k].empty()) table.warnings.push_back(warnings[k]);
  }
  std::stable_sort(table.rows.begin(), table.rows.end(), [](const ResultRow& a, const ResultRow& b) {
    return std::tie(a.scheme, a.snr_db, a.eta, a.vector_index) <
           std::tie(b.scheme, b.snr_db, b.eta, b.vector_index);
  });
  return table;
}

// ---------------------------------------------------------------------------
// Output
// ---------------------------------------------------------------------------

const char* const kCsvHeader =
    "scheme,snr_db,eta,vector_index,R,alpha,K_i,P_i,ed_analytic,ed_sim,ed_sim_ci,sdr_db";

namespace {

std::string full_precision(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

std::string csv_field(const std::optional<double>& v) { return v ? full_precision(*v) : ""; }

std::string csv_quote(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cur += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        cur += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  if (quoted) throw ValidationError("csv: unterminated quote");
  fields.push_back(cur);
  return fields;
}

json json_value(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

}  // namespace

void write_csv(const ResultTable& table, std::ostream& out) {
  out << kCsvHeader << '\n';
  for (const auto& r : table.rows) {
    out << csv_quote(r.scheme) << ',' << full_precision(r.snr_db) << ',' << full_precision(r.eta)
        << ',' << r.vector_index << ',' << csv_field(r.rate) << ',' << csv_field(r.alpha) << ','
        << csv_field(r.channel_uses) << ',' << csv_field(r.power) << ','
        << csv_field(r.ed_analytic) << ',' << csv_field(r.ed_sim) << ','
        << csv_field(r.ed_sim_ci) << ',' << csv_field(r.sdr_db) << '\n';
  }
  if (!out) throw std::runtime_error("csv: write failed");
}

void write_json(const ResultTable& table, std::ostream& out) {
  nlohmann::ordered_json rows = nlohmann::ordered_json::array();
  for (const auto& r : table.rows) {
    nlohmann::ordered_json o;
    o["scheme"] = r.scheme;
    o["snr_db"] = r.snr_db;
    o["eta"] = r.eta;
    o["vector_index"] = r.vector_index;
    o["R"] = json_value(r.rate);
    o["alpha"] = json_value(r.alpha);
    o["K_i"] = json_value(r.channel_uses);
    o["P_i"] = json_value(r.power);
    o["ed_analytic"] = json_value(r.ed_analytic);
    o["ed_sim"] = json_value(r.ed_sim);
    o["ed_sim_ci"] = json_value(r.ed_sim_ci);
    o["sdr_db"] = json_value(r.sdr_db);
    rows.push_back(std::move(o));
  }
  out << rows.dump(2) << '\n';
  if (!out) throw std::runtime_error("json: write failed");
}

ResultTable read_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line != kCsvHeader) {
    throw ValidationError("csv: missing or unexpected header");
  }
  ResultTable table;
  auto opt = [](const std::string& f) -> std::optional<double> {
    if (f.empty()) return std::nullopt;
    return parse_double(f, "csv");
  };
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto f = split_csv_line(line);
    if (f.size() != 12) throw ValidationError("csv: expected 12 fields, got " + std::to_string(f.size()));
    ResultRow r;
    r.scheme = f[0];
    r.snr_db = parse_double(f[1], "csv snr_db");
    r.eta = parse_double(f[2], "csv eta");
    r.vector_index = std::stol(f[3]);
    r.rate = opt(f[4]);
    r.alpha = opt(f[5]);
    r.channel_uses = opt(f[6]);
    r.power = opt(f[7]);
    r.ed_analytic = opt(f[8]);
    r.ed_sim = opt(f[9]);
    r.ed_sim_ci = opt(f[10]);
    r.sdr_db = opt(f[11]);
    table.rows.push_back(std::move(r));
  }
  return table;
}

}  // namespace hda
