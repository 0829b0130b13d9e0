// hda-alloc: command line front-end for the allocation library.

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "hda/experiment.hpp"
#include "hda/special.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitRuntime = 1;
constexpr int kExitValidation = 2;

struct Options {
  std::string config;
  std::string format = "csv";
  std::string out;
  std::string seed;
  std::vector<std::string> overrides;
};

std::uint64_t parse_seed(const std::string& text, const std::string& source) {
  if (text.empty() || text.find_first_not_of("0123456789") != std::string::npos) {
    throw hda::ValidationError(source + ": seed must be an unsigned 64-bit integer");
  }
  try {
    return std::stoull(text);
  } catch (const std::exception&) {
    throw hda::ValidationError(source + ": seed out of range");
  }
}

hda::ExperimentConfig build_config(const Options& opt) {
  std::ifstream in(opt.config);
  if (!in) throw hda::ValidationError("--config: cannot open '" + opt.config + "'");
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(in, nullptr, true, true);
  } catch (const nlohmann::json::parse_error& e) {
    throw hda::ValidationError(std::string("config: ") + e.what());
  }
  for (const auto& o : opt.overrides) hda::apply_override(doc, o);
  auto cfg = hda::ExperimentConfig::from_json(doc);
  // --seed beats HDA_SEED beats the file.
  if (!opt.seed.empty()) {
    cfg.seed = parse_seed(opt.seed, "--seed");
  } else if (const char* env = std::getenv("HDA_SEED"); env != nullptr && *env != '\0') {
    cfg.seed = parse_seed(env, "HDA_SEED");
  }
  return cfg;
}

void emit(const hda::ResultTable& table, const Options& opt) {
  for (const auto& w : table.warnings) std::cerr << "warning: " << w << '\n';
  std::ostringstream buffer;
  if (opt.format == "json") {
    hda::write_json(table, buffer);
  } else {
    hda::write_csv(table, buffer);
  }
  if (opt.out.empty()) {
    std::cout << buffer.str();
    std::cout.flush();
    if (!std::cout) throw std::runtime_error("write to stdout failed");
    return;
  }
  std::ofstream file(opt.out, std::ios::binary);
  if (!file) throw std::runtime_error("cannot open output file '" + opt.out + "'");
  file << buffer.str();
  if (!file) throw std::runtime_error("write to '" + opt.out + "' failed");
}

void add_common(CLI::App* cmd, Options& opt, bool config_required) {
  auto* c = cmd->add_option("--config", opt.config, "JSON experiment configuration");
  if (config_required) c->required();
  cmd->add_option("--format", opt.format, "Output format")->check(CLI::IsMember({"csv", "json"}));
  cmd->add_option("--out", opt.out, "Output file (default: stdout)");
  cmd->add_option("--seed", opt.seed, "Simulation seed (overrides HDA_SEED and the config)");
  cmd->add_option("--set", opt.overrides, "Override a config key, e.g. --set simulation.n_trials=1000");
}

int run_psi_table(const Options& opt, std::size_t points, double x_min, double x_max) {
  if (points < 2) throw hda::ValidationError("--points: need at least 2");
  if (!(x_min > 0.0 && x_max > x_min)) throw hda::ValidationError("--min/--max: need 0 < min < max");
  const hda::PsiTable table(points, x_min, x_max);
  std::ostringstream buffer;
  if (opt.format == "json") {
    nlohmann::ordered_json rows = nlohmann::ordered_json::array();
    for (std::size_t i = 0; i < table.abscissae().size(); ++i) {
      rows.push_back({{"x", table.abscissae()[i]}, {"psi", table.values()[i]}});
    }
    buffer << rows.dump(2) << '\n';
  } else {
    buffer << "x,psi\n";
    char line[96];
    for (std::size_t i = 0; i < table.abscissae().size(); ++i) {
      std::snprintf(line, sizeof line, "%.17g,%.17g\n", table.abscissae()[i], table.values()[i]);
      buffer << line;
    }
  }
  if (opt.out.empty()) {
    std::cout << buffer.str();
  } else {
    std::ofstream file(opt.out, std::ios::binary);
    if (!file) throw std::runtime_error("cannot open output file '" + opt.out + "'");
    file << buffer.str();
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Rate and power/bandwidth allocation for hybrid digital-analog transmission"};
  app.require_subcommand(1);
  Options opt;

  auto* single = app.add_subcommand("optimize-single", "Optimize (R, alpha) for a one-vector source");
  auto* multi = app.add_subcommand("optimize-multi", "Jointly optimize (R, alpha, P_i, K_i) for all vectors");
  auto* simulate = app.add_subcommand("simulate", "Evaluate the configured schemes with Monte Carlo");
  auto* sweep = app.add_subcommand("sweep", "Run the configured schemes over the SNR/eta sweep");
  auto* psi = app.add_subcommand("psi-table", "Dump the Psi lookup table");
  for (auto* cmd : {single, multi, simulate, sweep}) add_common(cmd, opt, true);
  add_common(psi, opt, false);
  std::size_t points = hda::PsiTable::kDefaultPoints;
  double x_min = hda::PsiTable::kDefaultMin;
  double x_max = hda::PsiTable::kDefaultMax;
  psi->add_option("--points", points, "Number of table nodes");
  psi->add_option("--min", x_min, "Smallest abscissa");
  psi->add_option("--max", x_max, "Largest abscissa");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitValidation;
  }

  try {
    if (psi->parsed()) return run_psi_table(opt, points, x_min, x_max);

    auto cfg = build_config(opt);
    if (single->parsed() || multi->parsed()) {
      if (single->parsed() && cfg.variances.size() != 1) {
        throw hda::ValidationError("source.variances: optimize-single needs exactly one vector");
      }
      cfg.schemes = {hda::SchemeSpec{hda::SchemeKind::hda_optimized}};
      cfg.n_trials = 0;
    } else if (simulate->parsed() && cfg.n_trials <= 0) {
      throw hda::ValidationError("simulation.n_trials: simulate needs a positive trial count");
    }
    emit(hda::run_experiment(cfg), opt);
    return kExitOk;
  } catch (const hda::ValidationError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitValidation;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
}
