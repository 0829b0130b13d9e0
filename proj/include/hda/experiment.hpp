#pragma once

#include <cstdint>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "hda/multi_opt.hpp"
#include "hda/simulator.hpp"
#include "hda/single_opt.hpp"

namespace hda {

enum class SchemeKind { hda_optimized, hda_fixed, pure_analog, pure_digital, opta, mesh_grid };

struct SchemeSpec {
  SchemeKind kind = SchemeKind::hda_optimized;
  double rate = 0.0;   // hda-fixed only
  double alpha = 0.0;  // hda-fixed only

  /// Canonical label, e.g. "hda-fixed(R=1.5,alpha=0.4)".
  std::string name() const;
};

/// Accepts "hda-optimized", "pure-analog", "pure-digital", "opta",
/// "mesh-grid", "hda-fixed(R=1.5,alpha=0.4)" and "hda-fixed(1.5,0.4)".
SchemeSpec parse_scheme(const std::string& text);

struct ExperimentConfig {
  std::size_t samples = 1;           // L
  std::vector<double> variances;     // m = variances.size()
  std::optional<long> channel_uses;  // K
  std::optional<double> eta;         // K / (m L)
  std::optional<double> power;       // P, block energy
  std::optional<double> snr_db;      // gamma = P / (K sigma_w^2)
  double noise_power = 1.0;
  std::vector<double> sweep_snr_db;
  std::vector<double> sweep_eta;
  std::optional<double> target_snr_db;
  SingleOptConfig single;
  MultiOptConfig multi;
  std::size_t grid_rate_points = 201;
  std::size_t grid_alpha_points = 201;
  long n_trials = 0;
  std::uint64_t seed = 1;
  QuantizerMode mode = QuantizerMode::ideal;
  unsigned threads = 0;  // 0 = hardware concurrency
  std::vector<SchemeSpec> schemes;

  /// Throws ValidationError naming the offending field.
  void validate() const;
  static ExperimentConfig from_json(const nlohmann::json& doc);
};

/// Reads a JSON config file; syntax and field errors become ValidationError.
ExperimentConfig load_config(const std::string& path);

/// Applies "a.b.c=value" to a JSON document; value is parsed as JSON when
/// possible, otherwise taken as a string.
void apply_override(nlohmann::json& doc, const std::string& assignment);

struct ResultRow {
  std::string scheme;
  double snr_db = 0.0;
  double eta = 0.0;
  long vector_index = 0;  // -1 for the all-vector total of a multi-vector source
  std::optional<double> rate;
  std::optional<double> alpha;
  std::optional<double> channel_uses;
  std::optional<double> power;
  std::optional<double> ed_analytic;
  std::optional<double> ed_sim;
  std::optional<double> ed_sim_ci;
  std::optional<double> sdr_db;  // from ed_analytic

  bool operator==(const ResultRow&) const = default;
};

struct ResultTable {
  std::vector<ResultRow> rows;
  std::vector<std::string> warnings;  // per-row infeasibility messages
};

/// One row per (scheme, SNR, eta, vector), plus a total row when m > 1,
/// sorted by (scheme, snr_db, eta, vector_index).
ResultTable run_experiment(const ExperimentConfig& config);

extern const char* const kCsvHeader;

void write_csv(const ResultTable& table, std::ostream& out);
void write_json(const ResultTable& table, std::ostream& out);
/// Inverse of write_csv.
ResultTable read_csv(const std::string& text);

/// Seed for one simulated row, mixed from the run seed and the row identity.
std::uint64_t row_seed(std::uint64_t seed, const std::string& scheme, std::size_t snr_index,
                       std::size_t eta_index, std::size_t vector_index);

}  // namespace hda
