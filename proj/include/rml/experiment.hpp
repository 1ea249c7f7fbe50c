#pragma once

#include <cstdint>
#include <filesystem>
#include <json.hpp>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "rml/csv.hpp"
#include "rml/matrix_mc.hpp"
#include "rml/spectral_model.hpp"

namespace rml::exp {

enum class Kind { Density, Paths, OverlapsBulk, OverlapsCrossover, Spike, Clt, Figure2, Figure3, Figure4 };

const char* kind_name(Kind k);

inline constexpr int kSchemaVersion = 1;

struct ExperimentConfig {
  nlohmann::json model;  // {"variant": ..., "params": {...}, "spikes": [...]}
  mc::Dynamics dynamics = mc::Dynamics::Additive;
  std::size_t n = 0;
  int beta = 1;
  std::vector<double> times;
  std::size_t n_samples = 1;
  std::uint64_t seed = 0;
  Kind experiment = Kind::Density;
  std::filesystem::path output_dir;
  nlohmann::json params = nlohmann::json::object();  // experiment-specific knobs

  SpectralModel spectral_model() const;
  nlohmann::json to_json() const;
  std::string hash() const;  // SHA-256 of the canonical JSON
};

// Field-level ConfigError on any problem.
ExperimentConfig parse_config(const nlohmann::json& j);
ExperimentConfig load_config(const std::filesystem::path& path);
SpectralModel parse_model(const nlohmann::json& j);

std::string sha256_hex(const std::string& bytes);

struct ManifestEntry {
  std::string file;  // relative to output_dir
  std::string sha256;
  std::size_t bytes = 0;
};

struct RunRecord {
  std::string config_hash;
  std::uint64_t seed = 0;
  std::string started;
  std::string finished;
  std::vector<ManifestEntry> manifest;
  nlohmann::json config;
  bool passed = true;  // comparison experiments: report verdict

  nlohmann::json to_json() const;
  static RunRecord from_json(const nlohmann::json& j);
};

RunRecord run(const ExperimentConfig& cfg);
// Recomputes every manifest checksum; returns the files that differ.
std::vector<std::string> verify_manifest(const RunRecord& rec, const std::filesystem::path& dir);

struct Tolerance {
  double z = 3.0;
  double min_pass_fraction = 1.0;
  // "3", "z=3", "z=3,frac=0.9"
  static Tolerance parse(const std::string& spec);
};

struct CompareRow {
  std::string key;
  double theory = 0.0;
  double mc = 0.0;
  double std_err = 0.0;
  double z = 0.0;
  bool pass = true;
};

struct CompareReport {
  std::vector<CompareRow> rows;
  double max_abs_z = 0.0;
  double max_deviation = 0.0;
  std::size_t failures = 0;
  bool pass = true;
  std::string to_text() const;
};

// Rows are matched in order; key columns (those not in {value, mean, std_err})
// present in both files must agree. Theory uses "value" (or "mean").
CompareReport compare(const io::CsvTable& theory, const io::CsvTable& mc, const Tolerance& tol);

// Figure data, also consumed directly by the acceptance suite.
struct Figure2Data {
  std::size_t n = 0;
  double a1 = 5.0;
  std::vector<double> times;
  Eigen::MatrixXd lambda;  // N x T, one matrix path
  std::vector<double> spike_theory;  // spike_trajectory at times
  std::vector<double> edge_theory;   // 2 sqrt(t)
  double max_spike_dev_ratio = 0.0;  // max |lambda_1 - (a1 + t/a1)| / (3 sqrt(2t/N)), t > 0
  double max_edge_dev = 0.0;         // max over t of max(|lambda_2 - 2 sqrt t|, |lambda_N + 2 sqrt t|)
};
Figure2Data figure2_data(std::size_t n, double a1, double t_max, std::size_t intervals, std::uint64_t seed, int beta);

struct Figure3Bin {
  double lo = 0.0, hi = 0.0;
  std::size_t count = 0;
  double mc = 0.0;       // mean of N |<psi_i^t|psi_j^0>|^2 over entries in the bin
  double theory = 0.0;   // mean of K_t(lambda_i, a_j) over the same entries
  double std_err = 0.0;  // cluster (per-sample) standard error of mc - theory
  double z = 0.0;
};
struct Figure3Data {
  std::size_t n = 0, j = 0, samples = 0;
  double t = 0.0, mu = 0.0;
  std::vector<Figure3Bin> bins;
  std::size_t bins_within_3se = 0;
  std::vector<double> curve_t;  // K_t(lambda, 0) curves
  std::vector<double> curve_lambda;
  Eigen::MatrixXd curve;        // lambda x t
};
Figure3Data figure3_data(std::size_t n, double t, std::size_t samples, std::uint64_t seed, std::size_t bins, int beta);

struct Figure4Data {
  std::size_t n = 0, samples = 0;
  double a1 = 5.0;
  std::vector<double> times;
  std::vector<double> mean;  // mean |<psi_1^t|psi_1^0>|
  std::vector<double> std_err;
  std::vector<double> sqrt_law;    // sqrt(1 - t/a1^2), 0 beyond
  std::vector<double> spike_lab;   // exp(-1/2 int phi) from the spike solver
  std::optional<double> death_time;
};
Figure4Data figure4_data(std::size_t n, double a1, const std::vector<double>& times, std::size_t samples,
                         std::uint64_t seed, int beta);

}  // namespace rml::exp
