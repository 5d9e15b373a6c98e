#pragma once

#include <optional>
#include <string>
#include <vector>

#include "cilo/optimize.hpp"

namespace cilo {

struct BenchConfig {
  int d = 20;
  int k = 5;
  int j = 5;
  int n_train = 20;
  int n_val = 200;
  int n_test = 200;
  std::vector<int> s_levels = {0, 20, 25, 27};
  int trials = 16;
  int beta_grid_count = 24;
  unsigned long long seed = 1;
  double upper_bound = 10.0;
  std::string output_path = "bench.csv";

  void validate() const;
  static BenchConfig from_file(const std::string& path);
};

struct RunRecord {
  int trial_id = 0;
  unsigned long long seed = 0;
  int s = 0;
  std::string method;  // cilo | spo_plus | slo | error
  std::optional<double> beta_used;
  double train_loss = 0.0;
  double test_regret = 0.0;
  double wall_ms = 0.0;
};

struct Instance {
  Polyhedron W;
  Vec theta_star;  // full-feature generating parameter
  Dataset train;
  Dataset val;
  Dataset test;
};

/// Deterministic synthetic instance: random equality rows through the absolute
/// value of a Gaussian point, Gaussian generating parameter over the full
/// feature set, contexts from a truncated normal, noiseless costs. The
/// hypothesis set used by the datasets is truncated to level s.
Instance gen_instance(const BenchConfig& cfg, unsigned long long trial_seed, int s);

unsigned long long trial_stream_seed(unsigned long long base, int s, int trial);

/// Full sweep: per (s, trial) trains slo, spo_plus, and cilo (budget grid from
/// beta_min on train up to the trained SPO+ model's train decision loss) and
/// records test regret. Failures become method="error" rows. Writes the CSV to
/// cfg.output_path and returns the records sorted by (s, trial_id, method).
std::vector<RunRecord> run_experiments(const BenchConfig& cfg);

void write_records_csv(const std::vector<RunRecord>& records, const std::string& path);

/// Per-(s, method) five-number summaries of test regret, linear-interpolation
/// quantiles, written as CSV `s,method,min,q1,median,q3,max`.
void emit_plot_data(const std::vector<RunRecord>& records, const std::string& path);

/// FNV-1a 64-bit hash of the serialized records with wall_ms excluded.
unsigned long long determinism_hash(const std::vector<RunRecord>& records);

}  // namespace cilo
