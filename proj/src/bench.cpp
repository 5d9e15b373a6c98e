#include "cilo/bench.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>
#include <sstream>

namespace cilo {

namespace {

std::string fmt(double v) {
  char buf[40];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);  // shortest round trip
  return std::string(buf, ptr);
}

double quantile_linear(const std::vector<double>& sorted, double p) {
  const size_t n = sorted.size();
  if (n == 1) return sorted[0];
  double h = (n - 1) * p;
  size_t lo = static_cast<size_t>(h);
  if (lo >= n - 1) return sorted[n - 1];
  return sorted[lo] + (h - lo) * (sorted[lo + 1] - sorted[lo]);
}

std::string record_line(const RunRecord& r, bool with_wall) {
  std::ostringstream os;
  os << r.trial_id << ',' << r.seed << ',' << r.s << ',' << r.method << ','
     << (r.beta_used ? fmt(*r.beta_used) : std::string()) << ',' << fmt(r.train_loss) << ','
     << fmt(r.test_regret);
  if (with_wall) os << ',' << fmt(r.wall_ms);
  return os.str();
}

using Clock = std::chrono::steady_clock;

double elapsed_ms(Clock::time_point start) {
  return std::chrono::duration<double, std::milli>(Clock::now() - start).count();
}

}  // namespace

void BenchConfig::validate() const {
  if (k < 1 || k > 20) throw ConfigError("config: k must be in [1, 20]");
  if (j < 1 || d < j) throw ConfigError("config: need d >= j >= 1");
  if (n_train < 1 || n_val < 1 || n_test < 1) throw ConfigError("config: dataset sizes must be >= 1");
  if (trials < 1) throw ConfigError("config: trials must be >= 1");
  if (beta_grid_count < 1) throw ConfigError("config: beta_grid_count must be >= 1");
  if (upper_bound <= 0.0) throw ConfigError("config: upper_bound must be positive");
  if (s_levels.empty()) throw ConfigError("config: s_levels must be nonempty");
  const int p = (1 << k) - 1;
  for (int s : s_levels)
    if (s < 0 || s >= p) throw ConfigError("config: s_levels entries must be in [0, 2^k - 2]");
}

BenchConfig BenchConfig::from_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot open " + path);
  BenchConfig cfg;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("config: line " + std::to_string(lineno) + " is not key=value");
    std::string key = line.substr(0, eq);
    std::string val = line.substr(eq + 1);
    try {
      if (key == "d")
        cfg.d = std::stoi(val);
      else if (key == "k")
        cfg.k = std::stoi(val);
      else if (key == "j")
        cfg.j = std::stoi(val);
      else if (key == "n_train")
        cfg.n_train = std::stoi(val);
      else if (key == "n_val")
        cfg.n_val = std::stoi(val);
      else if (key == "n_test")
        cfg.n_test = std::stoi(val);
      else if (key == "trials")
        cfg.trials = std::stoi(val);
      else if (key == "beta_grid_count")
        cfg.beta_grid_count = std::stoi(val);
      else if (key == "seed")
        cfg.seed = std::stoull(val);
      else if (key == "upper_bound")
        cfg.upper_bound = std::stod(val);
      else if (key == "output_path")
        cfg.output_path = val;
      else if (key == "s_levels") {
        cfg.s_levels.clear();
        std::stringstream ss(val);
        std::string cell;
        while (std::getline(ss, cell, ',')) cfg.s_levels.push_back(std::stoi(cell));
      } else {
        throw ConfigError("config: unknown key '" + key + "'");
      }
    } catch (const ConfigError&) {
      throw;
    } catch (const std::exception&) {
      throw ConfigError("config: bad value for key '" + key + "'");
    }
  }
  return cfg;
}

unsigned long long trial_stream_seed(unsigned long long base, int s, int trial) {
  // splitmix64 over the packed identifiers.
  unsigned long long z = base + 0x9e3779b97f4a7c15ULL * (static_cast<unsigned long long>(s) + 1) +
                         0xbf58476d1ce4e5b9ULL * (static_cast<unsigned long long>(trial) + 1);
  z ^= z >> 30;
  z *= 0xbf58476d1ce4e5b9ULL;
  z ^= z >> 27;
  z *= 0x94d049bb133111ebULL;
  z ^= z >> 31;
  return z;
}

Instance gen_instance(const BenchConfig& cfg, unsigned long long trial_seed, int s) {
  std::mt19937_64 rng(trial_seed);
  std::normal_distribution<double> gauss(0.0, 1.0);

  Mat A(cfg.j, cfg.d);
  for (int r = 0; r < cfg.j; ++r)
    for (int q = 0; q < cfg.d; ++q) A(r, q) = gauss(rng);

  Vec w_feas(cfg.d);
  bool ok = false;
  for (int attempt = 0; attempt < 100 && !ok; ++attempt) {
    ok = true;
    for (int q = 0; q < cfg.d; ++q) {
      w_feas[q] = std::abs(gauss(rng));
      if (w_feas[q] > cfg.upper_bound) ok = false;
    }
  }
  if (!ok) throw FeasibilityResampleExceeded("gen_instance: no interior point in 100 draws");
  Vec b = A * w_feas;
  Polyhedron W(A, b, Vec::Zero(cfg.d), Vec::Constant(cfg.d, cfg.upper_bound));

  LinearHypothesis full(cfg.d, FeatureMap(cfg.k, 0));
  Vec theta_star(full.param_dim());
  for (int q = 0; q < theta_star.size(); ++q) theta_star[q] = gauss(rng);

  auto draw_context = [&]() {
    Vec x(cfg.k);
    for (int t = 0; t < cfg.k; ++t) {
      double v;
      do {
        v = gauss(rng);
      } while (v < 0.0 || v > 10.0);
      x[t] = v;
    }
    return x;
  };

  LinearHypothesis hyp(cfg.d, FeatureMap(cfg.k, s));
  auto draw_split = [&](int n) {
    std::vector<Vec> xs, cs;
    for (int i = 0; i < n; ++i) {
      Vec x = draw_context();
      cs.push_back(full.predict(theta_star, x));
      xs.push_back(std::move(x));
    }
    return Dataset(std::move(xs), std::move(cs), hyp);
  };

  Dataset train = draw_split(cfg.n_train);
  Dataset val = draw_split(cfg.n_val);
  Dataset test = draw_split(cfg.n_test);
  return Instance{std::move(W), std::move(theta_star), std::move(train), std::move(val),
                  std::move(test)};
}

std::vector<RunRecord> run_experiments(const BenchConfig& cfg) {
  cfg.validate();
  std::vector<RunRecord> records;

  for (int s : cfg.s_levels) {
    for (int trial = 0; trial < cfg.trials; ++trial) {
      const unsigned long long seed = trial_stream_seed(cfg.seed, s, trial);
      auto error_row = [&](const char* method) {
        RunRecord r;
        r.trial_id = trial;
        r.seed = seed;
        r.s = s;
        r.method = method;
        return r;
      };
      std::optional<Instance> inst;
      try {
        inst = gen_instance(cfg, seed, s);
      } catch (const Error&) {
        records.push_back(error_row("error"));
        continue;
      }

      auto make = [&](const char* method) {
        RunRecord r;
        r.trial_id = trial;
        r.seed = seed;
        r.s = s;
        r.method = method;
        return r;
      };

      double beta_spo = 0.0;
      bool have_spo = false;

      // slo
      try {
        auto t0 = Clock::now();
        GDConfig gcfg;
        TrainResult res = train_slo(inst->train, gcfg);
        RunRecord r = make("slo");
        r.train_loss = slo_loss(res.theta, inst->train).value;
        r.test_regret = regret(res.theta, inst->test, inst->W);
        r.wall_ms = elapsed_ms(t0);
        records.push_back(std::move(r));
      } catch (const Error&) {
        records.push_back(error_row("error"));
      }

      // spo_plus
      try {
        auto t0 = Clock::now();
        GDConfig gcfg;
        gcfg.max_iters = 500;
        TrainResult res = train_spo_plus(inst->train, inst->W, gcfg);
        RunRecord r = make("spo_plus");
        r.train_loss = spo_plus_loss(res.theta, inst->train, inst->W).value;
        r.test_regret = regret(res.theta, inst->test, inst->W);
        r.wall_ms = elapsed_ms(t0);
        beta_spo = target_loss(res.theta, inst->train, inst->W).value;
        have_spo = true;
        records.push_back(std::move(r));
      } catch (const Error&) {
        records.push_back(error_row("error"));
      }

      // cilo
      try {
        auto t0 = Clock::now();
        double beta_low = beta_bounds(inst->train, inst->W).beta_min;
        double beta_high = have_spo ? std::max(beta_spo, beta_low) : beta_low;
        GDConfig gcfg;
        gcfg.max_iters = 60;  // per-budget descent budget; selection saturates early
        TrainResult res = train_cilo(inst->train, inst->val, inst->W, beta_low, beta_high,
                                     cfg.beta_grid_count, gcfg);
        RunRecord r = make("cilo");
        r.beta_used = res.beta_used;
        r.train_loss = target_loss(res.theta, inst->train, inst->W).value;
        r.test_regret = regret(res.theta, inst->test, inst->W);
        r.wall_ms = elapsed_ms(t0);
        records.push_back(std::move(r));
      } catch (const Error&) {
        records.push_back(error_row("error"));
      }
    }
  }

  std::sort(records.begin(), records.end(), [](const RunRecord& a, const RunRecord& b) {
    if (a.s != b.s) return a.s < b.s;
    if (a.trial_id != b.trial_id) return a.trial_id < b.trial_id;
    return a.method < b.method;
  });
  write_records_csv(records, cfg.output_path);
  return records;
}

void write_records_csv(const std::vector<RunRecord>& records, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("write_records_csv: cannot open " + path);
  out << "trial_id,seed,s,method,beta_used,train_loss,test_regret,wall_ms\n";
  for (const RunRecord& r : records) out << record_line(r, true) << '\n';
  if (!out) throw IoError("write_records_csv: write failed for " + path);
}

void emit_plot_data(const std::vector<RunRecord>& records, const std::string& path) {
  if (records.empty()) throw IoError("emit_plot_data: no records");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("emit_plot_data: cannot open " + path);
  out << "s,method,min,q1,median,q3,max\n";

  std::vector<std::pair<int, std::string>> cells;
  for (const RunRecord& r : records) {
    if (r.method == "error") continue;
    std::pair<int, std::string> cell{r.s, r.method};
    if (std::find(cells.begin(), cells.end(), cell) == cells.end()) cells.push_back(cell);
  }
  std::sort(cells.begin(), cells.end());
  for (const auto& [s, method] : cells) {
    std::vector<double> v;
    for (const RunRecord& r : records)
      if (r.s == s && r.method == method) v.push_back(r.test_regret);
    std::sort(v.begin(), v.end());
    out << s << ',' << method << ',' << fmt(v.front()) << ',' << fmt(quantile_linear(v, 0.25))
        << ',' << fmt(quantile_linear(v, 0.5)) << ',' << fmt(quantile_linear(v, 0.75)) << ','
        << fmt(v.back()) << '\n';
  }
  if (!out) throw IoError("emit_plot_data: write failed for " + path);
}

unsigned long long determinism_hash(const std::vector<RunRecord>& records) {
  unsigned long long h = 1469598103934665603ULL;  // FNV offset basis
  auto mix = [&](const std::string& sline) {
    for (unsigned char c : sline) {
      h ^= c;
      h *= 1099511628211ULL;  // FNV prime
    }
    h ^= '\n';
    h *= 1099511628211ULL;
  };
  for (const RunRecord& r : records) mix(record_line(r, false));
  return h;
}

}  // namespace cilo
