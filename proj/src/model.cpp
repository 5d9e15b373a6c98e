#include "cilo/model.hpp"

#include <algorithm>
#include <bit>
#include <fstream>
#include <sstream>

namespace cilo {

Vec subset_product_features(const Vec& x, int k) {
  if (k < 1 || k > 20) throw DimensionMismatch("subset_product_features: k out of range");
  if (x.size() != k) throw DimensionMismatch("subset_product_features: context length != k");
  const int p = (1 << k) - 1;
  Vec out(p);
  for (unsigned mask = 1; mask <= static_cast<unsigned>(p); ++mask) {
    // Reuse the product at mask with its lowest bit cleared.
    unsigned low = mask & (mask - 1);
    double prod = (low == 0) ? 1.0 : out[low - 1];
    out[mask - 1] = prod * x[std::countr_zero(mask)];
  }
  return out;
}

FeatureMap::FeatureMap(int k, int removed) : k_(k), s_(removed) {
  if (k < 1 || k > 20) throw DimensionMismatch("FeatureMap: k out of range");
  const int p = (1 << k) - 1;
  if (s_ < 0 || s_ >= p) throw DimensionMismatch("FeatureMap: removed count out of range");
  std::vector<unsigned> order(p);
  for (int i = 0; i < p; ++i) order[i] = static_cast<unsigned>(i + 1);
  // Removal priority: larger subsets first, then higher counter index.
  std::stable_sort(order.begin(), order.end(), [](unsigned a, unsigned b) {
    int pa = std::popcount(a), pb = std::popcount(b);
    if (pa != pb) return pa > pb;
    return a > b;
  });
  std::vector<bool> drop(p + 1, false);
  for (int i = 0; i < s_; ++i) drop[order[i]] = true;
  keep_.reserve(p - s_);
  for (unsigned mask = 1; mask <= static_cast<unsigned>(p); ++mask)
    if (!drop[mask]) keep_.push_back(mask);
}

Vec FeatureMap::operator()(const Vec& x) const {
  Vec full = subset_product_features(x, k_);
  if (s_ == 0) return full;
  Vec out(size());
  for (int i = 0; i < size(); ++i) out[i] = full[keep_[i] - 1];
  return out;
}

Vec LinearHypothesis::predict_from_features(const Vec& theta, const Vec& phi) const {
  const int q = fm_.size();
  if (theta.size() != param_dim()) throw DimensionMismatch("predict: theta length != d*(p-s)");
  Vec out(d_);
  for (int r = 0; r < d_; ++r) out[r] = theta.segment(static_cast<long>(r) * q, q).dot(phi);
  return out;
}

Vec LinearHypothesis::predict(const Vec& theta, const Vec& x) const {
  return predict_from_features(theta, fm_(x));
}

Mat LinearHypothesis::feature_matrix(const Vec& x) const {
  const int q = fm_.size();
  Vec phi = fm_(x);
  Mat out = Mat::Zero(d_, param_dim());
  for (int r = 0; r < d_; ++r) out.block(r, static_cast<long>(r) * q, 1, q) = phi.transpose();
  return out;
}

Vec LinearHypothesis::apply_transpose(const Vec& phi, const Vec& v) const {
  const int q = fm_.size();
  if (v.size() != d_) throw DimensionMismatch("apply_transpose: vector length != d");
  Vec out(param_dim());
  for (int r = 0; r < d_; ++r) out.segment(static_cast<long>(r) * q, q) = v[r] * phi;
  return out;
}

Dataset::Dataset(std::vector<Vec> xs, std::vector<Vec> cs, LinearHypothesis hyp)
    : xs_(std::move(xs)), cs_(std::move(cs)), hyp_(std::move(hyp)) {
  if (xs_.empty() || xs_.size() != cs_.size())
    throw DimensionMismatch("Dataset: need n >= 1 matched (x, c) pairs");
  phis_.reserve(xs_.size());
  for (size_t i = 0; i < xs_.size(); ++i) {
    if (cs_[i].size() != hyp_.decision_dim())
      throw DimensionMismatch("Dataset: cost length != d");
    if (!cs_[i].allFinite()) throw DimensionMismatch("Dataset: non-finite cost");
    phis_.push_back(hyp_.feature_map()(xs_[i]));
    k_hat_ = std::max(k_hat_, cs_[i].norm());
  }
}

void Dataset::export_csv(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw IoError("Dataset::export_csv: cannot open " + path);
  const int k = hyp_.feature_map().context_dim();
  const int d = hyp_.decision_dim();
  out.precision(17);
  for (int t = 0; t < k; ++t) out << "x_" << (t + 1) << ",";
  for (int r = 0; r < d; ++r) out << "c_" << (r + 1) << (r + 1 < d ? "," : "\n");
  for (int i = 0; i < n(); ++i) {
    for (int t = 0; t < k; ++t) out << xs_[i][t] << ",";
    for (int r = 0; r < d; ++r) out << cs_[i][r] << (r + 1 < d ? "," : "\n");
  }
  if (!out) throw IoError("Dataset::export_csv: write failed for " + path);
}

Dataset Dataset::import_csv(const std::string& path, const LinearHypothesis& hyp) {
  std::ifstream in(path);
  if (!in) throw IoError("Dataset::import_csv: cannot open " + path);
  const int k = hyp.feature_map().context_dim();
  const int d = hyp.decision_dim();
  std::string line;
  if (!std::getline(in, line)) throw IoError("Dataset::import_csv: empty file");
  std::vector<Vec> xs, cs;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    Vec x(k), c(d);
    std::string cell;
    for (int t = 0; t < k + d; ++t) {
      if (!std::getline(ss, cell, ',')) throw IoError("Dataset::import_csv: short row");
      double v = std::stod(cell);
      if (t < k)
        x[t] = v;
      else
        c[t - k] = v;
    }
    xs.push_back(std::move(x));
    cs.push_back(std::move(c));
  }
  return Dataset(std::move(xs), std::move(cs), hyp);
}

double feature_spectral_bound(const Dataset& data) {
  double best = 0.0;
  for (int i = 0; i < data.n(); ++i) best = std::max(best, data.phi(i).norm());
  return best;
}

}  // namespace cilo
