#pragma once

#include <string>
#include <vector>

#include "cilo/errors.hpp"
#include "cilo/types.hpp"

namespace cilo {

/// All nonempty subset products of the context coordinates, ordered by the
/// binary counter over subsets (mask 1, 2, 3, ..., 2^k - 1). Entry for mask y
/// is prod_{i : bit i of y} x_i.
Vec subset_product_features(const Vec& x, int k);

/// Subset-product feature map with optional truncation: the s features with
/// the largest subset cardinality are removed first (ties broken by higher
/// counter index first), so the retained sets are nested across s levels.
class FeatureMap {
 public:
  FeatureMap(int k, int removed = 0);

  int context_dim() const { return k_; }
  int full_count() const { return (1 << k_) - 1; }
  int removed() const { return s_; }
  int size() const { return static_cast<int>(keep_.size()); }
  const std::vector<unsigned>& kept_masks() const { return keep_; }

  Vec operator()(const Vec& x) const;

 private:
  int k_;
  int s_;
  std::vector<unsigned> keep_;  // retained subset masks, increasing counter order
};

/// Linear predictor c_theta(x) = Phi(x) theta with Phi(x) block-diagonal:
/// d copies of phi(x)^T, one parameter slice of length size() per output row.
class LinearHypothesis {
 public:
  LinearHypothesis(int d, FeatureMap feature_map)
      : d_(d), fm_(std::move(feature_map)) {}

  int decision_dim() const { return d_; }
  int param_dim() const { return d_ * fm_.size(); }
  const FeatureMap& feature_map() const { return fm_; }

  Vec predict(const Vec& theta, const Vec& x) const;
  Vec predict_from_features(const Vec& theta, const Vec& phi) const;
  Mat feature_matrix(const Vec& x) const;

  /// Phi(x)^T v for a cached feature vector phi = feature_map()(x);
  /// row r of Phi contributes v[r] * phi to slice r.
  Vec apply_transpose(const Vec& phi, const Vec& v) const;

 private:
  int d_;
  FeatureMap fm_;
};

/// Samples (x_i, c_i) with cached feature vectors under a fixed hypothesis.
class Dataset {
 public:
  Dataset(std::vector<Vec> xs, std::vector<Vec> cs, LinearHypothesis hyp);

  int n() const { return static_cast<int>(xs_.size()); }
  const Vec& x(int i) const { return xs_[i]; }
  const Vec& c(int i) const { return cs_[i]; }
  const Vec& phi(int i) const { return phis_[i]; }
  const LinearHypothesis& hypothesis() const { return hyp_; }
  double max_cost_norm() const { return k_hat_; }

  Vec predict(const Vec& theta, int i) const { return hyp_.predict_from_features(theta, phis_[i]); }

  void export_csv(const std::string& path) const;
  static Dataset import_csv(const std::string& path, const LinearHypothesis& hyp);

 private:
  std::vector<Vec> xs_;
  std::vector<Vec> cs_;
  std::vector<Vec> phis_;
  LinearHypothesis hyp_;
  double k_hat_ = 0.0;
};

/// max_i of the spectral norm of Phi(x_i); equals max_i ||phi(x_i)||_2 for the
/// block-diagonal structure.
double feature_spectral_bound(const Dataset& data);

}  // namespace cilo
