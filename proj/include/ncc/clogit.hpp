#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "ncc/error.hpp"

namespace ncc {

// Matched sets flattened into a row matrix; rows of one set are contiguous
// and each set holds exactly one case.
struct MatchedDesign {
  Eigen::MatrixXd x;                      // n rows, p columns
  std::vector<int> set_offsets;           // size n_sets + 1
  std::vector<int> case_rows;             // absolute row of each set's case
  std::vector<std::string> column_names;  // size p

  int n_rows() const { return static_cast<int>(x.rows()); }
  int n_cols() const { return static_cast<int>(x.cols()); }
  int n_sets() const { return static_cast<int>(case_rows.size()); }

  void validate() const {
    if (static_cast<size_t>(n_cols()) != column_names.size()) {
      throw Error("design: column name count mismatch");
    }
    if (set_offsets.size() != case_rows.size() + 1) {
      throw Error("design: offset table size mismatch");
    }
    for (int s = 0; s < n_sets(); ++s) {
      if (set_offsets[s] >= set_offsets[s + 1]) throw Error("design: empty set");
      if (case_rows[s] < set_offsets[s] || case_rows[s] >= set_offsets[s + 1]) {
        throw Error("design: case row outside its set");
      }
    }
    if (!x.allFinite()) throw Error("design: non-finite feature values");
  }
};

struct CondLogLik {
  double value = 0.0;
  Eigen::VectorXd gradient;
  Eigen::MatrixXd hessian;  // negative semidefinite
};

// Conditional log-likelihood of matched sets with log-sum-exp stabilization:
//   sum over sets of [ x_case . beta - log sum_j exp(x_j . beta) ].
inline CondLogLik cond_loglik(const Eigen::VectorXd& beta, const MatchedDesign& d) {
  const int p = d.n_cols();
  CondLogLik out;
  out.gradient = Eigen::VectorXd::Zero(p);
  out.hessian = Eigen::MatrixXd::Zero(p, p);

  const Eigen::VectorXd scores = d.x * beta;
  if (!scores.allFinite()) throw Error("cond_loglik: non-finite linear predictor");

  Eigen::VectorXd mean(p);
  for (int s = 0; s < d.n_sets(); ++s) {
    const int lo = d.set_offsets[s], hi = d.set_offsets[s + 1];
    const int m = hi - lo;
    const double smax = scores.segment(lo, m).maxCoeff();
    double wsum = 0.0;
    for (int r = lo; r < hi; ++r) wsum += std::exp(scores[r] - smax);
    out.value += scores[d.case_rows[s]] - (smax + std::log(wsum));

    mean.setZero();
    for (int r = lo; r < hi; ++r) {
      const double prob = std::exp(scores[r] - smax) / wsum;
      mean.noalias() += prob * d.x.row(r).transpose();
    }
    out.gradient.noalias() += d.x.row(d.case_rows[s]).transpose() - mean;
    for (int r = lo; r < hi; ++r) {
      const double prob = std::exp(scores[r] - smax) / wsum;
      const Eigen::VectorXd centered = d.x.row(r).transpose() - mean;
      out.hessian.noalias() -= prob * centered * centered.transpose();
    }
  }
  return out;
}

struct FitConfig {
  double tol = 1e-8;       // gradient max-norm
  int max_iter = 25;
  int max_step_halvings = 20;
  double separation_beta = 15.0;  // |beta| beyond this flags (quasi-)separation
};

struct ModelResult {
  std::vector<std::string> columns;  // retained, identifiable columns
  Eigen::VectorXd beta;
  Eigen::VectorXd se;
  Eigen::MatrixXd covariance;
  double loglik = 0.0;
  int iterations = 0;
  bool converged = false;
  bool separated = false;
  std::vector<std::string> dropped_columns;  // set-constant or collinear

  double aor(int j) const { return std::exp(beta[j]); }
  double ci_low(int j) const { return std::exp(beta[j] - 1.96 * se[j]); }
  double ci_high(int j) const { return std::exp(beta[j] + 1.96 * se[j]); }

  int column_index(const std::string& name) const {
    for (size_t i = 0; i < columns.size(); ++i) {
      if (columns[i] == name) return static_cast<int>(i);
    }
    return -1;
  }
};

namespace clogitdetail {

// Columns constant within every set cancel from the conditional likelihood.
inline std::vector<int> identifiable_columns(const MatchedDesign& d) {
  std::vector<int> kept;
  for (int j = 0; j < d.n_cols(); ++j) {
    bool varies = false;
    for (int s = 0; s < d.n_sets() && !varies; ++s) {
      const double first = d.x(d.set_offsets[s], j);
      for (int r = d.set_offsets[s] + 1; r < d.set_offsets[s + 1]; ++r) {
        if (d.x(r, j) != first) {
          varies = true;
          break;
        }
      }
    }
    if (varies) kept.push_back(j);
  }
  return kept;
}

inline MatchedDesign select_columns(const MatchedDesign& d, const std::vector<int>& cols) {
  MatchedDesign out;
  out.x.resize(d.x.rows(), static_cast<Eigen::Index>(cols.size()));
  for (size_t k = 0; k < cols.size(); ++k) {
    out.x.col(static_cast<Eigen::Index>(k)) = d.x.col(cols[k]);
    out.column_names.push_back(d.column_names[static_cast<size_t>(cols[k])]);
  }
  out.set_offsets = d.set_offsets;
  out.case_rows = d.case_rows;
  return out;
}

}  // namespace clogitdetail

// Damped Newton ascent of the conditional likelihood. Set-constant columns
// are dropped up front; exact collinearity among the rest is detected from
// the information matrix at beta = 0 and those columns are dropped too.
inline ModelResult fit_clogit(const MatchedDesign& design, const FitConfig& config = {}) {
  design.validate();
  ModelResult result;

  std::vector<int> kept = clogitdetail::identifiable_columns(design);
  for (int j = 0; j < design.n_cols(); ++j) {
    if (std::find(kept.begin(), kept.end(), j) == kept.end()) {
      result.dropped_columns.push_back(design.column_names[static_cast<size_t>(j)]);
    }
  }
  MatchedDesign d = clogitdetail::select_columns(design, kept);

  if (d.n_cols() > 0) {
    // rank screen on the information matrix at beta = 0
    const Eigen::VectorXd zero = Eigen::VectorXd::Zero(d.n_cols());
    const Eigen::MatrixXd info0 = -cond_loglik(zero, d).hessian;
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(info0);
    qr.setThreshold(1e-10);
    const int rank = static_cast<int>(qr.rank());
    if (rank < d.n_cols()) {
      const auto perm = qr.colsPermutation().indices();
      std::vector<int> keep2;
      std::vector<bool> keep_mask(static_cast<size_t>(d.n_cols()), false);
      for (int k = 0; k < rank; ++k) keep_mask[static_cast<size_t>(perm[k])] = true;
      for (int j = 0; j < d.n_cols(); ++j) {
        if (keep_mask[static_cast<size_t>(j)]) {
          keep2.push_back(j);
        } else {
          result.dropped_columns.push_back(d.column_names[static_cast<size_t>(j)]);
        }
      }
      d = clogitdetail::select_columns(d, keep2);
    }
  }

  const int p = d.n_cols();
  result.columns = d.column_names;
  result.beta = Eigen::VectorXd::Zero(p);
  result.se = Eigen::VectorXd::Zero(p);
  result.covariance = Eigen::MatrixXd::Zero(p, p);

  if (p == 0) {
    result.converged = true;
    result.loglik = cond_loglik(Eigen::VectorXd::Zero(0), d).value;
    return result;
  }

  Eigen::VectorXd beta = Eigen::VectorXd::Zero(p);
  CondLogLik cur = cond_loglik(beta, d);
  for (result.iterations = 0; result.iterations < config.max_iter; ++result.iterations) {
    if (cur.gradient.cwiseAbs().maxCoeff() < config.tol) {
      result.converged = true;
      break;
    }
    Eigen::MatrixXd info = -cur.hessian;
    Eigen::LDLT<Eigen::MatrixXd> ldlt(info);
    Eigen::VectorXd step = ldlt.solve(cur.gradient);
    if (!step.allFinite() || (info * step - cur.gradient).norm() >
                                 1e-6 * (1.0 + cur.gradient.norm())) {
      info.diagonal().array() += 1e-10 * (1.0 + info.diagonal().maxCoeff());
      step = info.ldlt().solve(cur.gradient);
    }

    double lambda = 1.0;
    CondLogLik next;
    bool improved = false;
    for (int h = 0; h <= config.max_step_halvings; ++h) {
      next = cond_loglik(beta + lambda * step, d);
      if (next.value > cur.value - 1e-14 * std::abs(cur.value)) {
        improved = true;
        break;
      }
      lambda *= 0.5;
    }
    if (!improved) break;  // no ascent direction left; report non-convergence
    beta += lambda * step;
    cur = next;
  }
  if (result.iterations == config.max_iter &&
      cur.gradient.cwiseAbs().maxCoeff() < config.tol) {
    result.converged = true;
  }
  // diverging coefficients with a still-increasing likelihood mean
  // (quasi-)separation; the fit is reported non-converged either way
  if (beta.size() > 0 && beta.cwiseAbs().maxCoeff() > config.separation_beta) {
    result.separated = true;
    result.converged = false;
  }

  result.beta = beta;
  result.loglik = cur.value;

  const Eigen::MatrixXd info = -cur.hessian;
  const Eigen::LDLT<Eigen::MatrixXd> ldlt(info);
  if (ldlt.info() == Eigen::Success && ldlt.isPositive()) {
    result.covariance = ldlt.solve(Eigen::MatrixXd::Identity(p, p));
    result.se = result.covariance.diagonal().cwiseMax(0.0).cwiseSqrt();
  } else {
    result.covariance = Eigen::MatrixXd::Constant(p, p, std::numeric_limits<double>::quiet_NaN());
    result.se = Eigen::VectorXd::Constant(p, std::numeric_limits<double>::quiet_NaN());
    result.converged = false;
  }
  return result;
}

// ---------------------------------------------------------------------------
// Variance inflation factors on the pooled design matrix with intercept.

struct VifEntry {
  std::string column;
  double vif = 1.0;
  bool infinite = false;       // exact collinearity
  bool zero_variance = false;  // excluded from max_vif
};

struct VifReport {
  std::vector<VifEntry> entries;
  double max_vif = 0.0;
};

inline VifReport vif_report(const Eigen::MatrixXd& x,
                            const std::vector<std::string>& names) {
  const int n = static_cast<int>(x.rows());
  const int p = static_cast<int>(x.cols());
  if (n < p + 1) throw Error("vif: need at least p + 1 rows");
  VifReport report;
  for (int j = 0; j < p; ++j) {
    VifEntry entry;
    entry.column = names[static_cast<size_t>(j)];
    const Eigen::VectorXd y = x.col(j);
    const double mean = y.mean();
    const double sst = (y.array() - mean).square().sum();
    if (sst <= 1e-12) {
      entry.zero_variance = true;
      entry.vif = std::numeric_limits<double>::quiet_NaN();
      report.entries.push_back(entry);
      continue;
    }
    Eigen::MatrixXd a(n, p);  // intercept + the other columns
    a.col(0).setOnes();
    int c = 1;
    for (int k = 0; k < p; ++k) {
      if (k != j) a.col(c++) = x.col(k);
    }
    const Eigen::VectorXd coef = a.colPivHouseholderQr().solve(y);
    const double ssr = (y - a * coef).squaredNorm();
    const double r2 = 1.0 - ssr / sst;
    if (r2 >= 1.0 - 1e-12) {
      entry.infinite = true;
      entry.vif = std::numeric_limits<double>::infinity();
    } else {
      entry.vif = 1.0 / (1.0 - std::max(0.0, r2));
    }
    report.max_vif = std::max(report.max_vif, entry.vif);
    report.entries.push_back(entry);
  }
  return report;
}

}  // namespace ncc
