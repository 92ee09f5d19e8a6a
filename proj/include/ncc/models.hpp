#pragma once

#include <string>
#include <vector>

#include "ncc/clogit.hpp"
#include "ncc/error.hpp"
#include "ncc/features.hpp"

namespace ncc {

enum class ModelMode { single, pair };

struct ModelSpec {
  std::string model_id;
  SdohGroup group = SdohGroup::combined;
  std::vector<std::string> exposures;  // 1 or 2 factors from the group roster

  ModelMode mode() const { return exposures.size() == 1 ? ModelMode::single : ModelMode::pair; }
};

// Single mode: one model per factor per group (8 + 6 + 9 = 23). Pair mode:
// every unordered distinct pair per group (28 + 15 + 36 = 79).
inline std::vector<ModelSpec> enumerate_models(ModelMode mode) {
  std::vector<ModelSpec> out;
  for (const auto group : {SdohGroup::nlp, SdohGroup::structured, SdohGroup::combined}) {
    const auto roster = group_roster_names(group);
    if (mode == ModelMode::single) {
      for (const auto& factor : roster) {
        ModelSpec spec;
        spec.group = group;
        spec.exposures = {factor};
        spec.model_id = std::string(to_string(group)) + ":" + factor;
        out.push_back(std::move(spec));
      }
    } else {
      for (size_t i = 0; i < roster.size(); ++i) {
        for (size_t j = i + 1; j < roster.size(); ++j) {
          ModelSpec spec;
          spec.group = group;
          spec.exposures = {roster[i], roster[j]};
          spec.model_id =
              std::string(to_string(group)) + ":" + roster[i] + "+" + roster[j];
          out.push_back(std::move(spec));
        }
      }
    }
  }
  return out;
}

namespace modeldetail {

inline std::string group_prefix(SdohGroup g) {
  switch (g) {
    case SdohGroup::nlp: return "nlp";
    case SdohGroup::structured: return "str";
    case SdohGroup::combined: return "cmb";
  }
  return "?";
}

}  // namespace modeldetail

// Column selection for one model: exposure bits first (exposure window,
// group source), then the group's remaining SDOH from the covariate window,
// then the shared covariates and demographic dummies.
inline MatchedDesign design_for_model(const FeatureTable& table, const ModelSpec& spec) {
  const std::string src = modeldetail::group_prefix(spec.group);
  std::vector<std::string> wanted;
  for (const auto& e : spec.exposures) {
    wanted.push_back("exp_" + src + "_" + e);
  }
  for (const auto& factor : group_roster_names(spec.group)) {
    if (std::find(spec.exposures.begin(), spec.exposures.end(), factor) !=
        spec.exposures.end()) {
      continue;
    }
    wanted.push_back("cov_" + src + "_" + factor);
  }
  for (const auto& col : table.columns) {
    if (col.source == "nlp_factor" || col.source == "mental_health" ||
        col.source == "charlson" || col.source == "demographic") {
      wanted.push_back(col.name);
    }
  }

  std::vector<size_t> indices;
  indices.reserve(wanted.size());
  for (const auto& name : wanted) indices.push_back(table.column_index(name));

  MatchedDesign d;
  d.column_names = wanted;
  d.x.resize(static_cast<Eigen::Index>(table.rows.size()),
             static_cast<Eigen::Index>(wanted.size()));
  int current_set = -1;
  for (size_t r = 0; r < table.rows.size(); ++r) {
    const auto& row = table.rows[r];
    if (row.set_id != current_set) {
      d.set_offsets.push_back(static_cast<int>(r));
      current_set = row.set_id;
    }
    if (row.is_case) d.case_rows.push_back(static_cast<int>(r));
    for (size_t k = 0; k < indices.size(); ++k) {
      d.x(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(k)) =
          static_cast<double>(row.bits[indices[k]]);
    }
  }
  d.set_offsets.push_back(static_cast<int>(table.rows.size()));
  if (d.case_rows.size() + 1 != d.set_offsets.size()) {
    throw Error("feature table: sets and cases are inconsistent");
  }
  return d;
}

// One summary per model. For a pair model the reported effect is the
// simultaneous-exposure contrast exp(beta_a + beta_b) with its delta-method
// standard error; single models report the exposure coefficient itself.
struct ModelRunResult {
  ModelSpec spec;
  ModelResult fit;
  double exposure_beta = 0.0;
  double exposure_se = 0.0;
  bool exposure_estimable = false;
  double max_vif = 0.0;
  int n_sets = 0;
  int n_rows = 0;

  double aor() const { return std::exp(exposure_beta); }
  double ci_low() const { return std::exp(exposure_beta - 1.96 * exposure_se); }
  double ci_high() const { return std::exp(exposure_beta + 1.96 * exposure_se); }
};

inline ModelRunResult run_model(const FeatureTable& table, const ModelSpec& spec,
                                const FitConfig& config = {}, bool with_vif = true) {
  MatchedDesign design = design_for_model(table, spec);
  ModelRunResult out;
  out.spec = spec;
  out.n_sets = design.n_sets();
  out.n_rows = design.n_rows();
  out.fit = fit_clogit(design, config);

  std::vector<int> exposure_cols;
  bool all_present = true;
  for (size_t k = 0; k < spec.exposures.size(); ++k) {
    const int idx = out.fit.column_index(design.column_names[k]);
    if (idx < 0) {
      all_present = false;
      break;
    }
    exposure_cols.push_back(idx);
  }
  if (all_present && out.fit.se.allFinite()) {
    out.exposure_estimable = true;
    double beta = 0.0, var = 0.0;
    for (const int a : exposure_cols) {
      beta += out.fit.beta[a];
      for (const int b : exposure_cols) var += out.fit.covariance(a, b);
    }
    out.exposure_beta = beta;
    out.exposure_se = std::sqrt(std::max(0.0, var));
  }

  if (with_vif && design.n_cols() > 0 &&
      design.n_rows() > design.n_cols()) {
    // pooled (unconditioned) design with intercept; zero-variance columns are
    // flagged inside and excluded from the max
    out.max_vif = vif_report(design.x, design.column_names).max_vif;
  }
  return out;
}

}  // namespace ncc
