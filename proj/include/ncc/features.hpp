#pragma once

#include <algorithm>
#include <array>
#include <map>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "ncc/code_map.hpp"
#include "ncc/cohort.hpp"
#include "ncc/date.hpp"
#include "ncc/error.hpp"
#include "ncc/matching.hpp"
#include "ncc/parallel.hpp"
#include "ncc/records.hpp"
#include "ncc/tagger.hpp"

namespace ncc {

// ---------------------------------------------------------------------------
// Assessment windows

struct AssessmentWindows {
  DateWindow covariate;  // [entry - 2y, entry)
  DateWindow exposure;   // [max(entry, index - 2y), index)
};

inline AssessmentWindows windows_for(Date entry, Date index_date,
                                     int covariate_years = 2, int exposure_years = 2) {
  if (index_date < entry) {
    throw MalformedSetError("index date " + index_date.to_string() +
                            " precedes entry " + entry.to_string());
  }
  AssessmentWindows w;
  w.covariate = {entry.plus_years(-covariate_years), entry};
  w.exposure = {std::max(entry, index_date.plus_years(-exposure_years)), index_date};
  return w;
}

// ---------------------------------------------------------------------------
// SDOH groups

enum class SdohGroup { nlp, structured, combined };

inline std::string_view to_string(SdohGroup g) {
  switch (g) {
    case SdohGroup::nlp: return "nlp";
    case SdohGroup::structured: return "structured";
    case SdohGroup::combined: return "combined";
  }
  return "?";
}

inline std::optional<SdohGroup> parse_sdoh_group(std::string_view s) {
  if (s == "nlp") return SdohGroup::nlp;
  if (s == "structured") return SdohGroup::structured;
  if (s == "combined") return SdohGroup::combined;
  return {};
}

// Roster entry of the combined group: OR of up to two sources.
struct CombinedFactor {
  std::string name;
  std::optional<FactorLabel> nlp_source;
  std::optional<std::string> structured_source;
};

inline const std::vector<FactorLabel>& nlp_sdoh_roster() {
  static const std::vector<FactorLabel> roster = {
      FactorLabel::social_isolation,  FactorLabel::financial_insecurity,
      FactorLabel::housing_instability, FactorLabel::legal_problems,
      FactorLabel::violence,          FactorLabel::barriers_to_care,
      FactorLabel::transition_of_care, FactorLabel::food_insecurity,
  };
  return roster;
}

inline const std::vector<std::string>& structured_sdoh_roster() {
  static const std::vector<std::string> roster = {
      "social_or_familial", "employment_or_financial", "housing_instability",
      "legal_problems",     "violence",                "nonspecific_psychosocial",
  };
  return roster;
}

// Five shared factors, three NLP-only, one structured-only: nine in total.
inline const std::vector<CombinedFactor>& combined_sdoh_roster() {
  static const std::vector<CombinedFactor> roster = {
      {"social_problems", FactorLabel::social_isolation, "social_or_familial"},
      {"financial_problems", FactorLabel::financial_insecurity, "employment_or_financial"},
      {"housing_instability", FactorLabel::housing_instability, "housing_instability"},
      {"legal_problems", FactorLabel::legal_problems, "legal_problems"},
      {"violence", FactorLabel::violence, "violence"},
      {"barriers_to_care", FactorLabel::barriers_to_care, std::nullopt},
      {"transition_of_care", FactorLabel::transition_of_care, std::nullopt},
      {"food_insecurity", FactorLabel::food_insecurity, std::nullopt},
      {"nonspecific_psychosocial", std::nullopt, "nonspecific_psychosocial"},
  };
  return roster;
}

inline std::vector<std::string> group_roster_names(SdohGroup g) {
  std::vector<std::string> out;
  switch (g) {
    case SdohGroup::nlp:
      for (const auto l : nlp_sdoh_roster()) out.emplace_back(to_string(l));
      break;
    case SdohGroup::structured:
      out = structured_sdoh_roster();
      break;
    case SdohGroup::combined:
      for (const auto& f : combined_sdoh_roster()) out.push_back(f.name);
      break;
  }
  return out;
}

// Shared factors OR their two sources; single-source factors pass through.
inline std::array<uint8_t, 9> combine_sdoh(const std::array<uint8_t, 6>& structured,
                                           const std::array<uint8_t, 8>& nlp) {
  const auto& roster = combined_sdoh_roster();
  std::array<uint8_t, 9> out{};
  for (size_t i = 0; i < roster.size(); ++i) {
    uint8_t bit = 0;
    if (roster[i].nlp_source) {
      const auto& nr = nlp_sdoh_roster();
      const auto it = std::find(nr.begin(), nr.end(), *roster[i].nlp_source);
      bit |= nlp[static_cast<size_t>(it - nr.begin())];
    }
    if (roster[i].structured_source) {
      const auto& sr = structured_sdoh_roster();
      const auto it = std::find(sr.begin(), sr.end(), *roster[i].structured_source);
      bit |= structured[static_cast<size_t>(it - sr.begin())];
    }
    out[i] = bit;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Mention lookup by patient and window

class MentionStore {
 public:
  MentionStore(const Dataset& ds, std::vector<FactorMention> mentions)
      : ds_(&ds), mentions_(std::move(mentions)) {
    for (size_t i = 0; i < mentions_.size(); ++i) {
      const ClinicalNote* note = ds.note(mentions_[i].note_id);
      if (!note) throw Error("mention references unknown note " + mentions_[i].note_id);
      by_patient_[note->patient_id].push_back(i);
    }
  }

  const std::vector<FactorMention>& mentions() const { return mentions_; }

  // Dichotomized bits for all 13 factors; only the seven study note types
  // contribute, and only notes dated inside the window.
  std::array<uint8_t, kFactorLabelCount> bits_in_window(const std::string& patient_id,
                                                        const DateWindow& window) const {
    std::vector<FactorMention> in_window;
    const auto it = by_patient_.find(patient_id);
    if (it != by_patient_.end()) {
      for (const size_t i : it->second) {
        const ClinicalNote* note = ds_->note(mentions_[i].note_id);
        if (note->note_type == NoteType::other) continue;
        if (!window.contains(note->date)) continue;
        in_window.push_back(mentions_[i]);
      }
    }
    const MergedFactors merged = merge_window(in_window);
    std::array<uint8_t, kFactorLabelCount> bits{};
    for (size_t l = 0; l < kFactorLabelCount; ++l) {
      bits[l] = static_cast<uint8_t>(dichotomize(merged[l]));
    }
    return bits;
  }

 private:
  const Dataset* ds_;
  std::vector<FactorMention> mentions_;
  std::unordered_map<std::string, std::vector<size_t>> by_patient_;
};

// ---------------------------------------------------------------------------
// Feature table

inline const std::vector<std::string>& age_bands() {
  static const std::vector<std::string> bands = {"18-29", "30-39", "40-49", "50-59",
                                                 "60-69", "70-79", "80-100"};
  return bands;
}

inline size_t age_band_index(int age) {
  if (age < 30) return 0;
  if (age < 40) return 1;
  if (age < 50) return 2;
  if (age < 60) return 3;
  if (age < 70) return 4;
  if (age < 80) return 5;
  return 6;  // 80-100 is the open-ended top band
}

struct FeatureColumn {
  std::string name;
  std::string source;  // nlp | structured | combined | mental_health | charlson | nlp_factor | demographic
  std::string window;  // exposure | covariate | index
};

struct FeatureRow {
  int set_id = 0;
  std::string patient_id;
  uint8_t is_case = 0;
  std::vector<uint8_t> bits;
};

// Master per-subject matrix: every factor bit for both windows and all three
// groups, plus covariates and demographic dummies. Model designs are column
// selections of this table.
struct FeatureTable {
  std::vector<FeatureColumn> columns;
  std::vector<FeatureRow> rows;

  size_t column_index(const std::string& name) const {
    for (size_t i = 0; i < columns.size(); ++i) {
      if (columns[i].name == name) return i;
    }
    throw Error("unknown feature column: " + name);
  }
};

struct AssemblyInputs {
  const Dataset* dataset;
  const std::vector<CohortMember>* members;
  const std::vector<MatchedSet>* sets;
  const MentionStore* mentions;
  const CodeMapSet* sdoh_codes;      // 6 structured SDOH
  const CodeMapSet* mental_health;   // 7 disorders
  const CodeMapSet* charlson;        // 17 conditions
  int covariate_years = 2;
  int exposure_years = 2;
  int jobs = 1;
};

namespace featdetail {

inline const std::vector<FactorLabel>& nlp_nonsdoh_covariates() {
  static const std::vector<FactorLabel> f = {
      FactorLabel::psychiatric_symptoms,
      FactorLabel::substance_abuse,
      FactorLabel::pain,
      FactorLabel::patient_disability,
  };
  return f;
}

inline std::vector<FeatureColumn> master_columns(const AssemblyInputs& in) {
  std::vector<FeatureColumn> cols;
  auto add = [&](std::string name, std::string source, std::string window) {
    cols.push_back({std::move(name), std::move(source), std::move(window)});
  };
  for (const char* window : {"exposure", "covariate"}) {
    const char* prefix = window[0] == 'e' ? "exp" : "cov";
    for (const auto l : nlp_sdoh_roster()) {
      add(std::string(prefix) + "_nlp_" + std::string(to_string(l)), "nlp", window);
    }
    for (const auto& f : structured_sdoh_roster()) {
      add(std::string(prefix) + "_str_" + f, "structured", window);
    }
    for (const auto& f : combined_sdoh_roster()) {
      add(std::string(prefix) + "_cmb_" + f.name, "combined", window);
    }
  }
  for (const auto l : nlp_nonsdoh_covariates()) {
    add("nlpx_" + std::string(to_string(l)), "nlp_factor", "covariate");
  }
  for (const auto& name : in.mental_health->factor_names()) {
    add("mh_" + name, "mental_health", "covariate");
  }
  for (const auto& name : in.charlson->factor_names()) {
    add("cci_" + name, "charlson", "covariate");
  }
  for (const auto r : {Race::black, Race::asian, Race::american_indian,
                       Race::pacific_islander, Race::unknown}) {
    add("race_" + std::string(to_string(r)), "demographic", "index");
  }
  for (size_t b = 1; b < age_bands().size(); ++b) {  // reference band 18-29
    add("age_" + age_bands()[b], "demographic", "index");
  }
  for (const auto m : {MaritalStatus::single, MaritalStatus::divorced,
                       MaritalStatus::widowed, MaritalStatus::unknown}) {
    add("marital_" + std::string(to_string(m)), "demographic", "index");
  }
  return cols;
}

inline std::array<uint8_t, 8> nlp_sdoh_bits(
    const std::array<uint8_t, kFactorLabelCount>& all) {
  std::array<uint8_t, 8> out{};
  const auto& roster = nlp_sdoh_roster();
  for (size_t i = 0; i < roster.size(); ++i) {
    out[i] = all[static_cast<size_t>(roster[i])];
  }
  return out;
}

inline std::array<uint8_t, 6> structured_bits(const StructuredFlags& flags,
                                              const CodeMapSet& maps) {
  std::array<uint8_t, 6> out{};
  const auto& roster = structured_sdoh_roster();
  for (size_t i = 0; i < roster.size(); ++i) {
    bool found = false;
    for (size_t f = 0; f < maps.factor_count(); ++f) {
      if (maps.factor_name(f) == roster[i]) {
        out[i] = flags.flags[f];
        found = true;
        break;
      }
    }
    if (!found) throw Error("structured map is missing factor '" + roster[i] + "'");
  }
  return out;
}

}  // namespace featdetail

// Builds the master feature table; one row per subject of every matched set,
// case first then controls in slot order.
inline FeatureTable build_feature_table(const AssemblyInputs& in) {
  FeatureTable table;
  table.columns = featdetail::master_columns(in);

  std::unordered_map<std::string, const CohortMember*> member_of;
  for (const auto& m : *in.members) member_of[m.patient_id] = &m;

  struct Slot {
    const MatchedSet* set;
    const std::string* patient_id;
    uint8_t is_case;
  };
  std::vector<Slot> slots;
  for (const auto& set : *in.sets) {
    slots.push_back({&set, &set.case_id, 1});
    for (const auto& control : set.control_ids) {
      slots.push_back({&set, &control, 0});
    }
  }

  table.rows.resize(slots.size());
  parallel_for(slots.size(), in.jobs, [&](size_t i) {
    const Slot& slot = slots[i];
    const auto member_it = member_of.find(*slot.patient_id);
    if (member_it == member_of.end()) {
      throw MalformedSetError("set " + std::to_string(slot.set->set_id) +
                              " references non-member " + *slot.patient_id);
    }
    const CohortMember& member = *member_it->second;
    const AssessmentWindows w = windows_for(member.entry_date, slot.set->index_date,
                                            in.covariate_years, in.exposure_years);

    const auto nlp_exp_all = in.mentions->bits_in_window(*slot.patient_id, w.exposure);
    const auto nlp_cov_all = in.mentions->bits_in_window(*slot.patient_id, w.covariate);
    const auto str_exp = featdetail::structured_bits(
        flags_in_window(*slot.patient_id, *in.dataset, w.exposure, *in.sdoh_codes),
        *in.sdoh_codes);
    const auto str_cov = featdetail::structured_bits(
        flags_in_window(*slot.patient_id, *in.dataset, w.covariate, *in.sdoh_codes),
        *in.sdoh_codes);
    const auto nlp_exp = featdetail::nlp_sdoh_bits(nlp_exp_all);
    const auto nlp_cov = featdetail::nlp_sdoh_bits(nlp_cov_all);
    const auto cmb_exp = combine_sdoh(str_exp, nlp_exp);
    const auto cmb_cov = combine_sdoh(str_cov, nlp_cov);
    const auto mh =
        flags_in_window(*slot.patient_id, *in.dataset, w.covariate, *in.mental_health);
    const auto cci =
        flags_in_window(*slot.patient_id, *in.dataset, w.covariate, *in.charlson);

    const PatientRecord& patient = in.dataset->patient(*slot.patient_id);

    FeatureRow row;
    row.set_id = slot.set->set_id;
    row.patient_id = *slot.patient_id;
    row.is_case = slot.is_case;
    row.bits.reserve(table.columns.size());
    auto push = [&](uint8_t b) { row.bits.push_back(b); };

    for (const auto* exp_bits : {&nlp_exp, &nlp_cov}) {
      const bool exposure_half = exp_bits == &nlp_exp;
      for (const uint8_t b : *exp_bits) push(b);
      for (const uint8_t b : exposure_half ? str_exp : str_cov) push(b);
      for (const uint8_t b : exposure_half ? cmb_exp : cmb_cov) push(b);
    }
    for (const auto l : featdetail::nlp_nonsdoh_covariates()) {
      push(nlp_cov_all[static_cast<size_t>(l)]);
    }
    for (const uint8_t b : mh.flags) push(b);
    for (const uint8_t b : cci.flags) push(b);

    for (const auto r : {Race::black, Race::asian, Race::american_indian,
                         Race::pacific_islander, Race::unknown}) {
      push(patient.race == r ? 1 : 0);
    }
    const size_t band = age_band_index(years_between(patient.birth_date, slot.set->index_date));
    for (size_t b = 1; b < age_bands().size(); ++b) push(band == b ? 1 : 0);
    for (const auto m : {MaritalStatus::single, MaritalStatus::divorced,
                         MaritalStatus::widowed, MaritalStatus::unknown}) {
      push(patient.marital_status == m ? 1 : 0);
    }

    table.rows[i] = std::move(row);
  });
  return table;
}

// ---------------------------------------------------------------------------
// Prevalence (report table shape: factor x window x source x case/control)

struct PrevalenceRow {
  std::string factor;
  std::string window;  // covariate | exposure
  std::string source;  // nlp | structured | combined
  size_t case_count = 0;
  size_t control_count = 0;
  double case_pct = 0.0;
  double control_pct = 0.0;
};

inline std::vector<PrevalenceRow> prevalence_table(const FeatureTable& table) {
  size_t n_cases = 0, n_controls = 0;
  for (const auto& r : table.rows) (r.is_case ? n_cases : n_controls)++;

  std::vector<PrevalenceRow> out;
  for (const auto& cf : combined_sdoh_roster()) {
    for (const char* window : {"covariate", "exposure"}) {
      const std::string prefix = window[0] == 'c' ? "cov" : "exp";
      struct Source {
        const char* tag;
        std::optional<std::string> column;
      };
      std::vector<Source> sources;
      if (cf.nlp_source) {
        sources.push_back(
            {"nlp", prefix + "_nlp_" + std::string(to_string(*cf.nlp_source))});
      }
      if (cf.structured_source) {
        sources.push_back({"structured", prefix + "_str_" + *cf.structured_source});
      }
      sources.push_back({"combined", prefix + "_cmb_" + cf.name});
      for (const auto& src : sources) {
        const size_t col = table.column_index(*src.column);
        PrevalenceRow row;
        row.factor = cf.name;
        row.window = window;
        row.source = src.tag;
        for (const auto& r : table.rows) {
          if (r.bits[col]) (r.is_case ? row.case_count : row.control_count)++;
        }
        row.case_pct = n_cases == 0 ? 0.0 : 100.0 * static_cast<double>(row.case_count) /
                                                static_cast<double>(n_cases);
        row.control_pct = n_controls == 0
                              ? 0.0
                              : 100.0 * static_cast<double>(row.control_count) /
                                    static_cast<double>(n_controls);
        out.push_back(std::move(row));
      }
    }
  }
  return out;
}

}  // namespace ncc
