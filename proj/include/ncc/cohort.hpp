#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include <boost/math/distributions/chi_squared.hpp>

#include "ncc/code_map.hpp"
#include "ncc/date.hpp"
#include "ncc/records.hpp"

namespace ncc {

struct StudyPeriod {
  Date start;  // FY start
  Date end;    // FY end

  bool valid() const { return start < end; }
};

enum class ExitReason { suicide, other_death, last_record, study_end };

inline std::string_view to_string(ExitReason r) {
  switch (r) {
    case ExitReason::suicide: return "suicide";
    case ExitReason::other_death: return "other_death";
    case ExitReason::last_record: return "last_record";
    case ExitReason::study_end: return "study_end";
  }
  return "?";
}

inline std::optional<ExitReason> parse_exit_reason(std::string_view s) {
  for (const auto r : {ExitReason::suicide, ExitReason::other_death,
                       ExitReason::last_record, ExitReason::study_end}) {
    if (to_string(r) == s) return r;
  }
  return {};
}

struct CohortMember {
  std::string patient_id;
  Date entry_date;
  Date exit_date;
  ExitReason exit_reason = ExitReason::study_end;
  int entry_fiscal_year = 0;
  int followup_days = 0;
};

enum class ExclusionReason {
  prior_suicide_attempt,
  no_notes_before_entry,
  missing_demographics,
  over_100,
  no_overlap_with_study,
};

inline std::string_view to_string(ExclusionReason r) {
  switch (r) {
    case ExclusionReason::prior_suicide_attempt: return "prior_suicide_attempt";
    case ExclusionReason::no_notes_before_entry: return "no_notes_before_entry";
    case ExclusionReason::missing_demographics: return "missing_demographics";
    case ExclusionReason::over_100: return "over_100";
    case ExclusionReason::no_overlap_with_study: return "no_overlap_with_study";
  }
  return "?";
}

struct ExclusionReport {
  std::string patient_id;
  ExclusionReason reason;
};

// Underlying cause of death qualifying as suicide: X60-X84 with any decimal
// extension, Y87.0 exactly, U03 with any decimal extension.
inline bool is_suicide_cause(std::string_view icd10) {
  if (icd10.size() < 3) return false;
  const char letter = icd10[0];
  const auto is2d = [&](size_t i) {
    return std::isdigit(static_cast<unsigned char>(icd10[i]));
  };
  if (!is2d(1) || !is2d(2)) return false;
  const int num = (icd10[1] - '0') * 10 + (icd10[2] - '0');
  const std::string_view rest = icd10.substr(3);
  const bool ext_ok = rest.empty() || rest[0] == '.';
  if (letter == 'X' && num >= 60 && num <= 84 && ext_ok) return true;
  if (letter == 'U' && num == 3 && ext_ok) return true;
  if (letter == 'Y' && num == 87 && rest == ".0") return true;
  return false;
}

// Entry = latest of (first record + 2y, 18th birthday, period start).
// nullopt means the patient never overlaps the study period.
inline std::optional<Date> compute_entry_date(const PatientRecord& patient,
                                              const Dataset& ds,
                                              const StudyPeriod& period) {
  const auto first = ds.first_record_date(patient.patient_id);
  if (!first) return {};
  Date entry = first->plus_years(2);
  entry = std::max(entry, patient.birth_date.plus_years(18));
  entry = std::max(entry, period.start);
  if (entry > period.end) return {};
  return entry;
}

// Earliest of (suicide, other death, end of last record, end of study
// period); ties broken by that priority order.
inline std::pair<Date, ExitReason> compute_exit(const PatientRecord& patient,
                                                const Dataset& ds,
                                                const StudyPeriod& period) {
  std::vector<std::pair<Date, ExitReason>> candidates;
  if (const DeathRecord* death = ds.death_of(patient.patient_id)) {
    candidates.emplace_back(death->death_date,
                            is_suicide_cause(death->underlying_cause)
                                ? ExitReason::suicide
                                : ExitReason::other_death);
  }
  if (const auto last = ds.last_record_date(patient.patient_id)) {
    candidates.emplace_back(*last, ExitReason::last_record);
  }
  candidates.emplace_back(period.end, ExitReason::study_end);
  return *std::min_element(candidates.begin(), candidates.end(),
                           [](const auto& a, const auto& b) {
                             if (a.first != b.first) return a.first < b.first;
                             return static_cast<int>(a.second) < static_cast<int>(b.second);
                           });
}

struct CohortOptions {
  const CodeMapSet* prior_attempt_codes = nullptr;  // detected over all history
  std::optional<int> prior_attempt_lookback_years;  // unset = all history
  int max_entry_age = 100;
};

struct CohortResult {
  std::vector<CohortMember> members;
  std::vector<ExclusionReport> exclusions;
};

// Applies the exclusion cascade. Every patient in the dataset ends up either
// a member or with at least one ExclusionReport.
inline CohortResult build_base_cohort(const Dataset& ds, const StudyPeriod& period,
                                      const CohortOptions& options = {}) {
  CohortResult out;
  for (const auto& patient : ds.patients) {
    const auto entry = compute_entry_date(patient, ds, period);
    if (!entry) {
      out.exclusions.push_back({patient.patient_id, ExclusionReason::no_overlap_with_study});
      continue;
    }

    bool excluded = false;
    const auto exclude = [&](ExclusionReason reason) {
      out.exclusions.push_back({patient.patient_id, reason});
      excluded = true;
    };

    const auto first = ds.first_record_date(patient.patient_id);
    if (patient.sex == Sex::unknown || (first && patient.birth_date > *first)) {
      exclude(ExclusionReason::missing_demographics);
    }
    if (years_between(patient.birth_date, *entry) > options.max_entry_age) {
      exclude(ExclusionReason::over_100);
    }
    if (options.prior_attempt_codes) {
      Date lookback_start = Date::from_ymd(1, 1, 1);
      if (options.prior_attempt_lookback_years) {
        lookback_start = entry->plus_years(-*options.prior_attempt_lookback_years);
      }
      const auto& idx = ds.index_of(patient.patient_id);
      bool prior = false;
      for (const size_t i : idx.diagnoses) {
        const auto& dx = ds.diagnoses[i];
        if (dx.date >= *entry) break;  // sorted by date
        if (dx.date < lookback_start) continue;
        if (options.prior_attempt_codes->any_icd9_match(dx.code)) {
          prior = true;
          break;
        }
      }
      if (prior) exclude(ExclusionReason::prior_suicide_attempt);
    }
    {
      const auto& idx = ds.index_of(patient.patient_id);
      bool has_note_before_entry = false;
      for (const size_t i : idx.notes) {
        if (ds.notes[i].date < *entry) {
          has_note_before_entry = true;
          break;
        }
      }
      if (!has_note_before_entry) exclude(ExclusionReason::no_notes_before_entry);
    }

    const auto [exit_date, exit_reason] = compute_exit(patient, ds, period);
    if (exit_date < *entry) {
      exclude(ExclusionReason::no_overlap_with_study);
    }
    if (excluded) continue;

    CohortMember m;
    m.patient_id = patient.patient_id;
    m.entry_date = *entry;
    m.exit_date = exit_date;
    m.exit_reason = exit_reason;
    m.entry_fiscal_year = fiscal_year(*entry);
    m.followup_days = exit_date - *entry;
    out.members.push_back(std::move(m));
  }
  return out;
}

struct CaseRef {
  std::string patient_id;
  Date index_date;  // suicide date
};

struct CaseDiagnostics {
  size_t suicide_deaths_outside_followup = 0;  // qualifying code, not captured
};

inline std::vector<CaseRef> identify_cases(const std::vector<CohortMember>& members,
                                           const Dataset& ds,
                                           CaseDiagnostics* diag = nullptr) {
  std::vector<CaseRef> cases;
  for (const auto& m : members) {
    if (m.exit_reason == ExitReason::suicide) {
      cases.push_back({m.patient_id, m.exit_date});
    } else if (diag) {
      const DeathRecord* death = ds.death_of(m.patient_id);
      if (death && is_suicide_cause(death->underlying_cause)) {
        ++diag->suicide_deaths_outside_followup;
      }
    }
  }
  return cases;
}

inline constexpr double kDaysPerYear = 365.25;

inline double person_years(const std::vector<CohortMember>& members) {
  double days = 0.0;
  for (const auto& m : members) days += m.followup_days;
  return days / kDaysPerYear;
}

enum class CiMethod { normal_approx, exact_poisson };

inline std::string_view to_string(CiMethod m) {
  return m == CiMethod::normal_approx ? "normal_approx" : "exact_poisson";
}

struct IncidenceEstimate {
  size_t events = 0;
  double person_years = 0.0;
  double rate_per_100k = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
  CiMethod ci_method = CiMethod::normal_approx;
};

// Crude rate per 100,000 person-years with a 95% CI. normal_approx is
// rate * (1 +/- 1.96/sqrt(events)); exact_poisson uses chi-square quantiles
// on the event count.
inline IncidenceEstimate incidence(size_t events, double person_years,
                                   CiMethod method = CiMethod::normal_approx) {
  if (!(person_years > 0.0)) throw Error("incidence: person_years must be > 0");
  IncidenceEstimate est;
  est.events = events;
  est.person_years = person_years;
  est.ci_method = method;
  const double scale = 100000.0 / person_years;
  est.rate_per_100k = static_cast<double>(events) * scale;
  if (method == CiMethod::normal_approx) {
    if (events == 0) return est;  // rate 0, ci (0, 0)
    const double half = 1.96 / std::sqrt(static_cast<double>(events));
    est.ci_low = std::max(0.0, est.rate_per_100k * (1.0 - half));
    est.ci_high = est.rate_per_100k * (1.0 + half);
  } else {
    const double k = static_cast<double>(events);
    est.ci_low = events == 0
                     ? 0.0
                     : boost::math::quantile(boost::math::chi_squared(2.0 * k), 0.025) /
                           2.0 * scale;
    est.ci_high = boost::math::quantile(boost::math::chi_squared(2.0 * (k + 1.0)), 0.975) /
                  2.0 * scale;
  }
  return est;
}

}  // namespace ncc
