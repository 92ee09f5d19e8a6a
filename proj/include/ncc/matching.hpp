#pragma once

#include <algorithm>
#include <map>
#include <string>
#include <unordered_map>
#include <vector>

#include "ncc/cohort.hpp"
#include "ncc/date.hpp"
#include "ncc/records.hpp"
#include "ncc/rng.hpp"

namespace ncc {

struct MatchCriteria {
  int birth_year_tolerance = 3;
  int ratio = 4;
  bool require_same_entry_fy = true;
  bool require_same_sex = true;
};

enum class UnderfillPolicy { keep, drop };

inline std::string_view to_string(UnderfillPolicy p) {
  return p == UnderfillPolicy::keep ? "keep" : "drop";
}

struct MatchedSet {
  int set_id = 0;
  std::string case_id;
  Date index_date;
  std::vector<std::string> control_ids;  // distinct within the set
};

// Immutable member view used during matching; built once from the cohort.
class MemberPool {
 public:
  struct Entry {
    const CohortMember* member;
    int birth_year;
    Sex sex;
    bool dead;        // exit by suicide or other death
    Date death_date;  // meaningful only when dead
  };

  MemberPool(const std::vector<CohortMember>& members, const Dataset& ds) {
    entries_.reserve(members.size());
    for (const auto& m : members) {
      const auto& p = ds.patient(m.patient_id);
      Entry e;
      e.member = &m;
      e.birth_year = p.birth_date.year();
      e.sex = p.sex;
      e.dead = m.exit_reason == ExitReason::suicide ||
               m.exit_reason == ExitReason::other_death;
      e.death_date = m.exit_date;
      entries_.push_back(e);
    }
    std::sort(entries_.begin(), entries_.end(), [](const Entry& a, const Entry& b) {
      return a.member->patient_id < b.member->patient_id;
    });
    for (size_t i = 0; i < entries_.size(); ++i) {
      by_id_[entries_[i].member->patient_id] = i;
      bucket_key key{entries_[i].member->entry_fiscal_year, entries_[i].sex,
                     entries_[i].birth_year};
      buckets_[key].push_back(i);
    }
  }

  const std::vector<Entry>& entries() const { return entries_; }

  const Entry& by_id(const std::string& id) const {
    return entries_.at(by_id_.at(id));
  }

  // Candidate indices for (fy, sex, birth year band); already id-sorted.
  template <typename Fn>
  void for_bucket(int fy, Sex sex, int birth_year_lo, int birth_year_hi, Fn&& fn) const {
    for (int by = birth_year_lo; by <= birth_year_hi; ++by) {
      const auto it = buckets_.find({fy, sex, by});
      if (it == buckets_.end()) continue;
      for (const size_t i : it->second) fn(entries_[i]);
    }
  }

 private:
  using bucket_key = std::tuple<int, Sex, int>;
  struct KeyHash {
    size_t operator()(const bucket_key& k) const {
      return std::hash<int>()(std::get<0>(k)) * 1000003u ^
             static_cast<size_t>(std::get<1>(k)) * 97u ^
             std::hash<int>()(std::get<2>(k));
    }
  };
  std::vector<Entry> entries_;
  std::unordered_map<std::string, size_t> by_id_;
  std::unordered_map<bucket_key, std::vector<size_t>, KeyHash> buckets_;
};

// A member is eligible iff: distinct from the case, birth year within
// tolerance, same entry FY and sex (when required), follow-up at least the
// case's, not dead from any cause strictly before the index date, and under
// observation at the index date. A member who is itself a later case stays
// eligible.
inline bool control_eligible(const MemberPool::Entry& candidate,
                             const MemberPool::Entry& case_entry, Date index_date,
                             const MatchCriteria& criteria) {
  const CohortMember& m = *candidate.member;
  const CohortMember& c = *case_entry.member;
  if (m.patient_id == c.patient_id) return false;
  if (std::abs(candidate.birth_year - case_entry.birth_year) >
      criteria.birth_year_tolerance) {
    return false;
  }
  if (criteria.require_same_entry_fy && m.entry_fiscal_year != c.entry_fiscal_year) {
    return false;
  }
  if (criteria.require_same_sex && candidate.sex != case_entry.sex) return false;
  if (m.followup_days < c.followup_days) return false;
  if (candidate.dead && candidate.death_date < index_date) return false;
  if (!(m.entry_date <= index_date && index_date <= m.exit_date)) return false;
  return true;
}

// Sorted by patient id, so the sampling stream is iteration-order free.
inline std::vector<std::string> eligible_controls(const std::string& case_id,
                                                  Date index_date,
                                                  const MemberPool& pool,
                                                  const MatchCriteria& criteria) {
  const auto& case_entry = pool.by_id(case_id);
  std::vector<std::string> out;
  if (criteria.require_same_entry_fy && criteria.require_same_sex) {
    pool.for_bucket(case_entry.member->entry_fiscal_year, case_entry.sex,
                    case_entry.birth_year - criteria.birth_year_tolerance,
                    case_entry.birth_year + criteria.birth_year_tolerance,
                    [&](const MemberPool::Entry& e) {
                      if (control_eligible(e, case_entry, index_date, criteria)) {
                        out.push_back(e.member->patient_id);
                      }
                    });
    std::sort(out.begin(), out.end());
  } else {
    for (const auto& e : pool.entries()) {
      if (control_eligible(e, case_entry, index_date, criteria)) {
        out.push_back(e.member->patient_id);
      }
    }
  }
  return out;
}

struct SetDiagnostic {
  std::string case_id;
  size_t eligible = 0;
  bool dropped = false;
};

// Uniform sample of `ratio` distinct controls via partial Fisher-Yates on the
// id-sorted eligible list; the rng must be the case's own substream.
inline std::vector<std::string> sample_controls(std::vector<std::string> eligible,
                                                int ratio, Rng& rng) {
  const size_t want = std::min<size_t>(static_cast<size_t>(ratio), eligible.size());
  for (size_t k = 0; k < want; ++k) {
    const size_t j = k + static_cast<size_t>(rng.below(eligible.size() - k));
    std::swap(eligible[k], eligible[j]);
  }
  eligible.resize(want);
  return eligible;
}

struct MatchSummary {
  size_t cases = 0;
  size_t matched_sets = 0;
  size_t unmatched_cases = 0;    // empty eligible set
  size_t underfilled_sets = 0;   // fewer eligible than the ratio
  size_t dropped_cases = 0;      // underfilled under the drop policy
  size_t total_control_slots = 0;
  size_t unique_controls = 0;
  size_t controls_reused = 0;  // individuals serving in more than one set
  std::vector<SetDiagnostic> diagnostics;
};

struct MatchResult {
  std::vector<MatchedSet> sets;
  MatchSummary summary;
};

// One set per matchable case. Sampling with replacement applies across sets:
// the same member may serve many cases, never twice within one set. Sets are
// emitted in (index_date, case_id) order with 1-based set ids.
inline MatchResult build_matched_cohort(const std::vector<CaseRef>& cases,
                                        const std::vector<CohortMember>& members,
                                        const Dataset& ds, const MatchCriteria& criteria,
                                        uint64_t seed,
                                        UnderfillPolicy policy = UnderfillPolicy::keep) {
  MemberPool pool(members, ds);

  std::vector<CaseRef> ordered = cases;
  std::sort(ordered.begin(), ordered.end(), [](const CaseRef& a, const CaseRef& b) {
    if (a.index_date != b.index_date) return a.index_date < b.index_date;
    return a.patient_id < b.patient_id;
  });

  MatchResult out;
  out.summary.cases = ordered.size();
  for (const auto& c : ordered) {
    auto eligible = eligible_controls(c.patient_id, c.index_date, pool, criteria);
    if (eligible.empty()) {
      ++out.summary.unmatched_cases;
      out.summary.diagnostics.push_back({c.patient_id, 0, true});
      continue;
    }
    const bool underfilled = eligible.size() < static_cast<size_t>(criteria.ratio);
    if (underfilled) {
      ++out.summary.underfilled_sets;
      out.summary.diagnostics.push_back(
          {c.patient_id, eligible.size(), policy == UnderfillPolicy::drop});
      if (policy == UnderfillPolicy::drop) {
        ++out.summary.dropped_cases;
        continue;
      }
    }
    Rng rng = substream(seed, c.patient_id);
    MatchedSet set;
    set.set_id = static_cast<int>(out.sets.size()) + 1;
    set.case_id = c.patient_id;
    set.index_date = c.index_date;
    set.control_ids = sample_controls(std::move(eligible), criteria.ratio, rng);
    out.summary.total_control_slots += set.control_ids.size();
    out.sets.push_back(std::move(set));
  }
  out.summary.matched_sets = out.sets.size();

  std::map<std::string, size_t> uses;
  for (const auto& s : out.sets) {
    for (const auto& id : s.control_ids) ++uses[id];
  }
  out.summary.unique_controls = uses.size();
  for (const auto& [id, n] : uses) {
    if (n > 1) ++out.summary.controls_reused;
  }
  return out;
}

}  // namespace ncc
