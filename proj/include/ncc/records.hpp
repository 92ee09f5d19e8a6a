#pragma once

#include <algorithm>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "ncc/date.hpp"
#include "ncc/error.hpp"

namespace ncc {

enum class Sex { male, female, unknown };
enum class Race { white, black, asian, american_indian, pacific_islander, unknown };
enum class MaritalStatus { married, single, divorced, widowed, unknown };
enum class NoteType {
  emergency_department,
  nursing_assessment,
  primary_care,
  hospital_admission,
  inpatient_progress,
  pain_management,
  discharge_summary,
  other,
};

inline constexpr int kStudyNoteTypeCount = 7;  // all but `other`

namespace detail {

template <typename Enum, size_t N>
struct EnumNames {
  std::array<std::pair<Enum, std::string_view>, N> table;

  std::string_view name(Enum v) const {
    for (const auto& [e, s] : table)
      if (e == v) return s;
    return "?";
  }

  std::optional<Enum> parse(std::string_view s) const {
    for (const auto& [e, n] : table)
      if (n == s) return e;
    return {};
  }
};

inline constexpr EnumNames<Sex, 3> kSexNames{{{
    {Sex::male, "male"},
    {Sex::female, "female"},
    {Sex::unknown, "unknown"},
}}};

inline constexpr EnumNames<Race, 6> kRaceNames{{{
    {Race::white, "white"},
    {Race::black, "black"},
    {Race::asian, "asian"},
    {Race::american_indian, "american_indian"},
    {Race::pacific_islander, "pacific_islander"},
    {Race::unknown, "unknown"},
}}};

inline constexpr EnumNames<MaritalStatus, 5> kMaritalNames{{{
    {MaritalStatus::married, "married"},
    {MaritalStatus::single, "single"},
    {MaritalStatus::divorced, "divorced"},
    {MaritalStatus::widowed, "widowed"},
    {MaritalStatus::unknown, "unknown"},
}}};

inline constexpr EnumNames<NoteType, 8> kNoteTypeNames{{{
    {NoteType::emergency_department, "emergency_department"},
    {NoteType::nursing_assessment, "nursing_assessment"},
    {NoteType::primary_care, "primary_care"},
    {NoteType::hospital_admission, "hospital_admission"},
    {NoteType::inpatient_progress, "inpatient_progress"},
    {NoteType::pain_management, "pain_management"},
    {NoteType::discharge_summary, "discharge_summary"},
    {NoteType::other, "other"},
}}};

}  // namespace detail

inline std::string_view to_string(Sex v) { return detail::kSexNames.name(v); }
inline std::string_view to_string(Race v) { return detail::kRaceNames.name(v); }
inline std::string_view to_string(MaritalStatus v) { return detail::kMaritalNames.name(v); }
inline std::string_view to_string(NoteType v) { return detail::kNoteTypeNames.name(v); }

inline std::optional<Sex> parse_sex(std::string_view s) { return detail::kSexNames.parse(s); }
inline std::optional<Race> parse_race(std::string_view s) { return detail::kRaceNames.parse(s); }
inline std::optional<MaritalStatus> parse_marital(std::string_view s) {
  return detail::kMaritalNames.parse(s);
}
inline std::optional<NoteType> parse_note_type(std::string_view s) {
  return detail::kNoteTypeNames.parse(s);
}

struct PatientRecord {
  std::string patient_id;
  Date birth_date;
  Sex sex = Sex::unknown;
  Race race = Race::unknown;
  MaritalStatus marital_status = MaritalStatus::unknown;

  bool operator==(const PatientRecord&) const = default;
};

struct Encounter {
  std::string patient_id;
  Date date;
  std::optional<int> stop_code;            // positive, rendered as up to 3 digits
  std::vector<std::string> note_refs;      // not serialized in encounters.csv

  bool operator==(const Encounter&) const = default;
};

struct DiagnosisRecord {
  std::string patient_id;
  Date date;
  std::string code;  // normalized ICD-9

  bool operator==(const DiagnosisRecord&) const = default;
};

struct ClinicalNote {
  std::string note_id;  // assigned by input order at ingest/generation
  std::string patient_id;
  Date date;
  NoteType note_type = NoteType::other;
  std::string text;

  bool operator==(const ClinicalNote&) const = default;
};

struct DeathRecord {
  std::string patient_id;
  Date death_date;
  std::string underlying_cause;  // ICD-10

  bool operator==(const DeathRecord&) const = default;
};

// Immutable after finalize(); safe for any number of concurrent readers.
struct Dataset {
  std::vector<PatientRecord> patients;
  std::vector<Encounter> encounters;
  std::vector<DiagnosisRecord> diagnoses;
  std::vector<ClinicalNote> notes;
  std::vector<DeathRecord> deaths;

  struct PatientIndex {
    size_t patient_pos = 0;
    std::vector<size_t> encounters;  // indices, sorted by date (input order ties)
    std::vector<size_t> diagnoses;
    std::vector<size_t> notes;
    std::optional<size_t> death;
  };

  std::unordered_map<std::string, PatientIndex> by_patient;
  std::unordered_map<std::string, size_t> note_by_id;

  bool has_patient(const std::string& id) const { return by_patient.count(id) != 0; }

  const PatientIndex& index_of(const std::string& id) const {
    const auto it = by_patient.find(id);
    if (it == by_patient.end()) throw Error("unknown patient_id: " + id);
    return it->second;
  }

  const PatientRecord& patient(const std::string& id) const {
    return patients[index_of(id).patient_pos];
  }

  const DeathRecord* death_of(const std::string& id) const {
    const auto& idx = index_of(id);
    return idx.death ? &deaths[*idx.death] : nullptr;
  }

  const ClinicalNote* note(const std::string& note_id) const {
    const auto it = note_by_id.find(note_id);
    return it == note_by_id.end() ? nullptr : &notes[it->second];
  }

  // Earliest date across encounters, diagnoses and notes; nullopt when the
  // patient has no records at all.
  std::optional<Date> first_record_date(const std::string& id) const {
    return edge_record_date(id, /*earliest=*/true);
  }

  std::optional<Date> last_record_date(const std::string& id) const {
    return edge_record_date(id, /*earliest=*/false);
  }

  // Builds per-patient indexes; call once after all rows are loaded.
  void finalize() {
    by_patient.clear();
    note_by_id.clear();
    by_patient.reserve(patients.size());
    for (size_t i = 0; i < patients.size(); ++i) {
      auto [it, inserted] = by_patient.try_emplace(patients[i].patient_id);
      if (!inserted) {
        throw IngestError("duplicate patient_id: " + patients[i].patient_id);
      }
      it->second.patient_pos = i;
    }
    auto require = [&](const std::string& id, const char* table) -> PatientIndex& {
      const auto it = by_patient.find(id);
      if (it == by_patient.end()) {
        throw IngestError(std::string(table) + ": dangling patient_id '" + id + "'");
      }
      return it->second;
    };
    for (size_t i = 0; i < encounters.size(); ++i) {
      require(encounters[i].patient_id, "encounters").encounters.push_back(i);
    }
    for (size_t i = 0; i < diagnoses.size(); ++i) {
      require(diagnoses[i].patient_id, "diagnoses").diagnoses.push_back(i);
    }
    for (size_t i = 0; i < notes.size(); ++i) {
      require(notes[i].patient_id, "notes").notes.push_back(i);
      if (!note_by_id.try_emplace(notes[i].note_id, i).second) {
        throw IngestError("duplicate note_id: " + notes[i].note_id);
      }
    }
    for (size_t i = 0; i < deaths.size(); ++i) {
      auto& idx = require(deaths[i].patient_id, "deaths");
      if (idx.death) {
        throw IngestError("multiple death records for patient " + deaths[i].patient_id);
      }
      idx.death = i;
    }
    for (auto& [id, idx] : by_patient) {
      auto by_date = [&](const auto& recs) {
        return [&recs](size_t a, size_t b) {
          if (recs[a].date != recs[b].date) return recs[a].date < recs[b].date;
          return a < b;  // preserve input order within a day
        };
      };
      std::sort(idx.encounters.begin(), idx.encounters.end(), by_date(encounters));
      std::sort(idx.diagnoses.begin(), idx.diagnoses.end(), by_date(diagnoses));
      std::sort(idx.notes.begin(), idx.notes.end(), by_date(notes));
    }
  }

 private:
  std::optional<Date> edge_record_date(const std::string& id, bool earliest) const {
    const auto& idx = index_of(id);
    std::optional<Date> best;
    auto consider = [&](Date d) {
      if (!best || (earliest ? d < *best : d > *best)) best = d;
    };
    for (const size_t i : idx.encounters) consider(encounters[i].date);
    for (const size_t i : idx.diagnoses) consider(diagnoses[i].date);
    for (const size_t i : idx.notes) consider(notes[i].date);
    return best;
  }
};

}  // namespace ncc
