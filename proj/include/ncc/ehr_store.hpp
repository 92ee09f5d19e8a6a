#pragma once

#include <charconv>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>

#include <nlohmann/json.hpp>

#include "ncc/csv.hpp"
#include "ncc/error.hpp"
#include "ncc/icd9.hpp"
#include "ncc/records.hpp"

namespace ncc {

struct DatasetPaths {
  std::string patients;
  std::string encounters;
  std::string diagnoses;
  std::string notes;
  std::string deaths;

  static DatasetPaths in_dir(const std::string& dir) {
    namespace fs = std::filesystem;
    const fs::path d(dir);
    return {(d / "patients.csv").string(), (d / "encounters.csv").string(),
            (d / "diagnoses.csv").string(), (d / "notes.jsonl").string(),
            (d / "deaths.csv").string()};
  }
};

struct IngestReport {
  std::map<std::string, size_t> row_counts;  // table -> rows
};

namespace detail {

inline Date parse_date_field(const std::string& value, const std::string& context,
                             const std::string& column) {
  const auto d = Date::parse(value);
  if (!d) {
    throw IngestError(context + ": column " + column + ": invalid date '" + value + "'");
  }
  return *d;
}

template <typename Enum, typename Parser>
Enum parse_enum_field(Parser parser, const std::string& value,
                      const std::string& context, const std::string& column) {
  const auto v = parser(value);
  if (!v) {
    throw IngestError(context + ": column " + column + ": unknown value '" + value + "'");
  }
  return *v;
}

}  // namespace detail

// Loads and validates the five tables; referential integrity is enforced by
// Dataset::finalize(). Note ids are assigned by input order.
inline Dataset ingest_dataset(const DatasetPaths& paths, IngestReport* report = nullptr) {
  Dataset ds;

  {
    CsvReader csv(paths.patients,
                  {"patient_id", "birth_date", "sex", "race", "marital_status"});
    std::vector<std::string> row;
    while (csv.next(row)) {
      PatientRecord p;
      p.patient_id = row[0];
      if (p.patient_id.empty()) throw IngestError(csv.context() + ": empty patient_id");
      p.birth_date = detail::parse_date_field(row[1], csv.context(), "birth_date");
      p.sex = detail::parse_enum_field<Sex>(parse_sex, row[2], csv.context(), "sex");
      p.race = detail::parse_enum_field<Race>(parse_race, row[3], csv.context(), "race");
      p.marital_status = detail::parse_enum_field<MaritalStatus>(
          parse_marital, row[4], csv.context(), "marital_status");
      ds.patients.push_back(std::move(p));
    }
    if (report) report->row_counts["patients"] = ds.patients.size();
  }

  {
    CsvReader csv(paths.encounters, {"patient_id", "date", "stop_code"});
    std::vector<std::string> row;
    while (csv.next(row)) {
      Encounter e;
      e.patient_id = row[0];
      e.date = detail::parse_date_field(row[1], csv.context(), "date");
      if (!row[2].empty()) {
        int code = 0;
        const auto res = std::from_chars(row[2].data(), row[2].data() + row[2].size(), code);
        if (res.ec != std::errc{} || res.ptr != row[2].data() + row[2].size() ||
            code <= 0 || code > 999) {
          throw IngestError(csv.context() + ": column stop_code: invalid value '" +
                            row[2] + "'");
        }
        e.stop_code = code;
      }
      ds.encounters.push_back(std::move(e));
    }
    if (report) report->row_counts["encounters"] = ds.encounters.size();
  }

  {
    CsvReader csv(paths.diagnoses, {"patient_id", "date", "icd9_code"});
    std::vector<std::string> row;
    while (csv.next(row)) {
      DiagnosisRecord d;
      d.patient_id = row[0];
      d.date = detail::parse_date_field(row[1], csv.context(), "date");
      const auto code = normalize_icd9(row[2]);
      if (!code) {
        throw IngestError(csv.context() + ": column icd9_code: '" + row[2] +
                          "' does not match the ICD-9 grammar");
      }
      d.code = *code;
      ds.diagnoses.push_back(std::move(d));
    }
    if (report) report->row_counts["diagnoses"] = ds.diagnoses.size();
  }

  {
    std::ifstream in(paths.notes);
    if (!in) throw IngestError(paths.notes + ": cannot open");
    std::string line;
    size_t line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      if (line.empty()) continue;
      const std::string context = paths.notes + ":" + std::to_string(line_no);
      nlohmann::json j;
      try {
        j = nlohmann::json::parse(line);
      } catch (const nlohmann::json::exception& e) {
        throw IngestError(context + ": " + e.what());
      }
      ClinicalNote n;
      try {
        n.patient_id = j.at("patient_id").get<std::string>();
        n.date = detail::parse_date_field(j.at("date").get<std::string>(), context, "date");
        const std::string type = j.at("note_type").get<std::string>();
        n.note_type = detail::parse_enum_field<NoteType>(parse_note_type, type,
                                                         context, "note_type");
        n.text = j.at("text").get<std::string>();
      } catch (const nlohmann::json::exception& e) {
        throw IngestError(context + ": " + e.what());
      }
      char id[24];
      std::snprintf(id, sizeof(id), "N%06zu", ds.notes.size() + 1);
      n.note_id = id;
      ds.notes.push_back(std::move(n));
    }
    if (report) report->row_counts["notes"] = ds.notes.size();
  }

  {
    CsvReader csv(paths.deaths, {"patient_id", "death_date", "underlying_cause_icd10"});
    std::vector<std::string> row;
    while (csv.next(row)) {
      DeathRecord d;
      d.patient_id = row[0];
      d.death_date = detail::parse_date_field(row[1], csv.context(), "death_date");
      d.underlying_cause = row[2];
      if (d.underlying_cause.empty()) {
        throw IngestError(csv.context() + ": empty underlying_cause_icd10");
      }
      ds.deaths.push_back(std::move(d));
    }
    if (report) report->row_counts["deaths"] = ds.deaths.size();
  }

  ds.finalize();
  return ds;
}

inline void write_dataset(const Dataset& ds, const DatasetPaths& paths) {
  {
    CsvWriter csv(paths.patients,
                  {"patient_id", "birth_date", "sex", "race", "marital_status"});
    for (const auto& p : ds.patients) {
      csv.write_row({p.patient_id, p.birth_date.to_string(), std::string(to_string(p.sex)),
                     std::string(to_string(p.race)), std::string(to_string(p.marital_status))});
    }
    csv.flush();
  }
  {
    CsvWriter csv(paths.encounters, {"patient_id", "date", "stop_code"});
    for (const auto& e : ds.encounters) {
      csv.write_row({e.patient_id, e.date.to_string(),
                     e.stop_code ? std::to_string(*e.stop_code) : std::string()});
    }
    csv.flush();
  }
  {
    CsvWriter csv(paths.diagnoses, {"patient_id", "date", "icd9_code"});
    for (const auto& d : ds.diagnoses) {
      csv.write_row({d.patient_id, d.date.to_string(), d.code});
    }
    csv.flush();
  }
  {
    std::ofstream out(paths.notes, std::ios::binary);
    if (!out) throw Error(paths.notes + ": cannot open for writing");
    for (const auto& n : ds.notes) {
      nlohmann::json j;
      j["patient_id"] = n.patient_id;
      j["date"] = n.date.to_string();
      j["note_type"] = std::string(to_string(n.note_type));
      j["text"] = n.text;
      out << j.dump() << '\n';
    }
    out.flush();
    if (!out) throw Error(paths.notes + ": write failed");
  }
  {
    CsvWriter csv(paths.deaths, {"patient_id", "death_date", "underlying_cause_icd10"});
    for (const auto& d : ds.deaths) {
      csv.write_row({d.patient_id, d.death_date.to_string(), d.underlying_cause});
    }
    csv.flush();
  }
}

}  // namespace ncc
