#include <catch2/catch_amalgamated.hpp>

#include "ncc/ehr_store.hpp"
#include "test_helpers.hpp"

using namespace ncc;
using namespace ncc::test;

namespace {

void write_valid_fixture(const TempDir& dir) {
  write_file(dir.path("patients.csv"),
             "patient_id,birth_date,sex,race,marital_status\n"
             "P1,1960-03-15,male,white,married\n"
             "P2,1962-07-01,male,black,single\n"
             "P3,1970-01-20,female,unknown,unknown\n");
  write_file(dir.path("encounters.csv"),
             "patient_id,date,stop_code\n"
             "P1,2012-01-05,591\n"
             "P2,2012-02-06,\n"
             "P3,2012-03-07,208\n");
  write_file(dir.path("diagnoses.csv"),
             "patient_id,date,icd9_code\n"
             "P1,2012-01-05,V62.5\n"
             "P2,2012-02-06,296.20\n");
  write_file(dir.path("notes.jsonl"),
             R"({"patient_id":"P1","date":"2011-06-01","note_type":"primary_care","text":"Patient is doing well."})"
             "\n"
             R"({"patient_id":"P3","date":"2011-07-01","note_type":"discharge_summary","text":"Discharged home."})"
             "\n");
  write_file(dir.path("deaths.csv"),
             "patient_id,death_date,underlying_cause_icd10\n"
             "P2,2014-05-01,X72\n");
}

}  // namespace

TEST_CASE("ingest validates a well-formed 3-patient fixture") {
  TempDir dir("ingest_ok");
  write_valid_fixture(dir);
  IngestReport report;
  const Dataset ds = ingest_dataset(DatasetPaths::in_dir(dir.str()), &report);
  CHECK(ds.patients.size() == 3);
  CHECK(report.row_counts.at("patients") == 3);
  CHECK(report.row_counts.at("encounters") == 3);
  CHECK(report.row_counts.at("diagnoses") == 2);
  CHECK(report.row_counts.at("notes") == 2);
  CHECK(report.row_counts.at("deaths") == 1);
  CHECK(ds.note("N000001") != nullptr);
  CHECK(ds.death_of("P2") != nullptr);
  CHECK(ds.death_of("P1") == nullptr);
  CHECK(ds.first_record_date("P1") == Date::parse("2011-06-01"));
  CHECK(ds.last_record_date("P1") == Date::parse("2012-01-05"));
}

TEST_CASE("dangling patient reference names the offending table") {
  TempDir dir("ingest_dangling");
  write_valid_fixture(dir);
  write_file(dir.path("diagnoses.csv"),
             "patient_id,date,icd9_code\n"
             "P9,2012-01-05,V62.5\n");
  REQUIRE_THROWS_WITH(ingest_dataset(DatasetPaths::in_dir(dir.str())),
                      Catch::Matchers::ContainsSubstring("dangling") &&
                          Catch::Matchers::ContainsSubstring("P9"));
}

TEST_CASE("malformed ICD-9 field is a lexical error with file and line") {
  TempDir dir("ingest_icd");
  write_valid_fixture(dir);
  write_file(dir.path("diagnoses.csv"),
             "patient_id,date,icd9_code\n"
             "P1,2012-01-05,XYZ\n");
  REQUIRE_THROWS_WITH(ingest_dataset(DatasetPaths::in_dir(dir.str())),
                      Catch::Matchers::ContainsSubstring("diagnoses.csv:2") &&
                          Catch::Matchers::ContainsSubstring("ICD-9"));
}

TEST_CASE("unknown enum value and duplicate patient are rejected") {
  {
    TempDir dir("ingest_enum");
    write_valid_fixture(dir);
    write_file(dir.path("patients.csv"),
               "patient_id,birth_date,sex,race,marital_status\n"
               "P1,1960-03-15,male,martian,married\n");
    REQUIRE_THROWS_WITH(ingest_dataset(DatasetPaths::in_dir(dir.str())),
                        Catch::Matchers::ContainsSubstring("martian"));
  }
  {
    TempDir dir("ingest_dup");
    write_valid_fixture(dir);
    write_file(dir.path("patients.csv"),
               "patient_id,birth_date,sex,race,marital_status\n"
               "P1,1960-03-15,male,white,married\n"
               "P1,1961-03-15,male,white,married\n"
               "P2,1962-07-01,male,black,single\n"
               "P3,1970-01-20,female,unknown,unknown\n");
    REQUIRE_THROWS_WITH(ingest_dataset(DatasetPaths::in_dir(dir.str())),
                        Catch::Matchers::ContainsSubstring("duplicate patient_id"));
  }
}

TEST_CASE("second death record for a patient is rejected") {
  TempDir dir("ingest_death2");
  write_valid_fixture(dir);
  write_file(dir.path("deaths.csv"),
             "patient_id,death_date,underlying_cause_icd10\n"
             "P2,2014-05-01,X72\n"
             "P2,2014-06-01,I21.9\n");
  REQUIRE_THROWS_WITH(ingest_dataset(DatasetPaths::in_dir(dir.str())),
                      Catch::Matchers::ContainsSubstring("multiple death records"));
}

TEST_CASE("write then ingest reproduces the dataset field-for-field") {
  TempDir dir("roundtrip");
  write_valid_fixture(dir);
  const Dataset original = ingest_dataset(DatasetPaths::in_dir(dir.str()));

  TempDir dir2("roundtrip_out");
  write_dataset(original, DatasetPaths::in_dir(dir2.str()));
  const Dataset again = ingest_dataset(DatasetPaths::in_dir(dir2.str()));

  CHECK(again.patients == original.patients);
  CHECK(again.encounters == original.encounters);
  CHECK(again.diagnoses == original.diagnoses);
  CHECK(again.notes == original.notes);
  CHECK(again.deaths == original.deaths);

  // Writing twice produces byte-identical files.
  TempDir dir3("roundtrip_out2");
  write_dataset(again, DatasetPaths::in_dir(dir3.str()));
  for (const auto* name :
       {"patients.csv", "encounters.csv", "diagnoses.csv", "notes.jsonl", "deaths.csv"}) {
    CHECK(read_file(dir2.path(name)) == read_file(dir3.path(name)));
  }
}

TEST_CASE("per-patient records come back in date order") {
  Dataset ds = small_fixture();
  const auto& idx = ds.index_of("P1");
  REQUIRE(idx.encounters.size() == 2);
  CHECK(ds.encounters[idx.encounters[0]].date < ds.encounters[idx.encounters[1]].date);
}
