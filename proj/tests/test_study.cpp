#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <set>

#include "ncc/models.hpp"
#include "ncc/study.hpp"
#include "test_helpers.hpp"

using namespace ncc;
using namespace ncc::test;

TEST_CASE("model battery enumeration: 23 single and 79 pair specs") {
  const auto singles = enumerate_models(ModelMode::single);
  REQUIRE(singles.size() == 23);
  const auto pairs = enumerate_models(ModelMode::pair);
  REQUIRE(pairs.size() == 79);

  auto count_group = [](const std::vector<ModelSpec>& specs, SdohGroup g) {
    size_t n = 0;
    for (const auto& s : specs) n += s.group == g ? 1 : 0;
    return n;
  };
  CHECK(count_group(singles, SdohGroup::nlp) == 8);
  CHECK(count_group(singles, SdohGroup::structured) == 6);
  CHECK(count_group(singles, SdohGroup::combined) == 9);
  CHECK(count_group(pairs, SdohGroup::nlp) == 28);
  CHECK(count_group(pairs, SdohGroup::structured) == 15);
  CHECK(count_group(pairs, SdohGroup::combined) == 36);

  // ids are unique; pair exposures are distinct and within the roster
  std::set<std::string> ids;
  for (const auto& s : singles) CHECK(ids.insert(s.model_id).second);
  for (const auto& s : pairs) {
    CHECK(ids.insert(s.model_id).second);
    REQUIRE(s.exposures.size() == 2);
    CHECK(s.exposures[0] != s.exposures[1]);
    const auto roster = group_roster_names(s.group);
    for (const auto& e : s.exposures) {
      CHECK(std::find(roster.begin(), roster.end(), e) != roster.end());
    }
  }
}

TEST_CASE("model designs place exposures first and exclude them from covariates") {
  FeatureTable table;
  // minimal synthetic table: reuse master column layout via a tiny assembly
  const CodeMapSet sdoh = compile_code_map(data_file("sdoh_structured_codes.json"));
  const CodeMapSet mh = compile_code_map(data_file("mental_health_codes.json"));
  const CodeMapSet cci = compile_code_map(data_file("charlson_codes.json"));
  Dataset ds;
  ds.patients.push_back({"A", *Date::parse("1960-01-01"), Sex::male, Race::white,
                         MaritalStatus::married});
  ds.patients.push_back({"B", *Date::parse("1960-01-01"), Sex::male, Race::white,
                         MaritalStatus::married});
  ds.finalize();
  std::vector<CohortMember> members(2);
  members[0] = {"A", *Date::parse("2012-01-01"), *Date::parse("2014-01-01"),
                ExitReason::suicide, 2012, 731};
  members[1] = {"B", *Date::parse("2012-01-01"), *Date::parse("2015-01-01"),
                ExitReason::study_end, 2012, 1096};
  std::vector<MatchedSet> sets(1);
  sets[0] = {1, "A", *Date::parse("2014-01-01"), {"B"}};
  const MentionStore store(ds, {});
  AssemblyInputs in;
  in.dataset = &ds;
  in.members = &members;
  in.sets = &sets;
  in.mentions = &store;
  in.sdoh_codes = &sdoh;
  in.mental_health = &mh;
  in.charlson = &cci;
  table = build_feature_table(in);

  ModelSpec spec;
  spec.group = SdohGroup::combined;
  spec.exposures = {"legal_problems"};
  spec.model_id = "combined:legal_problems";
  const auto design = design_for_model(table, spec);
  REQUIRE(design.column_names.size() >= 9);
  CHECK(design.column_names[0] == "exp_cmb_legal_problems");
  // remaining combined SDOH enter as covariate-window columns
  size_t cov_cols = 0;
  for (const auto& name : design.column_names) {
    CHECK(name != "cov_cmb_legal_problems");
    if (name.rfind("cov_cmb_", 0) == 0) ++cov_cols;
  }
  CHECK(cov_cols == 8);

  ModelSpec pair;
  pair.group = SdohGroup::combined;
  pair.exposures = {"legal_problems", "violence"};
  pair.model_id = "combined:legal_problems+violence";
  const auto pair_design = design_for_model(table, pair);
  CHECK(pair_design.column_names[0] == "exp_cmb_legal_problems");
  CHECK(pair_design.column_names[1] == "exp_cmb_violence");
  cov_cols = 0;
  for (const auto& name : pair_design.column_names) {
    if (name.rfind("cov_cmb_", 0) == 0) ++cov_cols;
  }
  CHECK(cov_cols == 7);
}

TEST_CASE("config round-trips through JSON with defaults") {
  TempDir dir("cfg");
  write_file(dir.path("config.json"), R"({
    "period": {"start": "2010-10-01", "end": "2015-09-30"},
    "match": {"ratio": 3, "birth_year_tolerance": 2, "underfill": "drop"},
    "ci_method": "exact_poisson",
    "run_pairs": false,
    "seed": 99,
    "prior_attempt_lookback_years": 5
  })");
  const auto cfg = StudyConfig::load(dir.path("config.json"));
  CHECK(cfg.match.ratio == 3);
  CHECK(cfg.match.birth_year_tolerance == 2);
  CHECK(cfg.underfill == UnderfillPolicy::drop);
  CHECK(cfg.ci_method == CiMethod::exact_poisson);
  CHECK_FALSE(cfg.run_pairs);
  CHECK(cfg.seed == 99);
  CHECK(cfg.prior_attempt_lookback_years == 5);
  // echo contains the resolved defaults too
  const auto echo = cfg.to_json();
  CHECK(echo.contains("code_maps"));
  CHECK(echo["match"]["ratio"] == 3);

  write_file(dir.path("bad.json"), R"({"match": {"ratio": 0}})");
  CHECK_THROWS_AS(StudyConfig::load(dir.path("bad.json")), Error);
}

TEST_CASE("stage persistence round-trips") {
  TempDir dir("persist");
  std::vector<CohortMember> members(2);
  members[0] = {"A", *Date::parse("2012-01-01"), *Date::parse("2014-01-01"),
                ExitReason::suicide, 2012, 731};
  members[1] = {"B", *Date::parse("2011-10-01"), *Date::parse("2015-09-30"),
                ExitReason::study_end, 2012, 1460};
  write_cohort_csv(dir.path("cohort.csv"), members);
  const auto again = read_cohort_csv(dir.path("cohort.csv"));
  REQUIRE(again.size() == 2);
  CHECK(again[0].patient_id == "A");
  CHECK(again[0].exit_reason == ExitReason::suicide);
  CHECK(again[1].followup_days == 1460);

  std::vector<MatchedSet> sets(2);
  sets[0] = {1, "A", *Date::parse("2014-01-01"), {"B", "C"}};
  sets[1] = {2, "D", *Date::parse("2014-05-01"), {"B"}};
  write_matched_sets_csv(dir.path("sets.csv"), sets);
  const auto sets_again = read_matched_sets_csv(dir.path("sets.csv"));
  REQUIRE(sets_again.size() == 2);
  CHECK(sets_again[0].control_ids == std::vector<std::string>{"B", "C"});
  CHECK(sets_again[1].case_id == "D");
}

TEST_CASE("aOR and incidence rendering") {
  CHECK(format_aor_ci(2.0, 1.644024, 2.433054) == "2.00 (1.64, 2.43)");
  IncidenceEstimate est;
  est.rate_per_100k = 37.179591;
  est.ci_low = 36.403698;
  est.ci_high = 37.955484;
  CHECK(format_incidence(est) ==
        "37.18 per 100,000 person-years (95% CI 36.40, 37.96)");
}

namespace {

SynthSpec study_spec() {
  SynthSpec spec;
  spec.n_patients = 1500;
  spec.suicide_rate_per_year = 0.008;
  spec.factors.push_back({"legal_problems", 0.12, std::log(2.0), 0.6, 0.8});
  spec.factors.push_back({"housing_instability", 0.10, 0.3, 0.6, 0.8});
  spec.factors.push_back({"violence", 0.08, 0.0, 0.6, 0.8});
  spec.comorbidities.push_back({"major_depressive_disorder", "mental_health", 0.15, 0.0, 1.0, 1.5});
  spec.comorbidities.push_back({"pain", "nlp", 0.2, 0.0, 1.0, 1.0});
  return spec;
}

void run_workspace(const std::string& dir, uint64_t seed, bool pairs) {
  StudyConfig cfg;
  cfg.seed = seed;
  cfg.run_pairs = pairs;
  const Workspace ws{dir};
  std::filesystem::create_directories(ws.dataset_dir());
  const auto synth = generate_synthetic(study_spec(), seed);
  write_dataset(synth.dataset, DatasetPaths::in_dir(ws.dataset_dir()));
  studydetail::write_json(ws.path("planted_effects.json"), synth.planted.to_json());
  run_study(cfg, ws);
}

}  // namespace

TEST_CASE("run_study produces a complete, deterministic workspace") {
  TempDir dir_a("study_a");
  run_workspace(dir_a.str(), 2718, /*pairs=*/false);

  for (const auto* name :
       {"cohort.csv", "exclusions.csv", "cases.csv", "incidence.json",
        "matched_sets.csv", "match_summary.json", "structured_hits.csv",
        "mentions.jsonl", "features.csv", "features_manifest.json", "prevalence.csv",
        "results.csv", "vif.csv", "report.md", "config_echo.json"}) {
    CAPTURE(name);
    CHECK(std::filesystem::exists(std::filesystem::path(dir_a.str()) / name));
  }

  // one result row per enumerated spec
  const auto results = read_results_csv(
      (std::filesystem::path(dir_a.str()) / "results.csv").string());
  CHECK(results.size() == 23);
  std::set<std::string> ids;
  for (const auto& r : results) CHECK(ids.insert(r.model_id).second);

  // byte-identical rerun with the same seed
  TempDir dir_b("study_b");
  run_workspace(dir_b.str(), 2718, /*pairs=*/false);
  for (const auto* name :
       {"cohort.csv", "exclusions.csv", "cases.csv", "incidence.json",
        "matched_sets.csv", "match_summary.json", "structured_hits.csv",
        "mentions.jsonl", "features.csv", "features_manifest.json", "prevalence.csv",
        "results.csv", "vif.csv", "report.md", "config_echo.json",
        "dataset/patients.csv", "dataset/notes.jsonl"}) {
    CAPTURE(name);
    CHECK(read_file((std::filesystem::path(dir_a.str()) / name).string()) ==
          read_file((std::filesystem::path(dir_b.str()) / name).string()));
  }
}

TEST_CASE("fit stage covers all 102 models when pairs are enabled") {
  TempDir dir("study_pairs");
  run_workspace(dir.str(), 31415, /*pairs=*/true);
  const auto results =
      read_results_csv((std::filesystem::path(dir.str()) / "results.csv").string());
  CHECK(results.size() == 102);
  // the report renders the pair table
  const auto report = read_file((std::filesystem::path(dir.str()) / "report.md").string());
  CHECK(report.find("Two-exposure adjusted odds ratios") != std::string::npos);
  CHECK(report.find("| social_problems, financial_problems |") != std::string::npos);
}

TEST_CASE("report notes when pair models are disabled") {
  TempDir dir("study_nopairs");
  run_workspace(dir.str(), 161, /*pairs=*/false);
  const auto report = read_file((std::filesystem::path(dir.str()) / "report.md").string());
  CHECK(report.find("Pair models disabled") != std::string::npos);
}
