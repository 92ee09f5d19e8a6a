#pragma once

#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ncc/csv.hpp"
#include "ncc/cohort.hpp"
#include "ncc/ehr_store.hpp"
#include "ncc/error.hpp"
#include "ncc/eval.hpp"
#include "ncc/features.hpp"
#include "ncc/matching.hpp"
#include "ncc/models.hpp"
#include "ncc/parallel.hpp"
#include "ncc/synth.hpp"
#include "ncc/tagger.hpp"

namespace ncc {

struct StudyConfig {
  StudyPeriod period{Date::from_ymd(2010, 10, 1), Date::from_ymd(2015, 9, 30)};
  int covariate_window_years = 2;
  int exposure_window_years = 2;
  MatchCriteria match;
  UnderfillPolicy underfill = UnderfillPolicy::keep;
  CiMethod ci_method = CiMethod::normal_approx;
  std::string sdoh_map = synthdetail::default_data_path("", "sdoh_structured_codes.json");
  std::string mental_health_map =
      synthdetail::default_data_path("", "mental_health_codes.json");
  std::string charlson_map = synthdetail::default_data_path("", "charlson_codes.json");
  std::string prior_attempt_map =
      synthdetail::default_data_path("", "prior_attempt_codes.json");
  std::string lexicon = synthdetail::default_data_path("", "lexicon.json");
  std::string external_tagger;  // empty = reference lexicon tagger
  std::optional<int> prior_attempt_lookback_years;
  bool run_pairs = true;
  uint64_t seed = 1;
  int jobs = 1;
  FitConfig fit;

  static StudyConfig load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(path + ": cannot open");
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
      throw Error(path + ": " + e.what());
    }
    return from_json(j);
  }

  static StudyConfig from_json(const nlohmann::json& j) {
    StudyConfig c;
    if (j.contains("period")) {
      const auto start = Date::parse(j["period"].at("start").get<std::string>());
      const auto end = Date::parse(j["period"].at("end").get<std::string>());
      if (!start || !end || !(*start < *end)) throw Error("config: bad study period");
      c.period = {*start, *end};
    }
    auto get = [&](const char* key, auto& field) {
      if (j.contains(key)) field = j.at(key).get<std::decay_t<decltype(field)>>();
    };
    get("covariate_window_years", c.covariate_window_years);
    get("exposure_window_years", c.exposure_window_years);
    if (j.contains("match")) {
      const auto& m = j["match"];
      if (m.contains("ratio")) c.match.ratio = m["ratio"].get<int>();
      if (m.contains("birth_year_tolerance")) {
        c.match.birth_year_tolerance = m["birth_year_tolerance"].get<int>();
      }
      if (m.contains("require_same_entry_fy")) {
        c.match.require_same_entry_fy = m["require_same_entry_fy"].get<bool>();
      }
      if (m.contains("require_same_sex")) {
        c.match.require_same_sex = m["require_same_sex"].get<bool>();
      }
      if (c.match.ratio < 1 || c.match.birth_year_tolerance < 0) {
        throw Error("config: invalid match criteria");
      }
      if (m.contains("underfill")) {
        const std::string u = m["underfill"].get<std::string>();
        if (u == "keep") {
          c.underfill = UnderfillPolicy::keep;
        } else if (u == "drop") {
          c.underfill = UnderfillPolicy::drop;
        } else {
          throw Error("config: underfill must be keep or drop");
        }
      }
    }
    if (j.contains("ci_method")) {
      const std::string m = j["ci_method"].get<std::string>();
      if (m == "normal_approx") {
        c.ci_method = CiMethod::normal_approx;
      } else if (m == "exact_poisson") {
        c.ci_method = CiMethod::exact_poisson;
      } else {
        throw Error("config: unknown ci_method '" + m + "'");
      }
    }
    if (j.contains("code_maps")) {
      const auto& m = j["code_maps"];
      if (m.contains("sdoh")) c.sdoh_map = m["sdoh"].get<std::string>();
      if (m.contains("mental_health")) c.mental_health_map = m["mental_health"].get<std::string>();
      if (m.contains("charlson")) c.charlson_map = m["charlson"].get<std::string>();
      if (m.contains("prior_attempts")) c.prior_attempt_map = m["prior_attempts"].get<std::string>();
    }
    get("lexicon", c.lexicon);
    get("external_tagger", c.external_tagger);
    if (j.contains("prior_attempt_lookback_years") &&
        !j["prior_attempt_lookback_years"].is_null()) {
      c.prior_attempt_lookback_years = j["prior_attempt_lookback_years"].get<int>();
    }
    get("run_pairs", c.run_pairs);
    get("seed", c.seed);
    get("jobs", c.jobs);
    return c;
  }

  nlohmann::json to_json() const {
    nlohmann::json j;
    j["period"] = {{"start", period.start.to_string()}, {"end", period.end.to_string()}};
    j["covariate_window_years"] = covariate_window_years;
    j["exposure_window_years"] = exposure_window_years;
    j["match"] = {{"ratio", match.ratio},
                  {"birth_year_tolerance", match.birth_year_tolerance},
                  {"require_same_entry_fy", match.require_same_entry_fy},
                  {"require_same_sex", match.require_same_sex},
                  {"underfill", std::string(to_string(underfill))}};
    j["ci_method"] = std::string(to_string(ci_method));
    j["code_maps"] = {{"sdoh", sdoh_map},
                      {"mental_health", mental_health_map},
                      {"charlson", charlson_map},
                      {"prior_attempts", prior_attempt_map}};
    j["lexicon"] = lexicon;
    j["external_tagger"] = external_tagger;
    if (prior_attempt_lookback_years) {
      j["prior_attempt_lookback_years"] = *prior_attempt_lookback_years;
    } else {
      j["prior_attempt_lookback_years"] = nullptr;
    }
    j["run_pairs"] = run_pairs;
    j["seed"] = seed;
    j["jobs"] = jobs;
    return j;
  }
};

// ---------------------------------------------------------------------------
// Workspace paths and intermediate persistence

struct Workspace {
  std::string dir;

  std::string path(const std::string& name) const {
    return (std::filesystem::path(dir) / name).string();
  }
  std::string dataset_dir() const { return path("dataset"); }
};

namespace studydetail {

inline std::string fmt(double v, const char* spec = "%.10g") {
  char buf[64];
  std::snprintf(buf, sizeof(buf), spec, v);
  return buf;
}

inline void write_json(const std::string& path, const nlohmann::json& j) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(path + ": cannot open for writing");
  out << j.dump(2) << '\n';
  out.flush();
  if (!out) throw Error(path + ": write failed");
}

inline nlohmann::json read_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(path + ": cannot open");
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw Error(path + ": " + e.what());
  }
}

}  // namespace studydetail

inline void write_cohort_csv(const std::string& path,
                             const std::vector<CohortMember>& members) {
  CsvWriter csv(path, {"patient_id", "entry_date", "exit_date", "exit_reason",
                       "entry_fy", "followup_days"});
  for (const auto& m : members) {
    csv.write_row({m.patient_id, m.entry_date.to_string(), m.exit_date.to_string(),
                   std::string(to_string(m.exit_reason)),
                   std::to_string(m.entry_fiscal_year), std::to_string(m.followup_days)});
  }
  csv.flush();
}

inline std::vector<CohortMember> read_cohort_csv(const std::string& path) {
  CsvReader csv(path, {"patient_id", "entry_date", "exit_date", "exit_reason",
                       "entry_fy", "followup_days"});
  std::vector<CohortMember> out;
  std::vector<std::string> row;
  while (csv.next(row)) {
    CohortMember m;
    m.patient_id = row[0];
    const auto entry = Date::parse(row[1]);
    const auto exit = Date::parse(row[2]);
    const auto reason = parse_exit_reason(row[3]);
    if (!entry || !exit || !reason) throw Error(csv.context() + ": bad cohort row");
    m.entry_date = *entry;
    m.exit_date = *exit;
    m.exit_reason = *reason;
    m.entry_fiscal_year = std::stoi(row[4]);
    m.followup_days = std::stoi(row[5]);
    out.push_back(std::move(m));
  }
  return out;
}

inline void write_cases_csv(const std::string& path, const std::vector<CaseRef>& cases) {
  CsvWriter csv(path, {"patient_id", "index_date"});
  for (const auto& c : cases) csv.write_row({c.patient_id, c.index_date.to_string()});
  csv.flush();
}

inline std::vector<CaseRef> read_cases_csv(const std::string& path) {
  CsvReader csv(path, {"patient_id", "index_date"});
  std::vector<CaseRef> out;
  std::vector<std::string> row;
  while (csv.next(row)) {
    const auto d = Date::parse(row[1]);
    if (!d) throw Error(csv.context() + ": bad index date");
    out.push_back({row[0], *d});
  }
  return out;
}

inline void write_matched_sets_csv(const std::string& path,
                                   const std::vector<MatchedSet>& sets) {
  CsvWriter csv(path, {"set_id", "case_id", "index_date", "control_id", "control_slot"});
  for (const auto& s : sets) {
    for (size_t slot = 0; slot < s.control_ids.size(); ++slot) {
      csv.write_row({std::to_string(s.set_id), s.case_id, s.index_date.to_string(),
                     s.control_ids[slot], std::to_string(slot + 1)});
    }
  }
  csv.flush();
}

inline std::vector<MatchedSet> read_matched_sets_csv(const std::string& path) {
  CsvReader csv(path, {"set_id", "case_id", "index_date", "control_id", "control_slot"});
  std::vector<MatchedSet> out;
  std::vector<std::string> row;
  while (csv.next(row)) {
    const int set_id = std::stoi(row[0]);
    const auto index = Date::parse(row[2]);
    if (!index) throw Error(csv.context() + ": bad index date");
    if (out.empty() || out.back().set_id != set_id) {
      MatchedSet s;
      s.set_id = set_id;
      s.case_id = row[1];
      s.index_date = *index;
      out.push_back(std::move(s));
    }
    out.back().control_ids.push_back(row[3]);
  }
  return out;
}

inline void write_feature_table(const std::string& csv_path,
                                const std::string& manifest_path,
                                const FeatureTable& table) {
  std::vector<std::string> header = {"set_id", "patient_id", "is_case"};
  for (const auto& c : table.columns) header.push_back(c.name);
  CsvWriter csv(csv_path, header);
  std::vector<std::string> row;
  for (const auto& r : table.rows) {
    row.clear();
    row.push_back(std::to_string(r.set_id));
    row.push_back(r.patient_id);
    row.push_back(r.is_case ? "1" : "0");
    for (const uint8_t b : r.bits) row.push_back(b ? "1" : "0");
    csv.write_row(row);
  }
  csv.flush();

  nlohmann::json manifest = nlohmann::json::array();
  manifest.push_back({{"name", "set_id"}, {"source", "id"}, {"window", "none"}});
  manifest.push_back({{"name", "patient_id"}, {"source", "id"}, {"window", "none"}});
  manifest.push_back({{"name", "is_case"}, {"source", "outcome"}, {"window", "none"}});
  for (const auto& c : table.columns) {
    manifest.push_back({{"name", c.name}, {"source", c.source}, {"window", c.window}});
  }
  studydetail::write_json(manifest_path, manifest);
}

inline FeatureTable read_feature_table(const std::string& csv_path,
                                       const std::string& manifest_path) {
  const auto manifest = studydetail::read_json(manifest_path);
  FeatureTable table;
  for (const auto& item : manifest) {
    const std::string name = item.at("name").get<std::string>();
    if (name == "set_id" || name == "patient_id" || name == "is_case") continue;
    table.columns.push_back({name, item.at("source").get<std::string>(),
                             item.at("window").get<std::string>()});
  }
  std::vector<std::string> header = {"set_id", "patient_id", "is_case"};
  for (const auto& c : table.columns) header.push_back(c.name);
  CsvReader csv(csv_path, header);
  std::vector<std::string> row;
  while (csv.next(row)) {
    FeatureRow r;
    r.set_id = std::stoi(row[0]);
    r.patient_id = row[1];
    r.is_case = row[2] == "1" ? 1 : 0;
    r.bits.reserve(table.columns.size());
    for (size_t i = 3; i < row.size(); ++i) {
      if (row[i] != "0" && row[i] != "1") {
        throw Error(csv.context() + ": feature bits must be 0 or 1");
      }
      r.bits.push_back(row[i] == "1" ? 1 : 0);
    }
    table.rows.push_back(std::move(r));
  }
  return table;
}

inline void write_prevalence_csv(const std::string& path,
                                 const std::vector<PrevalenceRow>& rows) {
  CsvWriter csv(path, {"factor", "window", "source", "case_count", "case_pct",
                       "control_count", "control_pct"});
  for (const auto& r : rows) {
    csv.write_row({r.factor, r.window, r.source, std::to_string(r.case_count),
                   studydetail::fmt(r.case_pct, "%.4f"), std::to_string(r.control_count),
                   studydetail::fmt(r.control_pct, "%.4f")});
  }
  csv.flush();
}

// ---------------------------------------------------------------------------
// Stages. Each one reads persisted inputs from the workspace and persists its
// own outputs, so any stage can be rerun in isolation.

inline IncidenceEstimate stage_cohort(const StudyConfig& cfg, const Workspace& ws) {
  const Dataset ds = ingest_dataset(DatasetPaths::in_dir(ws.dataset_dir()));
  const auto prior_codes = compile_code_map(cfg.prior_attempt_map);
  CohortOptions options;
  options.prior_attempt_codes = &prior_codes;
  options.prior_attempt_lookback_years = cfg.prior_attempt_lookback_years;
  const CohortResult cohort = build_base_cohort(ds, cfg.period, options);

  write_cohort_csv(ws.path("cohort.csv"), cohort.members);
  {
    CsvWriter csv(ws.path("exclusions.csv"), {"patient_id", "reason"});
    for (const auto& e : cohort.exclusions) {
      csv.write_row({e.patient_id, std::string(to_string(e.reason))});
    }
    csv.flush();
  }

  CaseDiagnostics diag;
  const auto cases = identify_cases(cohort.members, ds, &diag);
  write_cases_csv(ws.path("cases.csv"), cases);

  const double py = person_years(cohort.members);
  const IncidenceEstimate est = incidence(cases.size(), py, cfg.ci_method);
  nlohmann::json j;
  j["events"] = est.events;
  j["person_years"] = est.person_years;
  j["rate_per_100k"] = est.rate_per_100k;
  j["ci_low"] = est.ci_low;
  j["ci_high"] = est.ci_high;
  j["ci_method"] = std::string(to_string(est.ci_method));
  j["members"] = cohort.members.size();
  j["exclusion_rows"] = cohort.exclusions.size();
  j["suicide_deaths_outside_followup"] = diag.suicide_deaths_outside_followup;
  studydetail::write_json(ws.path("incidence.json"), j);
  return est;
}

inline MatchSummary stage_match(const StudyConfig& cfg, const Workspace& ws) {
  const Dataset ds = ingest_dataset(DatasetPaths::in_dir(ws.dataset_dir()));
  const auto members = read_cohort_csv(ws.path("cohort.csv"));
  const auto cases = read_cases_csv(ws.path("cases.csv"));
  const MatchResult result =
      build_matched_cohort(cases, members, ds, cfg.match, cfg.seed, cfg.underfill);
  write_matched_sets_csv(ws.path("matched_sets.csv"), result.sets);

  const auto& s = result.summary;
  nlohmann::json j;
  j["cases"] = s.cases;
  j["matched_sets"] = s.matched_sets;
  j["unmatched_cases"] = s.unmatched_cases;
  j["underfilled_sets"] = s.underfilled_sets;
  j["dropped_cases"] = s.dropped_cases;
  j["total_control_slots"] = s.total_control_slots;
  j["unique_controls"] = s.unique_controls;
  j["controls_reused"] = s.controls_reused;
  studydetail::write_json(ws.path("match_summary.json"), j);
  return result.summary;
}

inline std::vector<std::string> matched_subjects(const std::vector<MatchedSet>& sets) {
  std::vector<std::string> subjects;
  for (const auto& s : sets) {
    subjects.push_back(s.case_id);
    for (const auto& c : s.control_ids) subjects.push_back(c);
  }
  std::sort(subjects.begin(), subjects.end());
  subjects.erase(std::unique(subjects.begin(), subjects.end()), subjects.end());
  return subjects;
}

inline void stage_extract_structured(const StudyConfig& cfg, const Workspace& ws) {
  const Dataset ds = ingest_dataset(DatasetPaths::in_dir(ws.dataset_dir()));
  const auto sets = read_matched_sets_csv(ws.path("matched_sets.csv"));
  const auto maps = compile_code_map(cfg.sdoh_map);
  CsvWriter csv(ws.path("structured_hits.csv"), {"patient_id", "date", "factor", "source"});
  for (const auto& subject : matched_subjects(sets)) {
    for (const auto& hit : structured_hits(subject, ds, maps)) {
      csv.write_row({hit.patient_id, hit.date.to_string(), maps.factor_name(hit.factor),
                     hit.source});
    }
  }
  csv.flush();
}

inline TagDiagnostics stage_extract_nlp(const StudyConfig& cfg, const Workspace& ws) {
  const Dataset ds = ingest_dataset(DatasetPaths::in_dir(ws.dataset_dir()));
  const auto sets = read_matched_sets_csv(ws.path("matched_sets.csv"));
  const Lexicon lexicon = Lexicon::load(cfg.lexicon);

  // Only matched subjects are tagged; this is the expensive stage and the
  // nested design exists precisely so it runs on the sampled cohort.
  std::vector<const ClinicalNote*> notes;
  for (const auto& subject : matched_subjects(sets)) {
    const auto& idx = ds.index_of(subject);
    for (const size_t i : idx.notes) {
      if (ds.notes[i].note_type != NoteType::other) notes.push_back(&ds.notes[i]);
    }
  }

  TagDiagnostics diag;
  std::vector<FactorMention> mentions;
  size_t paragraphs = 0;
  if (!cfg.external_tagger.empty()) {
    std::vector<NoteParagraphs> batch;
    for (const auto* note : notes) {
      NoteParagraphs np;
      np.note = note;
      np.paragraphs = prescreen(note->text, note->note_id, lexicon);
      paragraphs += np.paragraphs.size();
      if (!np.paragraphs.empty()) batch.push_back(std::move(np));
    }
    ExternalTaggerEngine engine(cfg.external_tagger);
    mentions = engine.tag_batch(batch, &diag);
  } else {
    LexiconTaggerEngine engine(lexicon);
    std::vector<std::vector<FactorMention>> per_note(notes.size());
    std::vector<TagDiagnostics> per_note_diag(notes.size());
    parallel_for(notes.size(), cfg.jobs, [&](size_t i) {
      const auto paras = prescreen(notes[i]->text, notes[i]->note_id, engine.lexicon());
      per_note[i] = engine.tag_note(*notes[i], paras, &per_note_diag[i]);
    });
    for (size_t i = 0; i < notes.size(); ++i) {
      paragraphs += prescreen(notes[i]->text, notes[i]->note_id, engine.lexicon()).size();
      diag.failed_paragraphs += per_note_diag[i].failed_paragraphs;
      for (auto& m : per_note[i]) mentions.push_back(std::move(m));
    }
  }
  std::sort(mentions.begin(), mentions.end(), mention_order);
  write_mentions_jsonl(ws.path("mentions.jsonl"), mentions);

  nlohmann::json j;
  j["notes_tagged"] = notes.size();
  j["paragraphs"] = paragraphs;
  j["mentions"] = mentions.size();
  j["failed_paragraphs"] = diag.failed_paragraphs;
  studydetail::write_json(ws.path("nlp_summary.json"), j);
  return diag;
}

inline void stage_assemble(const StudyConfig& cfg, const Workspace& ws) {
  const Dataset ds = ingest_dataset(DatasetPaths::in_dir(ws.dataset_dir()));
  const auto members = read_cohort_csv(ws.path("cohort.csv"));
  const auto sets = read_matched_sets_csv(ws.path("matched_sets.csv"));
  const auto mentions = read_mentions_jsonl(ws.path("mentions.jsonl"));
  const MentionStore store(ds, mentions);
  const auto sdoh = compile_code_map(cfg.sdoh_map);
  const auto mh = compile_code_map(cfg.mental_health_map);
  const auto cci = compile_code_map(cfg.charlson_map);

  AssemblyInputs in;
  in.dataset = &ds;
  in.members = &members;
  in.sets = &sets;
  in.mentions = &store;
  in.sdoh_codes = &sdoh;
  in.mental_health = &mh;
  in.charlson = &cci;
  in.covariate_years = cfg.covariate_window_years;
  in.exposure_years = cfg.exposure_window_years;
  in.jobs = cfg.jobs;
  const FeatureTable table = build_feature_table(in);
  write_feature_table(ws.path("features.csv"), ws.path("features_manifest.json"), table);
  write_prevalence_csv(ws.path("prevalence.csv"), prevalence_table(table));
}

inline std::vector<ModelRunResult> stage_fit(const StudyConfig& cfg, const Workspace& ws) {
  const FeatureTable table =
      read_feature_table(ws.path("features.csv"), ws.path("features_manifest.json"));
  std::vector<ModelSpec> specs = enumerate_models(ModelMode::single);
  if (cfg.run_pairs) {
    for (auto& s : enumerate_models(ModelMode::pair)) specs.push_back(std::move(s));
  }

  std::vector<ModelRunResult> results(specs.size());
  parallel_for(specs.size(), cfg.jobs, [&](size_t i) {
    results[i] = run_model(table, specs[i], cfg.fit);
  });

  CsvWriter csv(ws.path("results.csv"),
                {"model_id", "group", "exposure_factors", "beta", "se", "aor", "ci_low",
                 "ci_high", "n_sets", "n_rows", "converged", "iterations",
                 "dropped_columns"});
  CsvWriter vif_csv(ws.path("vif.csv"), {"model_id", "max_vif"});
  for (const auto& r : results) {
    std::string exposures;
    for (size_t k = 0; k < r.spec.exposures.size(); ++k) {
      if (k) exposures += '+';
      exposures += r.spec.exposures[k];
    }
    std::string dropped;
    for (size_t k = 0; k < r.fit.dropped_columns.size(); ++k) {
      if (k) dropped += ';';
      dropped += r.fit.dropped_columns[k];
    }
    std::vector<std::string> row = {r.spec.model_id, std::string(to_string(r.spec.group)),
                                    exposures};
    if (r.exposure_estimable) {
      row.push_back(studydetail::fmt(r.exposure_beta));
      row.push_back(studydetail::fmt(r.exposure_se));
      row.push_back(studydetail::fmt(r.aor()));
      row.push_back(studydetail::fmt(r.ci_low()));
      row.push_back(studydetail::fmt(r.ci_high()));
    } else {
      for (int k = 0; k < 5; ++k) row.emplace_back();
    }
    row.push_back(std::to_string(r.n_sets));
    row.push_back(std::to_string(r.n_rows));
    row.push_back(r.fit.converged ? "true" : "false");
    row.push_back(std::to_string(r.fit.iterations));
    row.push_back(dropped);
    csv.write_row(row);
    vif_csv.write_row({r.spec.model_id, studydetail::fmt(r.max_vif, "%.6g")});
  }
  csv.flush();
  vif_csv.flush();
  return results;
}

// ---------------------------------------------------------------------------
// Report rendering

struct ResultRow {
  std::string model_id;
  std::string group;
  std::string exposures;
  std::optional<double> aor, ci_low, ci_high;
  bool converged = false;
};

inline std::vector<ResultRow> read_results_csv(const std::string& path) {
  CsvReader csv(path, {"model_id", "group", "exposure_factors", "beta", "se", "aor",
                       "ci_low", "ci_high", "n_sets", "n_rows", "converged",
                       "iterations", "dropped_columns"});
  std::vector<ResultRow> out;
  std::vector<std::string> row;
  while (csv.next(row)) {
    ResultRow r;
    r.model_id = row[0];
    r.group = row[1];
    r.exposures = row[2];
    if (!row[5].empty()) {
      r.aor = std::stod(row[5]);
      r.ci_low = std::stod(row[6]);
      r.ci_high = std::stod(row[7]);
    }
    r.converged = row[10] == "true";
    out.push_back(std::move(r));
  }
  return out;
}

inline std::string format_aor_ci(double aor, double lo, double hi) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.2f (%.2f, %.2f)", aor, lo, hi);
  return buf;
}

inline std::string format_incidence(const IncidenceEstimate& est) {
  char buf[128];
  std::snprintf(buf, sizeof(buf), "%.2f per 100,000 person-years (95%% CI %.2f, %.2f)",
                est.rate_per_100k, est.ci_low, est.ci_high);
  return buf;
}

namespace studydetail {

// Group-specific factor name for a combined-roster factor; nullopt when the
// factor has no source in that group.
inline std::optional<std::string> group_factor_name(const CombinedFactor& cf,
                                                    SdohGroup group) {
  switch (group) {
    case SdohGroup::combined: return cf.name;
    case SdohGroup::nlp:
      if (cf.nlp_source) return std::string(to_string(*cf.nlp_source));
      return std::nullopt;
    case SdohGroup::structured: return cf.structured_source;
  }
  return std::nullopt;
}

inline std::string pair_model_id(SdohGroup group, const std::string& a,
                                 const std::string& b) {
  const auto roster = group_roster_names(group);
  const size_t ia = static_cast<size_t>(
      std::find(roster.begin(), roster.end(), a) - roster.begin());
  const size_t ib = static_cast<size_t>(
      std::find(roster.begin(), roster.end(), b) - roster.begin());
  const auto& lo = ia <= ib ? a : b;
  const auto& hi = ia <= ib ? b : a;
  return std::string(to_string(group)) + ":" + lo + "+" + hi;
}

}  // namespace studydetail

inline void stage_report(const StudyConfig& cfg, const Workspace& ws) {
  const auto incidence_json = studydetail::read_json(ws.path("incidence.json"));
  const auto match_json = studydetail::read_json(ws.path("match_summary.json"));
  const auto results = read_results_csv(ws.path("results.csv"));
  const FeatureTable table =
      read_feature_table(ws.path("features.csv"), ws.path("features_manifest.json"));

  std::map<std::string, const ResultRow*> by_id;
  for (const auto& r : results) by_id[r.model_id] = &r;
  auto cell = [&](const std::string& id) -> std::string {
    const auto it = by_id.find(id);
    if (it == by_id.end()) return "-";
    const auto& r = *it->second;
    if (!r.aor) return "n/e";
    std::string s = format_aor_ci(*r.aor, *r.ci_low, *r.ci_high);
    if (!r.converged) s += " *";
    return s;
  };

  std::ofstream out(ws.path("report.md"), std::ios::binary);
  if (!out) throw Error(ws.path("report.md") + ": cannot open for writing");

  out << "# Nested case-control study report\n\n";

  {
    IncidenceEstimate est;
    est.events = incidence_json.at("events").get<size_t>();
    est.person_years = incidence_json.at("person_years").get<double>();
    est.rate_per_100k = incidence_json.at("rate_per_100k").get<double>();
    est.ci_low = incidence_json.at("ci_low").get<double>();
    est.ci_high = incidence_json.at("ci_high").get<double>();
    out << "## Cohort\n\n";
    out << "- Members: " << incidence_json.at("members").get<size_t>() << "\n";
    out << "- Suicide cases: " << est.events << "\n";
    out << "- Person-years: " << studydetail::fmt(est.person_years, "%.2f") << "\n";
    out << "- Crude incidence: " << format_incidence(est) << " ["
        << incidence_json.at("ci_method").get<std::string>() << "]\n\n";
  }

  {
    out << "## Matched cohort\n\n";
    out << "- Cases matched: " << match_json.at("matched_sets").get<size_t>() << " of "
        << match_json.at("cases").get<size_t>() << "\n";
    out << "- Control slots: " << match_json.at("total_control_slots").get<size_t>()
        << " (" << match_json.at("unique_controls").get<size_t>() << " unique; "
        << match_json.at("controls_reused").get<size_t>()
        << " served more than one case)\n";
    out << "- Unmatched cases: " << match_json.at("unmatched_cases").get<size_t>()
        << ", underfilled sets: " << match_json.at("underfilled_sets").get<size_t>()
        << ", dropped: " << match_json.at("dropped_cases").get<size_t>() << "\n\n";
  }

  {
    size_t n_cases = 0, n_controls = 0;
    for (const auto& r : table.rows) (r.is_case ? n_cases : n_controls)++;
    out << "## Case/control characteristics\n\n";
    out << "| Characteristic | Cases (%) | Controls (%) |\n|---|---|---|\n";
    char buf[160];
    std::snprintf(buf, sizeof(buf), "| N | %zu | %zu |\n", n_cases, n_controls);
    out << buf;
    for (size_t ci = 0; ci < table.columns.size(); ++ci) {
      const auto& col = table.columns[ci];
      const bool demo = col.source == "demographic";
      const bool covariate = col.source == "mental_health" || col.source == "charlson" ||
                             col.source == "nlp_factor";
      if (!demo && !covariate) continue;
      size_t cases = 0, controls = 0;
      for (const auto& r : table.rows) {
        if (r.bits[ci]) (r.is_case ? cases : controls)++;
      }
      std::snprintf(buf, sizeof(buf), "| %s | %zu (%.2f) | %zu (%.2f) |\n",
                    col.name.c_str(), cases,
                    n_cases ? 100.0 * static_cast<double>(cases) / static_cast<double>(n_cases) : 0.0,
                    controls,
                    n_controls ? 100.0 * static_cast<double>(controls) / static_cast<double>(n_controls)
                               : 0.0);
      out << buf;
    }
    out << "\n";
  }

  {
    out << "## SDOH prevalence (factor x window x source)\n\n";
    out << "See `prevalence.csv` for the full table.\n\n";
  }

  {
    out << "## Single-exposure adjusted odds ratios\n\n";
    out << "| SDOH factor | NLP-extracted | Structured | Combined |\n|---|---|---|---|\n";
    for (const auto& cf : combined_sdoh_roster()) {
      out << "| " << cf.name << " |";
      for (const auto group : {SdohGroup::nlp, SdohGroup::structured, SdohGroup::combined}) {
        const auto factor = studydetail::group_factor_name(cf, group);
        if (!factor) {
          out << " - |";
        } else {
          out << " " << cell(std::string(to_string(group)) + ":" + *factor) << " |";
        }
      }
      out << "\n";
    }
    out << "\n";
  }

  if (cfg.run_pairs) {
    out << "## Two-exposure adjusted odds ratios\n\n";
    out << "| SDOH pair | NLP-extracted | Structured | Combined |\n|---|---|---|---|\n";
    const auto& roster = combined_sdoh_roster();
    for (size_t i = 0; i < roster.size(); ++i) {
      for (size_t j = i + 1; j < roster.size(); ++j) {
        out << "| " << roster[i].name << ", " << roster[j].name << " |";
        for (const auto group :
             {SdohGroup::nlp, SdohGroup::structured, SdohGroup::combined}) {
          const auto a = studydetail::group_factor_name(roster[i], group);
          const auto b = studydetail::group_factor_name(roster[j], group);
          if (!a || !b) {
            out << " - |";
          } else {
            out << " " << cell(studydetail::pair_model_id(group, *a, *b)) << " |";
          }
        }
        out << "\n";
      }
    }
    out << "\n";
  } else {
    out << "## Two-exposure adjusted odds ratios\n\nPair models disabled in this run.\n\n";
  }

  {
    size_t not_converged = 0;
    for (const auto& r : results) {
      if (!r.converged) ++not_converged;
    }
    out << "## Diagnostics\n\n";
    out << "- Models fitted: " << results.size() << "\n";
    out << "- Non-converged models (flagged *): " << not_converged << "\n";
    out << "- VIF per model: see `vif.csv`\n\n";
  }

  out << "## Configuration\n\n```json\n" << cfg.to_json().dump(2) << "\n```\n";
  out.flush();
  if (!out) throw Error("report.md: write failed");
}

// ---------------------------------------------------------------------------
// Orchestration

struct StudyOutcome {
  IncidenceEstimate incidence;
  MatchSummary match;
  size_t models = 0;
};

inline StudyOutcome run_study(const StudyConfig& cfg, const Workspace& ws) {
  namespace fs = std::filesystem;
  fs::create_directories(ws.dir);
  StudyOutcome outcome;
  auto run_stage = [&](const char* name, auto&& fn) {
    try {
      fn();
    } catch (const StageError&) {
      throw;
    } catch (const std::exception& e) {
      throw StageError(name, e.what());
    }
  };
  run_stage("cohort", [&] { outcome.incidence = stage_cohort(cfg, ws); });
  run_stage("match", [&] { outcome.match = stage_match(cfg, ws); });
  run_stage("extract-structured", [&] { stage_extract_structured(cfg, ws); });
  run_stage("extract-nlp", [&] { stage_extract_nlp(cfg, ws); });
  run_stage("assemble", [&] { stage_assemble(cfg, ws); });
  run_stage("fit", [&] { outcome.models = stage_fit(cfg, ws).size(); });
  run_stage("report", [&] { stage_report(cfg, ws); });
  studydetail::write_json(ws.path("config_echo.json"), [&] {
    nlohmann::json j = cfg.to_json();
    return j;
  }());
  return outcome;
}

}  // namespace ncc
