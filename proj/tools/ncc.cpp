#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "ncc/ehr_store.hpp"
#include "ncc/study.hpp"
#include "ncc/synth.hpp"

namespace {

struct GlobalArgs {
  std::string config_path;
  std::string out_dir = "study_out";
  std::optional<uint64_t> seed;
  std::optional<int> jobs;
};

ncc::StudyConfig resolve_config(const GlobalArgs& args) {
  ncc::StudyConfig cfg;
  if (!args.config_path.empty()) cfg = ncc::StudyConfig::load(args.config_path);
  if (args.seed) cfg.seed = *args.seed;
  if (args.jobs) cfg.jobs = *args.jobs;
  return cfg;
}

void copy_dataset_into_workspace(const std::string& data_dir, const ncc::Workspace& ws) {
  ncc::IngestReport report;
  const ncc::Dataset ds =
      ncc::ingest_dataset(ncc::DatasetPaths::in_dir(data_dir), &report);
  std::filesystem::create_directories(ws.dataset_dir());
  ncc::write_dataset(ds, ncc::DatasetPaths::in_dir(ws.dataset_dir()));
  for (const auto& [table, rows] : report.row_counts) {
    std::printf("%-12s %zu rows\n", table.c_str(), rows);
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Nested case-control study engine for EHR-derived SDOH analyses"};
  app.require_subcommand(1);
  app.fallthrough();  // global flags may follow the subcommand

  GlobalArgs global;
  app.add_option("--config", global.config_path, "Study config JSON");
  app.add_option("--out", global.out_dir, "Workspace directory");
  app.add_option("--seed", global.seed, "Master seed (overrides config)");
  app.add_option("--jobs", global.jobs, "Worker threads (overrides config)");

  // simulate
  auto* simulate = app.add_subcommand("simulate", "Generate a synthetic dataset");
  std::string synth_spec_path;
  simulate->add_option("--spec", synth_spec_path, "Synthetic dataset spec JSON");

  // ingest
  auto* ingest = app.add_subcommand("ingest", "Validate and import a dataset");
  std::string data_dir;
  ingest->add_option("--data", data_dir, "Directory with the five input tables")
      ->required();

  app.add_subcommand("cohort", "Build the base cohort, cases and incidence");

  auto* match = app.add_subcommand("match", "Risk-set match controls to cases");
  std::optional<int> ratio, birth_tol;
  std::optional<std::string> underfill;
  match->add_option("--ratio", ratio, "Controls per case");
  match->add_option("--birth-tol", birth_tol, "Birth year tolerance");
  match->add_option("--underfill", underfill, "keep|drop underfilled sets");

  app.add_subcommand("extract-structured", "Scan codes for structured SDOH hits");
  app.add_subcommand("extract-nlp", "Tag notes and persist factor mentions");
  app.add_subcommand("assemble", "Build the per-subject feature table");
  app.add_subcommand("fit", "Fit the conditional logistic model battery");
  app.add_subcommand("report", "Render the study report");

  auto* run_all = app.add_subcommand("run-all", "Execute the full pipeline");
  std::string run_data_dir, run_synth_spec;
  bool resume = false;
  run_all->add_option("--data", run_data_dir, "Ingest this dataset directory");
  run_all->add_option("--synth-spec", run_synth_spec,
                      "Simulate a dataset from this spec first");
  run_all->add_flag("--resume", resume, "Skip stages whose outputs already exist");

  CLI11_PARSE(app, argc, argv);

  try {
    const ncc::Workspace ws{global.out_dir};
    ncc::StudyConfig cfg = resolve_config(global);

    if (simulate->parsed()) {
      ncc::SynthSpec spec;
      if (!synth_spec_path.empty()) spec = ncc::SynthSpec::load(synth_spec_path);
      const auto out = ncc::generate_synthetic(spec, cfg.seed);
      std::filesystem::create_directories(ws.dataset_dir());
      ncc::write_dataset(out.dataset, ncc::DatasetPaths::in_dir(ws.dataset_dir()));
      ncc::studydetail::write_json(ws.path("planted_effects.json"),
                                   out.planted.to_json());
      std::printf("simulated %zu patients, %zu notes, %zu deaths -> %s\n",
                  out.dataset.patients.size(), out.dataset.notes.size(),
                  out.dataset.deaths.size(), ws.dataset_dir().c_str());
      return 0;
    }
    if (ingest->parsed()) {
      copy_dataset_into_workspace(data_dir, ws);
      return 0;
    }
    if (app.get_subcommand("cohort")->parsed()) {
      const auto est = ncc::stage_cohort(cfg, ws);
      std::printf("members with incidence %s\n", ncc::format_incidence(est).c_str());
      return 0;
    }
    if (match->parsed()) {
      if (ratio) cfg.match.ratio = *ratio;
      if (birth_tol) cfg.match.birth_year_tolerance = *birth_tol;
      if (underfill) {
        if (*underfill == "keep") {
          cfg.underfill = ncc::UnderfillPolicy::keep;
        } else if (*underfill == "drop") {
          cfg.underfill = ncc::UnderfillPolicy::drop;
        } else {
          throw ncc::Error("--underfill must be keep or drop");
        }
      }
      const auto summary = ncc::stage_match(cfg, ws);
      std::printf("matched %zu of %zu cases; %zu control slots (%zu unique)\n",
                  summary.matched_sets, summary.cases, summary.total_control_slots,
                  summary.unique_controls);
      return 0;
    }
    if (app.get_subcommand("extract-structured")->parsed()) {
      ncc::stage_extract_structured(cfg, ws);
      return 0;
    }
    if (app.get_subcommand("extract-nlp")->parsed()) {
      const auto diag = ncc::stage_extract_nlp(cfg, ws);
      std::printf("tagged notes; %zu failed paragraphs\n", diag.failed_paragraphs);
      return 0;
    }
    if (app.get_subcommand("assemble")->parsed()) {
      ncc::stage_assemble(cfg, ws);
      return 0;
    }
    if (app.get_subcommand("fit")->parsed()) {
      const auto results = ncc::stage_fit(cfg, ws);
      std::printf("fitted %zu models -> %s\n", results.size(),
                  ws.path("results.csv").c_str());
      return 0;
    }
    if (app.get_subcommand("report")->parsed()) {
      ncc::stage_report(cfg, ws);
      std::printf("wrote %s\n", ws.path("report.md").c_str());
      return 0;
    }
    if (run_all->parsed()) {
      namespace fs = std::filesystem;
      if (!run_synth_spec.empty() || !fs::exists(ws.dataset_dir())) {
        if (!run_data_dir.empty()) {
          copy_dataset_into_workspace(run_data_dir, ws);
        } else {
          ncc::SynthSpec spec;
          if (!run_synth_spec.empty()) spec = ncc::SynthSpec::load(run_synth_spec);
          const auto out = ncc::generate_synthetic(spec, cfg.seed);
          fs::create_directories(ws.dataset_dir());
          ncc::write_dataset(out.dataset, ncc::DatasetPaths::in_dir(ws.dataset_dir()));
          ncc::studydetail::write_json(ws.path("planted_effects.json"),
                                       out.planted.to_json());
        }
      }
      if (resume) {
        // rerun only missing stages, in pipeline order
        struct Stage {
          const char* output;
          std::function<void()> run;
        };
        const std::vector<Stage> stages = {
            {"cohort.csv", [&] { ncc::stage_cohort(cfg, ws); }},
            {"matched_sets.csv", [&] { ncc::stage_match(cfg, ws); }},
            {"structured_hits.csv", [&] { ncc::stage_extract_structured(cfg, ws); }},
            {"mentions.jsonl", [&] { ncc::stage_extract_nlp(cfg, ws); }},
            {"features.csv", [&] { ncc::stage_assemble(cfg, ws); }},
            {"results.csv", [&] { ncc::stage_fit(cfg, ws); }},
            {"report.md", [&] { ncc::stage_report(cfg, ws); }},
        };
        for (const auto& stage : stages) {
          if (!fs::exists(ws.path(stage.output))) stage.run();
        }
        ncc::studydetail::write_json(ws.path("config_echo.json"), cfg.to_json());
      } else {
        const auto outcome = ncc::run_study(cfg, ws);
        std::printf("cohort incidence %s; %zu matched sets; %zu models\n",
                    ncc::format_incidence(outcome.incidence).c_str(),
                    outcome.match.matched_sets, outcome.models);
      }
      std::printf("workspace: %s\n", ws.dir.c_str());
      return 0;
    }
  } catch (const ncc::StageError& e) {
    std::cerr << "error: " << e.what()
              << "\ncompleted stages remain in the workspace; rerun the failed stage "
                 "after fixing the input.\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
