#pragma once

#include <algorithm>
#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ncc/code_map.hpp"
#include "ncc/cohort.hpp"
#include "ncc/date.hpp"
#include "ncc/error.hpp"
#include "ncc/features.hpp"
#include "ncc/records.hpp"
#include "ncc/rng.hpp"
#include "ncc/tagger.hpp"

namespace ncc {

// A combined-roster SDOH factor to plant. Events materialize as diagnosis
// codes / stop-code encounters (structured source) and trigger-phrase notes
// (NLP source). log_or multiplies the suicide hazard while an event lies in
// the trailing two-year window clamped at cohort entry, matching the
// downstream exposure definition, so the fitted aOR targets exp(log_or).
struct SynthFactorSpec {
  std::string name;
  double events_per_year = 0.0;
  double log_or = 0.0;
  double dx_prob = 0.6;    // chance an event writes structured data
  double note_prob = 0.8;  // chance an event writes a note
};

// A chronic condition: onset date, then repeating diagnosis codes (or NLP
// phrases for source "nlp") until records end. factor_rate_multiplier scales
// every factor event rate for carriers, making the condition a genuine
// confounder when log_or is also nonzero.
struct SynthComorbiditySpec {
  std::string name;
  std::string source;  // mental_health | charlson | nlp
  double prevalence = 0.0;
  double log_or = 0.0;
  double factor_rate_multiplier = 1.0;
  double records_per_year = 1.5;
};

struct SynthSpec {
  int n_patients = 2000;
  StudyPeriod period{Date::from_ymd(2010, 10, 1), Date::from_ymd(2015, 9, 30)};
  int first_record_year_min = 2004;
  int first_record_year_max = 2014;
  int birth_year_min = 1925;
  int birth_year_max = 1994;
  double female_prob = 0.08;
  double encounters_per_year = 2.0;
  double note_at_encounter_prob = 0.35;
  double intake_note_prob = 0.95;
  double dropout_prob = 0.25;
  double prior_attempt_prob = 0.01;
  double suicide_rate_per_year = 0.002;
  double other_death_rate_per_year = 0.010;
  double negated_mention_rate = 0.15;  // denied-phrase notes, relative to event rate
  double past_mention_rate = 0.15;     // history-of-phrase notes

  std::vector<SynthFactorSpec> factors;
  std::vector<SynthComorbiditySpec> comorbidities;

  std::string sdoh_map_path;  // empty = shipped defaults
  std::string mh_map_path;
  std::string cci_map_path;
  std::string lexicon_path;

  void validate() const {
    if (n_patients <= 0) throw Error("synth spec: n_patients must be positive");
    if (!period.valid()) throw Error("synth spec: empty study period");
    for (const double p : {female_prob, note_at_encounter_prob, intake_note_prob,
                           dropout_prob, prior_attempt_prob}) {
      if (p < 0.0 || p > 1.0) throw Error("synth spec: probability outside [0,1]");
    }
    for (const double r :
         {encounters_per_year, suicide_rate_per_year, other_death_rate_per_year,
          negated_mention_rate, past_mention_rate}) {
      if (r < 0.0) throw Error("synth spec: rate must be nonnegative");
    }
    if (first_record_year_max < first_record_year_min ||
        birth_year_max < birth_year_min) {
      throw Error("synth spec: empty year range");
    }
    for (const auto& f : factors) {
      if (f.events_per_year < 0) throw Error("synth spec: factor rate must be nonnegative");
      if (f.dx_prob < 0 || f.dx_prob > 1 || f.note_prob < 0 || f.note_prob > 1) {
        throw Error("synth spec: factor probabilities outside [0,1]");
      }
      bool known = false;
      for (const auto& cf : combined_sdoh_roster()) known |= cf.name == f.name;
      if (!known) throw Error("synth spec: unknown factor '" + f.name + "'");
    }
    for (const auto& c : comorbidities) {
      if (c.prevalence < 0 || c.prevalence > 1) {
        throw Error("synth spec: prevalence outside [0,1]");
      }
      if (c.source != "mental_health" && c.source != "charlson" && c.source != "nlp") {
        throw Error("synth spec: unknown comorbidity source '" + c.source + "'");
      }
    }
  }

  static SynthSpec from_json(const nlohmann::json& j);

  static SynthSpec load(const std::string& path) {
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
};

inline SynthSpec SynthSpec::from_json(const nlohmann::json& j) {
  SynthSpec s;
  auto get = [&](const char* key, auto& field) {
    if (j.contains(key)) field = j.at(key).get<std::decay_t<decltype(field)>>();
  };
  get("n_patients", s.n_patients);
  if (j.contains("period")) {
    const auto start = Date::parse(j["period"].at("start").get<std::string>());
    const auto end = Date::parse(j["period"].at("end").get<std::string>());
    if (!start || !end) throw Error("synth spec: bad period dates");
    s.period = {*start, *end};
  }
  get("first_record_year_min", s.first_record_year_min);
  get("first_record_year_max", s.first_record_year_max);
  get("birth_year_min", s.birth_year_min);
  get("birth_year_max", s.birth_year_max);
  get("female_prob", s.female_prob);
  get("encounters_per_year", s.encounters_per_year);
  get("note_at_encounter_prob", s.note_at_encounter_prob);
  get("intake_note_prob", s.intake_note_prob);
  get("dropout_prob", s.dropout_prob);
  get("prior_attempt_prob", s.prior_attempt_prob);
  get("suicide_rate_per_year", s.suicide_rate_per_year);
  get("other_death_rate_per_year", s.other_death_rate_per_year);
  get("negated_mention_rate", s.negated_mention_rate);
  get("past_mention_rate", s.past_mention_rate);
  get("sdoh_map_path", s.sdoh_map_path);
  get("mh_map_path", s.mh_map_path);
  get("cci_map_path", s.cci_map_path);
  get("lexicon_path", s.lexicon_path);
  if (j.contains("factors")) {
    for (const auto& f : j["factors"]) {
      SynthFactorSpec fs;
      fs.name = f.at("name").get<std::string>();
      if (f.contains("events_per_year")) fs.events_per_year = f["events_per_year"].get<double>();
      if (f.contains("log_or")) fs.log_or = f["log_or"].get<double>();
      if (f.contains("dx_prob")) fs.dx_prob = f["dx_prob"].get<double>();
      if (f.contains("note_prob")) fs.note_prob = f["note_prob"].get<double>();
      s.factors.push_back(std::move(fs));
    }
  }
  if (j.contains("comorbidities")) {
    for (const auto& c : j["comorbidities"]) {
      SynthComorbiditySpec cs;
      cs.name = c.at("name").get<std::string>();
      cs.source = c.at("source").get<std::string>();
      if (c.contains("prevalence")) cs.prevalence = c["prevalence"].get<double>();
      if (c.contains("log_or")) cs.log_or = c["log_or"].get<double>();
      if (c.contains("factor_rate_multiplier")) {
        cs.factor_rate_multiplier = c["factor_rate_multiplier"].get<double>();
      }
      if (c.contains("records_per_year")) cs.records_per_year = c["records_per_year"].get<double>();
      s.comorbidities.push_back(std::move(cs));
    }
  }
  s.validate();
  return s;
}

struct PlantedEffects {
  std::map<std::string, double> factor_log_or;
  std::map<std::string, double> comorbidity_log_or;

  nlohmann::json to_json() const {
    nlohmann::json j;
    j["factor_log_or"] = factor_log_or;
    j["comorbidity_log_or"] = comorbidity_log_or;
    return j;
  }
};

struct SynthOutput {
  Dataset dataset;
  PlantedEffects planted;
};

namespace synthdetail {

inline std::string default_data_path(const std::string& configured, const char* name) {
  if (!configured.empty()) return configured;
#ifdef NCC_DATA_DIR
  return std::string(NCC_DATA_DIR) + "/" + name;
#else
  return name;
#endif
}

struct FactorPools {
  std::vector<std::string> dx_codes;
  std::vector<int> stop_codes;
  std::vector<std::string> phrases;
};

struct Materialization {
  std::map<std::string, FactorPools> factor_pools;             // by combined name
  std::map<std::string, std::vector<std::string>> comorb_codes;  // mh + charlson
  std::map<std::string, std::vector<std::string>> nlp_phrases;   // by factor label
};

inline std::vector<std::string> phrases_for_label(const Lexicon& lexicon,
                                                  FactorLabel label, size_t limit) {
  std::vector<std::string> out;
  for (const auto& entry : lexicon.entries) {
    if (entry.label != label) continue;
    for (const auto& trigger : entry.triggers) {
      std::string phrase;
      for (size_t i = 0; i < trigger.size(); ++i) {
        if (i) phrase += ' ';
        phrase += trigger[i];
      }
      out.push_back(std::move(phrase));
      if (out.size() >= limit) return out;
    }
  }
  return out;
}

inline std::vector<std::string> codes_for_factor(const CodeMapSet& maps,
                                                 const std::string& factor, size_t limit) {
  std::vector<std::string> out;
  for (const auto& m : maps.maps()) {
    if (m.factor_name != factor) continue;
    for (const auto& code : m.icd9_patterns) {
      out.push_back(code);
      if (out.size() >= limit) return out;
    }
  }
  return out;
}

inline Materialization build_materialization(const SynthSpec& spec) {
  const auto sdoh = compile_code_map(
      default_data_path(spec.sdoh_map_path, "sdoh_structured_codes.json"));
  const auto mh =
      compile_code_map(default_data_path(spec.mh_map_path, "mental_health_codes.json"));
  const auto cci =
      compile_code_map(default_data_path(spec.cci_map_path, "charlson_codes.json"));
  const auto lexicon = Lexicon::load(default_data_path(spec.lexicon_path, "lexicon.json"));

  Materialization t;
  for (const auto& cf : combined_sdoh_roster()) {
    FactorPools pools;
    if (cf.structured_source) {
      pools.dx_codes = codes_for_factor(sdoh, *cf.structured_source, 6);
      for (const auto& m : sdoh.maps()) {
        if (m.factor_name == *cf.structured_source) pools.stop_codes = m.stop_codes;
      }
    }
    if (cf.nlp_source) {
      pools.phrases = phrases_for_label(lexicon, *cf.nlp_source, 6);
    }
    t.factor_pools[cf.name] = std::move(pools);
  }
  for (const auto& name : mh.factor_names()) {
    t.comorb_codes[name] = codes_for_factor(mh, name, 4);
  }
  for (const auto& name : cci.factor_names()) {
    t.comorb_codes[name] = codes_for_factor(cci, name, 4);
  }
  for (size_t l = 0; l < kFactorLabelCount; ++l) {
    const auto label = static_cast<FactorLabel>(l);
    t.nlp_phrases[std::string(to_string(label))] = phrases_for_label(lexicon, label, 6);
  }
  return t;
}

inline const std::vector<std::string>& neutral_sentences() {
  static const std::vector<std::string> fillers = {
      "Vital signs stable.",
      "Medication list reviewed and continued.",
      "Follow-up scheduled in three months.",
      "Patient seen in clinic today.",
      "Labs reviewed with patient.",
      "Plan discussed with patient.",
      "Patient tolerating treatment well.",
  };
  return fillers;
}

inline std::string affirmed_sentence(const std::string& phrase, Rng& rng) {
  switch (rng.below(3)) {
    case 0: return "Patient reports " + phrase + " this week.";
    case 1: return "Patient is currently dealing with " + phrase + ".";
    default: return "Veteran describes ongoing " + phrase + ".";
  }
}

inline std::string negated_sentence(const std::string& phrase, Rng& rng) {
  return rng.bernoulli(0.5) ? "Patient denies " + phrase + "."
                            : "No evidence of " + phrase + " at this visit.";
}

inline std::string past_sentence(const std::string& phrase, Rng& rng) {
  return rng.bernoulli(0.5)
             ? "History of " + phrase + " several years ago."
             : "Previously experienced " + phrase + ", resolved since.";
}

inline std::string wrap_note_text(const std::string& core, Rng& rng) {
  const auto& fillers = neutral_sentences();
  std::string text = fillers[rng.below(fillers.size())];
  text += " " + core;
  text += " " + fillers[rng.below(fillers.size())];
  return text;
}

inline NoteType random_study_note_type(Rng& rng) {
  static const NoteType types[7] = {
      NoteType::emergency_department, NoteType::nursing_assessment,
      NoteType::primary_care,         NoteType::hospital_admission,
      NoteType::inpatient_progress,   NoteType::pain_management,
      NoteType::discharge_summary,
  };
  return types[rng.below(7)];
}

inline Date uniform_date(Date lo, Date hi, Rng& rng) {  // inclusive bounds
  if (hi < lo) return lo;
  return lo.plus_days(static_cast<int>(rng.below(static_cast<uint64_t>(hi - lo) + 1)));
}

inline const std::vector<std::string>& suicide_cause_pool() {
  static const std::vector<std::string> causes = {"X60",   "X70", "X72",  "X74.8",
                                                  "X80",   "X84", "Y87.0", "U03.9"};
  return causes;
}

inline const std::vector<std::string>& other_cause_pool() {
  static const std::vector<std::string> causes = {"I21.9", "C34.9", "J44.9", "I64",
                                                  "E11.9"};
  return causes;
}

struct PatientDraft {
  PatientRecord patient;
  std::vector<std::pair<Encounter, int>> encounters;  // with draw sequence
  std::vector<std::pair<DiagnosisRecord, int>> diagnoses;
  std::vector<std::pair<ClinicalNote, int>> notes;
  std::optional<DeathRecord> death;
};

inline void generate_patient(const SynthSpec& spec, const Materialization& tables,
                             const std::string& pid, Rng& rng, PatientDraft& out) {
  int seq = 0;
  auto add_encounter = [&](Date d, std::optional<int> stop) {
    Encounter e;
    e.patient_id = pid;
    e.date = d;
    e.stop_code = stop;
    out.encounters.emplace_back(std::move(e), seq++);
  };
  auto add_dx = [&](Date d, const std::string& code) {
    out.diagnoses.emplace_back(DiagnosisRecord{pid, d, code}, seq++);
  };
  auto add_note = [&](Date d, NoteType type, std::string text) {
    ClinicalNote n;
    n.patient_id = pid;
    n.date = d;
    n.note_type = type;
    n.text = std::move(text);
    out.notes.emplace_back(std::move(n), seq++);
  };

  // demographics
  out.patient.patient_id = pid;
  {
    const int by = rng.range(spec.birth_year_min, spec.birth_year_max);
    const int bm = rng.range(1, 12);
    const int bd = rng.range(1, Date::days_in_month(by, bm));
    out.patient.birth_date = Date::from_ymd(by, bm, bd);
  }
  out.patient.sex = rng.bernoulli(spec.female_prob) ? Sex::female : Sex::male;
  {
    const double u = rng.uniform();
    out.patient.race = u < 0.77   ? Race::white
                       : u < 0.93 ? Race::black
                       : u < 0.94 ? Race::asian
                       : u < 0.95 ? Race::american_indian
                       : u < 0.96 ? Race::pacific_islander
                                  : Race::unknown;
  }
  {
    const double u = rng.uniform();
    out.patient.marital_status = u < 0.27   ? MaritalStatus::married
                                 : u < 0.32 ? MaritalStatus::single
                                 : u < 0.42 ? MaritalStatus::divorced
                                 : u < 0.45 ? MaritalStatus::widowed
                                            : MaritalStatus::unknown;
  }

  // observation span
  const int fy = rng.range(spec.first_record_year_min, spec.first_record_year_max);
  const int fm = rng.range(1, 12);
  const Date first_record = Date::from_ymd(fy, fm, rng.range(1, Date::days_in_month(fy, fm)));
  const Date horizon = spec.period.end.plus_days(365);
  Date records_end = horizon;
  if (rng.bernoulli(spec.dropout_prob) && horizon - first_record > 90) {
    records_end = uniform_date(first_record.plus_days(90), horizon, rng);
  }
  const double span_years = static_cast<double>(records_end - first_record) / kDaysPerYear;

  const Date entry_proxy = std::max({first_record.plus_years(2),
                                     out.patient.birth_date.plus_years(18),
                                     spec.period.start});

  // chronic comorbidities
  struct ActiveComorbidity {
    const SynthComorbiditySpec* spec;
    Date onset;
  };
  std::vector<ActiveComorbidity> present;
  double factor_rate_mult = 1.0;
  for (const auto& c : spec.comorbidities) {
    if (!rng.bernoulli(c.prevalence)) continue;
    present.push_back({&c, uniform_date(first_record, records_end, rng)});
    factor_rate_mult *= c.factor_rate_multiplier;
  }

  // factor events
  struct FactorEvents {
    const SynthFactorSpec* spec;
    std::vector<Date> dates;
  };
  std::vector<FactorEvents> events;
  for (const auto& f : spec.factors) {
    FactorEvents fe;
    fe.spec = &f;
    const int n = rng.poisson(f.events_per_year * factor_rate_mult * span_years);
    for (int k = 0; k < n; ++k) fe.dates.push_back(uniform_date(first_record, records_end, rng));
    std::sort(fe.dates.begin(), fe.dates.end());
    events.push_back(std::move(fe));
  }

  // Competing death times. Hazards run only while the patient is under
  // observation (through records_end): a death outside the record span would
  // be censored at the last record downstream anyway, and sampling it would
  // make dropout censoring depend on the outcome.
  std::optional<Date> other_death;
  if (spec.other_death_rate_per_year > 0) {
    const double days = rng.exponential(spec.other_death_rate_per_year / kDaysPerYear);
    if (days < static_cast<double>(records_end - first_record)) {
      other_death = first_record.plus_days(static_cast<int>(days));
    }
  }

  std::optional<Date> suicide_death;
  if (spec.suicide_rate_per_year > 0) {
    // piecewise-constant hazard over exposure status breakpoints
    std::vector<Date> breaks = {first_record};
    for (const auto& fe : events) {
      if (fe.spec->log_or == 0.0) continue;
      for (const Date e : fe.dates) {
        if (e < entry_proxy) continue;  // pre-entry events never activate
        breaks.push_back(e.plus_days(1));
        const Date off = e.plus_years(2);
        breaks.push_back(off);
        breaks.push_back(off.plus_days(1));
        breaks.push_back(off.plus_days(2));
      }
    }
    for (const auto& ac : present) {
      if (ac.spec->log_or != 0.0) breaks.push_back(ac.onset);
    }
    breaks.push_back(records_end.plus_days(1));
    std::sort(breaks.begin(), breaks.end());
    breaks.erase(std::unique(breaks.begin(), breaks.end()), breaks.end());
    breaks.erase(std::remove_if(breaks.begin(), breaks.end(),
                                [&](Date d) {
                                  return d < first_record || d > records_end.plus_days(1);
                                }),
                 breaks.end());

    auto log_mult_at = [&](Date t) {
      double lm = 0.0;
      for (const auto& fe : events) {
        if (fe.spec->log_or == 0.0) continue;
        const Date win_start = std::max(entry_proxy, t.plus_years(-2));
        for (const Date e : fe.dates) {
          if (win_start <= e && e < t) {
            lm += fe.spec->log_or;
            break;
          }
        }
      }
      for (const auto& ac : present) {
        if (ac.spec->log_or != 0.0 && ac.onset <= t) lm += ac.spec->log_or;
      }
      return lm;
    };

    for (size_t k = 0; k + 1 < breaks.size() && !suicide_death; ++k) {
      const Date a = breaks[k];
      const Date b = breaks[k + 1];
      if (!(a < b)) continue;
      const double rate_day =
          spec.suicide_rate_per_year / kDaysPerYear * std::exp(log_mult_at(a));
      if (rate_day <= 0.0) continue;
      const double t = rng.exponential(rate_day);
      if (t < static_cast<double>(b - a)) {
        suicide_death = a.plus_days(static_cast<int>(t));
      }
    }
    if (suicide_death && *suicide_death > records_end) suicide_death.reset();
  }

  std::optional<Date> death_date;
  bool death_is_suicide = false;
  if (suicide_death && (!other_death || *suicide_death <= *other_death)) {
    death_date = suicide_death;
    death_is_suicide = true;
  } else if (other_death) {
    death_date = other_death;
  }

  // records: index visit, intake note, routine encounters
  add_encounter(first_record, 323);
  if (rng.bernoulli(spec.intake_note_prob)) {
    const auto& fillers = neutral_sentences();
    add_note(first_record, NoteType::primary_care,
             fillers[rng.below(fillers.size())] + " " + fillers[rng.below(fillers.size())]);
  }
  {
    const int n = rng.poisson(spec.encounters_per_year * span_years);
    static const int benign_stops[3] = {301, 323, 350};
    for (int k = 0; k < n; ++k) {
      const Date d = uniform_date(first_record, records_end, rng);
      add_encounter(d, rng.bernoulli(0.5)
                           ? std::optional<int>(benign_stops[rng.below(3)])
                           : std::nullopt);
      if (rng.bernoulli(spec.note_at_encounter_prob)) {
        const auto& fillers = neutral_sentences();
        const NoteType type =
            rng.bernoulli(0.1) ? NoteType::other : random_study_note_type(rng);
        add_note(d, type,
                 fillers[rng.below(fillers.size())] + " " +
                     fillers[rng.below(fillers.size())]);
      }
    }
  }

  // comorbidity records
  for (const auto& ac : present) {
    const double years = static_cast<double>(records_end - ac.onset) / kDaysPerYear;
    const int repeats = 1 + rng.poisson(ac.spec->records_per_year * std::max(0.0, years));
    for (int k = 0; k < repeats; ++k) {
      const Date d = k == 0 ? ac.onset : uniform_date(ac.onset, records_end, rng);
      if (ac.spec->source == "nlp") {
        const auto it = tables.nlp_phrases.find(ac.spec->name);
        if (it == tables.nlp_phrases.end() || it->second.empty()) {
          throw Error("synth: no phrases for nlp comorbidity '" + ac.spec->name + "'");
        }
        const auto& phrase = it->second[rng.below(it->second.size())];
        add_note(d, random_study_note_type(rng),
                 wrap_note_text(affirmed_sentence(phrase, rng), rng));
      } else {
        const auto it = tables.comorb_codes.find(ac.spec->name);
        if (it == tables.comorb_codes.end() || it->second.empty()) {
          throw Error("synth: no codes for comorbidity '" + ac.spec->name + "'");
        }
        add_dx(d, it->second[rng.below(it->second.size())]);
      }
    }
  }

  // factor events and tagger noise
  for (const auto& fe : events) {
    const auto& pools = tables.factor_pools.at(fe.spec->name);
    for (const Date e : fe.dates) {
      bool dx = !pools.dx_codes.empty() && rng.bernoulli(fe.spec->dx_prob);
      bool note = !pools.phrases.empty() && rng.bernoulli(fe.spec->note_prob);
      if (!dx && !note) {
        if (!pools.phrases.empty()) {
          note = true;
        } else if (!pools.dx_codes.empty()) {
          dx = true;
        }
      }
      if (dx) {
        if (!pools.stop_codes.empty() && rng.bernoulli(0.3)) {
          add_encounter(e, pools.stop_codes[rng.below(pools.stop_codes.size())]);
        } else {
          add_dx(e, pools.dx_codes[rng.below(pools.dx_codes.size())]);
        }
      }
      if (note) {
        const auto& phrase = pools.phrases[rng.below(pools.phrases.size())];
        add_note(e, random_study_note_type(rng),
                 wrap_note_text(affirmed_sentence(phrase, rng), rng));
      }
    }
    if (!pools.phrases.empty()) {
      const int n_neg =
          rng.poisson(fe.spec->events_per_year * spec.negated_mention_rate * span_years);
      for (int k = 0; k < n_neg; ++k) {
        const auto& phrase = pools.phrases[rng.below(pools.phrases.size())];
        add_note(uniform_date(first_record, records_end, rng), random_study_note_type(rng),
                 wrap_note_text(negated_sentence(phrase, rng), rng));
      }
      const int n_past =
          rng.poisson(fe.spec->events_per_year * spec.past_mention_rate * span_years);
      for (int k = 0; k < n_past; ++k) {
        const auto& phrase = pools.phrases[rng.below(pools.phrases.size())];
        add_note(uniform_date(first_record, records_end, rng), random_study_note_type(rng),
                 wrap_note_text(past_sentence(phrase, rng), rng));
      }
    }
  }

  // prior suicide attempt before entry
  if (rng.bernoulli(spec.prior_attempt_prob)) {
    const Date latest = std::min(entry_proxy.plus_days(-1), records_end);
    if (first_record <= latest) {
      add_dx(uniform_date(first_record, latest, rng), "E950.9");
    }
  }

  // death: drop post-death records, then a terminal encounter on the day
  if (death_date) {
    const Date d = *death_date;
    auto after_death = [&](Date date) { return date > d; };
    std::erase_if(out.encounters, [&](const auto& e) { return after_death(e.first.date); });
    std::erase_if(out.diagnoses, [&](const auto& e) { return after_death(e.first.date); });
    std::erase_if(out.notes, [&](const auto& e) { return after_death(e.first.date); });
    add_encounter(d, 323);
    DeathRecord death;
    death.patient_id = pid;
    death.death_date = d;
    const auto& pool = death_is_suicide ? suicide_cause_pool() : other_cause_pool();
    death.underlying_cause = pool[rng.below(pool.size())];
    out.death = death;
  }

  auto by_date_seq = [](const auto& a, const auto& b) {
    if (a.first.date != b.first.date) return a.first.date < b.first.date;
    return a.second < b.second;
  };
  std::sort(out.encounters.begin(), out.encounters.end(), by_date_seq);
  std::sort(out.diagnoses.begin(), out.diagnoses.end(), by_date_seq);
  std::sort(out.notes.begin(), out.notes.end(), by_date_seq);
}

}  // namespace synthdetail

// Deterministic for a fixed (spec, seed): per-patient substreams plus fixed
// assembly order make the output byte-identical across runs and platforms.
inline SynthOutput generate_synthetic(const SynthSpec& spec, uint64_t seed) {
  spec.validate();
  const auto tables = synthdetail::build_materialization(spec);

  SynthOutput out;
  for (const auto& f : spec.factors) out.planted.factor_log_or[f.name] = f.log_or;
  for (const auto& c : spec.comorbidities) {
    out.planted.comorbidity_log_or[c.name] = c.log_or;
  }

  for (int i = 1; i <= spec.n_patients; ++i) {
    char pid[16];
    std::snprintf(pid, sizeof(pid), "P%06d", i);
    Rng rng = substream(seed, pid);
    synthdetail::PatientDraft draft;
    synthdetail::generate_patient(spec, tables, pid, rng, draft);

    out.dataset.patients.push_back(std::move(draft.patient));
    for (auto& [e, s] : draft.encounters) out.dataset.encounters.push_back(std::move(e));
    for (auto& [d, s] : draft.diagnoses) out.dataset.diagnoses.push_back(std::move(d));
    for (auto& [n, s] : draft.notes) {
      char nid[24];
      std::snprintf(nid, sizeof(nid), "N%06zu", out.dataset.notes.size() + 1);
      n.note_id = nid;
      out.dataset.notes.push_back(std::move(n));
    }
    if (draft.death) out.dataset.deaths.push_back(std::move(*draft.death));
  }
  out.dataset.finalize();
  return out;
}

}  // namespace ncc
