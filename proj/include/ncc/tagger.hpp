#pragma once

#include <array>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

#include "ncc/error.hpp"
#include "ncc/records.hpp"
#include "ncc/text.hpp"

namespace ncc {

// The 13 note-derived factors; the first eight are SDOH.
enum class FactorLabel : uint8_t {
  social_isolation,
  transition_of_care,
  barriers_to_care,
  financial_insecurity,
  housing_instability,
  food_insecurity,
  violence,
  legal_problems,
  substance_abuse,
  psychiatric_symptoms,
  pain,
  patient_disability,
  suicide_outcome,
};

inline constexpr size_t kFactorLabelCount = 13;
inline constexpr size_t kSdohFactorCount = 8;

inline constexpr std::array<std::string_view, kFactorLabelCount> kFactorLabelNames = {
    "social_isolation",   "transition_of_care", "barriers_to_care",
    "financial_insecurity", "housing_instability", "food_insecurity",
    "violence",           "legal_problems",     "substance_abuse",
    "psychiatric_symptoms", "pain",             "patient_disability",
    "suicide_outcome",
};

inline std::string_view to_string(FactorLabel l) {
  return kFactorLabelNames[static_cast<size_t>(l)];
}

inline std::optional<FactorLabel> parse_factor_label(std::string_view s) {
  for (size_t i = 0; i < kFactorLabelCount; ++i) {
    if (kFactorLabelNames[i] == s) return static_cast<FactorLabel>(i);
  }
  return {};
}

inline bool is_sdoh_factor(FactorLabel l) {
  return static_cast<size_t>(l) < kSdohFactorCount;
}

enum class Presence : uint8_t { missing, not_yes, yes };
enum class Period : uint8_t { missing, not_current, current };

inline std::string_view to_string(Presence p) {
  switch (p) {
    case Presence::yes: return "yes";
    case Presence::not_yes: return "not_yes";
    case Presence::missing: return "missing";
  }
  return "?";
}

inline std::string_view to_string(Period p) {
  switch (p) {
    case Period::current: return "current";
    case Period::not_current: return "not_current";
    case Period::missing: return "missing";
  }
  return "?";
}

inline std::optional<Presence> parse_presence(std::string_view s) {
  if (s == "yes") return Presence::yes;
  if (s == "not_yes") return Presence::not_yes;
  if (s == "missing") return Presence::missing;
  return {};
}

inline std::optional<Period> parse_period(std::string_view s) {
  if (s == "current") return Period::current;
  if (s == "not_current") return Period::not_current;
  if (s == "missing") return Period::missing;
  return {};
}

struct FactorMention {
  std::string note_id;
  size_t begin = 0;  // char offsets into the note text, token-aligned
  size_t end = 0;
  FactorLabel label = FactorLabel::social_isolation;
  Presence presence = Presence::missing;
  Period period = Period::missing;

  bool operator==(const FactorMention&) const = default;
};

inline bool mention_order(const FactorMention& a, const FactorMention& b) {
  if (a.note_id != b.note_id) return a.note_id < b.note_id;
  if (a.begin != b.begin) return a.begin < b.begin;
  if (a.end != b.end) return a.end < b.end;
  return a.label < b.label;
}

// Up to three contiguous sentences (previous, keyword hit, next), truncated
// at note boundaries. Offsets index the source note.
struct Paragraph {
  std::string note_id;
  size_t begin = 0;
  size_t end = 0;
  size_t hit_begin = 0;  // the keyword-bearing sentence
  size_t hit_end = 0;
};

// ---------------------------------------------------------------------------
// Lexicon

struct LexiconEntry {
  FactorLabel label;
  std::vector<std::vector<std::string>> triggers;  // tokenized, lowercased
  std::vector<std::vector<std::string>> negation_cues;
  std::vector<std::vector<std::string>> past_cues;
};

namespace tagdetail {

inline std::vector<std::string> tokenize_phrase(std::string_view phrase) {
  std::vector<std::string> out;
  for (const auto& span : tokenize(phrase)) {
    out.push_back(lowercase(phrase.substr(span.begin, span.size())));
  }
  return out;
}

}  // namespace tagdetail

struct Lexicon {
  std::vector<LexiconEntry> entries;

  static Lexicon load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(path + ": cannot open");
    nlohmann::json root;
    try {
      root = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
      throw Error(path + ": " + e.what());
    }
    if (!root.is_array()) throw Error(path + ": lexicon must be a JSON array");
    Lexicon lex;
    for (const auto& item : root) {
      LexiconEntry entry;
      const std::string label = item.at("label").get<std::string>();
      const auto parsed = parse_factor_label(label);
      if (!parsed) throw Error(path + ": unknown factor label '" + label + "'");
      entry.label = *parsed;
      auto phrases = [&](const char* key) {
        std::vector<std::vector<std::string>> out;
        if (!item.contains(key)) return out;
        for (const auto& p : item[key]) {
          auto toks = tagdetail::tokenize_phrase(p.get<std::string>());
          if (toks.empty()) throw Error(path + ": empty phrase under " + key);
          out.push_back(std::move(toks));
        }
        return out;
      };
      entry.triggers = phrases("triggers");
      if (entry.triggers.empty()) {
        throw Error(path + ": factor '" + label + "' has no triggers");
      }
      entry.negation_cues = phrases("negation_cues");
      entry.past_cues = phrases("past_cues");
      lex.entries.push_back(std::move(entry));
    }
    return lex;
  }
};

// ---------------------------------------------------------------------------
// Prescreen

namespace tagdetail {

struct TokenizedRange {
  std::vector<TextSpan> spans;
  std::vector<std::string> lower;

  void build(std::string_view text, TextSpan range) {
    spans = tokenize(text, range);
    lower.clear();
    lower.reserve(spans.size());
    for (const auto& s : spans) {
      lower.push_back(lowercase(text.substr(s.begin, s.size())));
    }
  }
};

inline bool phrase_at(const std::vector<std::string>& tokens, size_t i,
                      const std::vector<std::string>& phrase) {
  if (i + phrase.size() > tokens.size()) return false;
  for (size_t k = 0; k < phrase.size(); ++k) {
    if (tokens[i + k] != phrase[k]) return false;
  }
  return true;
}

inline bool any_phrase_in(const std::vector<std::string>& tokens,
                          const std::vector<std::vector<std::string>>& phrases,
                          size_t from, size_t to) {
  for (size_t i = from; i < to; ++i) {
    for (const auto& phrase : phrases) {
      if (i + phrase.size() <= to && phrase_at(tokens, i, phrase)) return true;
    }
  }
  return false;
}

}  // namespace tagdetail

// One paragraph per keyword-hit sentence; overlapping paragraphs are allowed.
inline std::vector<Paragraph> prescreen(std::string_view note_text,
                                        const std::string& note_id,
                                        const Lexicon& lexicon) {
  std::vector<Paragraph> out;
  const auto sentences = split_sentences(note_text);
  tagdetail::TokenizedRange toks;
  for (size_t i = 0; i < sentences.size(); ++i) {
    toks.build(note_text, sentences[i]);
    bool hit = false;
    for (const auto& entry : lexicon.entries) {
      if (tagdetail::any_phrase_in(toks.lower, entry.triggers, 0, toks.lower.size())) {
        hit = true;
        break;
      }
    }
    if (!hit) continue;
    Paragraph p;
    p.note_id = note_id;
    p.begin = sentences[i > 0 ? i - 1 : 0].begin;
    p.end = sentences[i + 1 < sentences.size() ? i + 1 : i].end;
    p.hit_begin = sentences[i].begin;
    p.hit_end = sentences[i].end;
    out.push_back(std::move(p));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Reference lexicon tagger

struct TagDiagnostics {
  size_t failed_paragraphs = 0;
  std::vector<std::string> messages;
};

// Mentions carry the trigger span. presence=not_yes when a negation cue
// precedes the trigger within its clause; period=not_current when a past
// cue does. Clauses break at , ; : . ! ? ( ) and newlines.
inline std::vector<FactorMention> tag_paragraph_with_lexicon(
    std::string_view note_text, const Paragraph& paragraph, const Lexicon& lexicon) {
  std::vector<FactorMention> out;
  tagdetail::TokenizedRange toks;
  toks.build(note_text, {paragraph.begin, paragraph.end});
  const size_t n = toks.spans.size();
  if (n == 0) return out;

  // clause id per token: increments when a clause break separates tokens
  std::vector<size_t> clause(n, 0);
  {
    size_t id = 0;
    for (size_t i = 1; i < n; ++i) {
      for (size_t pos = toks.spans[i - 1].end; pos < toks.spans[i].begin; ++pos) {
        const char c = note_text[pos];
        if (c == ',' || c == ';' || c == ':' || c == '.' || c == '!' || c == '?' ||
            c == '(' || c == ')' || c == '\n') {
          ++id;
          break;
        }
      }
      clause[i] = id;
    }
  }

  auto clause_start = [&](size_t i) {
    size_t b = i;
    while (b > 0 && clause[b - 1] == clause[i]) --b;
    return b;
  };
  auto clause_end = [&](size_t i) {  // one past the clause's last token
    size_t e = i + 1;
    while (e < n && clause[e] == clause[i]) ++e;
    return e;
  };

  for (const auto& entry : lexicon.entries) {
    // candidate trigger matches, longest first at each position
    std::vector<std::pair<size_t, size_t>> matches;  // (token index, token count)
    for (size_t i = 0; i < n; ++i) {
      size_t best = 0;
      for (const auto& trig : entry.triggers) {
        if (trig.size() > best && tagdetail::phrase_at(toks.lower, i, trig)) {
          best = trig.size();
        }
      }
      if (best > 0) matches.emplace_back(i, best);
    }
    size_t last_end_tok = 0;
    bool any = false;
    for (const auto& [i, len] : matches) {
      if (any && i < last_end_tok) continue;  // same-label overlap: keep leftmost-longest
      const size_t cb = clause_start(i);
      const size_t ce = clause_end(i);
      // negation looks backward within the clause; temporality looks at the
      // whole clause so trailing cues ("... in the past") also govern
      const bool negated =
          tagdetail::any_phrase_in(toks.lower, entry.negation_cues, cb, i);
      const bool past = tagdetail::any_phrase_in(toks.lower, entry.past_cues, cb, i) ||
                        tagdetail::any_phrase_in(toks.lower, entry.past_cues, i + len, ce);
      FactorMention m;
      m.note_id = paragraph.note_id;
      m.begin = toks.spans[i].begin;
      m.end = toks.spans[i + len - 1].end;
      m.label = entry.label;
      m.presence = negated ? Presence::not_yes : Presence::yes;
      m.period = past ? Period::not_current : Period::current;
      out.push_back(std::move(m));
      last_end_tok = i + len;
      any = true;
    }
  }
  std::sort(out.begin(), out.end(), mention_order);
  return out;
}

// Contract check at the plug-in boundary.
inline void validate_mentions(const std::vector<FactorMention>& mentions,
                              std::string_view note_text) {
  for (const auto& m : mentions) {
    if (!(m.begin < m.end) || m.end > note_text.size()) {
      throw Error("mention span [" + std::to_string(m.begin) + "," +
                  std::to_string(m.end) + ") out of bounds");
    }
    if (!token_aligned(note_text, m.begin, m.end)) {
      throw Error("mention span [" + std::to_string(m.begin) + "," +
                  std::to_string(m.end) + ") not on token boundaries");
    }
  }
}

struct NoteParagraphs {
  const ClinicalNote* note = nullptr;
  std::vector<Paragraph> paragraphs;
};

// Pluggable tagger: paragraphs in, note-relative mentions out. A failing
// paragraph is isolated and contributes no mentions.
class TaggerEngine {
 public:
  virtual ~TaggerEngine() = default;
  virtual std::vector<FactorMention> tag_batch(const std::vector<NoteParagraphs>& batch,
                                               TagDiagnostics* diag) = 0;
};

class LexiconTaggerEngine final : public TaggerEngine {
 public:
  explicit LexiconTaggerEngine(Lexicon lexicon) : lexicon_(std::move(lexicon)) {}

  const Lexicon& lexicon() const { return lexicon_; }

  std::vector<FactorMention> tag_note(const ClinicalNote& note,
                                      const std::vector<Paragraph>& paragraphs,
                                      TagDiagnostics* diag) const {
    std::vector<FactorMention> out;
    for (const auto& p : paragraphs) {
      try {
        auto ms = tag_paragraph_with_lexicon(note.text, p, lexicon_);
        validate_mentions(ms, note.text);
        out.insert(out.end(), ms.begin(), ms.end());
      } catch (const std::exception& e) {
        if (diag) {
          ++diag->failed_paragraphs;
          diag->messages.push_back(note.note_id + ": " + e.what());
        }
      }
    }
    // overlapping paragraphs re-tag shared sentences; drop exact duplicates
    std::sort(out.begin(), out.end(), mention_order);
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
  }

  std::vector<FactorMention> tag_batch(const std::vector<NoteParagraphs>& batch,
                                       TagDiagnostics* diag) override {
    std::vector<FactorMention> out;
    for (const auto& np : batch) {
      auto ms = tag_note(*np.note, np.paragraphs, diag);
      out.insert(out.end(), ms.begin(), ms.end());
    }
    return out;
  }

 private:
  Lexicon lexicon_;
};

// ---------------------------------------------------------------------------
// External tagger: JSON-lines over a subprocess. Each input line is
// {"id": ..., "text": ...}; each output line is {"id", "start", "end",
// "label", "presence", "period"} with offsets relative to the given text.
class ExternalTaggerEngine final : public TaggerEngine {
 public:
  explicit ExternalTaggerEngine(std::string command) : command_(std::move(command)) {}

  std::vector<FactorMention> tag_batch(const std::vector<NoteParagraphs>& batch,
                                       TagDiagnostics* diag) override {
    namespace fs = std::filesystem;
    const fs::path dir = fs::temp_directory_path();
    const auto tag = std::to_string(reinterpret_cast<uintptr_t>(this));
    const fs::path in_path = dir / ("ncc_tagger_in_" + tag + ".jsonl");
    const fs::path out_path = dir / ("ncc_tagger_out_" + tag + ".jsonl");

    struct Slot {
      const NoteParagraphs* np;
      size_t paragraph;
    };
    std::vector<Slot> slots;
    {
      std::ofstream in(in_path, std::ios::binary);
      for (const auto& np : batch) {
        for (size_t k = 0; k < np.paragraphs.size(); ++k) {
          const auto& p = np.paragraphs[k];
          nlohmann::json j;
          j["id"] = std::to_string(slots.size());
          j["text"] = std::string(
              std::string_view(np.note->text).substr(p.begin, p.end - p.begin));
          in << j.dump() << '\n';
          slots.push_back({&np, k});
        }
      }
    }

    const std::string cmd = command_ + " < '" + in_path.string() + "' > '" +
                            out_path.string() + "'";
    const int rc = std::system(cmd.c_str());
    if (rc != 0) {
      std::error_code ec;
      fs::remove(in_path, ec);
      fs::remove(out_path, ec);
      throw Error("external tagger exited with status " + std::to_string(rc));
    }

    std::vector<std::vector<FactorMention>> per_slot(slots.size());
    {
      std::ifstream out_file(out_path);
      std::string line;
      size_t line_no = 0;
      while (std::getline(out_file, line)) {
        ++line_no;
        if (line.empty()) continue;
        try {
          const auto j = nlohmann::json::parse(line);
          const size_t slot = std::stoul(j.at("id").get<std::string>());
          if (slot >= slots.size()) throw Error("unknown paragraph id");
          const auto& p = slots[slot].np->paragraphs[slots[slot].paragraph];
          FactorMention m;
          m.note_id = p.note_id;
          m.begin = p.begin + j.at("start").get<size_t>();
          m.end = p.begin + j.at("end").get<size_t>();
          const auto label = parse_factor_label(j.at("label").get<std::string>());
          const auto presence = parse_presence(j.at("presence").get<std::string>());
          const auto period = parse_period(j.at("period").get<std::string>());
          if (!label || !presence || !period) throw Error("bad enum value");
          m.label = *label;
          m.presence = *presence;
          m.period = *period;
          per_slot[slot].push_back(std::move(m));
        } catch (const std::exception& e) {
          if (diag) {
            ++diag->failed_paragraphs;
            diag->messages.push_back("external tagger line " + std::to_string(line_no) +
                                     ": " + e.what());
          }
        }
      }
    }
    std::error_code ec;
    fs::remove(in_path, ec);
    fs::remove(out_path, ec);

    std::vector<FactorMention> out;
    for (size_t slot = 0; slot < slots.size(); ++slot) {
      try {
        validate_mentions(per_slot[slot], slots[slot].np->note->text);
        out.insert(out.end(), per_slot[slot].begin(), per_slot[slot].end());
      } catch (const std::exception& e) {
        if (diag) {
          ++diag->failed_paragraphs;
          diag->messages.push_back(std::string("external tagger: ") + e.what());
        }
      }
    }
    std::sort(out.begin(), out.end(), mention_order);
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
  }

 private:
  std::string command_;
};

// ---------------------------------------------------------------------------
// Merging and dichotomization

struct MergedFactor {
  Presence presence = Presence::missing;
  Period period = Period::missing;
};

using MergedFactors = std::array<MergedFactor, kFactorLabelCount>;

// Per factor: presence 'yes' wins over 'not_yes' wins over missing; the
// period is resolved among the mentions that carry the winning presence,
// with 'current' prioritized over 'not_current'. Order-independent.
inline MergedFactors merge_window(const std::vector<FactorMention>& mentions) {
  MergedFactors out;
  for (const auto& m : mentions) {
    auto& slot = out[static_cast<size_t>(m.label)];
    if (static_cast<uint8_t>(m.presence) > static_cast<uint8_t>(slot.presence)) {
      slot.presence = m.presence;
      slot.period = m.period;
    } else if (m.presence == slot.presence &&
               static_cast<uint8_t>(m.period) > static_cast<uint8_t>(slot.period)) {
      slot.period = m.period;
    }
  }
  return out;
}

// 1 iff presence 'yes' and period 'current'; every other combination,
// including missing attributes and no mentions at all, is 0.
inline int dichotomize(const MergedFactor& f) {
  return f.presence == Presence::yes && f.period == Period::current ? 1 : 0;
}

// ---------------------------------------------------------------------------
// Mention interchange (gold/prediction JSONL)

inline void write_mentions_jsonl(const std::string& path,
                                 const std::vector<FactorMention>& mentions) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(path + ": cannot open for writing");
  for (const auto& m : mentions) {
    nlohmann::json j;
    j["note_id"] = m.note_id;
    j["start"] = m.begin;
    j["end"] = m.end;
    j["label"] = std::string(to_string(m.label));
    j["presence"] = std::string(to_string(m.presence));
    j["period"] = std::string(to_string(m.period));
    out << j.dump() << '\n';
  }
  out.flush();
  if (!out) throw Error(path + ": write failed");
}

inline std::vector<FactorMention> read_mentions_jsonl(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(path + ": cannot open");
  std::vector<FactorMention> out;
  std::string line;
  size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const std::string context = path + ":" + std::to_string(line_no);
    try {
      const auto j = nlohmann::json::parse(line);
      FactorMention m;
      m.note_id = j.at("note_id").get<std::string>();
      m.begin = j.at("start").get<size_t>();
      m.end = j.at("end").get<size_t>();
      const auto label = parse_factor_label(j.at("label").get<std::string>());
      const auto presence = parse_presence(j.at("presence").get<std::string>());
      const auto period = parse_period(j.at("period").get<std::string>());
      if (!label) throw Error("unknown label");
      if (!presence || !period) throw Error("unknown presence/period");
      m.label = *label;
      m.presence = *presence;
      m.period = *period;
      out.push_back(std::move(m));
    } catch (const std::exception& e) {
      throw Error(context + ": " + e.what());
    }
  }
  return out;
}

}  // namespace ncc
