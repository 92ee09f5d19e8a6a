#include <catch2/catch_amalgamated.hpp>

#include "ncc/tagger.hpp"
#include "test_helpers.hpp"

using namespace ncc;
using namespace ncc::test;

namespace {

ClinicalNote make_note(const std::string& id, const std::string& text) {
  ClinicalNote n;
  n.note_id = id;
  n.patient_id = "P1";
  n.date = Date::from_ymd(2013, 1, 1);
  n.note_type = NoteType::primary_care;
  n.text = text;
  return n;
}

}  // namespace

TEST_CASE("external tagger speaks the JSON-lines protocol with offset translation") {
  const Lexicon lexicon = Lexicon::load(data_file("lexicon.json"));
  const ClinicalNote note =
      make_note("N9", "Intro sentence here. Patient is homeless today. Closing line.");
  const auto paragraphs = prescreen(note.text, note.note_id, lexicon);
  REQUIRE_FALSE(paragraphs.empty());

  ExternalTaggerEngine engine(NCC_ECHO_TAGGER_BIN);
  std::vector<NoteParagraphs> batch(1);
  batch[0].note = &note;
  batch[0].paragraphs = paragraphs;
  TagDiagnostics diag;
  const auto mentions = engine.tag_batch(batch, &diag);

  REQUIRE(mentions.size() == 1);
  CHECK(mentions[0].note_id == "N9");
  CHECK(note.text.substr(mentions[0].begin, mentions[0].end - mentions[0].begin) ==
        "homeless");
  CHECK(mentions[0].label == FactorLabel::housing_instability);
  CHECK(mentions[0].presence == Presence::yes);
  CHECK(mentions[0].period == Period::current);
  CHECK(diag.failed_paragraphs == 0);

  // the external result agrees with the reference tagger on this span
  LexiconTaggerEngine reference(lexicon);
  const auto ref = reference.tag_note(note, paragraphs, nullptr);
  bool same_span = false;
  for (const auto& m : ref) {
    same_span |= m.begin == mentions[0].begin && m.end == mentions[0].end &&
                 m.label == mentions[0].label;
  }
  CHECK(same_span);
}

TEST_CASE("a failing external command is reported") {
  const Lexicon lexicon = Lexicon::load(data_file("lexicon.json"));
  const ClinicalNote note = make_note("N1", "Patient is homeless.");
  std::vector<NoteParagraphs> batch(1);
  batch[0].note = &note;
  batch[0].paragraphs = prescreen(note.text, note.note_id, lexicon);
  ExternalTaggerEngine engine("false");
  TagDiagnostics diag;
  CHECK_THROWS_AS(engine.tag_batch(batch, &diag), Error);
}

TEST_CASE("malformed external output lines are isolated, not fatal") {
  const Lexicon lexicon = Lexicon::load(data_file("lexicon.json"));
  const ClinicalNote note = make_note("N1", "Patient is homeless.");
  std::vector<NoteParagraphs> batch(1);
  batch[0].note = &note;
  batch[0].paragraphs = prescreen(note.text, note.note_id, lexicon);

  // a garbage line precedes the real tagger output
  const std::string cmd = std::string("{ echo 'not json'; ") + NCC_ECHO_TAGGER_BIN + "; }";
  ExternalTaggerEngine engine(cmd);
  TagDiagnostics diag;
  const auto mentions = engine.tag_batch(batch, &diag);
  CHECK(mentions.size() == 1);
  CHECK(diag.failed_paragraphs == 1);
}
