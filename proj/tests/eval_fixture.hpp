#pragma once

// Ten-document span-evaluation fixture. The expected precision/recall/F
// values below were tallied by hand from the mention layout before the
// evaluator was written; tests compare engine output against them to 1e-9.

#include <vector>

#include "ncc/tagger.hpp"

namespace ncc::test {

struct EvalFixture {
  std::vector<ncc::FactorMention> gold;
  std::vector<ncc::FactorMention> pred;
};

inline ncc::FactorMention fixture_mention(const char* note, size_t b, size_t e,
                                          ncc::FactorLabel label,
                                          ncc::Presence presence = ncc::Presence::yes,
                                          ncc::Period period = ncc::Period::current) {
  ncc::FactorMention m;
  m.note_id = note;
  m.begin = b;
  m.end = e;
  m.label = label;
  m.presence = presence;
  m.period = period;
  return m;
}

inline EvalFixture make_eval_fixture() {
  using ncc::FactorLabel;
  using ncc::Presence;
  using ncc::Period;
  constexpr auto V = FactorLabel::violence;
  constexpr auto H = FactorLabel::housing_instability;
  constexpr auto P = FactorLabel::pain;
  constexpr auto yes = Presence::yes;
  constexpr auto no = Presence::not_yes;
  constexpr auto cur = Period::current;
  constexpr auto past = Period::not_current;

  EvalFixture f;
  auto& g = f.gold;
  auto& p = f.pred;

  g.push_back(fixture_mention("D01", 5, 8, V, yes, cur));
  p.push_back(fixture_mention("D01", 5, 8, V, yes, cur));

  g.push_back(fixture_mention("D02", 5, 8, V, yes, cur));
  p.push_back(fixture_mention("D02", 5, 9, V, yes, cur));

  g.push_back(fixture_mention("D03", 0, 4, H, yes, past));
  g.push_back(fixture_mention("D03", 10, 14, H, yes, cur));
  p.push_back(fixture_mention("D03", 0, 4, H, yes, cur));

  p.push_back(fixture_mention("D04", 3, 7, P, yes, cur));

  g.push_back(fixture_mention("D05", 2, 6, P, yes, cur));

  g.push_back(fixture_mention("D06", 1, 5, V, yes, cur));
  g.push_back(fixture_mention("D06", 6, 9, H, no, cur));
  p.push_back(fixture_mention("D06", 2, 6, V, yes, cur));
  p.push_back(fixture_mention("D06", 6, 9, H, yes, cur));

  g.push_back(fixture_mention("D07", 0, 3, P, yes, cur));
  g.push_back(fixture_mention("D07", 8, 12, P, yes, cur));
  p.push_back(fixture_mention("D07", 2, 5, P, yes, cur));
  p.push_back(fixture_mention("D07", 8, 12, P, no, cur));
  p.push_back(fixture_mention("D07", 20, 24, P, yes, cur));

  g.push_back(fixture_mention("D08", 4, 9, V, yes, cur));
  p.push_back(fixture_mention("D08", 0, 5, V, no, cur));
  p.push_back(fixture_mention("D08", 7, 12, V, yes, cur));

  g.push_back(fixture_mention("D09", 3, 6, H, yes, cur));
  p.push_back(fixture_mention("D09", 3, 6, V, yes, cur));

  g.push_back(fixture_mention("D10", 2, 5, V, no, cur));
  g.push_back(fixture_mention("D10", 9, 13, V, yes, past));
  g.push_back(fixture_mention("D10", 2, 5, H, yes, cur));
  p.push_back(fixture_mention("D10", 2, 5, V, no, cur));
  p.push_back(fixture_mention("D10", 9, 13, V, yes, past));
  p.push_back(fixture_mention("D10", 3, 5, H, yes, cur));

  return f;
}

// Hand-tallied confusion counts and scores (0-100 scale).
struct EvalFixtureExpected {
  // per-label exact (tp, fp, fn)
  static constexpr int v_exact[3] = {3, 5, 3};
  static constexpr int h_exact[3] = {2, 1, 3};
  static constexpr int p_exact[3] = {1, 3, 2};
  static constexpr int v_relaxed[3] = {6, 2, 0};
  static constexpr int h_relaxed[3] = {3, 0, 2};
  static constexpr int p_relaxed[3] = {2, 2, 1};

  static constexpr double micro_exact_p = 40.0;
  static constexpr double micro_exact_r = 100.0 * 6.0 / 14.0;
  static constexpr double micro_exact_f = 100.0 * 12.0 / 29.0;
  static constexpr double micro_relaxed_p = 100.0 * 11.0 / 15.0;
  static constexpr double micro_relaxed_r = 100.0 * 11.0 / 14.0;
  static constexpr double micro_relaxed_f = 100.0 * 22.0 / 29.0;

  static constexpr double macro_exact_p = (37.5 + 100.0 * 2 / 3 + 25.0) / 3.0;
  static constexpr double macro_exact_r = (50.0 + 40.0 + 100.0 / 3.0) / 3.0;
  static constexpr double macro_exact_f = (100.0 * 3 / 7 + 50.0 + 100.0 * 2 / 7) / 3.0;
  static constexpr double macro_relaxed_p = 75.0;
  static constexpr double macro_relaxed_r = (100.0 + 60.0 + 100.0 * 2 / 3) / 3.0;
  static constexpr double macro_relaxed_f =
      (100.0 * 6 / 7 + 75.0 + 100.0 * 4 / 7) / 3.0;

  // presence attribute over exact-matched pairs: yes(tp,fp,fn), not_yes(...)
  static constexpr int presence_exact_yes[3] = {3, 1, 1};
  static constexpr int presence_exact_not_yes[3] = {1, 1, 1};
  static constexpr double presence_exact_micro_f = 100.0 * 8.0 / 12.0;
  static constexpr double presence_exact_macro_f = 62.5;

  static constexpr int period_exact_current[3] = {4, 1, 0};
  static constexpr int period_exact_not_current[3] = {1, 0, 1};
  static constexpr double period_exact_micro_f = 100.0 * 10.0 / 12.0;
  static constexpr double period_exact_macro_f = (800.0 / 9.0 + 200.0 / 3.0) / 2.0;

  // presence over relaxed-matched pairs
  static constexpr int presence_relaxed_yes[3] = {7, 1, 2};
  static constexpr int presence_relaxed_not_yes[3] = {1, 2, 1};
  static constexpr double presence_relaxed_micro_f = 100.0 * 16.0 / 22.0;
  static constexpr double presence_relaxed_macro_f = (100.0 * 98 / 119 + 40.0) / 2.0;

  static constexpr int period_relaxed_current[3] = {9, 1, 0};
  static constexpr int period_relaxed_not_current[3] = {1, 0, 1};
  static constexpr double period_relaxed_micro_f = 100.0 * 20.0 / 22.0;
  static constexpr double period_relaxed_macro_f =
      (100.0 * 18.0 / 19.0 + 200.0 / 3.0) / 2.0;
};

}  // namespace ncc::test
