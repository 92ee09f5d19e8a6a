#pragma once

#include <algorithm>
#include <array>
#include <map>
#include <string>
#include <vector>

#include "ncc/error.hpp"
#include "ncc/tagger.hpp"

namespace ncc {

enum class MatchMode { exact, relaxed };

// Counts on the 0-100 scale used by the report tables.
struct Prf {
  size_t tp = 0;
  size_t fp = 0;
  size_t fn = 0;

  double precision() const {
    return tp + fp == 0 ? 0.0 : 100.0 * static_cast<double>(tp) / static_cast<double>(tp + fp);
  }
  double recall() const {
    return tp + fn == 0 ? 0.0 : 100.0 * static_cast<double>(tp) / static_cast<double>(tp + fn);
  }
  double f_score() const {
    const double p = precision(), r = recall();
    return p + r == 0.0 ? 0.0 : 2.0 * p * r / (p + r);
  }

  Prf& operator+=(const Prf& o) {
    tp += o.tp;
    fp += o.fp;
    fn += o.fn;
    return *this;
  }
};

struct MacroPrf {
  double precision = 0.0;
  double recall = 0.0;
  double f_score = 0.0;
  size_t labels = 0;  // labels with nonzero gold support
};

// Attribute agreement over span-matched mention pairs.
struct AttributePrf {
  std::map<std::string, Prf> per_class;  // "yes"/"not_yes" or "current"/"not_current"
  Prf micro;
  MacroPrf macro;
};

struct ModeEval {
  std::array<Prf, kFactorLabelCount> per_label;
  Prf micro;
  MacroPrf macro;
  AttributePrf presence;
  AttributePrf period;
};

struct EvalReport {
  std::array<size_t, kFactorLabelCount> support{};  // gold mentions per label
  ModeEval exact;
  ModeEval relaxed;
};

namespace evaldetail {

inline bool spans_overlap(const FactorMention& a, const FactorMention& b) {
  return std::max(a.begin, b.begin) < std::min(a.end, b.end);
}

struct Pair {
  const FactorMention* gold;
  const FactorMention* pred;
};

// Greedy leftmost one-to-one alignment within one note and label.
inline void align(const std::vector<const FactorMention*>& gold,
                  const std::vector<const FactorMention*>& pred, MatchMode mode,
                  Prf& counts, std::vector<Pair>& pairs) {
  std::vector<bool> used(pred.size(), false);
  for (const auto* g : gold) {
    bool matched = false;
    for (size_t j = 0; j < pred.size(); ++j) {
      if (used[j]) continue;
      const bool hit = mode == MatchMode::exact
                           ? (pred[j]->begin == g->begin && pred[j]->end == g->end)
                           : spans_overlap(*pred[j], *g);
      if (hit) {
        used[j] = true;
        matched = true;
        ++counts.tp;
        pairs.push_back({g, pred[j]});
        break;
      }
    }
    if (!matched) ++counts.fn;
  }
  for (size_t j = 0; j < pred.size(); ++j) {
    if (!used[j]) ++counts.fp;
  }
}

template <typename ValueOf>
AttributePrf attribute_prf(const std::vector<Pair>& pairs, ValueOf value_of,
                           std::string_view missing_name) {
  AttributePrf out;
  for (const auto& pair : pairs) {
    const std::string g(value_of(*pair.gold));
    const std::string p(value_of(*pair.pred));
    if (g == p) {
      if (g != missing_name) ++out.per_class[g].tp;
    } else {
      if (p != missing_name) ++out.per_class[p].fp;
      if (g != missing_name) ++out.per_class[g].fn;
    }
  }
  double sp = 0, sr = 0, sf = 0;
  for (const auto& [name, prf] : out.per_class) {
    out.micro += prf;
    if (prf.tp + prf.fn == 0) continue;  // no gold support for this class
    sp += prf.precision();
    sr += prf.recall();
    sf += prf.f_score();
    ++out.macro.labels;
  }
  if (out.macro.labels > 0) {
    out.macro.precision = sp / static_cast<double>(out.macro.labels);
    out.macro.recall = sr / static_cast<double>(out.macro.labels);
    out.macro.f_score = sf / static_cast<double>(out.macro.labels);
  }
  return out;
}

}  // namespace evaldetail

// Span-level scoring of predictions against gold mentions. Exact matching
// requires identical [begin, end) and label; relaxed requires nonzero span
// overlap and equal label. Macro averages skip labels with no gold support.
// Overlapping same-label gold annotations are rejected as malformed.
inline EvalReport evaluate(const std::vector<FactorMention>& gold,
                           const std::vector<FactorMention>& predicted) {
  // bucket by (note, label), deterministic order
  using Key = std::pair<std::string, size_t>;
  std::map<Key, std::pair<std::vector<const FactorMention*>,
                          std::vector<const FactorMention*>>>
      buckets;
  for (const auto& g : gold) {
    buckets[{g.note_id, static_cast<size_t>(g.label)}].first.push_back(&g);
  }
  for (const auto& p : predicted) {
    buckets[{p.note_id, static_cast<size_t>(p.label)}].second.push_back(&p);
  }

  EvalReport report;
  std::vector<evaldetail::Pair> exact_pairs, relaxed_pairs;
  for (auto& [key, bucket] : buckets) {
    auto& [golds, preds] = bucket;
    auto by_span = [](const FactorMention* a, const FactorMention* b) {
      if (a->begin != b->begin) return a->begin < b->begin;
      return a->end < b->end;
    };
    std::sort(golds.begin(), golds.end(), by_span);
    std::sort(preds.begin(), preds.end(), by_span);
    for (size_t i = 1; i < golds.size(); ++i) {
      if (evaldetail::spans_overlap(*golds[i - 1], *golds[i])) {
        throw Error("malformed gold: overlapping same-label mentions in note " +
                    key.first);
      }
    }
    report.support[key.second] += golds.size();
    evaldetail::align(golds, preds, MatchMode::exact,
                      report.exact.per_label[key.second], exact_pairs);
    evaldetail::align(golds, preds, MatchMode::relaxed,
                      report.relaxed.per_label[key.second], relaxed_pairs);
  }

  for (auto* mode : {&report.exact, &report.relaxed}) {
    double sp = 0, sr = 0, sf = 0;
    for (size_t l = 0; l < kFactorLabelCount; ++l) {
      mode->micro += mode->per_label[l];
      if (report.support[l] == 0) continue;
      sp += mode->per_label[l].precision();
      sr += mode->per_label[l].recall();
      sf += mode->per_label[l].f_score();
      ++mode->macro.labels;
    }
    if (mode->macro.labels > 0) {
      mode->macro.precision = sp / static_cast<double>(mode->macro.labels);
      mode->macro.recall = sr / static_cast<double>(mode->macro.labels);
      mode->macro.f_score = sf / static_cast<double>(mode->macro.labels);
    }
  }

  auto presence_of = [](const FactorMention& m) { return to_string(m.presence); };
  auto period_of = [](const FactorMention& m) { return to_string(m.period); };
  report.exact.presence = evaldetail::attribute_prf(exact_pairs, presence_of, "missing");
  report.exact.period = evaldetail::attribute_prf(exact_pairs, period_of, "missing");
  report.relaxed.presence =
      evaldetail::attribute_prf(relaxed_pairs, presence_of, "missing");
  report.relaxed.period = evaldetail::attribute_prf(relaxed_pairs, period_of, "missing");
  return report;
}

}  // namespace ncc
