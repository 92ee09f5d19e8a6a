#pragma once

#include <algorithm>
#include <fstream>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include <nlohmann/json.hpp>

#include "ncc/date.hpp"
#include "ncc/error.hpp"
#include "ncc/icd9.hpp"
#include "ncc/records.hpp"

namespace ncc {

// One factor's code list after range expansion.
struct CodeMap {
  std::string factor_name;
  std::vector<std::string> icd9_patterns;  // concrete codes; prefix semantics at query
  std::vector<int> stop_codes;
};

class CodeMapSet {
 public:
  CodeMapSet() = default;

  CodeMapSet(std::vector<CodeMap> maps, IcdPrefixMode mode)
      : maps_(std::move(maps)), mode_(mode) {
    for (size_t f = 0; f < maps_.size(); ++f) {
      for (const auto& pattern : maps_[f].icd9_patterns) {
        by_root_[std::string(icd9_root(pattern))].push_back({f, pattern});
      }
      for (const int sc : maps_[f].stop_codes) {
        stop_to_factors_[sc].push_back(f);
      }
    }
  }

  size_t factor_count() const { return maps_.size(); }
  const std::vector<CodeMap>& maps() const { return maps_; }
  IcdPrefixMode prefix_mode() const { return mode_; }

  const std::string& factor_name(size_t i) const { return maps_[i].factor_name; }

  std::vector<std::string> factor_names() const {
    std::vector<std::string> out;
    out.reserve(maps_.size());
    for (const auto& m : maps_) out.push_back(m.factor_name);
    return out;
  }

  // One code may raise several factors (eTable-style overlapping V-codes).
  std::vector<size_t> factors_for_icd9(std::string_view code) const {
    std::vector<size_t> out;
    const auto it = by_root_.find(std::string(icd9_root(code)));
    if (it == by_root_.end()) return out;
    for (const auto& [factor, pattern] : it->second) {
      if (icd9_matches(code, pattern, mode_) &&
          std::find(out.begin(), out.end(), factor) == out.end()) {
        out.push_back(factor);
      }
    }
    std::sort(out.begin(), out.end());
    return out;
  }

  std::vector<size_t> factors_for_stop_code(int stop_code) const {
    const auto it = stop_to_factors_.find(stop_code);
    return it == stop_to_factors_.end() ? std::vector<size_t>{} : it->second;
  }

  bool any_icd9_match(std::string_view code) const {
    return !factors_for_icd9(code).empty();
  }

 private:
  std::vector<CodeMap> maps_;
  IcdPrefixMode mode_ = IcdPrefixMode::prefix_child;
  std::unordered_map<std::string, std::vector<std::pair<size_t, std::string>>> by_root_;
  std::unordered_map<int, std::vector<size_t>> stop_to_factors_;
};

// Map files are JSON: either a bare array of {factor, icd9, stop_codes}
// entries or {"prefix_mode": ..., "factors": [...]}.
inline CodeMapSet compile_code_map(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(path + ": cannot open");
  nlohmann::json root;
  try {
    root = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw Error(path + ": " + e.what());
  }

  IcdPrefixMode mode = IcdPrefixMode::prefix_child;
  const nlohmann::json* entries = &root;
  if (root.is_object()) {
    if (root.contains("prefix_mode")) {
      const std::string m = root["prefix_mode"].get<std::string>();
      if (m == "exact") {
        mode = IcdPrefixMode::exact;
      } else if (m == "prefix_child") {
        mode = IcdPrefixMode::prefix_child;
      } else {
        throw Error(path + ": unknown prefix_mode '" + m + "'");
      }
    }
    if (!root.contains("factors")) throw Error(path + ": missing 'factors'");
    entries = &root["factors"];
  }
  if (!entries->is_array()) throw Error(path + ": factor list must be an array");

  std::vector<CodeMap> maps;
  std::unordered_set<std::string> seen;
  for (const auto& entry : *entries) {
    CodeMap map;
    try {
      map.factor_name = entry.at("factor").get<std::string>();
    } catch (const nlohmann::json::exception& e) {
      throw Error(path + ": entry missing 'factor': " + e.what());
    }
    if (!seen.insert(map.factor_name).second) {
      throw Error(path + ": duplicate factor '" + map.factor_name + "'");
    }
    if (entry.contains("icd9")) {
      for (const auto& pat : entry["icd9"]) {
        const std::string pattern = pat.get<std::string>();
        try {
          for (auto& code : expand_icd9_pattern(pattern)) {
            map.icd9_patterns.push_back(std::move(code));
          }
        } catch (const Error& e) {
          throw Error(path + ": factor '" + map.factor_name + "': " + e.what());
        }
      }
    }
    if (entry.contains("stop_codes")) {
      for (const auto& sc : entry["stop_codes"]) {
        const int code = sc.get<int>();
        if (code <= 0 || code > 999) {
          throw Error(path + ": factor '" + map.factor_name + "': stop code " +
                      std::to_string(code) + " out of range");
        }
        map.stop_codes.push_back(code);
      }
    }
    if (map.icd9_patterns.empty() && map.stop_codes.empty()) {
      throw Error(path + ": factor '" + map.factor_name + "' has no codes");
    }
    maps.push_back(std::move(map));
  }
  return CodeMapSet(std::move(maps), mode);
}

struct StructuredFlags {
  std::string patient_id;
  DateWindow window;
  std::vector<uint8_t> flags;  // aligned with CodeMapSet factor order
};

// Factor flag = 1 iff any diagnosis matching its ICD-9 patterns or any
// encounter with a listed stop code falls inside [start, end).
inline StructuredFlags flags_in_window(const std::string& patient_id, const Dataset& ds,
                                       const DateWindow& window, const CodeMapSet& maps) {
  StructuredFlags out;
  out.patient_id = patient_id;
  out.window = window;
  out.flags.assign(maps.factor_count(), 0);
  const auto& idx = ds.index_of(patient_id);
  for (const size_t i : idx.diagnoses) {
    const auto& dx = ds.diagnoses[i];
    if (dx.date >= window.end) break;
    if (!window.contains(dx.date)) continue;
    for (const size_t f : maps.factors_for_icd9(dx.code)) out.flags[f] = 1;
  }
  for (const size_t i : idx.encounters) {
    const auto& enc = ds.encounters[i];
    if (enc.date >= window.end) break;
    if (!enc.stop_code || !window.contains(enc.date)) continue;
    for (const size_t f : maps.factors_for_stop_code(*enc.stop_code)) out.flags[f] = 1;
  }
  return out;
}

// A dated factor hit; windows are applied later so the scan runs once.
struct StructuredHit {
  std::string patient_id;
  Date date;
  size_t factor = 0;
  std::string source;  // icd9 code or "stop:<code>"
};

inline std::vector<StructuredHit> structured_hits(const std::string& patient_id,
                                                  const Dataset& ds,
                                                  const CodeMapSet& maps) {
  std::vector<StructuredHit> out;
  const auto& idx = ds.index_of(patient_id);
  for (const size_t i : idx.diagnoses) {
    const auto& dx = ds.diagnoses[i];
    for (const size_t f : maps.factors_for_icd9(dx.code)) {
      out.push_back({patient_id, dx.date, f, dx.code});
    }
  }
  for (const size_t i : idx.encounters) {
    const auto& enc = ds.encounters[i];
    if (!enc.stop_code) continue;
    for (const size_t f : maps.factors_for_stop_code(*enc.stop_code)) {
      out.push_back({patient_id, enc.date, f, "stop:" + std::to_string(*enc.stop_code)});
    }
  }
  std::sort(out.begin(), out.end(), [](const StructuredHit& a, const StructuredHit& b) {
    if (a.date != b.date) return a.date < b.date;
    if (a.factor != b.factor) return a.factor < b.factor;
    return a.source < b.source;
  });
  return out;
}

}  // namespace ncc
