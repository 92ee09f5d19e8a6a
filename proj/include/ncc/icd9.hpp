#pragma once

#include <cctype>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "ncc/error.hpp"

namespace ncc {

// Lexical grammar: optional leading 'V' or 'E', 2-3 digits, optional '.'
// followed by 1-2 digits. Examples: "V62.5", "296.2", "E960", "311".
inline bool is_valid_icd9(std::string_view code) {
  size_t pos = 0;
  if (pos < code.size() && (code[pos] == 'V' || code[pos] == 'E')) ++pos;
  size_t digits = 0;
  while (pos < code.size() && std::isdigit(static_cast<unsigned char>(code[pos]))) {
    ++pos;
    ++digits;
  }
  if (digits < 2 || digits > 3) return false;
  if (pos == code.size()) return true;
  if (code[pos] != '.') return false;
  ++pos;
  size_t decimals = 0;
  while (pos < code.size() && std::isdigit(static_cast<unsigned char>(code[pos]))) {
    ++pos;
    ++decimals;
  }
  return pos == code.size() && decimals >= 1 && decimals <= 2;
}

// Uppercases the prefix letter and trims surrounding blanks; returns nullopt
// when the result does not satisfy the grammar.
inline std::optional<std::string> normalize_icd9(std::string_view raw) {
  size_t b = 0, e = raw.size();
  while (b < e && std::isspace(static_cast<unsigned char>(raw[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(raw[e - 1]))) --e;
  std::string out(raw.substr(b, e - b));
  if (!out.empty() && (out[0] == 'v' || out[0] == 'e')) {
    out[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(out[0])));
  }
  if (!is_valid_icd9(out)) return {};
  return out;
}

// "V62" from "V62.5"; the code itself when it has no decimals.
inline std::string_view icd9_root(std::string_view code) {
  const size_t dot = code.find('.');
  return dot == std::string_view::npos ? code : code.substr(0, dot);
}

enum class IcdPrefixMode { exact, prefix_child };

// In prefix_child mode a pattern matches itself and any decimal extension:
// "V61" matches "V61.9", "296.2" matches "296.20". Root boundaries are
// respected ("V61" does not match "V610").
inline bool icd9_matches(std::string_view code, std::string_view pattern,
                         IcdPrefixMode mode) {
  if (code == pattern) return true;
  if (mode == IcdPrefixMode::exact) return false;
  if (code.size() <= pattern.size() || code.substr(0, pattern.size()) != pattern) {
    return false;
  }
  if (pattern.find('.') != std::string_view::npos) return true;  // "296.2" + "0"
  return code[pattern.size()] == '.';  // "V61" + ".9"
}

// Expands one map-file pattern into concrete codes. Grammar:
//   CODE                 -> itself                        ("309.81")
//   CODE-CODE            -> root range  ("E961-E977") or same-root decimal
//                           range ("303.0-303.9")
//   CODE-DIGITS          -> decimal suffix range, same width ("V60.0-2",
//                           "995.50-54", "V15.41-42")
inline std::vector<std::string> expand_icd9_pattern(std::string_view pattern) {
  const auto fail = [&](const std::string& why) -> std::vector<std::string> {
    throw Error("bad ICD-9 pattern '" + std::string(pattern) + "': " + why);
  };

  const size_t dash = pattern.find('-');
  if (dash == std::string_view::npos) {
    const auto one = normalize_icd9(pattern);
    if (!one) return fail("not a valid code");
    return {*one};
  }

  const auto lo = normalize_icd9(pattern.substr(0, dash));
  if (!lo) return fail("left side is not a valid code");
  const std::string_view rhs = pattern.substr(dash + 1);

  auto digits_only = [](std::string_view s) {
    if (s.empty() || s.size() > 2) return false;
    for (const char c : s)
      if (!std::isdigit(static_cast<unsigned char>(c))) return false;
    return true;
  };

  std::vector<std::string> out;
  const size_t lo_dot = lo->find('.');

  if (digits_only(rhs) && lo_dot != std::string::npos) {
    // Decimal suffix range: vary the decimal part from lo's suffix to rhs.
    const std::string root(lo->substr(0, lo_dot));
    const std::string lo_dec(lo->substr(lo_dot + 1));
    if (lo_dec.size() != rhs.size()) return fail("suffix widths differ");
    const int a = std::stoi(lo_dec), b = std::stoi(std::string(rhs));
    if (b < a) return fail("descending range");
    for (int v = a; v <= b; ++v) {
      char buf[8];
      std::snprintf(buf, sizeof(buf), "%0*d", static_cast<int>(rhs.size()), v);
      out.push_back(root + "." + buf);
    }
    return out;
  }

  const auto hi = normalize_icd9(rhs);
  if (!hi) return fail("right side is not a valid code");
  const size_t hi_dot = hi->find('.');
  if ((lo_dot == std::string::npos) != (hi_dot == std::string::npos)) {
    return fail("mixed root/decimal endpoints");
  }

  if (lo_dot == std::string::npos) {
    // Root range, e.g. "E961-E977" or "430-438".
    const bool prefixed = !std::isdigit(static_cast<unsigned char>((*lo)[0]));
    const std::string_view lo_pfx = prefixed ? std::string_view(*lo).substr(0, 1) : "";
    const std::string_view hi_pfx = prefixed ? std::string_view(*hi).substr(0, 1) : "";
    if (lo_pfx != hi_pfx) return fail("prefix letters differ");
    const std::string lo_num(lo->substr(prefixed ? 1 : 0));
    const std::string hi_num(hi->substr(prefixed ? 1 : 0));
    if (lo_num.size() != hi_num.size()) return fail("root widths differ");
    const int a = std::stoi(lo_num), b = std::stoi(hi_num);
    if (b < a) return fail("descending range");
    for (int v = a; v <= b; ++v) {
      char buf[8];
      std::snprintf(buf, sizeof(buf), "%0*d", static_cast<int>(lo_num.size()), v);
      out.push_back(std::string(lo_pfx) + buf);
    }
    return out;
  }

  // Same-root decimal range, e.g. "303.0-303.9".
  if (lo->substr(0, lo_dot) != hi->substr(0, hi_dot)) {
    return fail("decimal range spans different roots");
  }
  const std::string root(lo->substr(0, lo_dot));
  const std::string lo_dec(lo->substr(lo_dot + 1));
  const std::string hi_dec(hi->substr(hi_dot + 1));
  if (lo_dec.size() != hi_dec.size()) return fail("decimal widths differ");
  const int a = std::stoi(lo_dec), b = std::stoi(hi_dec);
  if (b < a) return fail("descending range");
  for (int v = a; v <= b; ++v) {
    char buf[8];
    std::snprintf(buf, sizeof(buf), "%0*d", static_cast<int>(lo_dec.size()), v);
    out.push_back(root + "." + buf);
  }
  return out;
}

}  // namespace ncc
