// Minimal external tagger used by the protocol tests: reads paragraph JSONL
// from stdin, finds the literal word "homeless" in each text, and emits one
// housing_instability mention per hit with text-relative offsets.

#include <iostream>
#include <string>

#include <nlohmann/json.hpp>

int main() {
  std::string line;
  while (std::getline(std::cin, line)) {
    if (line.empty()) continue;
    const auto j = nlohmann::json::parse(line);
    const std::string id = j.at("id").get<std::string>();
    const std::string text = j.at("text").get<std::string>();
    const std::string needle = "homeless";
    size_t pos = 0;
    while ((pos = text.find(needle, pos)) != std::string::npos) {
      nlohmann::json out;
      out["id"] = id;
      out["start"] = pos;
      out["end"] = pos + needle.size();
      out["label"] = "housing_instability";
      out["presence"] = "yes";
      out["period"] = "current";
      std::cout << out.dump() << "\n";
      pos += needle.size();
    }
  }
  return 0;
}
