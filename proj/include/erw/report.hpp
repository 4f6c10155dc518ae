#pragma once

// Plain-text verification reports with a machine-readable trailer.

#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "erw/summary.hpp"
#include "erw/verify.hpp"

namespace erw {

inline constexpr const char* kTrailerBegin = "--- BEGIN MACHINE-READABLE ---";
inline constexpr const char* kTrailerEnd = "--- END MACHINE-READABLE ---";

struct Report {
  std::string command;
  std::vector<std::pair<std::string, std::string>> parameters;
  std::vector<std::pair<std::string, std::string>> overrides;
  std::vector<CriterionResult> criteria;

  bool pass() const {
    for (const auto& c : criteria)
      if (!c.pass()) return false;
    return true;
  }

  nlohmann::json to_json() const {
    nlohmann::json j;
    j["command"] = command;
    j["code_version"] = kCodeVersion;
    for (const auto& [k, v] : parameters) j["parameters"][k] = v;
    j["tolerance_overrides"] = nlohmann::json::object();
    for (const auto& [k, v] : overrides) j["tolerance_overrides"][k] = v;
    j["criteria"] = nlohmann::json::array();
    for (const auto& c : criteria) {
      nlohmann::json cj{{"id", c.id}, {"title", c.title}, {"pass", c.pass()}};
      cj["checks"] = nlohmann::json::array();
      for (const auto& ch : c.checks)
        cj["checks"].push_back({{"name", ch.name}, {"value", ch.value}, {"bound", ch.bound}, {"ok", ch.ok}});
      j["criteria"].push_back(std::move(cj));
    }
    j["pass"] = pass();
    return j;
  }

  std::string render() const {
    std::string out = "erw " + command + " report (code " + kCodeVersion + ")\n";
    out += "parameters:\n";
    for (const auto& [k, v] : parameters) out += "  " + k + " = " + v + "\n";
    out += "tolerance overrides:";
    if (overrides.empty()) out += " none";
    out += "\n";
    for (const auto& [k, v] : overrides) out += "  " + k + " = " + v + "\n";
    for (const auto& c : criteria) {
      out += "\n== criterion " + std::to_string(c.id) + ": " + c.title + " [" +
             (c.pass() ? "PASS" : "FAIL") + "]\n";
      for (const auto& row : c.table) out += "  " + row + "\n";
      for (const auto& ch : c.checks)
        out += std::string(ch.ok ? "  [ok]     " : "  [BREACH] ") + ch.name + " = " +
               fmt("%.6g", ch.value) + "  (required " + ch.bound + ")\n";
    }
    out += "\n";
    for (const auto& c : criteria)
      for (const auto& ch : c.checks)
        if (!ch.ok)
          out += "BREACH criterion " + std::to_string(c.id) + ": " + ch.name + " = " +
                 fmt("%.6g", ch.value) + ", required " + ch.bound + "\n";
    out += std::string("overall: ") + (pass() ? "PASS" : "FAIL") + "\n";
    out += std::string(kTrailerBegin) + "\n" + to_json().dump() + "\n" + kTrailerEnd + "\n";
    return out;
  }
};

}  // namespace erw
