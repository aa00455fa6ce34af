#pragma once

#include <cstdio>
#include <string>

#include <nlohmann/json.hpp>

namespace bpadv {

using Json = nlohmann::json;

/// %.{digits}g rendering; stable across runs for byte-identical output.
inline std::string format_double(double x, int digits = 17) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*g", digits, x);
  std::string s(buf);
  // Keep JSON numbers parseable as doubles.
  if (s.find_first_of(".eEn") == std::string::npos) s += ".0";
  return s;
}

inline std::string quote(const std::string& s) { return Json(s).dump(); }

}  // namespace bpadv
