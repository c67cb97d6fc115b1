#pragma once

// Private JSON helpers shared by the checkpoint and record writers.

#include <string>

#include <json.hpp>

#include "pad/error.hpp"
#include "pad/mdp.hpp"

namespace pad::detail {

using nlohmann::json;

inline json parse_json(const std::string& text, const char* what) {
  try {
    return json::parse(text);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kParse, std::string(what) + ": " + e.what());
  }
}

inline void expect_schema(const json& j, const std::string& schema, int version) {
  if (!j.contains("schema") || j.at("schema") != schema)
    throw Error(ErrorCode::kSchemaMismatch, "expected schema " + schema);
  if (!j.contains("schema_version") || j.at("schema_version") != version)
    throw Error(ErrorCode::kSchemaMismatch, schema + ": unsupported schema_version");
}

inline json vocab_to_json(const Vocab& v) {
  json j = {{"size", v.size()}, {"eos", v.eos_id()}};
  if (!v.display().empty()) j["display"] = v.display();
  return j;
}

inline Vocab vocab_from_json(const json& j) {
  std::vector<std::string> display;
  if (j.contains("display")) display = j.at("display").get<std::vector<std::string>>();
  return Vocab(j.at("size").get<std::size_t>(), j.at("eos").get<TokenId>(), std::move(display));
}

// Wraps nlohmann errors raised while reading a document.
template <typename F>
auto guarded(const char* what, F&& f) {
  try {
    return f();
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kParse, std::string(what) + ": " + e.what());
  }
}

}  // namespace pad::detail

#include "pad/toylm.hpp"

namespace pad::detail {

json factored_to_json_value(const FactoredLM& f);
FactoredLM factored_from_json_value(const json& j);

}  // namespace pad::detail
