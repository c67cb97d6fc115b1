#include "pad/records.hpp"

#include <cstdio>
#include <sstream>

#include "json_util.hpp"

namespace pad {

using detail::json;

std::string header_line(const RecordHeader& h) {
  json j = {{"schema", h.schema}, {"schema_version", h.schema_version}, {"seed", h.seed}, {"config_hash", h.config_hash}};
  return j.dump();
}

RecordHeader parse_header_line(const std::string& line, const std::string& expected_schema) {
  const json j = detail::parse_json(line, "record header");
  detail::expect_schema(j, expected_schema, kRecordSchemaVersion);
  return detail::guarded("record header", [&] {
    return RecordHeader{j.at("schema").get<std::string>(), j.at("schema_version").get<int>(),
                        j.at("seed").get<std::uint64_t>(), j.at("config_hash").get<std::string>()};
  });
}

std::string pair_line(const PreferencePair& pair, const PreferenceSchema& schema) {
  if (pair.pref.size() != schema.size()) throw Error(ErrorCode::kDimMismatch, "pair preference width");
  json pref = json::object();
  for (std::size_t i = 0; i < schema.size(); ++i)
    if (pair.pref.intensity[i] != 0.0) pref[schema.names()[i]] = pair.pref.intensity[i];
  json j = {{"prompt", pair.prompt}, {"chosen", pair.chosen}, {"rejected", pair.rejected}, {"pref", std::move(pref)}};
  return j.dump();
}

PreferencePair parse_pair_line(const std::string& line, const PreferenceSchema& schema) {
  const json j = detail::parse_json(line, "pair record");
  return detail::guarded("pair record", [&] {
    PreferencePair p{j.at("prompt").get<TokenSeq>(), j.at("chosen").get<TokenSeq>(), j.at("rejected").get<TokenSeq>(),
                     PreferenceDescriptor::none(schema.size())};
    for (const auto& [name, value] : j.at("pref").items()) {
      const double v = value.get<double>();
      if (v < -1.0 || v > 1.0) throw Error(ErrorCode::kBadArgument, "intensity outside [-1, 1]");
      p.pref.intensity[schema.index_of(name)] = v;
    }
    return p;
  });
}

std::string trajectory_line(const Trajectory& t) {
  json j = {{"prompt", t.prompt}, {"response", t.response}, {"terminated", t.terminated}};
  return j.dump();
}

Trajectory parse_trajectory_line(const std::string& line) {
  const json j = detail::parse_json(line, "trajectory record");
  return detail::guarded("trajectory record", [&] {
    return Trajectory{j.at("prompt").get<TokenSeq>(), j.at("response").get<TokenSeq>(), j.at("terminated").get<bool>()};
  });
}

namespace {

std::vector<std::string> lines_of(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream is(text);
  std::string line;
  while (std::getline(is, line))
    if (!line.empty()) out.push_back(line);
  return out;
}

}  // namespace

std::string write_pairs(const RecordHeader& h, const std::vector<PreferencePair>& pairs,
                        const PreferenceSchema& schema) {
  RecordHeader header = h;
  header.schema = "pad.pairs";
  std::string out = header_line(header) + "\n";
  for (const auto& p : pairs) out += pair_line(p, schema) + "\n";
  return out;
}

PairFile read_pairs(const std::string& text, const PreferenceSchema& schema) {
  const auto lines = lines_of(text);
  if (lines.empty()) throw Error(ErrorCode::kParse, "pair file is empty");
  PairFile f{parse_header_line(lines.front(), "pad.pairs"), {}};
  for (std::size_t i = 1; i < lines.size(); ++i) f.pairs.push_back(parse_pair_line(lines[i], schema));
  return f;
}

std::string write_trajectories(const RecordHeader& h, const std::vector<Trajectory>& ts, const std::string& schema) {
  RecordHeader header = h;
  header.schema = schema;
  std::string out = header_line(header) + "\n";
  for (const auto& t : ts) out += trajectory_line(t) + "\n";
  return out;
}

TrajectoryFile read_trajectories(const std::string& text, const std::string& schema) {
  const auto lines = lines_of(text);
  if (lines.empty()) throw Error(ErrorCode::kParse, "trajectory file is empty");
  TrajectoryFile f{parse_header_line(lines.front(), schema), {}};
  for (std::size_t i = 1; i < lines.size(); ++i) f.trajectories.push_back(parse_trajectory_line(lines[i]));
  return f;
}

std::string fnv1a_hex(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace pad
