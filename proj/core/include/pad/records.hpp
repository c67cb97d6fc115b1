#pragma once

// Line-delimited record files. Each file starts with one header record
// {"schema": ..., "schema_version": ..., "seed": ..., "config_hash": ...}
// followed by one JSON object per line.

#include <cstdint>
#include <string>
#include <vector>

#include "pad/mdp.hpp"
#include "pad/persrm.hpp"

namespace pad {

inline constexpr int kRecordSchemaVersion = 1;

struct RecordHeader {
  std::string schema;
  int schema_version = kRecordSchemaVersion;
  std::uint64_t seed = 0;
  std::string config_hash;

  bool operator==(const RecordHeader&) const = default;
};

std::string header_line(const RecordHeader& h);
RecordHeader parse_header_line(const std::string& line, const std::string& expected_schema);

// {prompt: [ids], chosen: [ids], rejected: [ids], pref: {dim: intensity}}
std::string pair_line(const PreferencePair& pair, const PreferenceSchema& schema);
PreferencePair parse_pair_line(const std::string& line, const PreferenceSchema& schema);

// {prompt: [ids], response: [ids], terminated: bool}
std::string trajectory_line(const Trajectory& t);
Trajectory parse_trajectory_line(const std::string& line);

struct PairFile {
  RecordHeader header;
  std::vector<PreferencePair> pairs;
};

struct TrajectoryFile {
  RecordHeader header;
  std::vector<Trajectory> trajectories;
};

std::string write_pairs(const RecordHeader& h, const std::vector<PreferencePair>& pairs,
                        const PreferenceSchema& schema);
PairFile read_pairs(const std::string& text, const PreferenceSchema& schema);

std::string write_trajectories(const RecordHeader& h, const std::vector<Trajectory>& ts,
                               const std::string& schema = "pad.trajectories");
TrajectoryFile read_trajectories(const std::string& text, const std::string& schema = "pad.trajectories");

// 64-bit FNV-1a, hex encoded.
std::string fnv1a_hex(const std::string& bytes);

}  // namespace pad
