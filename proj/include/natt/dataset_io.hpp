#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "natt/imu.hpp"

namespace natt {

// CSV schema shared by dataset files and estimator traces:
//   t,gx,gy,gz,ax,ay,az,pitch_gt,roll_gt[,pitch_est,roll_est]
// Angles in radians, rates in rad/s, specific force in m/s^2.
inline constexpr const char* kSequenceHeader =
    "t,gx,gy,gz,ax,ay,az,pitch_gt,roll_gt";
inline constexpr const char* kTraceHeader =
    "t,gx,gy,gz,ax,ay,az,pitch_gt,roll_gt,pitch_est,roll_est";

void write_sequence_csv(const std::filesystem::path& path, const Sequence& seq);

// Same schema plus estimator output columns; estimates must match seq length.
void write_trace_csv(const std::filesystem::path& path, const Sequence& seq,
                     const std::vector<EulerAngles>& estimates);

Sequence read_sequence_csv(const std::filesystem::path& path);

// One dataset file plus how it was generated, as recorded in manifest.json.
struct ManifestEntry {
  std::string file;
  std::uint64_t seed = 0;
  std::string kind;         // "maneuver" | "constant" | ...
  std::string sensor_json;  // serialized sensor model, opaque to readers
};

struct DatasetManifest {
  double rate_hz = 200.0;
  std::vector<ManifestEntry> entries;
};

void write_manifest(const std::filesystem::path& dir,
                    const DatasetManifest& manifest);
DatasetManifest read_manifest(const std::filesystem::path& dir);

// Loads every sequence in a dataset directory: via manifest.json when
// present, otherwise every *.csv in lexicographic order.
std::vector<Sequence> load_dataset(const std::filesystem::path& dir);

// Shortest decimal form that round-trips a double exactly.
std::string format_double(double v);

}  // namespace natt
