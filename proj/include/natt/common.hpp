#pragma once

#include <cmath>
#include <stdexcept>
#include <string>

namespace natt {

inline constexpr const char* kVersion = "0.1.0";

// Standard gravity, m/s^2. Body frame is x-forward, y-right, z-down, so a
// level accelerometer at rest reads (0, 0, +g).
inline constexpr double kGravity = 9.80665;

inline constexpr double kPi = 3.14159265358979323846;

inline double deg_to_rad(double d) { return d * (kPi / 180.0); }
inline double rad_to_deg(double r) { return r * (180.0 / kPi); }

// Raised when a required input file or directory is missing/unreadable.
struct IoError : std::runtime_error {
  explicit IoError(const std::string& msg) : std::runtime_error(msg) {}
};

// Raised when a file exists but its contents are malformed (bad JSON,
// unknown format version, missing keys).
struct FormatError : std::runtime_error {
  explicit FormatError(const std::string& msg) : std::runtime_error(msg) {}
};

// Raised when a CSV file has an unexpected header or row shape.
struct CsvError : std::runtime_error {
  explicit CsvError(const std::string& msg) : std::runtime_error(msg) {}
};

// Raised for semantically invalid arguments (dimension mismatches,
// out-of-range configuration, empty datasets).
struct ValidationError : std::runtime_error {
  explicit ValidationError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace natt
