#include "natt/dataset_io.hpp"

#include <algorithm>
#include <charconv>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "natt/common.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace natt {

std::string format_double(double v) {
  char buf[40];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

namespace {

std::ofstream open_out(const fs::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open for writing: " + path.string());
  return out;
}

void write_rows(std::ofstream& out, const Sequence& seq,
                const std::vector<EulerAngles>* estimates) {
  for (std::size_t i = 0; i < seq.samples.size(); ++i) {
    const ImuSample& s = seq.samples[i];
    const EulerAngles& gt = seq.truth[i];
    out << format_double(s.t) << ',' << format_double(s.gyro[0]) << ','
        << format_double(s.gyro[1]) << ',' << format_double(s.gyro[2]) << ','
        << format_double(s.accel[0]) << ',' << format_double(s.accel[1]) << ','
        << format_double(s.accel[2]) << ',' << format_double(gt.pitch) << ','
        << format_double(gt.roll);
    if (estimates) {
      out << ',' << format_double((*estimates)[i].pitch) << ','
          << format_double((*estimates)[i].roll);
    }
    out << '\n';
  }
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  std::stringstream ss(line);
  while (std::getline(ss, cur, ',')) fields.push_back(cur);
  if (!line.empty() && line.back() == ',') fields.emplace_back();
  return fields;
}

double parse_field(const std::string& s, const fs::path& path,
                   std::size_t line_no) {
  const char* begin = s.c_str();
  char* end = nullptr;
  double v = std::strtod(begin, &end);
  if (end == begin || end != begin + s.size())
    throw CsvError(path.string() + ":" + std::to_string(line_no) +
                   ": not a number: '" + s + "'");
  return v;
}

}  // namespace

void write_sequence_csv(const fs::path& path, const Sequence& seq) {
  if (seq.truth.size() != seq.samples.size())
    throw ValidationError("sequence truth/sample length mismatch");
  auto out = open_out(path);
  out << kSequenceHeader << '\n';
  write_rows(out, seq, nullptr);
}

void write_trace_csv(const fs::path& path, const Sequence& seq,
                     const std::vector<EulerAngles>& estimates) {
  if (seq.truth.size() != seq.samples.size() ||
      estimates.size() != seq.samples.size())
    throw ValidationError("trace length mismatch");
  auto out = open_out(path);
  out << kTraceHeader << '\n';
  write_rows(out, seq, &estimates);
}

Sequence read_sequence_csv(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open dataset file: " + path.string());
  std::string line;
  if (!std::getline(in, line))
    throw CsvError(path.string() + ": empty file");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != kSequenceHeader)
    throw CsvError(path.string() + ": unexpected header '" + line + "'");

  Sequence seq;
  seq.name = path.stem().string();
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto fields = split_csv_line(line);
    if (fields.size() != 9)
      throw CsvError(path.string() + ":" + std::to_string(line_no) +
                     ": expected 9 columns, got " +
                     std::to_string(fields.size()));
    ImuSample s;
    s.t = parse_field(fields[0], path, line_no);
    for (int k = 0; k < 3; ++k) s.gyro[k] = parse_field(fields[1 + k], path, line_no);
    for (int k = 0; k < 3; ++k) s.accel[k] = parse_field(fields[4 + k], path, line_no);
    EulerAngles gt{parse_field(fields[7], path, line_no),
                   parse_field(fields[8], path, line_no)};
    seq.samples.push_back(s);
    seq.truth.push_back(gt);
  }
  if (seq.samples.empty())
    throw CsvError(path.string() + ": no data rows");
  if (seq.samples.size() >= 2) {
    seq.dt = (seq.samples.back().t - seq.samples.front().t) /
             static_cast<double>(seq.samples.size() - 1);
    if (!(seq.dt > 0.0))
      throw CsvError(path.string() + ": non-increasing time column");
  }
  return seq;
}

void write_manifest(const fs::path& dir, const DatasetManifest& manifest) {
  json j;
  j["format"] = "natt-dataset-v1";
  j["rate_hz"] = manifest.rate_hz;
  j["entries"] = json::array();
  for (const auto& e : manifest.entries) {
    json je;
    je["file"] = e.file;
    je["seed"] = e.seed;
    je["kind"] = e.kind;
    je["sensor_model"] =
        e.sensor_json.empty() ? json(nullptr) : json::parse(e.sensor_json);
    j["entries"].push_back(je);
  }
  auto out = open_out(dir / "manifest.json");
  out << j.dump(2) << '\n';
}

DatasetManifest read_manifest(const fs::path& dir) {
  fs::path path = dir / "manifest.json";
  std::ifstream in(path);
  if (!in) throw IoError("missing manifest: " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
  if (j.value("format", "") != "natt-dataset-v1")
    throw FormatError(path.string() + ": unknown manifest format");
  DatasetManifest m;
  m.rate_hz = j.value("rate_hz", 200.0);
  for (const auto& je : j.at("entries")) {
    ManifestEntry e;
    e.file = je.at("file").get<std::string>();
    e.seed = je.value("seed", std::uint64_t{0});
    e.kind = je.value("kind", "");
    if (je.contains("sensor_model") && !je["sensor_model"].is_null())
      e.sensor_json = je["sensor_model"].dump();
    m.entries.push_back(e);
  }
  return m;
}

std::vector<Sequence> load_dataset(const fs::path& dir) {
  if (!fs::exists(dir)) throw IoError("dataset directory not found: " + dir.string());
  std::vector<fs::path> files;
  if (fs::exists(dir / "manifest.json")) {
    for (const auto& e : read_manifest(dir).entries) files.push_back(dir / e.file);
  } else {
    for (const auto& entry : fs::directory_iterator(dir)) {
      if (entry.path().extension() == ".csv") files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());
  }
  if (files.empty()) throw IoError("no sequences found in " + dir.string());
  std::vector<Sequence> seqs;
  seqs.reserve(files.size());
  for (const auto& f : files) seqs.push_back(read_sequence_csv(f));
  return seqs;
}

}  // namespace natt
