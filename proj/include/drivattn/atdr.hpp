#pragma once

// ATDR recording container (little-endian):
//   "ATDR" | u16 version=1 | u16 subject_id | u8 session (0=K-, 1=K+)
//   | u16 n_channels | u32 n_events | u64 n_samples | f64 sample_rate_hz
//   | per channel: u8 name length + ASCII name
//   | per event: 3 x u64 (deviation onset, response onset, response offset)
//   | n_channels * n_samples f32, channel-major

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "drivattn/binary_io.hpp"
#include "drivattn/recdata.hpp"

namespace drivattn {

inline constexpr char kAtdrMagic[4] = {'A', 'T', 'D', 'R'};
inline constexpr std::uint16_t kAtdrVersion = 1;

inline std::vector<unsigned char> encode_atdr(const Recording& rec) {
  validate(rec);
  require(rec.n_channels() <= UINT16_MAX, ErrorKind::Format, "too many channels for ATDR");
  require(rec.events.size() <= UINT32_MAX, ErrorKind::Format, "too many events for ATDR");
  ByteWriter w;
  w.put_bytes(kAtdrMagic, 4);
  w.put<std::uint16_t>(kAtdrVersion);
  w.put<std::uint16_t>(rec.subject_id);
  w.put<std::uint8_t>(static_cast<std::uint8_t>(rec.session));
  w.put<std::uint16_t>(static_cast<std::uint16_t>(rec.n_channels()));
  w.put<std::uint32_t>(static_cast<std::uint32_t>(rec.events.size()));
  w.put<std::uint64_t>(rec.n_samples());
  w.put<double>(rec.sample_rate_hz);
  for (const auto& name : rec.channel_names) {
    require(name.size() <= 255, ErrorKind::Format, "channel name longer than 255 bytes");
    w.put<std::uint8_t>(static_cast<std::uint8_t>(name.size()));
    w.put_string(name);
  }
  for (const auto& e : rec.events) {
    w.put<std::uint64_t>(e.deviation_onset);
    w.put<std::uint64_t>(e.response_onset);
    w.put<std::uint64_t>(e.response_offset);
  }
  w.put_bytes(rec.samples.data().data(), rec.samples.data().size() * sizeof(float));
  return w.bytes();
}

inline Recording decode_atdr(std::vector<unsigned char> bytes) {
  ByteReader r(std::move(bytes));
  if (r.get_string(4) != std::string(kAtdrMagic, 4)) fail(ErrorKind::Format, "bad ATDR magic");
  const auto version = r.get<std::uint16_t>();
  require(version == kAtdrVersion, ErrorKind::Format, "unsupported ATDR version " + std::to_string(version));
  Recording rec;
  rec.subject_id = r.get<std::uint16_t>();
  const auto session = r.get<std::uint8_t>();
  require(session <= 1, ErrorKind::Format, "bad session byte");
  rec.session = static_cast<Session>(session);
  const auto n_channels = r.get<std::uint16_t>();
  const auto n_events = r.get<std::uint32_t>();
  const auto n_samples = r.get<std::uint64_t>();
  rec.sample_rate_hz = r.get<double>();
  for (std::size_t c = 0; c < n_channels; ++c) {
    const auto len = r.get<std::uint8_t>();
    rec.channel_names.push_back(r.get_string(len));
  }
  rec.events.resize(n_events);
  for (auto& e : rec.events) {
    e.deviation_onset = r.get<std::uint64_t>();
    e.response_onset = r.get<std::uint64_t>();
    e.response_offset = r.get<std::uint64_t>();
  }
  require(r.remaining() == static_cast<std::size_t>(n_channels) * n_samples * sizeof(float), ErrorKind::Format,
          "ATDR sample block size does not match header");
  std::vector<float> samples(static_cast<std::size_t>(n_channels) * n_samples);
  r.get_array(samples.data(), samples.size());
  rec.samples = Matrix<float>(n_channels, n_samples, std::move(samples));
  validate(rec);
  return rec;
}

inline void write_atdr(const std::filesystem::path& path, const Recording& rec) {
  write_file_atomic(path, encode_atdr(rec));
}

inline Recording read_atdr(const std::filesystem::path& path) { return decode_atdr(read_file_bytes(path)); }

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, ',')) {
    while (!cell.empty() && (cell.back() == '\r' || cell.back() == ' ')) cell.pop_back();
    while (!cell.empty() && cell.front() == ' ') cell.erase(cell.begin());
    out.push_back(cell);
  }
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

inline bool looks_numeric(const std::string& s) {
  if (s.empty()) return false;
  char* end = nullptr;
  std::strtod(s.c_str(), &end);
  return end && *end == '\0';
}

}  // namespace detail

// Hand-made fixtures: samples CSV has one row per sample and one column per
// channel (an optional non-numeric header row supplies channel names); the
// events sidecar has three integer columns per row.
inline Recording load_csv_recording(const std::filesystem::path& samples_csv, const std::filesystem::path& events_csv,
                                    std::uint16_t subject_id, Session session, double sample_rate_hz) {
  std::ifstream in(samples_csv);
  if (!in) fail(ErrorKind::Io, "cannot open " + samples_csv.string());
  Recording rec;
  rec.subject_id = subject_id;
  rec.session = session;
  rec.sample_rate_hz = sample_rate_hz;
  std::vector<std::vector<float>> columns;
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    if (line.empty() || line == "\r") continue;
    auto cells = detail::split_csv_line(line);
    if (first) {
      first = false;
      if (!detail::looks_numeric(cells.front())) {
        rec.channel_names = cells;
        columns.resize(cells.size());
        continue;
      }
    }
    if (columns.empty()) columns.resize(cells.size());
    require(cells.size() == columns.size(), ErrorKind::Format, "ragged row in " + samples_csv.string());
    for (std::size_t c = 0; c < cells.size(); ++c) {
      require(detail::looks_numeric(cells[c]), ErrorKind::Format, "non-numeric sample '" + cells[c] + "'");
      columns[c].push_back(std::stof(cells[c]));
    }
  }
  if (rec.channel_names.empty())
    for (std::size_t c = 0; c < columns.size(); ++c) rec.channel_names.push_back("ch" + std::to_string(c));
  const std::size_t n = columns.empty() ? 0 : columns.front().size();
  rec.samples = Matrix<float>(columns.size(), n);
  for (std::size_t c = 0; c < columns.size(); ++c)
    std::copy(columns[c].begin(), columns[c].end(), rec.samples.row(c).begin());

  std::ifstream ev(events_csv);
  if (!ev) fail(ErrorKind::Io, "cannot open " + events_csv.string());
  while (std::getline(ev, line)) {
    if (line.empty() || line == "\r") continue;
    auto cells = detail::split_csv_line(line);
    if (!detail::looks_numeric(cells.front())) continue;  // header
    require(cells.size() == 3, ErrorKind::Format, "event rows need three integer columns");
    rec.events.push_back({std::stoull(cells[0]), std::stoull(cells[1]), std::stoull(cells[2])});
  }
  validate(rec);
  return rec;
}

}  // namespace drivattn
