#pragma once

#include "teleop/config.hpp"
#include "teleop/session.hpp"

#include <filesystem>
#include <fstream>
#include <memory>
#include <string>
#include <vector>

namespace teleop {

// Files of one log bundle.
inline constexpr const char* kLogFile = "log.csv";
inline constexpr const char* kEventsFile = "events.csv";
inline constexpr const char* kManifestFile = "manifest.json";
inline constexpr const char* kConfigFile = "config.toml";
inline constexpr const char* kTruncationMarker = "# truncated";

std::string log_header();
std::string format_log_row(const LogRow& row);
// Inverse of format_log_row (without the newline). Throws
// std::invalid_argument naming the offending field.
LogRow parse_log_row(std::string_view line);
// Exact decimal seconds (at most six places) to microseconds.
std::uint64_t parse_time_us(std::string_view text);

std::string events_header();
std::string format_event(const TaskEvent& e);

// Microsecond timestamp as decimal seconds with six places, exactly.
std::string format_time_us(std::uint64_t t_us);

std::string sha256_hex(std::string_view data);
std::string sha256_file(const std::filesystem::path& path);

// Streams a session into DIR/log.csv and DIR/events.csv; finish() adds
// config.toml and manifest.json.
class BundleWriter final : public SessionSink {
 public:
  BundleWriter(const std::filesystem::path& dir, const SessionConfig& config);
  ~BundleWriter() override;

  void on_row(const LogRow& row) override;
  void on_event(const TaskEvent& event) override;

  // Writes the truncation marker for faulted runs, closes the streams and
  // writes the manifest. Returns the manifest path.
  std::filesystem::path finish(const SessionResult& result);

  const std::filesystem::path& dir() const { return dir_; }

 private:
  class HashedFile;
  std::filesystem::path dir_;
  SessionConfig config_;
  std::unique_ptr<HashedFile> log_;
  std::unique_ptr<HashedFile> events_;
  std::string line_;
};

}  // namespace teleop
