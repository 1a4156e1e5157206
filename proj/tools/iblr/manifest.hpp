#pragma once

#include <string>
#include <utility>
#include <vector>

namespace iblr::cli {

// Lower-case hex SHA-256 of a file's bytes.
std::string sha256_file(const std::string& path);

// Current UTC time as 2026-01-31T12:00:00.123Z.
std::string utc_timestamp();

struct ManifestInput {
  std::string command;
  std::vector<std::pair<std::string, std::string>> config;
  std::string started_at;
  std::string finished_at;
  std::string dir;
  std::vector<std::string> files;  // names relative to dir
};

// Writes dir/manifest.json listing every file with its size and checksum.
void write_manifest(const ManifestInput& in);

extern const char* const kCodeVersion;

}  // namespace iblr::cli
