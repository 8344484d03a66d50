#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace nvr::cli {

/// Reproducibility record written next to every command's outputs.
struct RunManifest {
  std::string command;
  std::vector<std::string> argv;
  std::map<std::string, std::string> config;  // every option, defaults included
  std::uint64_t seed = 0;
  std::map<std::string, std::string> input_hashes;  // path -> crc32 hex
  std::vector<std::string> outputs;
  double wall_time = 0.0;  // seconds

  void add_input(const std::filesystem::path& path);
  std::string to_json() const;
  void write(const std::filesystem::path& path) const;
};

/// `out.nvrc` -> `out.nvrc.manifest.json`
std::filesystem::path manifest_path_for(const std::filesystem::path& output);

/// Streamed CRC32 of a file as 8 lowercase hex digits.
std::string file_crc32(const std::filesystem::path& path);

}  // namespace nvr::cli
