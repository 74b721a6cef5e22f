#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace lps {

struct RunManifest {
  std::string command;
  std::vector<std::string> config_paths;
  std::uint64_t seed = 0;
  std::string code_version;
  std::vector<std::pair<std::string, std::string>> input_digests;  // path -> fnv1a-64 hex
  std::vector<std::string> output_paths;
  double wall_time_sec = 0.0;

  void add_input(const std::string& path);
  void write(const std::string& path) const;
};

std::string file_digest(const std::string& path);
std::string code_version();

}  // namespace lps
