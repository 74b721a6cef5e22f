#include "lps/manifest.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace lps {

std::string file_digest(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open for digest: " + path);
  std::uint64_t h = 0xcbf29ce484222325ULL;  // FNV-1a 64
  char buf[1 << 16];
  while (in.read(buf, sizeof(buf)) || in.gcount() > 0) {
    for (std::streamsize i = 0; i < in.gcount(); ++i) {
      h ^= static_cast<unsigned char>(buf[i]);
      h *= 0x100000001b3ULL;
    }
  }
  std::ostringstream os;
  os << std::hex << h;
  return os.str();
}

std::string code_version() { return "lps 0.1.0"; }

void RunManifest::add_input(const std::string& path) {
  input_digests.emplace_back(path, file_digest(path));
}

void RunManifest::write(const std::string& path) const {
  nlohmann::json j;
  j["command"] = command;
  j["config_paths"] = config_paths;
  j["seed"] = seed;
  j["code_version"] = code_version;
  nlohmann::json inputs = nlohmann::json::object();
  for (const auto& [p, d] : input_digests) inputs[p] = d;
  j["input_digests"] = inputs;
  j["output_paths"] = output_paths;
  j["wall_time_sec"] = wall_time_sec;
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write manifest: " + path);
  out << j.dump(2) << "\n";
}

}  // namespace lps
