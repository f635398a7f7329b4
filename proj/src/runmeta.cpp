#include "flicker/runmeta.hpp"

#include <cstdio>
#include <fstream>

#include "flicker/errors.hpp"
#include "flicker/version.hpp"

namespace flicker {

void RunMeta::add(const std::string& key, const std::string& value) {
  entries.emplace_back(key, value);
}

void RunMeta::add(const std::string& key, long long value) {
  entries.emplace_back(key, std::to_string(value));
}

void RunMeta::add(const std::string& key, unsigned long long value) {
  entries.emplace_back(key, std::to_string(value));
}

void RunMeta::add(const std::string& key, double value) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", value);
  entries.emplace_back(key, buf);
}

void RunMeta::write(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw DataError("cannot open for writing: " + path);
  out << "# " << kVersion << " run metadata\n"
      << "# command: " << command << "\n"
      << "# replay: flicker-ews " << command << " --config " << path << "\n";
  for (const auto& [key, value] : entries) out << key << "=" << value << "\n";
  if (!out) throw DataError("write failed: " + path);
}

}  // namespace flicker
