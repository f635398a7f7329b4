#pragma once

#include <string>
#include <utility>
#include <vector>

namespace flicker {

/// Resolved configuration of one CLI run, written as `key=value` lines that
/// the `--config` option reads back, so every run is reproducible from its
/// run.meta alone.
struct RunMeta {
  std::string command;
  std::vector<std::pair<std::string, std::string>> entries;

  void add(const std::string& key, const std::string& value);
  void add(const std::string& key, long long value);
  void add(const std::string& key, unsigned long long value);
  void add(const std::string& key, double value);
  void write(const std::string& path) const;
};

}  // namespace flicker
