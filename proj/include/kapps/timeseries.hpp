#pragma once
// Append-only keyed store for raw sensor recordings. The graph only ever
// holds the `urn:kapps:ts:<id>` references handed out here.

#include <filesystem>
#include <map>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "kapps/middleware.hpp"

namespace kapps {

class UnknownRecord : public std::out_of_range {
 public:
  using std::out_of_range::out_of_range;
};

class TsStore {
 public:
  // Memory-only store.
  TsStore();
  // Records live as `<dir>/<id>.csv`; existing files are picked up.
  explicit TsStore(std::filesystem::path dir);

  // Never overwrites; every call yields a fresh URI.
  std::string put(const mw::Recording& rec);
  mw::Recording get(const std::string& uri) const;
  // Stored bytes in the recording CSV format.
  std::string raw(const std::string& uri) const;
  bool contains(const std::string& uri) const;
  std::size_t size() const;
  std::vector<std::string> uris() const;

  static constexpr const char* kScheme = "urn:kapps:ts:";

 private:
  std::optional<std::filesystem::path> dir_;
  mutable std::mutex mu_;
  std::map<std::string, std::string> blobs_;  // id -> CSV text
  std::uint64_t next_ = 1;
};

}  // namespace kapps
