#include "kapps/timeseries.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

namespace kapps {

namespace {

std::string id_for(std::uint64_t n) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%08llu", static_cast<unsigned long long>(n));
  return buf;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TsStore::TsStore() = default;

TsStore::TsStore(std::filesystem::path dir) : dir_(std::move(dir)) {
  std::filesystem::create_directories(*dir_);
  for (const auto& e : std::filesystem::directory_iterator(*dir_)) {
    if (!e.is_regular_file() || e.path().extension() != ".csv") continue;
    std::string id = e.path().stem().string();
    blobs_[id] = slurp(e.path());
    try {
      next_ = std::max<std::uint64_t>(next_, std::stoull(id) + 1);
    } catch (const std::exception&) {
    }
  }
}

std::string TsStore::put(const mw::Recording& rec) {
  std::string text = mw::format_recording(rec);
  // Reject what could not be read back.
  mw::parse_recording(text, rec.channel);
  std::lock_guard lock(mu_);
  std::string id;
  do id = id_for(next_++);
  while (blobs_.count(id) || (dir_ && std::filesystem::exists(*dir_ / (id + ".csv"))));
  if (dir_) {
    std::ofstream out(*dir_ / (id + ".csv"), std::ios::binary);
    out << text;
    if (!out) throw std::runtime_error("cannot write record " + id);
  }
  blobs_[id] = std::move(text);
  return kScheme + id;
}

std::string TsStore::raw(const std::string& uri) const {
  std::string_view s(kScheme);
  if (uri.compare(0, s.size(), s) != 0) throw UnknownRecord("not a record URI: " + uri);
  std::lock_guard lock(mu_);
  auto it = blobs_.find(uri.substr(s.size()));
  if (it == blobs_.end()) throw UnknownRecord("unknown record: " + uri);
  return it->second;
}

mw::Recording TsStore::get(const std::string& uri) const { return mw::parse_recording(raw(uri), uri); }

bool TsStore::contains(const std::string& uri) const {
  try {
    raw(uri);
    return true;
  } catch (const UnknownRecord&) {
    return false;
  }
}

std::size_t TsStore::size() const {
  std::lock_guard lock(mu_);
  return blobs_.size();
}

std::vector<std::string> TsStore::uris() const {
  std::lock_guard lock(mu_);
  std::vector<std::string> out;
  for (const auto& [id, _] : blobs_) out.push_back(kScheme + id);
  return out;
}

}  // namespace kapps
