#include "kapps/timeutil.hpp"

#include <cstdio>
#include <regex>

namespace kapps {

std::string format_timestamp(Timestamp ts) {
  using namespace std::chrono;
  auto day = floor<days>(ts);
  year_month_day ymd{day};
  hh_mm_ss<microseconds> tod{ts - day};
  char buf[64];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02uT%02ld:%02ld:%02ld.%06ldZ",
                static_cast<int>(ymd.year()), static_cast<unsigned>(ymd.month()),
                static_cast<unsigned>(ymd.day()), static_cast<long>(tod.hours().count()),
                static_cast<long>(tod.minutes().count()),
                static_cast<long>(tod.seconds().count()),
                static_cast<long>(tod.subseconds().count()));
  return buf;
}

std::optional<Timestamp> parse_timestamp(std::string_view text) {
  using namespace std::chrono;
  static const std::regex re(
      R"((-?\d{4,})-(\d{2})-(\d{2})T(\d{2}):(\d{2}):(\d{2})(?:\.(\d+))?(Z|([+-])(\d{2}):(\d{2}))?)");
  std::cmatch m;
  if (!std::regex_match(text.begin(), text.end(), m, re)) return std::nullopt;
  int y = std::stoi(m[1].str());
  unsigned mo = std::stoul(m[2].str()), d = std::stoul(m[3].str());
  year_month_day ymd{year{y}, month{mo}, day{d}};
  if (!ymd.ok()) return std::nullopt;
  long hh = std::stol(m[4].str()), mm = std::stol(m[5].str()), ss = std::stol(m[6].str());
  if (hh > 23 || mm > 59 || ss > 60) return std::nullopt;
  long micros = 0;
  if (m[7].matched) {
    std::string frac = m[7].str();
    frac.resize(6, '0');
    micros = std::stol(frac.substr(0, 6));
  }
  Timestamp ts = sys_days{ymd} + hours{hh} + minutes{mm} + seconds{ss} + microseconds{micros};
  if (m[9].matched) {
    auto off = hours{std::stol(m[10].str())} + minutes{std::stol(m[11].str())};
    ts = m[9].str() == "+" ? ts - off : ts + off;
  }
  return ts;
}

}  // namespace kapps
