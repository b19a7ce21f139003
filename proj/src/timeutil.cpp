#include "airsvr/timeutil.hpp"

#include <cctype>
#include <cstdio>

namespace airsvr {

namespace {

bool read_int(const std::string& s, std::size_t pos, std::size_t len, int& out) {
    if (pos + len > s.size()) return false;
    int v = 0;
    for (std::size_t k = pos; k < pos + len; ++k) {
        if (!std::isdigit(static_cast<unsigned char>(s[k]))) return false;
        v = v * 10 + (s[k] - '0');
    }
    out = v;
    return true;
}

}  // namespace

std::optional<Instant> parse_instant(const std::string& text) {
    using namespace std::chrono;
    std::string s = text;
    if (!s.empty() && s.back() == 'Z') s.pop_back();

    int y = 0, mo = 0, d = 0;
    if (s.size() < 10 || !read_int(s, 0, 4, y) || s[4] != '-' || !read_int(s, 5, 2, mo) || s[7] != '-' ||
        !read_int(s, 8, 2, d)) {
        return std::nullopt;
    }
    const year_month_day ymd{year{y}, month{static_cast<unsigned>(mo)}, day{static_cast<unsigned>(d)}};
    if (!ymd.ok()) return std::nullopt;

    int hh = 0, mm = 0, ss = 0;
    if (s.size() > 10) {
        if ((s[10] != 'T' && s[10] != ' ') || !read_int(s, 11, 2, hh) || s.size() < 16 || s[13] != ':' ||
            !read_int(s, 14, 2, mm)) {
            return std::nullopt;
        }
        if (s.size() > 16) {
            if (s.size() != 19 || s[16] != ':' || !read_int(s, 17, 2, ss)) return std::nullopt;
        }
        if (hh > 23 || mm > 59 || ss > 59) return std::nullopt;
    }
    return Instant{sys_days{ymd}} + hours{hh} + minutes{mm} + seconds{ss};
}

bool is_date_only(const std::string& text) {
    return text.size() == 10;
}

std::string format_date(Instant t) {
    using namespace std::chrono;
    const year_month_day ymd{floor<days>(t)};
    char buf[16];
    std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(ymd.year()), static_cast<unsigned>(ymd.month()),
                  static_cast<unsigned>(ymd.day()));
    return buf;
}

std::string format_datetime(Instant t) {
    using namespace std::chrono;
    const auto day_start = floor<days>(t);
    const hh_mm_ss hms{t - day_start};
    char buf[16];
    std::snprintf(buf, sizeof buf, "T%02d:%02d:%02d", static_cast<int>(hms.hours().count()),
                  static_cast<int>(hms.minutes().count()), static_cast<int>(hms.seconds().count()));
    return format_date(t) + buf;
}

CalendarFields calendar_fields(Instant t) {
    using namespace std::chrono;
    const auto day_start = floor<days>(t);
    const year_month_day ymd{day_start};
    const hh_mm_ss hms{t - day_start};
    return {static_cast<int>(ymd.year()), static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()),
            static_cast<int>(hms.hours().count())};
}

}  // namespace airsvr
