#pragma once

#include <chrono>
#include <optional>
#include <string>

namespace airsvr {

using Instant = std::chrono::sys_seconds;

// Accepts YYYY-MM-DD, or YYYY-MM-DD[T| ]HH:MM[:SS][Z]. Returns nullopt on any malformed or
// out-of-range field (month 13, Feb 30, hour 24, ...).
std::optional<Instant> parse_instant(const std::string& text);

// True when the text carries a date only (no time-of-day part).
bool is_date_only(const std::string& text);

std::string format_date(Instant t);      // YYYY-MM-DD
std::string format_datetime(Instant t);  // YYYY-MM-DDTHH:MM:SS

struct CalendarFields {
    int year = 0;
    unsigned month = 0;  // 1..12
    unsigned day = 0;    // 1..31
    int hour = 0;        // 0..23
};
CalendarFields calendar_fields(Instant t);

}  // namespace airsvr
