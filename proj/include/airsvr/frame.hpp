#pragma once

#include "airsvr/timeutil.hpp"

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

namespace airsvr {

enum class Cadence { Hourly, Daily };

std::string cadence_name(Cadence c);
Cadence parse_cadence(const std::string& name);
std::chrono::seconds cadence_step(Cadence c);

// A named series; std::nullopt marks a missing observation.
struct Column {
    std::string name;
    std::vector<std::optional<double>> values;

    std::size_t missing_count() const;
    std::size_t observed_count() const { return values.size() - missing_count(); }
};

// Timestamped named columns. Timestamps strictly increase; gaps are allowed.
struct TimeSeriesFrame {
    Cadence cadence = Cadence::Daily;
    std::vector<Instant> timestamps;
    std::vector<Column> columns;

    std::size_t rows() const { return timestamps.size(); }

    const Column* find(const std::string& name) const;
    Column* find(const std::string& name);
    const Column& column(const std::string& name) const;  // throws InputError when absent
    std::vector<std::string> column_names() const;

    // Rows [begin, end).
    TimeSeriesFrame slice(std::size_t begin, std::size_t end) const;

    // Throws InputError on unequal column lengths, duplicate names, non-increasing
    // timestamps or spacing that is not a whole number of cadence steps.
    void validate() const;

    // Same data on an unbroken cadence grid; inserted rows are all missing.
    TimeSeriesFrame regularized() const;
};

}  // namespace airsvr
