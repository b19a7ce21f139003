#include "airsvr/frame.hpp"

#include "airsvr/error.hpp"

#include <algorithm>
#include <set>

namespace airsvr {

std::string cadence_name(Cadence c) {
    return c == Cadence::Hourly ? "hourly" : "daily";
}

Cadence parse_cadence(const std::string& name) {
    if (name == "hourly") return Cadence::Hourly;
    if (name == "daily") return Cadence::Daily;
    throw InputError("unknown cadence '" + name + "'");
}

std::size_t Column::missing_count() const {
    return static_cast<std::size_t>(std::count(values.begin(), values.end(), std::nullopt));
}

const Column* TimeSeriesFrame::find(const std::string& name) const {
    for (const auto& c : columns) {
        if (c.name == name) return &c;
    }
    return nullptr;
}

Column* TimeSeriesFrame::find(const std::string& name) {
    for (auto& c : columns) {
        if (c.name == name) return &c;
    }
    return nullptr;
}

const Column& TimeSeriesFrame::column(const std::string& name) const {
    if (const Column* c = find(name)) return *c;
    throw InputError("no column named '" + name + "'");
}

std::vector<std::string> TimeSeriesFrame::column_names() const {
    std::vector<std::string> out;
    out.reserve(columns.size());
    for (const auto& c : columns) out.push_back(c.name);
    return out;
}

TimeSeriesFrame TimeSeriesFrame::slice(std::size_t begin, std::size_t end) const {
    if (begin > end || end > rows()) throw InputError("frame slice out of range");
    TimeSeriesFrame out;
    out.cadence = cadence;
    out.timestamps.assign(timestamps.begin() + static_cast<std::ptrdiff_t>(begin),
                          timestamps.begin() + static_cast<std::ptrdiff_t>(end));
    for (const auto& c : columns) {
        out.columns.push_back({c.name, {c.values.begin() + static_cast<std::ptrdiff_t>(begin),
                                        c.values.begin() + static_cast<std::ptrdiff_t>(end)}});
    }
    return out;
}

std::chrono::seconds cadence_step(Cadence c) {
    return c == Cadence::Hourly ? std::chrono::seconds{3600} : std::chrono::seconds{86400};
}

TimeSeriesFrame TimeSeriesFrame::regularized() const {
    validate();
    TimeSeriesFrame out;
    out.cadence = cadence;
    for (const auto& c : columns) out.columns.push_back({c.name, {}});
    if (rows() == 0) return out;
    const auto step = cadence_step(cadence);
    std::size_t src = 0;
    for (Instant t = timestamps.front(); t <= timestamps.back(); t += step) {
        out.timestamps.push_back(t);
        const bool have = src < rows() && timestamps[src] == t;
        for (std::size_t c = 0; c < columns.size(); ++c) {
            out.columns[c].values.push_back(have ? columns[c].values[src] : std::nullopt);
        }
        if (have) ++src;
    }
    return out;
}

void TimeSeriesFrame::validate() const {
    std::set<std::string> names;
    for (const auto& c : columns) {
        if (c.values.size() != rows()) {
            throw InputError("column '" + c.name + "' has " + std::to_string(c.values.size()) + " values for " +
                             std::to_string(rows()) + " timestamps");
        }
        if (!names.insert(c.name).second) throw InputError("duplicate column '" + c.name + "'");
    }
    const auto step = cadence_step(cadence);
    for (std::size_t i = 1; i < rows(); ++i) {
        const auto gap = timestamps[i] - timestamps[i - 1];
        if (gap <= std::chrono::seconds{0}) {
            throw InputError("timestamps not strictly increasing at row " + std::to_string(i));
        }
        if (gap % step != std::chrono::seconds{0}) {
            throw InputError("timestamp spacing at row " + std::to_string(i) + " is not a multiple of the " +
                             cadence_name(cadence) + " cadence");
        }
    }
}

}  // namespace airsvr
