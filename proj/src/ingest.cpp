#include "airsvr/ingest.hpp"

#include "airsvr/error.hpp"
#include "airsvr/numfmt.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <istream>
#include <map>
#include <set>

namespace airsvr {

std::string schema_name(DatasetSchema s) { return s == DatasetSchema::EmbassyHourly ? "embassy" : "cpcb"; }

DatasetSchema parse_schema(const std::string& name) {
    if (name == "embassy") return DatasetSchema::EmbassyHourly;
    if (name == "cpcb") return DatasetSchema::CpcbDaily;
    throw ConfigError("unknown schema '" + name + "' (expected embassy or cpcb)");
}

namespace {

std::vector<std::string> split_row(const std::string& line, std::size_t lineno) {
    std::vector<std::string> out;
    std::string cur;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char ch = line[i];
        if (quoted) {
            if (ch == '"' && i + 1 < line.size() && line[i + 1] == '"') {
                cur += '"';
                ++i;
            } else if (ch == '"') {
                quoted = false;
            } else {
                cur += ch;
            }
        } else if (ch == '"') {
            quoted = true;
        } else if (ch == ',') {
            out.push_back(trim(cur));
            cur.clear();
        } else {
            cur += ch;
        }
    }
    if (quoted) throw ParseError("line " + std::to_string(lineno) + ": unterminated quote", lineno);
    out.push_back(trim(cur));
    return out;
}

std::string lower(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
    return s;
}

struct Layout {
    std::size_t time_col = 0;
    std::optional<std::size_t> station_col;
    std::vector<std::pair<std::string, std::size_t>> values;  // column name, cell index
};

Layout read_header(const std::vector<std::string>& header, DatasetSchema schema) {
    const std::string time_name = schema == DatasetSchema::EmbassyHourly ? "datetime" : "date";
    const std::set<std::string> allowed = schema == DatasetSchema::EmbassyHourly
                                              ? std::set<std::string>{"pm25", "pm10", "aqi"}
                                              : std::set<std::string>{"so2", "no2", "pm25", "pm10", "spm"};
    Layout l;
    bool have_time = false;
    std::set<std::string> seen;
    for (std::size_t i = 0; i < header.size(); ++i) {
        const std::string h = lower(header[i]);
        if (!seen.insert(h).second) throw SchemaError("duplicate header column '" + h + "'");
        if (h == time_name) {
            l.time_col = i;
            have_time = true;
        } else if (schema == DatasetSchema::CpcbDaily && h == "station_id") {
            l.station_col = i;
        } else if (allowed.count(h)) {
            l.values.emplace_back(h, i);
        } else {
            throw SchemaError("column '" + header[i] + "' is not part of the " + schema_name(schema) + " schema");
        }
    }
    if (!have_time) throw SchemaError("header lacks the '" + time_name + "' column");
    if (schema == DatasetSchema::EmbassyHourly) {
        for (const char* req : {"pm25", "pm10"}) {
            if (!seen.count(req)) throw SchemaError(std::string("header lacks the '") + req + "' column");
        }
    } else {
        if (!l.station_col) throw SchemaError("header lacks the 'station_id' column");
        if (l.values.empty()) throw SchemaError("header has no pollutant columns");
    }
    return l;
}

}  // namespace

TimeSeriesFrame ingest_csv(std::istream& in, DatasetSchema schema, const IngestOptions& options) {
    const Cadence cadence = schema == DatasetSchema::EmbassyHourly ? Cadence::Hourly : Cadence::Daily;
    std::string line;
    std::size_t lineno = 0;
    std::optional<Layout> layout;
    std::size_t width = 0;

    // per timestamp: per value column, (sum, count)
    std::map<Instant, std::vector<std::pair<double, int>>> acc;
    std::map<std::string, Instant> last_per_station;

    while (std::getline(in, line)) {
        ++lineno;
        if (lineno == 1 && line.rfind("\xEF\xBB\xBF", 0) == 0) line.erase(0, 3);
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (trim(line).empty()) continue;
        const auto cells = split_row(line, lineno);
        if (!layout) {
            layout = read_header(cells, schema);
            width = cells.size();
            continue;
        }
        if (cells.size() != width) {
            throw ParseError("line " + std::to_string(lineno) + ": expected " + std::to_string(width) + " fields, found " +
                                 std::to_string(cells.size()),
                             lineno);
        }
        const std::string time_name = schema == DatasetSchema::EmbassyHourly ? "datetime" : "date";
        const std::string& ts = cells[layout->time_col];
        const auto t = parse_instant(ts);
        if (!t || (cadence == Cadence::Daily && !is_date_only(ts))) {
            throw ParseError("line " + std::to_string(lineno) + ", column '" + time_name + "': bad timestamp '" + ts + "'",
                             lineno, time_name);
        }
        if ((t->time_since_epoch() % cadence_step(cadence)).count() != 0) {
            throw ParseError("line " + std::to_string(lineno) + ", column '" + time_name + "': '" + ts +
                                 "' is not on the " + cadence_name(cadence) + " grid",
                             lineno, time_name);
        }
        std::string station;
        if (layout->station_col) {
            station = cells[*layout->station_col];
            if (station.empty()) {
                throw ParseError("line " + std::to_string(lineno) + ", column 'station_id': empty", lineno, "station_id");
            }
            if (!options.station.empty() && station != options.station) continue;
        }
        const auto prev = last_per_station.find(station);
        if (prev != last_per_station.end() && *t < prev->second) {
            throw ParseError("line " + std::to_string(lineno) + ", column '" + time_name + "': timestamp goes backwards",
                             lineno, time_name);
        }
        last_per_station[station] = *t;

        auto& slot = acc[*t];
        slot.resize(layout->values.size());
        for (std::size_t k = 0; k < layout->values.size(); ++k) {
            const auto& [name, idx] = layout->values[k];
            const std::string& cell = cells[idx];
            if (cell.empty()) continue;
            double v;
            try {
                v = parse_double(cell);
            } catch (const std::invalid_argument&) {
                throw ParseError("line " + std::to_string(lineno) + ", column '" + name + "': bad number '" + cell + "'",
                                 lineno, name);
            }
            if (!std::isfinite(v)) {
                throw ParseError("line " + std::to_string(lineno) + ", column '" + name + "': non-finite value", lineno,
                                 name);
            }
            slot[k].first += v;
            slot[k].second += 1;
        }
    }
    if (!layout) throw SchemaError("input is empty (no header row)");
    if (acc.empty()) {
        throw InputError(options.station.empty() ? "input has no data rows"
                                                 : "no rows for station '" + options.station + "'");
    }

    TimeSeriesFrame f;
    f.cadence = cadence;
    for (const auto& [name, idx] : layout->values) f.columns.push_back({name, {}});
    for (const auto& [t, slot] : acc) {
        f.timestamps.push_back(t);
        for (std::size_t k = 0; k < f.columns.size(); ++k) {
            const auto [sum, count] = k < slot.size() ? slot[k] : std::pair<double, int>{0.0, 0};
            f.columns[k].values.push_back(count ? std::optional<double>(sum / count) : std::nullopt);
        }
    }
    return f.regularized();
}

TimeSeriesFrame ingest_csv_file(const std::string& path, DatasetSchema schema, const IngestOptions& options) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InputError("cannot open " + path);
    return ingest_csv(in, schema, options);
}

}  // namespace airsvr
