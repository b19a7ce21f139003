#include "airsvr/evaluation.hpp"

#include "airsvr/error.hpp"
#include "airsvr/numfmt.hpp"
#include "aqi_table_data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

namespace airsvr {

MetricsRecord compute_metrics(std::span<const double> y_true, std::span<const double> y_pred, NrmseNorm norm) {
    if (y_true.size() != y_pred.size()) throw MetricError("compute_metrics: length mismatch");
    const std::size_t n = y_true.size();
    if (n < 2) throw MetricError("compute_metrics: need at least 2 values");
    double lo = y_true[0], hi = y_true[0], mean = 0.0;
    for (double v : y_true) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
        mean += v;
    }
    mean /= static_cast<double>(n);
    if (hi == lo) throw MetricError("compute_metrics: y_true is constant, R2 and nRMSE are undefined");

    double abs_sum = 0.0, sse = 0.0, sst = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double e = y_pred[i] - y_true[i];
        abs_sum += std::abs(e);
        sse += e * e;
        sst += (y_true[i] - mean) * (y_true[i] - mean);
    }
    MetricsRecord m;
    m.n = n;
    m.mae = abs_sum / static_cast<double>(n);
    m.rmse = std::sqrt(sse / static_cast<double>(n));
    m.r2 = 1.0 - sse / sst;
    if (norm == NrmseNorm::Range) {
        m.nrmse = m.rmse / (hi - lo);
    } else {
        if (mean == 0.0) throw MetricError("compute_metrics: mean of y_true is zero");
        m.nrmse = m.rmse / std::abs(mean);
    }
    return m;
}

std::string unit_name(ConcUnit u) {
    switch (u) {
        case ConcUnit::UgPerM3: return "ug/m3";
        case ConcUnit::Ppm: return "ppm";
        case ConcUnit::Ppb: return "ppb";
    }
    return "?";
}

ConcUnit parse_unit(const std::string& name) {
    if (name == "ug/m3") return ConcUnit::UgPerM3;
    if (name == "ppm") return ConcUnit::Ppm;
    if (name == "ppb") return ConcUnit::Ppb;
    throw InputError("unknown concentration unit '" + name + "'");
}

void AqiBreakpointTable::validate() const {
    if (pollutants.empty()) throw InputError("breakpoint table is empty");
    for (const auto& [name, t] : pollutants) {
        if (t.segments.empty()) throw InputError("breakpoint table: no segments for " + name);
        for (std::size_t i = 0; i < t.segments.size(); ++i) {
            const auto& s = t.segments[i];
            if (!(s.conc_lo >= 0.0 && s.conc_hi > s.conc_lo)) {
                throw InputError("breakpoint table: bad concentration range for " + name);
            }
            if (!(s.aqi_lo >= 0.0 && s.aqi_hi > s.aqi_lo && s.aqi_hi <= 500.0)) {
                throw InputError("breakpoint table: bad index range for " + name);
            }
            if (i > 0) {
                const auto& p = t.segments[i - 1];
                if (!(s.conc_lo > p.conc_hi) || s.aqi_lo < p.aqi_hi) {
                    throw InputError("breakpoint table: segments of " + name + " overlap or decrease");
                }
            }
        }
    }
}

AqiBreakpointTable load_breakpoints(std::istream& in) {
    AqiBreakpointTable table;
    std::string line;
    std::size_t lineno = 0;
    bool have_header = false;
    std::map<std::string, bool> unit_seen;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        const std::string t = trim(line);
        if (!have_header) {
            std::istringstream hs(t);
            std::string hash, tag, ver;
            hs >> hash >> tag >> ver;
            if (hash != "#" || tag != "aqi-breakpoints" || ver.size() < 2 || ver[0] != 'v') {
                throw ParseError("breakpoint table: missing '# aqi-breakpoints v<N>' header", lineno);
            }
            try {
                table.version = std::stoi(ver.substr(1));
            } catch (const std::exception&) {
                throw ParseError("breakpoint table: bad version", lineno);
            }
            if (table.version != 1) throw VersionError("breakpoint table: unsupported version " + ver, table.version);
            have_header = true;
            continue;
        }
        if (t.empty() || t[0] == '#') continue;

        std::vector<std::string> f;
        std::istringstream ls(t);
        std::string cell;
        while (std::getline(ls, cell, ',')) f.push_back(trim(cell));
        if (f.size() != 7) throw ParseError("breakpoint table: expected 7 fields", lineno);
        static const char* names[] = {"pollutant", "averaging_period", "unit", "conc_lo", "conc_hi", "aqi_lo", "aqi_hi"};
        AqiSegment s;
        s.averaging_period = f[1];
        double* nums[] = {&s.conc_lo, &s.conc_hi, &s.aqi_lo, &s.aqi_hi};
        for (int k = 0; k < 4; ++k) {
            try {
                *nums[k] = parse_double(f[3 + k]);
            } catch (const std::exception&) {
                throw ParseError("breakpoint table: bad number '" + f[3 + k] + "'", lineno, names[3 + k]);
            }
        }
        ConcUnit unit;
        try {
            unit = parse_unit(f[2]);
        } catch (const InputError&) {
            throw ParseError("breakpoint table: unknown unit '" + f[2] + "'", lineno, "unit");
        }
        auto& pt = table.pollutants[f[0]];
        if (unit_seen[f[0]] && pt.unit != unit) {
            throw ParseError("breakpoint table: mixed units for " + f[0], lineno, "unit");
        }
        unit_seen[f[0]] = true;
        pt.unit = unit;
        pt.segments.push_back(s);
    }
    if (!have_header) throw ParseError("breakpoint table: empty input");
    table.validate();
    return table;
}

AqiBreakpointTable load_breakpoints_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InputError("cannot open breakpoint table " + path);
    return load_breakpoints(in);
}

const AqiBreakpointTable& default_breakpoints() {
    static const AqiBreakpointTable table = [] {
        std::istringstream in{std::string(kAqiTableText)};
        return load_breakpoints(in);
    }();
    return table;
}

namespace {

double molar_mass(const std::string& pollutant) {
    if (pollutant == "so2") return 64.066;
    if (pollutant == "no2") return 46.0055;
    if (pollutant == "o3") return 47.998;
    if (pollutant == "co") return 28.010;
    throw InputError("no molar mass known for '" + pollutant + "'");
}

constexpr double kMolarVolume = 24.45;  // litres per mole at 25 C, 1 atm

double to_ppb(const std::string& pollutant, double v, ConcUnit u) {
    switch (u) {
        case ConcUnit::Ppb: return v;
        case ConcUnit::Ppm: return v * 1000.0;
        case ConcUnit::UgPerM3: return v * kMolarVolume / molar_mass(pollutant);
    }
    return v;
}

}  // namespace

double convert_concentration(const std::string& pollutant, double value, ConcUnit from, ConcUnit to) {
    if (from == to) return value;
    const double ppb = to_ppb(pollutant, value, from);
    switch (to) {
        case ConcUnit::Ppb: return ppb;
        case ConcUnit::Ppm: return ppb / 1000.0;
        case ConcUnit::UgPerM3: return ppb * molar_mass(pollutant) / kMolarVolume;
    }
    return ppb;
}

double aqi_subindex(const std::string& pollutant, double concentration, ConcUnit unit,
                    const AqiBreakpointTable& table) {
    const auto it = table.pollutants.find(pollutant);
    if (it == table.pollutants.end()) throw InputError("pollutant '" + pollutant + "' is not in the AQI table");
    if (!(concentration >= 0.0)) throw InputError("negative or NaN concentration for " + pollutant);
    const auto& segs = it->second.segments;
    const double c = convert_concentration(pollutant, concentration, unit, it->second.unit);

    if (c > segs.back().conc_hi) return 500.0;
    if (c < segs.front().conc_lo) throw InputError("concentration below the AQI table for " + pollutant);
    for (std::size_t i = 0; i < segs.size(); ++i) {
        const auto& s = segs[i];
        if (c >= s.conc_lo && c <= s.conc_hi) {
            return s.aqi_lo + (s.aqi_hi - s.aqi_lo) * ((c - s.conc_lo) / (s.conc_hi - s.conc_lo));
        }
        if (i + 1 < segs.size() && c > s.conc_hi && c < segs[i + 1].conc_lo) {
            const auto& n = segs[i + 1];
            return s.aqi_hi + (n.aqi_lo - s.aqi_hi) * ((c - s.conc_hi) / (n.conc_lo - s.conc_hi));
        }
    }
    return 500.0;
}

OverallAqi aqi_overall(const std::map<std::string, double>& subindices) {
    if (subindices.empty()) throw InputError("aqi_overall: no sub-indices");
    OverallAqi r{subindices.begin()->second, subindices.begin()->first};
    for (const auto& [name, v] : subindices) {
        if (v > r.aqi) r = {v, name};
    }
    return r;
}

AqiCategory categorize(double aqi) {
    if (!(aqi >= 0.0 && aqi <= 500.0)) throw InputError("AQI " + exact_decimal(aqi) + " is outside [0, 500]");
    const double r = std::floor(aqi + 0.5);
    if (r <= 50) return AqiCategory::Good;
    if (r <= 100) return AqiCategory::Moderate;
    if (r <= 150) return AqiCategory::UnhealthySensitive;
    if (r <= 200) return AqiCategory::Unhealthy;
    if (r <= 300) return AqiCategory::VeryUnhealthy;
    return AqiCategory::Hazardous;
}

std::string category_name(AqiCategory c) {
    switch (c) {
        case AqiCategory::Good: return "Good";
        case AqiCategory::Moderate: return "Moderate";
        case AqiCategory::UnhealthySensitive: return "Unhealthy for Sensitive Groups";
        case AqiCategory::Unhealthy: return "Unhealthy";
        case AqiCategory::VeryUnhealthy: return "Very Unhealthy";
        case AqiCategory::Hazardous: return "Hazardous";
    }
    return "?";
}

std::string collapsed_label(AqiCategory c) {
    if (c == AqiCategory::Good) return "Good";
    if (c == AqiCategory::Moderate) return "Moderate";
    return "Unhealthy";
}

std::size_t ConfusionMatrix::total() const {
    std::size_t t = 0;
    for (const auto& row : counts)
        for (std::size_t v : row) t += v;
    return t;
}

double ConfusionMatrix::accuracy() const {
    const std::size_t t = total();
    if (t == 0) return 0.0;
    std::size_t d = 0;
    for (std::size_t i = 0; i < counts.size(); ++i) d += counts[i][i];
    return static_cast<double>(d) / static_cast<double>(t);
}

ConfusionMatrix confusion_matrix(std::span<const std::string> truth, std::span<const std::string> pred,
                                 const std::vector<std::string>& labels) {
    if (truth.size() != pred.size()) throw InputError("confusion_matrix: length mismatch");
    auto index = [&](const std::string& l) {
        const auto it = std::find(labels.begin(), labels.end(), l);
        if (it == labels.end()) throw InputError("confusion_matrix: unknown label '" + l + "'");
        return static_cast<std::size_t>(it - labels.begin());
    };
    ConfusionMatrix m{labels, std::vector<std::vector<std::size_t>>(labels.size(), std::vector<std::size_t>(labels.size()))};
    for (std::size_t i = 0; i < truth.size(); ++i) ++m.counts[index(truth[i])][index(pred[i])];
    return m;
}

void render_confusion(std::ostream& out, const ConfusionMatrix& m) {
    out << "true\\predicted:";
    for (std::size_t j = 0; j < m.labels.size(); ++j) out << (j ? ", " : " ") << m.labels[j];
    out << "\n";
    for (std::size_t i = 0; i < m.labels.size(); ++i) {
        out << m.labels[i] << ":";
        for (std::size_t j = 0; j < m.labels.size(); ++j) out << (j ? ", " : " ") << m.counts[i][j];
        out << "\n";
    }
}

}  // namespace airsvr
