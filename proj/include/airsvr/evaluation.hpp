#pragma once

#include <array>
#include <cstddef>
#include <iosfwd>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace airsvr {

struct MetricsRecord {
    double mae = 0.0;
    double r2 = 0.0;
    double rmse = 0.0;
    double nrmse = 0.0;
    std::size_t n = 0;
};

enum class NrmseNorm { Range, Mean };

// Throws MetricError on length mismatch, fewer than 2 values or constant y_true.
MetricsRecord compute_metrics(std::span<const double> y_true, std::span<const double> y_pred,
                              NrmseNorm norm = NrmseNorm::Range);

enum class ConcUnit { UgPerM3, Ppm, Ppb };
std::string unit_name(ConcUnit u);  // "ug/m3" | "ppm" | "ppb"
ConcUnit parse_unit(const std::string& name);

struct AqiSegment {
    std::string averaging_period;
    double conc_lo = 0.0;
    double conc_hi = 0.0;
    double aqi_lo = 0.0;
    double aqi_hi = 0.0;
};

struct PollutantTable {
    ConcUnit unit = ConcUnit::UgPerM3;
    std::vector<AqiSegment> segments;  // increasing, non-overlapping
};

struct AqiBreakpointTable {
    int version = 1;
    std::map<std::string, PollutantTable> pollutants;

    // Throws InputError when segments overlap, decrease or leave [0, 500].
    void validate() const;
};

AqiBreakpointTable load_breakpoints(std::istream& in);
AqiBreakpointTable load_breakpoints_file(const std::string& path);
// The table shipped in data/aqi_breakpoints.txt, compiled in.
const AqiBreakpointTable& default_breakpoints();

// Converts between mass and mixing-ratio units at 25 C and 1 atm.
double convert_concentration(const std::string& pollutant, double value, ConcUnit from, ConcUnit to);

// Linear within a segment, linear across the rounding gap between segments, 500 above the top.
double aqi_subindex(const std::string& pollutant, double concentration, ConcUnit unit,
                    const AqiBreakpointTable& table = default_breakpoints());

struct OverallAqi {
    double aqi = 0.0;
    std::string dominant;
};
OverallAqi aqi_overall(const std::map<std::string, double>& subindices);

enum class AqiCategory { Good, Moderate, UnhealthySensitive, Unhealthy, VeryUnhealthy, Hazardous };
inline constexpr std::array<AqiCategory, 6> kAllCategories{
    AqiCategory::Good,      AqiCategory::Moderate,      AqiCategory::UnhealthySensitive,
    AqiCategory::Unhealthy, AqiCategory::VeryUnhealthy, AqiCategory::Hazardous};

// Rounds half up, then looks up 0-50, 51-100, 101-150, 151-200, 201-300, 301-500.
AqiCategory categorize(double aqi);
std::string category_name(AqiCategory c);
// Good / Moderate / Unhealthy (everything from 101 up).
std::string collapsed_label(AqiCategory c);
inline const std::vector<std::string> kCollapsedLabels{"Good", "Moderate", "Unhealthy"};

struct ConfusionMatrix {
    std::vector<std::string> labels;
    std::vector<std::vector<std::size_t>> counts;  // rows true, columns predicted

    std::size_t total() const;
    // Diagonal over total; 0 for an empty matrix.
    double accuracy() const;
};

ConfusionMatrix confusion_matrix(std::span<const std::string> truth, std::span<const std::string> pred,
                                 const std::vector<std::string>& labels);

// "Good: 2509, 159, 0" style rows under a header row.
void render_confusion(std::ostream& out, const ConfusionMatrix& m);

}  // namespace airsvr
