#pragma once

#include "airsvr/frame.hpp"
#include "airsvr/matrix.hpp"
#include "airsvr/svr.hpp"

#include <array>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace airsvr {

// ---------------------------------------------------------------------------
// Individual steps
// ---------------------------------------------------------------------------

struct DroppedColumn {
    std::string name;
    std::string reason;
    friend bool operator==(const DroppedColumn&, const DroppedColumn&) = default;
};

struct SparseDropResult {
    TimeSeriesFrame frame;
    std::vector<DroppedColumn> dropped;
};

// Drops columns whose missing fraction is strictly greater than threshold.
SparseDropResult drop_sparse_columns(const TimeSeriesFrame& frame, double threshold = 0.5);

// Fills each gap with the quadratic through the 3 nearest observed points of that column
// (ties toward earlier), clamped to [min - range, max + range] of the observed values.
TimeSeriesFrame impute_quadratic(const TimeSeriesFrame& frame);

struct DateRange {
    Instant start;
    Instant end;  // inclusive
    friend bool operator==(const DateRange&, const DateRange&) = default;
};

TimeSeriesFrame exclude_date_range(const TimeSeriesFrame& frame, std::span<const DateRange> ranges);

// Yeo-Johnson power transform.
double yeo_johnson(double x, double lambda);
// Profile log-likelihood of lambda for the given sample.
double yeo_johnson_log_likelihood(std::span<const double> x, double lambda);
// Maximum-likelihood lambda in [-5, 5] by golden-section search. Needs >= 10 non-constant values.
double yeo_johnson_fit(std::span<const double> x);

struct ColumnScale {
    double mean = 0.0;
    double stddev = 1.0;  // population
    friend bool operator==(const ColumnScale&, const ColumnScale&) = default;
};

std::vector<ColumnScale> standardize_fit(const Matrix& m);
Matrix standardize_apply(const Matrix& m, std::span<const ColumnScale> scale);

enum class Season : int { Winter = 0, Spring = 1, Summer = 2, Fall = 3 };

// Season code per month, index 0 = January.
using SeasonTable = std::array<int, 12>;
constexpr SeasonTable kMeteorologicalSeasons{0, 0, 1, 1, 1, 2, 2, 2, 3, 3, 3, 0};

// Appends season, [hour, hour_sin, hour_cos,] day, month, year. Hour columns for hourly cadence only.
TimeSeriesFrame engineer_time_features(const TimeSeriesFrame& frame,
                                       const SeasonTable& seasons = kMeteorologicalSeasons);
bool is_engineered_feature(const std::string& name);

struct SelectionConfig {
    double threshold = 0.9;
    std::vector<std::string> forced_drops{"month", "hour"};
    std::vector<std::string> keep_always;  // never dropped for correlation
};

// Greedy in column order: a feature is dropped when its |Pearson r| with an already kept
// feature exceeds the threshold, unless it is in keep_always. Forced drops always go.
std::vector<std::string> select_features(const Matrix& m, const std::vector<std::string>& names,
                                         const SelectionConfig& config = {});

struct PcaState {
    Matrix components;  // k x d, orthonormal rows
    Vector means;       // d
    Vector variance_ratio;  // k, descending

    friend bool operator==(const PcaState& a, const PcaState& b);
};

// Smallest k whose cumulative explained-variance ratio reaches the threshold.
PcaState pca_fit(const Matrix& m, double variance_threshold = 0.95);
Matrix pca_apply(const Matrix& m, const PcaState& state);

// ---------------------------------------------------------------------------
// Fitted pipeline
// ---------------------------------------------------------------------------

struct PipelineConfig {
    std::string target;
    std::size_t horizon = 1;  // forecast the target this many rows ahead
    double sparse_threshold = 0.5;
    std::vector<DateRange> excluded_ranges;
    SeasonTable seasons = kMeteorologicalSeasons;
    SelectionConfig selection;
    bool use_pca = false;
    double pca_variance = 0.95;
};

struct PipelineState {
    std::string target;
    std::size_t horizon = 1;
    std::vector<DroppedColumn> dropped_columns;
    std::vector<DateRange> excluded_ranges;
    SeasonTable seasons = kMeteorologicalSeasons;
    std::vector<std::string> raw_columns;      // measurement columns kept after the sparse drop
    std::vector<std::string> feature_columns;  // candidate features before selection
    std::map<std::string, double> lambda_per_column;
    std::map<std::string, ColumnScale> scaler;
    std::vector<std::string> selected_features;
    std::optional<PcaState> pca;
    ColumnScale target_scaler;

    friend bool operator==(const PipelineState&, const PipelineState&) = default;

    // Output dimension of apply.
    std::size_t output_dimension() const;
    std::vector<std::string> output_names() const;
};

// Rows aligned for supervised use: features at row t, target at row t + horizon.
struct SupervisedRows {
    TrainingSet set;                       // y standardized with the fitted target scaler
    std::vector<Instant> feature_times;    // time of each feature row
    std::vector<Instant> target_times;     // time of the forecast target
    Vector target_raw;                     // y before standardization
};

struct FittedPipeline {
    PipelineState state;
    TrainingSet train;
};

FittedPipeline pipeline_fit(const TimeSeriesFrame& frame, const PipelineConfig& config);
// Features for every surviving row of frame.
FeatureMatrix pipeline_apply(const TimeSeriesFrame& frame, const PipelineState& state);
SupervisedRows pipeline_apply_supervised(const TimeSeriesFrame& frame, const PipelineState& state);

double destandardize(double z, const ColumnScale& scale);

}  // namespace airsvr
