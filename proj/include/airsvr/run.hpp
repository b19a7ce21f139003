#pragma once

#include "airsvr/artifact.hpp"
#include "airsvr/evaluation.hpp"
#include "airsvr/ingest.hpp"
#include "airsvr/tuning.hpp"

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace airsvr {

enum class PcaMode { Off, On, Both };

struct RunConfig {
    std::string input;
    DatasetSchema schema = DatasetSchema::EmbassyHourly;
    std::string station;  // cpcb: empty averages the stations
    std::vector<std::string> targets{"pm25"};
    std::vector<std::string> drop_columns{"aqi"};
    std::size_t horizon = 1;

    KernelType kernel = KernelType::Rbf;
    std::optional<double> gamma;  // unset: data-driven default
    int degree = 3;
    double coef0 = 1.0;

    double c_min = 1.0;
    double c_max = 100.0;
    double epsilon_min = 0.001;
    double epsilon_max = 0.1;
    double epsilon_step = 0.001;
    std::size_t iterations = 60;
    std::size_t folds = 5;
    std::uint64_t seed = 0;
    SelectionMetric metric = SelectionMetric::Rmse;
    double kkt_tolerance = 1e-3;
    std::size_t threads = 1;

    std::vector<DateRange> excluded;
    PcaMode pca = PcaMode::Both;
    double pca_variance = 0.95;
    double sparse_threshold = 0.5;
    double correlation_threshold = 0.9;
    SeasonTable seasons = kMeteorologicalSeasons;

    double holdout = 0.3;  // trailing fraction of rows kept for validation
    NrmseNorm nrmse = NrmseNorm::Range;
    std::string breakpoints;  // empty: built-in table
    std::string output_dir = "airsvr_out";

    // Throws ConfigError naming the first bad setting.
    void validate() const;

    SearchSpace search_space() const;
    PipelineConfig pipeline_config(const std::string& target, bool use_pca) const;
};

// Sets one key; throws ConfigError for unknown keys or unparsable values.
// "exclude" appends; every other key overwrites.
void apply_setting(RunConfig& config, const std::string& key, const std::string& value);

// Flat "key = value" lines; '#' starts a comment. A key other than exclude may appear once.
RunConfig parse_run_config(std::istream& in);
RunConfig load_run_config(const std::string& path);

// "2020-08-01..2020-10-31"; a date-only end covers that whole day.
DateRange parse_date_range(const std::string& text);

enum class RunStage { Tune, Train, Full };

// Output file name -> contents. Nothing touches the disk until write_outputs.
struct RunOutputs {
    std::map<std::string, std::string> files;
    std::vector<ModelArtifact> models;
};

RunOutputs execute_run(const RunConfig& config, RunStage stage = RunStage::Full);
void write_outputs(const RunOutputs& outputs, const std::string& dir);

// Rounds of the shared report layout, exposed for the evaluate subcommand.
void write_metrics_rows(std::ostream& out, const std::string& target, const std::vector<MetricsRecord>& columns);

}  // namespace airsvr
