#pragma once

#include "airsvr/frame.hpp"
#include "airsvr/kernels.hpp"
#include "airsvr/preprocess.hpp"
#include "airsvr/svr.hpp"

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace airsvr {

// Half-open row ranges; training always starts at row 0.
struct Fold {
    std::size_t train_end = 0;
    std::size_t val_begin = 0;
    std::size_t val_end = 0;
};

struct SplitPlan {
    std::size_t rows = 0;
    std::vector<Fold> folds;
};

// Expanding window over folds + 1 equal blocks, remainder going to the first.
// Throws InputError when n < 2 * (folds + 1) or folds == 0.
SplitPlan time_series_split(std::size_t n, std::size_t folds = 5);

// {0.001, 0.002, ..., 0.100}
std::vector<double> default_epsilon_grid();

struct SearchSpace {
    double c_min = 1.0;
    double c_max = 100.0;
    std::vector<double> epsilon_grid = default_epsilon_grid();
    std::vector<KernelChoice> kernels{KernelChoice{}};
    std::size_t iterations = 60;
    std::uint64_t seed = 0;

    void validate() const;
};

enum class SelectionMetric { Rmse, Mae };
std::string metric_name(SelectionMetric m);
SelectionMetric parse_metric(const std::string& name);

struct SearchOptions {
    SelectionMetric metric = SelectionMetric::Rmse;
    std::size_t threads = 1;
    SolverConfig solver;
};

struct Candidate {
    double c = 1.0;
    double epsilon = 0.1;
    std::size_t kernel_index = 0;
};

// The candidate sequence for a space; depends only on the space (and its seed).
std::vector<Candidate> draw_candidates(const SearchSpace& space);

struct TrialResult {
    std::size_t index = 0;
    double c = 1.0;
    double epsilon = 0.1;
    KernelChoice kernel;
    std::vector<double> per_fold;  // validation score per fold, inf when the solver gave up
    double mean = 0.0;

    bool failed() const;
};

struct SearchResult {
    SelectionMetric metric = SelectionMetric::Rmse;
    std::vector<TrialResult> trials;
    std::size_t best_index = 0;

    const TrialResult& best() const { return trials.at(best_index); }
};

// Training rows and scored validation rows for one fold.
struct FoldData {
    TrainingSet train;
    Matrix val_x;
    Vector val_y;
};

// Fits the preprocessing chain on the fold's training rows alone.
PipelineState fit_fold_pipeline(const TimeSeriesFrame& frame, const PipelineConfig& config, const Fold& fold);
FoldData prepare_fold(const TimeSeriesFrame& frame, const PipelineConfig& config, const Fold& fold);
FoldData prepare_fold(const TrainingSet& data, const Fold& fold);

SearchResult random_search(const std::vector<FoldData>& folds, const SearchSpace& space,
                           const SearchOptions& options = {});
SearchResult random_search(const TimeSeriesFrame& frame, const PipelineConfig& config, const SearchSpace& space,
                           const SplitPlan& plan, const SearchOptions& options = {});
SearchResult random_search(const TrainingSet& data, const SearchSpace& space, const SplitPlan& plan,
                           const SearchOptions& options = {});

// Index of the winner: lowest mean, then smaller C, then smaller epsilon, then earlier trial.
std::size_t select_best(const std::vector<TrialResult>& trials);

// Hyperparameters of a trial with the kernel resolved against x.
HyperParams resolve_hyper(const TrialResult& trial, const Matrix& x);

std::string kernel_choice_label(const KernelChoice& k);
void write_trial_log(std::ostream& out, const SearchResult& result);

}  // namespace airsvr
