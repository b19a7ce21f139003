#include "airsvr/tuning.hpp"

#include "airsvr/error.hpp"
#include "airsvr/numfmt.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <limits>
#include <mutex>
#include <ostream>
#include <random>
#include <thread>

namespace airsvr {

SplitPlan time_series_split(std::size_t n, std::size_t folds) {
    if (folds == 0) throw InputError("time_series_split: folds must be at least 1");
    if (n < 2 * (folds + 1)) {
        throw InputError("time_series_split: " + std::to_string(n) + " rows is too few for " +
                         std::to_string(folds) + " folds");
    }
    const std::size_t blocks = folds + 1;
    const std::size_t base = n / blocks;
    const std::size_t first = base + n % blocks;
    SplitPlan plan;
    plan.rows = n;
    for (std::size_t k = 1; k <= folds; ++k) {
        const std::size_t train_end = first + (k - 1) * base;
        plan.folds.push_back({train_end, train_end, train_end + base});
    }
    return plan;
}

std::vector<double> default_epsilon_grid() {
    std::vector<double> g;
    for (int k = 1; k <= 100; ++k) g.push_back(k / 1000.0);
    return g;
}

void SearchSpace::validate() const {
    if (!(c_min > 0.0) || !(c_max >= c_min) || !std::isfinite(c_max)) {
        throw ConfigError("search space: C range must satisfy 0 < c_min <= c_max");
    }
    if (epsilon_grid.empty()) throw ConfigError("search space: epsilon grid is empty");
    for (double e : epsilon_grid) {
        if (!(e >= 0.0) || !std::isfinite(e)) throw ConfigError("search space: epsilon values must be >= 0");
    }
    if (kernels.empty()) throw ConfigError("search space: no kernel candidates");
    if (iterations == 0) throw ConfigError("search space: iterations must be at least 1");
}

std::string metric_name(SelectionMetric m) { return m == SelectionMetric::Rmse ? "rmse" : "mae"; }

SelectionMetric parse_metric(const std::string& name) {
    if (name == "rmse") return SelectionMetric::Rmse;
    if (name == "mae") return SelectionMetric::Mae;
    throw ConfigError("unknown selection metric '" + name + "'");
}

namespace {

// 53 random bits mapped to [0, 1).
double unit(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

std::size_t pick(std::mt19937_64& rng, std::size_t n) {
    return std::min(n - 1, static_cast<std::size_t>(unit(rng) * static_cast<double>(n)));
}

double score(const Vector& truth, const Vector& pred, SelectionMetric metric) {
    const Vector e = pred - truth;
    if (metric == SelectionMetric::Mae) return e.cwiseAbs().mean();
    return std::sqrt(e.squaredNorm() / static_cast<double>(e.size()));
}

}  // namespace

std::vector<Candidate> draw_candidates(const SearchSpace& space) {
    space.validate();
    std::mt19937_64 rng(space.seed);
    std::vector<Candidate> out;
    out.reserve(space.iterations);
    for (std::size_t i = 0; i < space.iterations; ++i) {
        Candidate c;
        c.c = std::min(space.c_max, space.c_min + (space.c_max - space.c_min) * unit(rng));
        c.epsilon = space.epsilon_grid[pick(rng, space.epsilon_grid.size())];
        c.kernel_index = pick(rng, space.kernels.size());
        out.push_back(c);
    }
    return out;
}

bool TrialResult::failed() const { return !std::isfinite(mean); }

PipelineState fit_fold_pipeline(const TimeSeriesFrame& frame, const PipelineConfig& config, const Fold& fold) {
    return pipeline_fit(frame.slice(0, fold.train_end), config).state;
}

FoldData prepare_fold(const TimeSeriesFrame& frame, const PipelineConfig& config, const Fold& fold) {
    auto fitted = pipeline_fit(frame.slice(0, fold.train_end), config);
    auto val = pipeline_apply_supervised(frame.slice(fold.val_begin, fold.val_end), fitted.state);
    return {std::move(fitted.train), std::move(val.set.x.values), std::move(val.set.y)};
}

FoldData prepare_fold(const TrainingSet& data, const Fold& fold) {
    const auto tr = static_cast<Eigen::Index>(fold.train_end);
    const auto vb = static_cast<Eigen::Index>(fold.val_begin);
    const auto vn = static_cast<Eigen::Index>(fold.val_end - fold.val_begin);
    FoldData f;
    f.train.x.names = data.x.names;
    f.train.x.values = data.x.values.topRows(tr);
    f.train.y = data.y.head(tr);
    f.val_x = data.x.values.middleRows(vb, vn);
    f.val_y = data.y.segment(vb, vn);
    return f;
}

std::size_t select_best(const std::vector<TrialResult>& trials) {
    if (trials.empty()) throw SearchError("no trials to select from");
    std::size_t best = 0;
    for (std::size_t i = 1; i < trials.size(); ++i) {
        const auto& a = trials[i];
        const auto& b = trials[best];
        if (a.mean < b.mean || (a.mean == b.mean && (a.c < b.c || (a.c == b.c && a.epsilon < b.epsilon)))) best = i;
    }
    if (trials[best].failed()) throw SearchError("every trial failed to converge");
    return best;
}

SearchResult random_search(const std::vector<FoldData>& folds, const SearchSpace& space,
                           const SearchOptions& options) {
    if (folds.empty()) throw SearchError("random_search: no folds");
    const auto candidates = draw_candidates(space);
    options.solver.validate();

    // Gram matrices depend on the fold and the kernel only.
    std::vector<std::vector<KernelSpec>> specs(folds.size());
    std::vector<std::vector<Matrix>> grams(folds.size());
    for (std::size_t f = 0; f < folds.size(); ++f) {
        folds[f].train.validate();
        if (folds[f].val_y.size() == 0) throw SearchError("random_search: empty validation block");
        for (const auto& k : space.kernels) {
            specs[f].push_back(k.resolve(folds[f].train.x.values));
            grams[f].push_back(gram_matrix(specs[f].back(), folds[f].train.x.values));
        }
    }

    std::vector<TrialResult> trials(candidates.size());
    std::vector<std::exception_ptr> errors(candidates.size());

    auto run_trial = [&](std::size_t i) {
        const Candidate& cand = candidates[i];
        TrialResult t;
        t.index = i;
        t.c = cand.c;
        t.epsilon = cand.epsilon;
        t.kernel = space.kernels[cand.kernel_index];
        double sum = 0.0;
        for (std::size_t f = 0; f < folds.size(); ++f) {
            HyperParams hp{cand.c, cand.epsilon, specs[f][cand.kernel_index]};
            double s;
            try {
                const SvrModel model = solve_dual(folds[f].train, grams[f][cand.kernel_index], hp, options.solver);
                s = score(folds[f].val_y, predict(model, folds[f].val_x), options.metric);
            } catch (const ConvergenceError&) {
                s = std::numeric_limits<double>::infinity();
            }
            t.per_fold.push_back(s);
            sum += s;
        }
        t.mean = sum / static_cast<double>(folds.size());
        trials[i] = std::move(t);
    };

    const std::size_t workers = std::clamp<std::size_t>(options.threads, 1, candidates.size());
    if (workers == 1) {
        for (std::size_t i = 0; i < candidates.size(); ++i) run_trial(i);
    } else {
        std::atomic<std::size_t> next{0};
        std::vector<std::thread> pool;
        for (std::size_t w = 0; w < workers; ++w) {
            pool.emplace_back([&] {
                for (std::size_t i = next++; i < candidates.size(); i = next++) {
                    try {
                        run_trial(i);
                    } catch (...) {
                        errors[i] = std::current_exception();
                    }
                }
            });
        }
        for (auto& th : pool) th.join();
        for (const auto& e : errors) {
            if (e) std::rethrow_exception(e);
        }
    }

    SearchResult r;
    r.metric = options.metric;
    r.trials = std::move(trials);
    r.best_index = select_best(r.trials);
    return r;
}

SearchResult random_search(const TimeSeriesFrame& frame, const PipelineConfig& config, const SearchSpace& space,
                           const SplitPlan& plan, const SearchOptions& options) {
    if (plan.rows != frame.rows()) throw SearchError("random_search: split plan does not match the frame");
    std::vector<FoldData> folds;
    for (const auto& f : plan.folds) folds.push_back(prepare_fold(frame, config, f));
    return random_search(folds, space, options);
}

SearchResult random_search(const TrainingSet& data, const SearchSpace& space, const SplitPlan& plan,
                           const SearchOptions& options) {
    if (plan.rows != static_cast<std::size_t>(data.size())) {
        throw SearchError("random_search: split plan does not match the data");
    }
    std::vector<FoldData> folds;
    for (const auto& f : plan.folds) folds.push_back(prepare_fold(data, f));
    return random_search(folds, space, options);
}

HyperParams resolve_hyper(const TrialResult& trial, const Matrix& x) {
    return {trial.c, trial.epsilon, trial.kernel.resolve(x)};
}

std::string kernel_choice_label(const KernelChoice& k) {
    std::string s = kernel_name(k.type);
    if (k.type == KernelType::Polynomial) s += ":" + std::to_string(k.degree);
    s += ":" + (k.gamma ? exact_decimal(*k.gamma) : std::string("auto"));
    if (k.type == KernelType::Polynomial) s += ":" + exact_decimal(k.coef0);
    return s;
}

void write_trial_log(std::ostream& out, const SearchResult& result) {
    const std::string m = metric_name(result.metric);
    const std::size_t nf = result.trials.empty() ? 0 : result.trials.front().per_fold.size();
    out << "trial_index,C,epsilon,kernel";
    for (std::size_t f = 1; f <= nf; ++f) out << ",fold" << f << "_" << m;
    out << ",mean_" << m << "\n";
    for (const auto& t : result.trials) {
        out << t.index << "," << exact_decimal(t.c) << "," << exact_decimal(t.epsilon) << ","
            << kernel_choice_label(t.kernel);
        for (double v : t.per_fold) out << "," << exact_decimal(v);
        out << "," << exact_decimal(t.mean) << "\n";
    }
}

}  // namespace airsvr
