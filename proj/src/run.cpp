#include "airsvr/run.hpp"

#include "airsvr/error.hpp"
#include "airsvr/numfmt.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <istream>
#include <set>
#include <sstream>

namespace airsvr {

namespace {

std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::string cell;
    std::istringstream is(s);
    while (std::getline(is, cell, ',')) {
        cell = trim(cell);
        if (!cell.empty()) out.push_back(cell);
    }
    return out;
}

double number(const std::string& key, const std::string& v) {
    try {
        return parse_double(v);
    } catch (const std::invalid_argument&) {
        throw ConfigError("setting '" + key + "': '" + v + "' is not a number");
    }
}

std::uint64_t whole(const std::string& key, const std::string& v) {
    if (v.empty() || v.find_first_not_of("0123456789") != std::string::npos) {
        throw ConfigError("setting '" + key + "': '" + v + "' is not a non-negative integer");
    }
    try {
        return std::stoull(v);
    } catch (const std::exception&) {
        throw ConfigError("setting '" + key + "': '" + v + "' is out of range");
    }
}

}  // namespace

DateRange parse_date_range(const std::string& text) {
    const auto pos = text.find("..");
    if (pos == std::string::npos) throw ConfigError("date range '" + text + "' should look like START..END");
    const std::string a = trim(text.substr(0, pos)), b = trim(text.substr(pos + 2));
    const auto start = parse_instant(a);
    auto end = parse_instant(b);
    if (!start || !end) throw ConfigError("date range '" + text + "' has a malformed date");
    if (is_date_only(b)) *end += std::chrono::seconds{86399};
    if (*end < *start) throw ConfigError("date range '" + text + "' ends before it starts");
    return {*start, *end};
}

void apply_setting(RunConfig& c, const std::string& key, const std::string& raw) {
    const std::string v = trim(raw);
    if (key == "input") {
        c.input = v;
    } else if (key == "schema") {
        c.schema = parse_schema(v);
    } else if (key == "station") {
        c.station = v;
    } else if (key == "targets" || key == "target") {
        c.targets = split_list(v);
    } else if (key == "drop_columns") {
        c.drop_columns = split_list(v);
    } else if (key == "horizon") {
        c.horizon = whole(key, v);
    } else if (key == "kernel") {
        try {
            c.kernel = parse_kernel_type(v);
        } catch (const Error&) {
            throw ConfigError("setting 'kernel': expected rbf or poly, got '" + v + "'");
        }
    } else if (key == "gamma") {
        if (v == "auto") {
            c.gamma.reset();
        } else {
            c.gamma = number(key, v);
        }
    } else if (key == "degree") {
        c.degree = static_cast<int>(whole(key, v));
    } else if (key == "coef0") {
        c.coef0 = number(key, v);
    } else if (key == "c_min") {
        c.c_min = number(key, v);
    } else if (key == "c_max") {
        c.c_max = number(key, v);
    } else if (key == "epsilon_min") {
        c.epsilon_min = number(key, v);
    } else if (key == "epsilon_max") {
        c.epsilon_max = number(key, v);
    } else if (key == "epsilon_step") {
        c.epsilon_step = number(key, v);
    } else if (key == "iterations") {
        c.iterations = whole(key, v);
    } else if (key == "folds") {
        c.folds = whole(key, v);
    } else if (key == "seed") {
        c.seed = whole(key, v);
    } else if (key == "metric") {
        c.metric = parse_metric(v);
    } else if (key == "kkt_tolerance") {
        c.kkt_tolerance = number(key, v);
    } else if (key == "threads") {
        c.threads = whole(key, v);
    } else if (key == "exclude") {
        c.excluded.push_back(parse_date_range(v));
    } else if (key == "pca") {
        if (v == "on") c.pca = PcaMode::On;
        else if (v == "off") c.pca = PcaMode::Off;
        else if (v == "both") c.pca = PcaMode::Both;
        else throw ConfigError("setting 'pca': expected on, off or both, got '" + v + "'");
    } else if (key == "pca_variance") {
        c.pca_variance = number(key, v);
    } else if (key == "sparse_threshold") {
        c.sparse_threshold = number(key, v);
    } else if (key == "correlation_threshold") {
        c.correlation_threshold = number(key, v);
    } else if (key == "seasons") {
        const auto items = split_list(v);
        if (items.size() != 12) throw ConfigError("setting 'seasons': needs 12 comma-separated values");
        for (std::size_t i = 0; i < 12; ++i) {
            const auto s = whole(key, items[i]);
            if (s > 3) throw ConfigError("setting 'seasons': values must be 0..3");
            c.seasons[i] = static_cast<int>(s);
        }
    } else if (key == "holdout") {
        c.holdout = number(key, v);
    } else if (key == "nrmse") {
        if (v == "range") c.nrmse = NrmseNorm::Range;
        else if (v == "mean") c.nrmse = NrmseNorm::Mean;
        else throw ConfigError("setting 'nrmse': expected range or mean, got '" + v + "'");
    } else if (key == "breakpoints") {
        c.breakpoints = v;
    } else if (key == "output_dir") {
        c.output_dir = v;
    } else {
        throw ConfigError("unknown setting '" + key + "'");
    }
}

RunConfig parse_run_config(std::istream& in) {
    RunConfig c;
    std::set<std::string> seen;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (lineno == 1 && line.rfind("\xEF\xBB\xBF", 0) == 0) line.erase(0, 3);
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw ConfigError("config line " + std::to_string(lineno) + ": expected key = value");
        const std::string key = trim(line.substr(0, eq));
        if (key != "exclude" && !seen.insert(key).second) {
            throw ConfigError("config line " + std::to_string(lineno) + ": '" + key + "' set twice");
        }
        try {
            apply_setting(c, key, line.substr(eq + 1));
        } catch (const ConfigError& e) {
            throw ConfigError("config line " + std::to_string(lineno) + ": " + e.what());
        }
    }
    return c;
}

RunConfig load_run_config(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open config file " + path);
    return parse_run_config(in);
}

void RunConfig::validate() const {
    if (input.empty()) throw ConfigError("no input file configured");
    if (targets.empty()) throw ConfigError("no target configured");
    if (std::set<std::string>(targets.begin(), targets.end()).size() != targets.size()) {
        throw ConfigError("targets repeat");
    }
    for (const auto& t : targets) {
        if (std::find(drop_columns.begin(), drop_columns.end(), t) != drop_columns.end()) {
            throw ConfigError("target '" + t + "' is also listed in drop_columns");
        }
    }
    if (horizon < 1) throw ConfigError("horizon must be at least 1");
    if (!(holdout > 0.0 && holdout < 1.0)) throw ConfigError("holdout must lie in (0, 1)");
    if (folds < 1) throw ConfigError("folds must be at least 1");
    if (threads < 1) throw ConfigError("threads must be at least 1");
    if (!(kkt_tolerance > 0.0)) throw ConfigError("kkt_tolerance must be positive");
    if (!(pca_variance > 0.0 && pca_variance <= 1.0)) throw ConfigError("pca_variance must lie in (0, 1]");
    if (!(sparse_threshold >= 0.0 && sparse_threshold <= 1.0)) throw ConfigError("sparse_threshold must lie in [0, 1]");
    if (!(correlation_threshold > 0.0 && correlation_threshold <= 1.0)) {
        throw ConfigError("correlation_threshold must lie in (0, 1]");
    }
    if (gamma && !(*gamma > 0.0)) throw ConfigError("gamma must be positive");
    if (kernel == KernelType::Polynomial && (degree < 1 || !(coef0 >= 0.0))) {
        throw ConfigError("polynomial kernel needs degree >= 1 and coef0 >= 0");
    }
    search_space().validate();
}

SearchSpace RunConfig::search_space() const {
    if (!(epsilon_step > 0.0) || !(epsilon_min > 0.0) || !(epsilon_max >= epsilon_min)) {
        throw ConfigError("epsilon grid needs 0 < epsilon_min <= epsilon_max and a positive step");
    }
    // Grid points are k / d with d = 1 / step, which keeps 0.001 * k free of drift.
    const double d = std::round(1.0 / epsilon_step);
    if (std::abs(d * epsilon_step - 1.0) > 1e-9) throw ConfigError("epsilon_step must divide 1 evenly");
    SearchSpace s;
    s.c_min = c_min;
    s.c_max = c_max;
    s.epsilon_grid.clear();
    const auto k0 = static_cast<long long>(std::llround(epsilon_min * d));
    const auto k1 = static_cast<long long>(std::llround(epsilon_max * d));
    for (long long k = k0; k <= k1; ++k) s.epsilon_grid.push_back(static_cast<double>(k) / d);
    KernelChoice kc;
    kc.type = kernel;
    kc.gamma = gamma;
    kc.degree = degree;
    kc.coef0 = coef0;
    s.kernels = {kc};
    s.iterations = iterations;
    s.seed = seed;
    s.validate();
    return s;
}

PipelineConfig RunConfig::pipeline_config(const std::string& target, bool use_pca) const {
    PipelineConfig p;
    p.target = target;
    p.horizon = horizon;
    p.sparse_threshold = sparse_threshold;
    p.excluded_ranges = excluded;
    p.seasons = seasons;
    p.selection.threshold = correlation_threshold;
    p.use_pca = use_pca;
    p.pca_variance = pca_variance;
    return p;
}

void write_metrics_rows(std::ostream& out, const std::string& target, const std::vector<MetricsRecord>& cols) {
    const std::pair<const char*, double MetricsRecord::*> rows[] = {
        {"MAE", &MetricsRecord::mae}, {"R\xC2\xB2", &MetricsRecord::r2}, {"RMSE", &MetricsRecord::rmse},
        {"nRMSE", &MetricsRecord::nrmse}};
    for (const auto& [label, member] : rows) {
        out << target << "," << label;
        for (const auto& m : cols) out << "," << fixed(m.*member);
        out << "\n";
    }
}

namespace {

struct VariantRun {
    std::string target;
    std::string variant;
    SearchResult search;
    ModelArtifact artifact;
    Forecast train;
    Forecast val;
    MetricsRecord train_metrics;
    MetricsRecord val_metrics;
};

std::string now_utc() {
    if (const char* sde = std::getenv("SOURCE_DATE_EPOCH")) {
        try {
            return format_datetime(Instant{std::chrono::seconds{std::stoll(sde)}}) + "Z";
        } catch (const std::exception&) {
        }
    }
    return format_datetime(std::chrono::floor<std::chrono::seconds>(std::chrono::system_clock::now())) + "Z";
}

std::string range_text(const DateRange& r) { return format_datetime(r.start) + ".." + format_datetime(r.end); }

// Overall AQI per row across the AQI-table targets of one variant.
std::vector<double> overall_aqi(const std::vector<const VariantRun*>& runs, bool validation, bool predicted,
                                const AqiBreakpointTable& table) {
    std::vector<double> out;
    const Forecast& first = validation ? runs.front()->val : runs.front()->train;
    out.assign(first.target_times.size(), 0.0);
    for (const VariantRun* r : runs) {
        const Forecast& f = validation ? r->val : r->train;
        if (f.target_times != first.target_times) throw InputError("targets disagree on forecast rows");
        const Vector& v = predicted ? f.predicted : f.observed;
        for (std::size_t i = 0; i < out.size(); ++i) {
            const double c = std::max(0.0, v[static_cast<Eigen::Index>(i)]);
            out[i] = std::max(out[i], aqi_subindex(r->target, c, ConcUnit::UgPerM3, table));
        }
    }
    return out;
}

}  // namespace

RunOutputs execute_run(const RunConfig& config, RunStage stage) {
    config.validate();
    const AqiBreakpointTable table =
        config.breakpoints.empty() ? default_breakpoints() : load_breakpoints_file(config.breakpoints);

    TimeSeriesFrame frame = ingest_csv_file(config.input, config.schema, {config.station});
    std::vector<std::string> dropped_by_config;
    for (const auto& d : config.drop_columns) {
        const auto it = std::find_if(frame.columns.begin(), frame.columns.end(), [&](const Column& c) { return c.name == d; });
        if (it != frame.columns.end()) {
            frame.columns.erase(it);
            dropped_by_config.push_back(d);
        }
    }
    for (const auto& t : config.targets) {
        if (!frame.find(t)) throw InputError("target '" + t + "' is not a column of " + config.input);
    }
    const std::size_t n = frame.rows();
    const auto n_val = static_cast<std::size_t>(std::llround(config.holdout * static_cast<double>(n)));
    if (n_val < 3 || n - n_val < 2 * (config.folds + 1)) {
        throw InputError("too few rows (" + std::to_string(n) + ") for the holdout and fold settings");
    }
    const TimeSeriesFrame train_frame = frame.slice(0, n - n_val);
    const TimeSeriesFrame val_frame = frame.slice(n - n_val, n);

    std::vector<std::pair<std::string, bool>> variants;
    if (config.pca != PcaMode::On) variants.emplace_back("no_pca", false);
    if (config.pca != PcaMode::Off) variants.emplace_back("pca", true);

    const SearchSpace space = config.search_space();
    SearchOptions opts;
    opts.metric = config.metric;
    opts.threads = config.threads;
    opts.solver.kkt_tolerance = config.kkt_tolerance;
    opts.solver.shrink = true;
    const SplitPlan plan = time_series_split(train_frame.rows(), config.folds);
    const std::string created = now_utc();

    RunOutputs out;
    std::vector<VariantRun> runs;
    for (const auto& [vname, use_pca] : variants) {
        for (const auto& target : config.targets) {
            VariantRun r;
            r.target = target;
            r.variant = vname;
            const PipelineConfig pc = config.pipeline_config(target, use_pca);
            r.search = random_search(train_frame, pc, space, plan, opts);
            std::ostringstream log;
            write_trial_log(log, r.search);
            out.files["trials_" + target + "_" + vname + ".csv"] = log.str();
            if (stage == RunStage::Tune) {
                runs.push_back(std::move(r));
                continue;
            }

            const auto fitted = pipeline_fit(train_frame, pc);
            const HyperParams hp = resolve_hyper(r.search.best(), fitted.train.x.values);
            r.artifact.pipeline = fitted.state;
            r.artifact.model = solve_dual(fitted.train, hp, opts.solver);
            r.artifact.model.target_name = target;
            std::size_t failed = 0;
            for (const auto& t : r.search.trials) failed += t.failed();
            r.artifact.metadata = {target,
                                   created,
                                   config.seed,
                                   {{"metric", metric_name(r.search.metric)},
                                    {"best_trial", std::to_string(r.search.best().index)},
                                    {"best_mean", exact_decimal(r.search.best().mean)},
                                    {"trials", std::to_string(r.search.trials.size())},
                                    {"failed_trials", std::to_string(failed)},
                                    {"folds", std::to_string(plan.folds.size())}}};
            out.files["model_" + target + "_" + vname + ".json"] = serialize_model(r.artifact);
            out.models.push_back(r.artifact);
            if (stage == RunStage::Full) {
                r.train = forecast(r.artifact, train_frame);
                r.val = forecast(r.artifact, val_frame);
                r.train_metrics = compute_metrics(std::span<const double>(r.train.observed_std.data(), r.train.observed_std.size()),
                                                  std::span<const double>(r.train.predicted_std.data(), r.train.predicted_std.size()),
                                                  config.nrmse);
                r.val_metrics = compute_metrics(std::span<const double>(r.val.observed_std.data(), r.val.observed_std.size()),
                                                std::span<const double>(r.val.predicted_std.data(), r.val.predicted_std.size()),
                                                config.nrmse);
            }
            runs.push_back(std::move(r));
        }
    }

    std::ostringstream manifest;
    manifest << "seed: " << config.seed << "\n"
             << "input: " << config.input << "\n"
             << "schema: " << schema_name(config.schema) << "\n";
    if (!config.station.empty()) manifest << "station: " << config.station << "\n";
    manifest << "targets: ";
    for (std::size_t i = 0; i < config.targets.size(); ++i) manifest << (i ? "," : "") << config.targets[i];
    manifest << "\nhorizon: " << config.horizon << "\n"
             << "rows: " << n << "\n"
             << "training_rows: " << train_frame.rows() << "\n"
             << "validation_rows: " << val_frame.rows() << "\n"
             << "training_span: " << format_datetime(train_frame.timestamps.front()) << ".."
             << format_datetime(train_frame.timestamps.back()) << "\n"
             << "validation_span: " << format_datetime(val_frame.timestamps.front()) << ".."
             << format_datetime(val_frame.timestamps.back()) << "\n";
    for (const auto& e : config.excluded) manifest << "excluded: " << range_text(e) << "\n";
    for (const auto& d : dropped_by_config) manifest << "dropped_by_config: " << d << "\n";
    manifest << "folds: " << plan.folds.size() << "\n"
             << "iterations: " << space.iterations << "\n"
             << "C_range: " << exact_decimal(space.c_min) << ".." << exact_decimal(space.c_max) << "\n"
             << "epsilon_grid: " << exact_decimal(space.epsilon_grid.front()) << ".."
             << exact_decimal(space.epsilon_grid.back()) << " (" << space.epsilon_grid.size() << " values)\n"
             << "kernel: " << kernel_choice_label(space.kernels.front()) << "\n"
             << "selection_metric: " << metric_name(config.metric) << "\n";
    for (const auto& r : runs) {
        const auto& best = r.search.best();
        manifest << "\n[" << r.target << " " << r.variant << "]\n"
                 << "best_trial: " << best.index << "\n"
                 << "C: " << fixed(best.c) << "\n"
                 << "C_exact: " << exact_decimal(best.c) << "\n"
                 << "epsilon: " << fixed(best.epsilon) << "\n"
                 << "cv_mean_" << metric_name(config.metric) << ": " << fixed(best.mean) << "\n";
        if (stage == RunStage::Tune) continue;
        const auto& st = r.artifact.pipeline;
        const auto& m = r.artifact.model;
        manifest << "kernel_spec: " << to_string(m.hyper.kernel) << "\n"
                 << "support_vectors: " << m.beta.size() << "\n"
                 << "candidate_features: " << st.feature_columns.size() << "\n"
                 << "selected_features: " << st.selected_features.size() << " (";
        for (std::size_t i = 0; i < st.selected_features.size(); ++i) {
            manifest << (i ? ", " : "") << st.selected_features[i];
        }
        manifest << ")\n";
        for (const auto& d : st.dropped_columns) manifest << "dropped: " << d.name << " (" << d.reason << ")\n";
        if (st.pca) {
            const double k = static_cast<double>(st.pca->components.rows());
            const double dsel = static_cast<double>(st.selected_features.size());
            manifest << "pca_components: " << st.pca->components.rows() << "\n"
                     << "pca_reduction: " << fixed(1.0 - k / dsel) << "\n"
                     << "pca_explained_variance: " << fixed(st.pca->variance_ratio.sum()) << "\n";
        }
        manifest << "model_file: model_" << r.target << "_" << r.variant << ".json\n";
    }
    out.files["manifest.txt"] = manifest.str();
    if (stage != RunStage::Full) return out;

    std::ostringstream metrics;
    metrics << "target,metric";
    for (const auto& v : variants) metrics << "," << v.first << "_training," << v.first << "_validation";
    metrics << "\n";
    for (const auto& target : config.targets) {
        std::vector<MetricsRecord> cols;
        for (const auto& v : variants) {
            for (const auto& r : runs) {
                if (r.target == target && r.variant == v.first) {
                    cols.push_back(r.train_metrics);
                    cols.push_back(r.val_metrics);
                }
            }
        }
        write_metrics_rows(metrics, target, cols);
    }
    out.files["metrics.csv"] = metrics.str();

    std::ostringstream confusion;
    for (const auto& [vname, use_pca] : variants) {
        std::vector<const VariantRun*> aqi_runs;
        std::string names;
        for (const auto& r : runs) {
            if (r.variant == vname && table.pollutants.count(r.target)) {
                aqi_runs.push_back(&r);
                names += (names.empty() ? "" : "+") + r.target;
            }
        }
        for (const bool validation : {false, true}) {
            confusion << "# variant=" << vname << " split=" << (validation ? "validation" : "training");
            if (aqi_runs.empty()) {
                confusion << " (no target has AQI breakpoints)\n\n";
                continue;
            }
            confusion << " pollutants=" << names << "\n";
            const auto obs = overall_aqi(aqi_runs, validation, false, table);
            const auto pred = overall_aqi(aqi_runs, validation, true, table);
            std::vector<std::string> t, p;
            for (double a : obs) t.push_back(collapsed_label(categorize(a)));
            for (double a : pred) p.push_back(collapsed_label(categorize(a)));
            const auto cm = confusion_matrix(t, p, kCollapsedLabels);
            render_confusion(confusion, cm);
            confusion << "category_accuracy: " << fixed(cm.accuracy()) << "\n\n";
        }
    }
    out.files["confusion.csv"] = confusion.str();

    for (const bool validation : {false, true}) {
        std::ostringstream sc;
        sc << "target,variant,time,observed,forecast,forecast_error,observed_std,forecast_error_std\n";
        for (const auto& r : runs) {
            const Forecast& f = validation ? r.val : r.train;
            for (std::size_t i = 0; i < f.target_times.size(); ++i) {
                const auto k = static_cast<Eigen::Index>(i);
                sc << r.target << "," << r.variant << "," << format_datetime(f.target_times[i]) << "," << fixed(f.observed[k])
                   << "," << fixed(f.predicted[k]) << "," << fixed(f.predicted[k] - f.observed[k]) << ","
                   << fixed(f.observed_std[k]) << "," << fixed(f.predicted_std[k] - f.observed_std[k]) << "\n";
            }
        }
        out.files[validation ? "scatter_val.csv" : "scatter_train.csv"] = sc.str();
    }
    return out;
}

void write_outputs(const RunOutputs& outputs, const std::string& dir) {
    std::filesystem::create_directories(dir);
    for (const auto& [name, text] : outputs.files) {
        const auto path = std::filesystem::path(dir) / name;
        std::ofstream f(path, std::ios::binary);
        if (!f) throw InputError("cannot write " + path.string());
        f << text;
        if (!f) throw InputError("write failed for " + path.string());
    }
}

}  // namespace airsvr
