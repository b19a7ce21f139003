// Command-line driver: ingest-check, tune, train, predict, evaluate, aqi, run.

#include "airsvr/artifact.hpp"
#include "airsvr/error.hpp"
#include "airsvr/evaluation.hpp"
#include "airsvr/ingest.hpp"
#include "airsvr/numfmt.hpp"
#include "airsvr/run.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <fstream>
#include <iostream>
#include <sstream>

using namespace airsvr;

namespace {

struct RunFlags {
    std::string config;
    std::string input;
    std::string schema;
    std::string target;
    std::string kernel;
    std::string output;
    std::vector<std::string> exclude;
    std::vector<std::string> settings;
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> folds;
    std::optional<std::size_t> iterations;
    std::optional<std::size_t> threads;
    bool pca = false;
    bool no_pca = false;
};

void add_run_flags(CLI::App* cmd, RunFlags& f) {
    cmd->add_option("--config", f.config, "key = value config file");
    cmd->add_option("--input", f.input, "input CSV");
    cmd->add_option("--schema", f.schema, "embassy or cpcb");
    cmd->add_option("--seed", f.seed, "random seed");
    cmd->add_option("--target", f.target, "target column(s), comma separated");
    cmd->add_option("--kernel", f.kernel, "rbf or poly")->check(CLI::IsMember({"rbf", "poly"}));
    cmd->add_flag("--pca", f.pca, "PCA variant only");
    cmd->add_flag("--no-pca", f.no_pca, "no-PCA variant only");
    cmd->add_option("--exclude", f.exclude, "START..END date range to drop (repeatable)");
    cmd->add_option("--folds", f.folds, "time-series CV folds");
    cmd->add_option("--iterations", f.iterations, "random search iterations");
    cmd->add_option("--threads", f.threads, "worker threads for search trials");
    cmd->add_option("--output", f.output, "output directory");
    cmd->add_option("--set", f.settings, "extra KEY=VALUE setting (repeatable)");
}

RunConfig build_config(const RunFlags& f) {
    RunConfig c = f.config.empty() ? RunConfig{} : load_run_config(f.config);
    for (const auto& s : f.settings) {
        const auto eq = s.find('=');
        if (eq == std::string::npos) throw ConfigError("--set expects KEY=VALUE, got '" + s + "'");
        apply_setting(c, trim(s.substr(0, eq)), s.substr(eq + 1));
    }
    if (!f.input.empty()) c.input = f.input;
    if (!f.schema.empty()) apply_setting(c, "schema", f.schema);
    if (!f.target.empty()) apply_setting(c, "targets", f.target);
    if (!f.kernel.empty()) apply_setting(c, "kernel", f.kernel);
    if (!f.output.empty()) c.output_dir = f.output;
    if (f.seed) c.seed = *f.seed;
    if (f.folds) c.folds = *f.folds;
    if (f.iterations) c.iterations = *f.iterations;
    if (f.threads) c.threads = *f.threads;
    if (f.pca && f.no_pca) throw ConfigError("--pca and --no-pca are mutually exclusive");
    if (f.pca) c.pca = PcaMode::On;
    if (f.no_pca) c.pca = PcaMode::Off;
    if (!f.exclude.empty()) {
        c.excluded.clear();
        for (const auto& e : f.exclude) c.excluded.push_back(parse_date_range(e));
    }
    c.validate();
    return c;
}

std::string error_type(const std::exception& e) {
    if (dynamic_cast<const ParseError*>(&e)) return "ParseError";
    if (dynamic_cast<const VersionError*>(&e)) return "VersionError";
    if (dynamic_cast<const SchemaError*>(&e)) return "SchemaError";
    if (dynamic_cast<const ConfigError*>(&e)) return "ConfigError";
    if (dynamic_cast<const ConvergenceError*>(&e)) return "ConvergenceError";
    if (dynamic_cast<const SearchError*>(&e)) return "SearchError";
    if (dynamic_cast<const PipelineError*>(&e)) return "PipelineError";
    if (dynamic_cast<const MetricError*>(&e)) return "MetricError";
    if (dynamic_cast<const InputError*>(&e)) return "InputError";
    return "Error";
}

int report_error(const std::exception& e) {
    nlohmann::json rec{{"type", error_type(e)}, {"message", e.what()}};
    if (const auto* p = dynamic_cast<const ParseError*>(&e)) {
        if (p->line()) rec["line"] = p->line();
        if (!p->field().empty()) rec["field"] = p->field();
    }
    if (const auto* v = dynamic_cast<const VersionError*>(&e)) rec["found_version"] = v->found();
    std::cerr << nlohmann::json{{"error", rec}}.dump() << "\n";
    return dynamic_cast<const ConfigError*>(&e) ? 2 : 1;
}

void print_frame_summary(const TimeSeriesFrame& f) {
    std::cout << "cadence: " << cadence_name(f.cadence) << "\n"
              << "rows: " << f.rows() << "\n";
    if (f.rows()) {
        std::cout << "first: " << format_datetime(f.timestamps.front()) << "\n"
                  << "last: " << format_datetime(f.timestamps.back()) << "\n";
    }
    for (const auto& c : f.columns) {
        std::cout << "column " << c.name << ": " << c.observed_count() << " observed, " << c.missing_count()
                  << " missing\n";
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"SVR air-quality forecasting toolkit"};
    app.require_subcommand(1);

    std::string in_path, schema = "embassy", station;
    auto* check = app.add_subcommand("ingest-check", "parse an input file and summarize it");
    check->add_option("--input", in_path, "input CSV")->required();
    check->add_option("--schema", schema, "embassy or cpcb");
    check->add_option("--station", station, "cpcb: keep only this station");

    RunFlags tune_flags, train_flags, run_flags;
    auto* tune = app.add_subcommand("tune", "random search on the training portion; writes trial logs");
    add_run_flags(tune, tune_flags);
    auto* train = app.add_subcommand("train", "tune, then fit final models; writes model files");
    add_run_flags(train, train_flags);
    auto* run = app.add_subcommand("run", "full protocol: tune, fit, evaluate, report");
    add_run_flags(run, run_flags);

    std::string model_path, out_path;
    auto* pred = app.add_subcommand("predict", "forecast with a saved model");
    pred->add_option("--model", model_path, "model file")->required();
    pred->add_option("--input", in_path, "input CSV")->required();
    pred->add_option("--schema", schema, "embassy or cpcb");
    pred->add_option("--station", station, "cpcb: keep only this station");
    pred->add_option("--out", out_path, "output CSV (default stdout)");

    auto* eval = app.add_subcommand("evaluate", "score a saved model on a labelled file");
    eval->add_option("--model", model_path, "model file")->required();
    eval->add_option("--input", in_path, "input CSV")->required();
    eval->add_option("--schema", schema, "embassy or cpcb");
    eval->add_option("--station", station, "cpcb: keep only this station");

    std::vector<std::string> values;
    std::string unit = "ug/m3", table_path;
    auto* aqi = app.add_subcommand("aqi", "AQI sub-indices, overall index and category");
    aqi->add_option("--value", values, "POLLUTANT=CONCENTRATION (repeatable)")->required();
    aqi->add_option("--unit", unit, "ug/m3, ppm or ppb");
    aqi->add_option("--breakpoints", table_path, "breakpoint table file");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    }

    try {
        if (*check) {
            print_frame_summary(ingest_csv_file(in_path, parse_schema(schema), {station}));
        } else if (*tune || *train || *run) {
            const RunFlags& f = *tune ? tune_flags : *train ? train_flags : run_flags;
            const RunStage stage = *tune ? RunStage::Tune : *train ? RunStage::Train : RunStage::Full;
            const RunConfig cfg = build_config(f);
            const RunOutputs out = execute_run(cfg, stage);
            write_outputs(out, cfg.output_dir);
            for (const auto& [name, text] : out.files) std::cout << cfg.output_dir << "/" << name << "\n";
        } else if (*pred) {
            const ModelArtifact a = load_model(model_path);
            const TimeSeriesFrame frame = ingest_csv_file(in_path, parse_schema(schema), {station});
            const FeatureMatrix x = pipeline_apply(frame, a.pipeline);
            const Vector z = predict(a.model, x.values);
            // rows surviving the pipeline's exclusions, in order
            const TimeSeriesFrame kept = exclude_date_range(frame, a.pipeline.excluded_ranges);
            const auto lead = cadence_step(frame.cadence) * static_cast<long>(a.pipeline.horizon);
            std::ostringstream os;
            os << "time,target_time," << a.pipeline.target << "_forecast\n";
            for (Eigen::Index i = 0; i < z.size(); ++i) {
                const Instant t = kept.timestamps[static_cast<std::size_t>(i)];
                os << format_datetime(t) << "," << format_datetime(t + lead) << ","
                   << exact_decimal(destandardize(z[i], a.pipeline.target_scaler)) << "\n";
            }
            if (out_path.empty()) {
                std::cout << os.str();
            } else {
                std::ofstream of(out_path, std::ios::binary);
                if (!of) throw InputError("cannot write " + out_path);
                of << os.str();
            }
        } else if (*eval) {
            const ModelArtifact a = load_model(model_path);
            const Forecast f = forecast(a, ingest_csv_file(in_path, parse_schema(schema), {station}));
            const auto m = compute_metrics(std::span<const double>(f.observed_std.data(), f.observed_std.size()),
                                           std::span<const double>(f.predicted_std.data(), f.predicted_std.size()));
            std::cout << "target,metric,value\n";
            write_metrics_rows(std::cout, a.pipeline.target, {m});
            if (default_breakpoints().pollutants.count(a.pipeline.target)) {
                std::vector<std::string> t, p;
                for (Eigen::Index i = 0; i < f.observed.size(); ++i) {
                    t.push_back(collapsed_label(categorize(aqi_subindex(a.pipeline.target, std::max(0.0, f.observed[i]), ConcUnit::UgPerM3))));
                    p.push_back(collapsed_label(categorize(aqi_subindex(a.pipeline.target, std::max(0.0, f.predicted[i]), ConcUnit::UgPerM3))));
                }
                const auto cm = confusion_matrix(t, p, kCollapsedLabels);
                render_confusion(std::cout, cm);
                std::cout << "category_accuracy: " << fixed(cm.accuracy()) << "\n";
            }
        } else if (*aqi) {
            const AqiBreakpointTable table = table_path.empty() ? default_breakpoints() : load_breakpoints_file(table_path);
            const ConcUnit u = parse_unit(unit);
            std::map<std::string, double> sub;
            for (const auto& v : values) {
                const auto eq = v.find('=');
                if (eq == std::string::npos) throw InputError("--value expects POLLUTANT=CONCENTRATION, got '" + v + "'");
                double c;
                try {
                    c = parse_double(v.substr(eq + 1));
                } catch (const std::invalid_argument&) {
                    throw InputError("bad concentration in '" + v + "'");
                }
                const std::string name = trim(v.substr(0, eq));
                sub[name] = aqi_subindex(name, c, u, table);
                std::cout << name << ": " << fixed(sub[name]) << "\n";
            }
            const auto o = aqi_overall(sub);
            std::cout << "aqi: " << fixed(o.aqi) << "\n"
                      << "dominant: " << o.dominant << "\n"
                      << "category: " << category_name(categorize(o.aqi)) << "\n";
        }
    } catch (const std::exception& e) {
        return report_error(e);
    }
    return 0;
}
