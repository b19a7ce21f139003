#include "airsvr/artifact.hpp"

#include "airsvr/error.hpp"
#include "airsvr/numfmt.hpp"

#include <json.hpp>

#include <fstream>
#include <sstream>

namespace airsvr {

using nlohmann::json;

namespace {

json hex(double v) { return hex_double(v); }

json hex_vector(const Vector& v) {
    json a = json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(hex_double(v[i]));
    return a;
}

json hex_matrix(const Matrix& m) {
    json a = json::array();
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        json row = json::array();
        for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(hex_double(m(r, c)));
        a.push_back(std::move(row));
    }
    return a;
}

json scale_json(const ColumnScale& s) { return {{"mean", hex(s.mean)}, {"stddev", hex(s.stddev)}}; }

json pipeline_json(const PipelineState& s) {
    json j;
    j["target"] = s.target;
    j["horizon"] = s.horizon;
    json dropped = json::array();
    for (const auto& d : s.dropped_columns) dropped.push_back({{"name", d.name}, {"reason", d.reason}});
    j["dropped_columns"] = dropped;
    json ranges = json::array();
    for (const auto& r : s.excluded_ranges) {
        ranges.push_back({{"start", format_datetime(r.start)}, {"end", format_datetime(r.end)}});
    }
    j["excluded_ranges"] = ranges;
    j["seasons"] = s.seasons;
    j["raw_columns"] = s.raw_columns;
    j["feature_columns"] = s.feature_columns;
    json lam = json::object();
    for (const auto& [k, v] : s.lambda_per_column) lam[k] = hex(v);
    j["lambda"] = lam;
    json sc = json::object();
    for (const auto& [k, v] : s.scaler) sc[k] = scale_json(v);
    j["scaler"] = sc;
    j["selected_features"] = s.selected_features;
    if (s.pca) {
        j["pca"] = {{"components", hex_matrix(s.pca->components)},
                    {"means", hex_vector(s.pca->means)},
                    {"variance_ratio", hex_vector(s.pca->variance_ratio)}};
    } else {
        j["pca"] = nullptr;
    }
    j["target_scaler"] = scale_json(s.target_scaler);
    return j;
}

json model_json(const SvrModel& m) {
    json j;
    j["target_name"] = m.target_name;
    j["kernel"] = to_string(m.hyper.kernel);
    j["c"] = hex(m.hyper.c);
    j["epsilon"] = hex(m.hyper.epsilon);
    j["bias"] = hex(m.bias);
    j["feature_names"] = m.support_vectors.names;
    j["beta"] = hex_vector(m.beta);
    j["support_vectors"] = hex_matrix(m.support_vectors.values);
    j["solver"] = {{"iterations", m.solver_report.iterations},
                   {"max_kkt_violation", hex(m.solver_report.max_kkt_violation)},
                   {"dual_objective", hex(m.solver_report.dual_objective)}};
    return j;
}

// Typed accessors that name the JSON path on failure.
const json& field(const json& j, const std::string& key, const std::string& path) {
    if (!j.is_object() || !j.contains(key)) throw ParseError("model file: missing field " + path + "." + key, 0, path + "." + key);
    return j.at(key);
}

double get_double(const json& j, const std::string& path) {
    if (!j.is_string()) throw ParseError("model file: field " + path + " is not a number string", 0, path);
    try {
        return parse_double(j.get<std::string>());
    } catch (const std::invalid_argument&) {
        throw ParseError("model file: field " + path + " holds '" + j.get<std::string>() + "'", 0, path);
    }
}

double get_double(const json& j, const std::string& key, const std::string& path) {
    return get_double(field(j, key, path), path + "." + key);
}

std::string get_string(const json& j, const std::string& key, const std::string& path) {
    const json& v = field(j, key, path);
    if (!v.is_string()) throw ParseError("model file: field " + path + "." + key + " is not a string", 0, path + "." + key);
    return v.get<std::string>();
}

std::uint64_t get_uint(const json& j, const std::string& key, const std::string& path) {
    const json& v = field(j, key, path);
    if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<std::int64_t>() >= 0)) {
        throw ParseError("model file: field " + path + "." + key + " is not a non-negative integer", 0, path + "." + key);
    }
    return v.get<std::uint64_t>();
}

std::vector<std::string> get_strings(const json& j, const std::string& key, const std::string& path) {
    const json& v = field(j, key, path);
    const std::string p = path + "." + key;
    if (!v.is_array()) throw ParseError("model file: field " + p + " is not a list", 0, p);
    std::vector<std::string> out;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (!v[i].is_string()) {
            throw ParseError("model file: field " + p + "[" + std::to_string(i) + "] is not a string", 0, p);
        }
        out.push_back(v[i].get<std::string>());
    }
    return out;
}

Vector get_vector(const json& j, const std::string& key, const std::string& path) {
    const json& v = field(j, key, path);
    const std::string p = path + "." + key;
    if (!v.is_array()) throw ParseError("model file: field " + p + " is not a list", 0, p);
    Vector out(static_cast<Eigen::Index>(v.size()));
    for (std::size_t i = 0; i < v.size(); ++i) {
        out[static_cast<Eigen::Index>(i)] = get_double(v[i], p + "[" + std::to_string(i) + "]");
    }
    return out;
}

Matrix get_matrix(const json& j, const std::string& key, const std::string& path, Eigen::Index cols) {
    const json& v = field(j, key, path);
    const std::string p = path + "." + key;
    if (!v.is_array()) throw ParseError("model file: field " + p + " is not a list", 0, p);
    Matrix out(static_cast<Eigen::Index>(v.size()), cols);
    for (std::size_t r = 0; r < v.size(); ++r) {
        const std::string rp = p + "[" + std::to_string(r) + "]";
        if (!v[r].is_array() || static_cast<Eigen::Index>(v[r].size()) != cols) {
            throw ParseError("model file: field " + rp + " should hold " + std::to_string(cols) + " values", 0, rp);
        }
        for (std::size_t c = 0; c < v[r].size(); ++c) {
            out(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) =
                get_double(v[r][c], rp + "[" + std::to_string(c) + "]");
        }
    }
    return out;
}

ColumnScale get_scale(const json& j, const std::string& path) {
    return {get_double(j, "mean", path), get_double(j, "stddev", path)};
}

Instant get_instant(const json& j, const std::string& key, const std::string& path) {
    const std::string s = get_string(j, key, path);
    const auto t = parse_instant(s);
    if (!t) throw ParseError("model file: field " + path + "." + key + " holds '" + s + "'", 0, path + "." + key);
    return *t;
}

PipelineState read_pipeline(const json& j) {
    const std::string p = "pipeline";
    PipelineState s;
    s.target = get_string(j, "target", p);
    s.horizon = get_uint(j, "horizon", p);
    const json& dropped = field(j, "dropped_columns", p);
    if (!dropped.is_array()) throw ParseError("model file: field pipeline.dropped_columns is not a list", 0, "pipeline.dropped_columns");
    for (std::size_t i = 0; i < dropped.size(); ++i) {
        const std::string dp = p + ".dropped_columns[" + std::to_string(i) + "]";
        s.dropped_columns.push_back({get_string(dropped[i], "name", dp), get_string(dropped[i], "reason", dp)});
    }
    const json& ranges = field(j, "excluded_ranges", p);
    if (!ranges.is_array()) throw ParseError("model file: field pipeline.excluded_ranges is not a list", 0, "pipeline.excluded_ranges");
    for (std::size_t i = 0; i < ranges.size(); ++i) {
        const std::string rp = p + ".excluded_ranges[" + std::to_string(i) + "]";
        s.excluded_ranges.push_back({get_instant(ranges[i], "start", rp), get_instant(ranges[i], "end", rp)});
    }
    const json& seasons = field(j, "seasons", p);
    if (!seasons.is_array() || seasons.size() != 12) throw ParseError("model file: field pipeline.seasons needs 12 entries", 0, "pipeline.seasons");
    for (std::size_t i = 0; i < 12; ++i) {
        if (!seasons[i].is_number_integer() || seasons[i].get<int>() < 0 || seasons[i].get<int>() > 3) {
            throw ParseError("model file: field pipeline.seasons[" + std::to_string(i) + "] is not a season", 0, "pipeline.seasons");
        }
        s.seasons[i] = seasons[i].get<int>();
    }
    s.raw_columns = get_strings(j, "raw_columns", p);
    s.feature_columns = get_strings(j, "feature_columns", p);
    const json& lam = field(j, "lambda", p);
    if (!lam.is_object()) throw ParseError("model file: field pipeline.lambda is not an object", 0, "pipeline.lambda");
    for (const auto& [k, v] : lam.items()) s.lambda_per_column[k] = get_double(v, p + ".lambda." + k);
    const json& sc = field(j, "scaler", p);
    if (!sc.is_object()) throw ParseError("model file: field pipeline.scaler is not an object", 0, "pipeline.scaler");
    for (const auto& [k, v] : sc.items()) s.scaler[k] = get_scale(v, p + ".scaler." + k);
    s.selected_features = get_strings(j, "selected_features", p);
    for (const auto& f : s.selected_features) {
        if (!s.scaler.count(f)) throw ParseError("model file: no scaler for selected feature " + f, 0, "pipeline.scaler");
    }
    const json& pca = field(j, "pca", p);
    if (!pca.is_null()) {
        PcaState st;
        const auto d = static_cast<Eigen::Index>(s.selected_features.size());
        st.components = get_matrix(pca, "components", p + ".pca", d);
        st.means = get_vector(pca, "means", p + ".pca");
        st.variance_ratio = get_vector(pca, "variance_ratio", p + ".pca");
        if (st.means.size() != d || st.variance_ratio.size() != st.components.rows()) {
            throw ParseError("model file: pipeline.pca sizes disagree", 0, "pipeline.pca");
        }
        s.pca = std::move(st);
    }
    s.target_scaler = get_scale(field(j, "target_scaler", p), p + ".target_scaler");
    return s;
}

SvrModel read_model(const json& j) {
    const std::string p = "model";
    SvrModel m;
    m.target_name = get_string(j, "target_name", p);
    try {
        m.hyper.kernel = kernel_from_string(get_string(j, "kernel", p));
    } catch (const ParseError&) {
        throw ParseError("model file: field model.kernel is malformed", 0, "model.kernel");
    }
    m.hyper.c = get_double(j, "c", p);
    m.hyper.epsilon = get_double(j, "epsilon", p);
    m.bias = get_double(j, "bias", p);
    m.support_vectors.names = get_strings(j, "feature_names", p);
    m.beta = get_vector(j, "beta", p);
    m.support_vectors.values =
        get_matrix(j, "support_vectors", p, static_cast<Eigen::Index>(m.support_vectors.names.size()));
    if (m.support_vectors.values.rows() != m.beta.size()) {
        throw ParseError("model file: model.beta and model.support_vectors differ in length", 0, "model.beta");
    }
    const json& solver = field(j, "solver", p);
    m.solver_report.iterations = get_uint(solver, "iterations", p + ".solver");
    m.solver_report.max_kkt_violation = get_double(solver, "max_kkt_violation", p + ".solver");
    m.solver_report.dual_objective = get_double(solver, "dual_objective", p + ".solver");
    return m;
}

}  // namespace

std::string serialize_model(const ModelArtifact& a) {
    json j;
    j["format_version"] = a.format_version;
    json meta;
    meta["target"] = a.metadata.target;
    meta["created_at"] = a.metadata.created_at;
    meta["seed"] = a.metadata.seed;
    meta["search_summary"] = a.metadata.search_summary;
    j["metadata"] = meta;
    j["pipeline"] = pipeline_json(a.pipeline);
    j["model"] = model_json(a.model);
    return j.dump(2) + "\n";
}

ModelArtifact deserialize_model(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ParseError(std::string("model file is truncated or not valid JSON: ") + e.what(), 0, "");
    }
    if (!j.is_object()) throw ParseError("model file: top level is not an object");
    const json& ver = field(j, "format_version", "");
    if (!ver.is_number_integer()) throw ParseError("model file: format_version is not an integer", 0, "format_version");
    if (ver.get<int>() != kModelFormatVersion) {
        throw VersionError("model file format_version " + std::to_string(ver.get<int>()) + " is not supported (expected " +
                               std::to_string(kModelFormatVersion) + ")",
                           ver.get<int>());
    }
    ModelArtifact a;
    a.format_version = ver.get<int>();
    const json& meta = field(j, "metadata", "");
    a.metadata.target = get_string(meta, "target", "metadata");
    a.metadata.created_at = get_string(meta, "created_at", "metadata");
    a.metadata.seed = get_uint(meta, "seed", "metadata");
    const json& summary = field(meta, "search_summary", "metadata");
    if (!summary.is_object()) throw ParseError("model file: metadata.search_summary is not an object", 0, "metadata.search_summary");
    for (const auto& [k, v] : summary.items()) {
        if (!v.is_string()) throw ParseError("model file: metadata.search_summary." + k + " is not a string", 0, "metadata.search_summary." + k);
        a.metadata.search_summary[k] = v.get<std::string>();
    }
    a.pipeline = read_pipeline(field(j, "pipeline", ""));
    a.model = read_model(field(j, "model", ""));
    if (a.pipeline.output_names() != a.model.support_vectors.names) {
        throw ParseError("model file: model.feature_names do not match the pipeline output", 0, "model.feature_names");
    }
    return a;
}

void save_model(const ModelArtifact& a, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw InputError("cannot write " + path);
    out << serialize_model(a);
    if (!out) throw InputError("write failed for " + path);
}

ModelArtifact load_model(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InputError("cannot open model file " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return deserialize_model(ss.str());
}

Forecast forecast(const ModelArtifact& a, const TimeSeriesFrame& frame) {
    const auto rows = pipeline_apply_supervised(frame, a.pipeline);
    Forecast f;
    f.feature_times = rows.feature_times;
    f.target_times = rows.target_times;
    f.predicted_std = predict(a.model, rows.set.x.values);
    f.observed_std = rows.set.y;
    f.observed = rows.target_raw;
    f.predicted = f.predicted_std.unaryExpr([&](double z) { return destandardize(z, a.pipeline.target_scaler); });
    return f;
}

}  // namespace airsvr
