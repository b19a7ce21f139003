#include "airsvr/preprocess.hpp"

#include "airsvr/error.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <set>

namespace airsvr {

namespace {

const std::vector<std::string> kEngineered{"season", "hour", "hour_sin", "hour_cos", "day", "month", "year"};

bool contains(const std::vector<std::string>& v, const std::string& s) {
    return std::find(v.begin(), v.end(), s) != v.end();
}

double hours_between(Instant a, Instant b) {
    return static_cast<double>((b - a).count()) / 3600.0;
}

}  // namespace

// --- sparse columns --------------------------------------------------------

SparseDropResult drop_sparse_columns(const TimeSeriesFrame& frame, double threshold) {
    SparseDropResult out;
    out.frame.cadence = frame.cadence;
    out.frame.timestamps = frame.timestamps;
    const double n = static_cast<double>(std::max<std::size_t>(frame.rows(), 1));
    for (const auto& c : frame.columns) {
        const double frac = static_cast<double>(c.missing_count()) / n;
        if (frac > threshold) {
            char buf[96];
            std::snprintf(buf, sizeof buf, "missing fraction %.3f > %.3f", frac, threshold);
            out.dropped.push_back({c.name, buf});
        } else {
            out.frame.columns.push_back(c);
        }
    }
    if (out.frame.columns.empty() && !frame.columns.empty()) {
        throw PipelineError("every column exceeds the missing-data threshold");
    }
    return out;
}

// --- imputation ------------------------------------------------------------

TimeSeriesFrame impute_quadratic(const TimeSeriesFrame& frame) {
    TimeSeriesFrame out = frame;
    for (auto& col : out.columns) {
        const std::size_t missing = col.missing_count();
        if (missing == 0) continue;
        std::vector<std::size_t> obs;
        for (std::size_t r = 0; r < col.values.size(); ++r) {
            if (col.values[r]) obs.push_back(r);
        }
        if (obs.size() < 3) {
            throw PipelineError("column '" + col.name + "' has " + std::to_string(obs.size()) +
                                " observed values; quadratic imputation needs at least 3");
        }
        const auto [lo_it, hi_it] = std::minmax_element(obs.begin(), obs.end(), [&](std::size_t a, std::size_t b) {
            return *col.values[a] < *col.values[b];
        });
        const double vmin = *col.values[*lo_it];
        const double vmax = *col.values[*hi_it];
        const double range = vmax - vmin;

        for (std::size_t r = 0; r < col.values.size(); ++r) {
            if (col.values[r]) continue;
            const Instant t = frame.timestamps[r];
            const auto p = static_cast<std::ptrdiff_t>(std::lower_bound(obs.begin(), obs.end(), r) - obs.begin());
            std::ptrdiff_t left = p - 1;
            std::ptrdiff_t right = p;
            const auto n_obs = static_cast<std::ptrdiff_t>(obs.size());
            std::array<std::size_t, 3> pick{};
            for (std::size_t k = 0; k < 3; ++k) {
                const bool has_left = left >= 0;
                const bool has_right = right < n_obs;
                bool take_left = has_left;
                if (has_left && has_right) {
                    const double dl = hours_between(frame.timestamps[obs[static_cast<std::size_t>(left)]], t);
                    const double dr = hours_between(t, frame.timestamps[obs[static_cast<std::size_t>(right)]]);
                    take_left = dl <= dr;
                }
                pick[k] = take_left ? obs[static_cast<std::size_t>(left--)] : obs[static_cast<std::size_t>(right++)];
            }
            // Lagrange form with nodes relative to the gap.
            double fill = 0.0;
            for (std::size_t a = 0; a < 3; ++a) {
                const double xa = hours_between(t, frame.timestamps[pick[a]]);
                double w = 1.0;
                for (std::size_t b = 0; b < 3; ++b) {
                    if (b == a) continue;
                    const double xb = hours_between(t, frame.timestamps[pick[b]]);
                    w *= (0.0 - xb) / (xa - xb);
                }
                fill += w * *col.values[pick[a]];
            }
            col.values[r] = std::clamp(fill, vmin - range, vmax + range);
        }
    }
    return out;
}

// --- date ranges -----------------------------------------------------------

TimeSeriesFrame exclude_date_range(const TimeSeriesFrame& frame, std::span<const DateRange> ranges) {
    for (const auto& r : ranges) {
        if (r.start > r.end) throw InputError("excluded range starts after it ends");
    }
    if (ranges.empty()) return frame;
    TimeSeriesFrame out;
    out.cadence = frame.cadence;
    out.columns.resize(frame.columns.size());
    for (std::size_t c = 0; c < frame.columns.size(); ++c) out.columns[c].name = frame.columns[c].name;
    for (std::size_t r = 0; r < frame.rows(); ++r) {
        const Instant t = frame.timestamps[r];
        const bool excluded = std::any_of(ranges.begin(), ranges.end(),
                                          [&](const DateRange& d) { return t >= d.start && t <= d.end; });
        if (excluded) continue;
        out.timestamps.push_back(t);
        for (std::size_t c = 0; c < frame.columns.size(); ++c) {
            out.columns[c].values.push_back(frame.columns[c].values[r]);
        }
    }
    return out;
}

// --- Yeo-Johnson -----------------------------------------------------------

double yeo_johnson(double x, double lambda) {
    constexpr double kTiny = 1e-12;
    if (x >= 0.0) {
        if (std::abs(lambda) < kTiny) return std::log1p(x);
        return std::expm1(lambda * std::log1p(x)) / lambda;
    }
    if (std::abs(lambda - 2.0) < kTiny) return -std::log1p(-x);
    return -std::expm1((2.0 - lambda) * std::log1p(-x)) / (2.0 - lambda);
}

double yeo_johnson_log_likelihood(std::span<const double> x, double lambda) {
    const auto n = static_cast<double>(x.size());
    double mean = 0.0;
    for (const double v : x) mean += yeo_johnson(v, lambda);
    mean /= n;
    double var = 0.0;
    double jac = 0.0;
    for (const double v : x) {
        const double d = yeo_johnson(v, lambda) - mean;
        var += d * d;
        jac += std::copysign(std::log1p(std::abs(v)), v);
    }
    var /= n;
    return -0.5 * n * std::log(var) + (lambda - 1.0) * jac;
}

double yeo_johnson_fit(std::span<const double> x) {
    if (x.size() < 10) throw PipelineError("power transform needs at least 10 observations");
    const auto [lo, hi] = std::minmax_element(x.begin(), x.end());
    if (*lo == *hi) throw PipelineError("power transform cannot be fit on a constant column");

    const double ratio = (std::sqrt(5.0) - 1.0) / 2.0;
    double a = -5.0;
    double b = 5.0;
    double c = b - ratio * (b - a);
    double d = a + ratio * (b - a);
    double fc = yeo_johnson_log_likelihood(x, c);
    double fd = yeo_johnson_log_likelihood(x, d);
    while (b - a > 1e-4) {
        if (fc >= fd) {
            b = d;
            d = c;
            fd = fc;
            c = b - ratio * (b - a);
            fc = yeo_johnson_log_likelihood(x, c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + ratio * (b - a);
            fd = yeo_johnson_log_likelihood(x, d);
        }
    }
    return 0.5 * (a + b);
}

// --- standardization -------------------------------------------------------

std::vector<ColumnScale> standardize_fit(const Matrix& m) {
    if (m.rows() == 0) throw PipelineError("cannot standardize an empty matrix");
    std::vector<ColumnScale> out;
    out.reserve(static_cast<std::size_t>(m.cols()));
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
        const double mean = m.col(c).mean();
        const double sd = std::sqrt((m.col(c).array() - mean).square().mean());
        if (!(sd > 0.0)) throw PipelineError("column " + std::to_string(c) + " has zero standard deviation");
        out.push_back({mean, sd});
    }
    return out;
}

Matrix standardize_apply(const Matrix& m, std::span<const ColumnScale> scale) {
    if (static_cast<std::size_t>(m.cols()) != scale.size()) throw InputError("scaler width does not match matrix");
    Matrix out(m.rows(), m.cols());
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
        const auto& s = scale[static_cast<std::size_t>(c)];
        for (Eigen::Index r = 0; r < m.rows(); ++r) out(r, c) = (m(r, c) - s.mean) / s.stddev;
    }
    return out;
}

double destandardize(double z, const ColumnScale& scale) {
    return z * scale.stddev + scale.mean;
}

// --- calendar features -----------------------------------------------------

TimeSeriesFrame engineer_time_features(const TimeSeriesFrame& frame, const SeasonTable& seasons) {
    TimeSeriesFrame out = frame;
    const bool hourly = frame.cadence == Cadence::Hourly;
    const std::size_t n = frame.rows();
    Column season{"season", {}}, hour{"hour", {}}, hour_sin{"hour_sin", {}}, hour_cos{"hour_cos", {}};
    Column day{"day", {}}, month{"month", {}}, year{"year", {}};
    for (Column* c : {&season, &hour, &hour_sin, &hour_cos, &day, &month, &year}) c->values.reserve(n);
    for (const Instant t : frame.timestamps) {
        const CalendarFields f = calendar_fields(t);
        season.values.emplace_back(static_cast<double>(seasons[f.month - 1]));
        if (hourly) {
            const double angle = 2.0 * std::numbers::pi * static_cast<double>(f.hour) / 24.0;
            hour.values.emplace_back(static_cast<double>(f.hour));
            hour_sin.values.emplace_back(std::sin(angle));
            hour_cos.values.emplace_back(std::cos(angle));
        }
        day.values.emplace_back(static_cast<double>(f.day));
        month.values.emplace_back(static_cast<double>(f.month));
        year.values.emplace_back(static_cast<double>(f.year));
    }
    out.columns.push_back(std::move(season));
    if (hourly) {
        out.columns.push_back(std::move(hour));
        out.columns.push_back(std::move(hour_sin));
        out.columns.push_back(std::move(hour_cos));
    }
    out.columns.push_back(std::move(day));
    out.columns.push_back(std::move(month));
    out.columns.push_back(std::move(year));
    return out;
}

bool is_engineered_feature(const std::string& name) {
    return contains(kEngineered, name);
}

// --- correlation selection -------------------------------------------------

std::vector<std::string> select_features(const Matrix& m, const std::vector<std::string>& names,
                                         const SelectionConfig& config) {
    if (static_cast<std::size_t>(m.cols()) != names.size()) throw InputError("feature names do not match matrix");
    std::vector<Vector> centered;
    std::vector<double> norms;
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
        Vector v = m.col(c).array() - m.col(c).mean();
        norms.push_back(v.norm());
        centered.push_back(std::move(v));
    }
    std::vector<std::size_t> kept;
    for (std::size_t j = 0; j < names.size(); ++j) {
        if (contains(config.forced_drops, names[j])) continue;
        bool drop = false;
        if (!contains(config.keep_always, names[j]) && norms[j] > 0.0) {
            for (const std::size_t i : kept) {
                if (norms[i] == 0.0) continue;
                const double r = centered[i].dot(centered[j]) / (norms[i] * norms[j]);
                if (std::abs(r) > config.threshold) {
                    drop = true;
                    break;
                }
            }
        }
        if (!drop) kept.push_back(j);
    }
    std::vector<std::string> out;
    out.reserve(kept.size());
    for (const std::size_t k : kept) out.push_back(names[k]);
    return out;
}

// --- PCA -------------------------------------------------------------------

PcaState pca_fit(const Matrix& m, double variance_threshold) {
    if (m.rows() < 2 || m.cols() < 1) throw PipelineError("PCA needs at least 2 rows and 1 column");
    if (!(variance_threshold > 0.0)) throw InputError("PCA variance threshold must be positive");
    const Eigen::Index d = m.cols();
    PcaState st;
    st.means = m.colwise().mean().transpose();
    const Eigen::MatrixXd centered = m.rowwise() - st.means.transpose();
    const Eigen::MatrixXd cov = (centered.transpose() * centered) / static_cast<double>(m.rows() - 1);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(cov);
    if (es.info() != Eigen::Success) throw PipelineError("PCA eigendecomposition failed");

    // Eigen returns ascending eigenvalues.
    Vector values(d);
    Eigen::MatrixXd vectors(d, d);
    for (Eigen::Index k = 0; k < d; ++k) {
        values[k] = std::max(0.0, es.eigenvalues()[d - 1 - k]);
        vectors.col(k) = es.eigenvectors().col(d - 1 - k);
    }
    const double total = values.sum();
    if (!(total > 0.0)) throw PipelineError("PCA input has zero variance");

    Eigen::Index k = d;
    if (variance_threshold < 1.0) {
        double cum = 0.0;
        for (Eigen::Index i = 0; i < d; ++i) {
            cum += values[i] / total;
            if (cum >= variance_threshold) {
                k = i + 1;
                break;
            }
        }
    }
    st.components.resize(k, d);
    st.variance_ratio.resize(k);
    for (Eigen::Index i = 0; i < k; ++i) {
        Vector v = vectors.col(i);
        Eigen::Index arg = 0;
        v.cwiseAbs().maxCoeff(&arg);
        if (v[arg] < 0.0) v = -v;
        st.components.row(i) = v.transpose();
        st.variance_ratio[i] = values[i] / total;
    }
    return st;
}

bool operator==(const PcaState& a, const PcaState& b) {
    return a.components == b.components && a.means == b.means && a.variance_ratio == b.variance_ratio;
}

Matrix pca_apply(const Matrix& m, const PcaState& state) {
    if (m.cols() != state.means.size()) throw InputError("PCA input width does not match fitted state");
    const Matrix centered = m.rowwise() - state.means.transpose();
    return centered * state.components.transpose();
}

// --- pipeline --------------------------------------------------------------

std::size_t PipelineState::output_dimension() const {
    return pca ? static_cast<std::size_t>(pca->components.rows()) : selected_features.size();
}

std::vector<std::string> PipelineState::output_names() const {
    if (!pca) return selected_features;
    std::vector<std::string> out;
    for (Eigen::Index k = 0; k < pca->components.rows(); ++k) out.push_back("pc" + std::to_string(k + 1));
    return out;
}

namespace {

// Steps shared by fit and apply up to (and including) calendar features.
TimeSeriesFrame prepare(const TimeSeriesFrame& frame, const std::vector<std::string>& raw_columns,
                        const std::vector<DateRange>& ranges, const SeasonTable& seasons) {
    TimeSeriesFrame kept;
    kept.cadence = frame.cadence;
    kept.timestamps = frame.timestamps;
    for (const auto& name : raw_columns) {
        const Column* c = frame.find(name);
        if (!c) throw PipelineError("input is missing column '" + name + "' required by the pipeline");
        kept.columns.push_back(*c);
    }
    return engineer_time_features(impute_quadratic(exclude_date_range(kept, ranges)), seasons);
}

std::vector<double> column_values(const TimeSeriesFrame& f, const std::string& name, std::size_t rows) {
    const Column& c = f.column(name);
    std::vector<double> out(rows);
    for (std::size_t r = 0; r < rows; ++r) out[r] = *c.values[r];
    return out;
}

Matrix selected_matrix(const TimeSeriesFrame& prepared, const PipelineState& state) {
    const std::size_t n = prepared.rows();
    Matrix x(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(state.selected_features.size()));
    for (std::size_t j = 0; j < state.selected_features.size(); ++j) {
        const std::string& name = state.selected_features[j];
        const Column& col = prepared.column(name);
        const auto lam = state.lambda_per_column.find(name);
        const ColumnScale& sc = state.scaler.at(name);
        for (std::size_t r = 0; r < n; ++r) {
            double v = *col.values[r];
            if (lam != state.lambda_per_column.end()) v = yeo_johnson(v, lam->second);
            x(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(j)) = (v - sc.mean) / sc.stddev;
        }
    }
    if (state.pca) return pca_apply(x, *state.pca);
    return x;
}

}  // namespace

FittedPipeline pipeline_fit(const TimeSeriesFrame& frame, const PipelineConfig& config) {
    frame.validate();
    if (config.target.empty()) throw PipelineError("pipeline target column not set");
    if (!frame.find(config.target)) throw PipelineError("target column '" + config.target + "' not in input");
    if (config.horizon < 1) throw PipelineError("forecast horizon must be >= 1");

    PipelineState st;
    st.target = config.target;
    st.horizon = config.horizon;
    st.excluded_ranges = config.excluded_ranges;
    st.seasons = config.seasons;

    SparseDropResult sparse = drop_sparse_columns(frame, config.sparse_threshold);
    for (const auto& d : sparse.dropped) {
        if (d.name == config.target) throw PipelineError("target column '" + config.target + "' is too sparse (" + d.reason + ")");
    }
    st.dropped_columns = sparse.dropped;
    st.raw_columns = sparse.frame.column_names();

    const TimeSeriesFrame prepared = prepare(frame, st.raw_columns, st.excluded_ranges, st.seasons);
    const std::size_t n = prepared.rows();
    if (n < config.horizon + 10) {
        throw PipelineError("only " + std::to_string(n) + " usable rows; need at least horizon + 10");
    }
    const std::size_t nf = n - config.horizon;

    // Candidate features; anything constant over the training rows carries no signal.
    for (const auto& col : prepared.columns) {
        const auto vals = column_values(prepared, col.name, nf);
        const auto [lo, hi] = std::minmax_element(vals.begin(), vals.end());
        if (*lo == *hi) {
            st.dropped_columns.push_back({col.name, "constant over training rows"});
            continue;
        }
        st.feature_columns.push_back(col.name);
    }
    if (st.feature_columns.empty()) throw PipelineError("no usable feature columns");

    Matrix transformed(static_cast<Eigen::Index>(nf), static_cast<Eigen::Index>(st.feature_columns.size()));
    std::vector<std::string> measurements;
    for (std::size_t j = 0; j < st.feature_columns.size(); ++j) {
        const std::string& name = st.feature_columns[j];
        auto vals = column_values(prepared, name, nf);
        if (!is_engineered_feature(name)) {
            measurements.push_back(name);
            const double lam = yeo_johnson_fit(vals);
            st.lambda_per_column[name] = lam;
            for (auto& v : vals) v = yeo_johnson(v, lam);
        }
        for (std::size_t r = 0; r < nf; ++r) {
            transformed(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(j)) = vals[r];
        }
    }
    const auto scales = standardize_fit(transformed);
    for (std::size_t j = 0; j < st.feature_columns.size(); ++j) st.scaler[st.feature_columns[j]] = scales[j];
    const Matrix standardized = standardize_apply(transformed, scales);

    SelectionConfig sel = config.selection;
    sel.keep_always.insert(sel.keep_always.end(), measurements.begin(), measurements.end());
    st.selected_features = select_features(standardized, st.feature_columns, sel);
    if (st.selected_features.empty()) throw PipelineError("feature selection removed every feature");

    if (config.use_pca) {
        Matrix sub(standardized.rows(), static_cast<Eigen::Index>(st.selected_features.size()));
        for (std::size_t j = 0; j < st.selected_features.size(); ++j) {
            const auto idx = std::find(st.feature_columns.begin(), st.feature_columns.end(), st.selected_features[j]) -
                             st.feature_columns.begin();
            sub.col(static_cast<Eigen::Index>(j)) = standardized.col(idx);
        }
        st.pca = pca_fit(sub, config.pca_variance);
    }

    const auto target = column_values(prepared, st.target, n);
    std::vector<double> future(target.begin() + static_cast<std::ptrdiff_t>(config.horizon), target.end());
    Matrix ty(static_cast<Eigen::Index>(future.size()), 1);
    for (std::size_t r = 0; r < future.size(); ++r) ty(static_cast<Eigen::Index>(r), 0) = future[r];
    try {
        st.target_scaler = standardize_fit(ty).front();
    } catch (const PipelineError&) {
        throw PipelineError("target column '" + st.target + "' is constant over the training rows");
    }

    FittedPipeline out;
    out.train = pipeline_apply_supervised(frame, st).set;
    out.state = std::move(st);
    return out;
}

FeatureMatrix pipeline_apply(const TimeSeriesFrame& frame, const PipelineState& state) {
    frame.validate();
    const TimeSeriesFrame prepared = prepare(frame, state.raw_columns, state.excluded_ranges, state.seasons);
    return {state.output_names(), selected_matrix(prepared, state)};
}

SupervisedRows pipeline_apply_supervised(const TimeSeriesFrame& frame, const PipelineState& state) {
    frame.validate();
    const TimeSeriesFrame prepared = prepare(frame, state.raw_columns, state.excluded_ranges, state.seasons);
    const std::size_t n = prepared.rows();
    const std::size_t h = state.horizon;
    if (n <= h) throw PipelineError("not enough rows to pair features with a " + std::to_string(h) + "-step target");
    const Matrix all = selected_matrix(prepared, state);
    const Column& target = prepared.column(state.target);
    const auto lead = cadence_step(prepared.cadence) * static_cast<long>(h);

    // Pair row r with the row exactly `horizon` steps later; pairs broken by an exclusion are skipped.
    std::vector<std::pair<std::size_t, std::size_t>> pairs;
    for (std::size_t r = 0; r + h < n; ++r) {
        const auto it = std::lower_bound(prepared.timestamps.begin() + static_cast<std::ptrdiff_t>(r + 1),
                                         prepared.timestamps.end(), prepared.timestamps[r] + lead);
        if (it != prepared.timestamps.end() && *it == prepared.timestamps[r] + lead) {
            pairs.emplace_back(r, static_cast<std::size_t>(it - prepared.timestamps.begin()));
        }
    }
    if (pairs.empty()) throw PipelineError("no rows have a target " + std::to_string(h) + " steps ahead");

    const auto np = static_cast<Eigen::Index>(pairs.size());
    SupervisedRows out;
    out.set.x.names = state.output_names();
    out.set.x.values.resize(np, all.cols());
    out.target_raw.resize(np);
    out.set.y.resize(np);
    for (Eigen::Index k = 0; k < np; ++k) {
        const auto [r, j] = pairs[static_cast<std::size_t>(k)];
        out.set.x.values.row(k) = all.row(static_cast<Eigen::Index>(r));
        const double v = *target.values[j];
        out.target_raw[k] = v;
        out.set.y[k] = (v - state.target_scaler.mean) / state.target_scaler.stddev;
        out.feature_times.push_back(prepared.timestamps[r]);
        out.target_times.push_back(prepared.timestamps[j]);
    }
    return out;
}

}  // namespace airsvr
