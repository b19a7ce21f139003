#include "airsvr/svr.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numeric>

namespace airsvr {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kFreeMargin = 1e-12;
constexpr double kPruneThreshold = 1e-9;

// Lower end of the bias interval implied by point i, i.e. the value of b
// below which increasing beta_i would lower the objective.
double lower_bias(double beta, double grad, double c, double eps) {
    if (beta >= c) return -kInf;
    return beta >= 0.0 ? -grad - eps : -grad + eps;
}

double upper_bias(double beta, double grad, double c, double eps) {
    if (beta <= -c) return kInf;
    return beta <= 0.0 ? -grad + eps : -grad - eps;
}

double sign(double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }

double bias_from_gradient(const Vector& beta, const Vector& grad, double c, double eps) {
    double sum = 0.0;
    std::size_t free = 0;
    double lo = -kInf;
    double hi = kInf;
    for (Eigen::Index i = 0; i < beta.size(); ++i) {
        const double a = std::abs(beta[i]);
        if (a > kFreeMargin && a < c - kFreeMargin) {
            sum += -grad[i] - sign(beta[i]) * eps;
            ++free;
        }
        lo = std::max(lo, lower_bias(beta[i], grad[i], c, eps));
        hi = std::min(hi, upper_bias(beta[i], grad[i], c, eps));
    }
    if (free > 0) return sum / static_cast<double>(free);
    if (std::isinf(lo) && std::isinf(hi)) return 0.0;
    if (std::isinf(lo)) return hi;
    if (std::isinf(hi)) return lo;
    return 0.5 * (lo + hi);
}

struct Violation {
    Eigen::Index up = -1;    // index whose beta should increase
    Eigen::Index down = -1;  // index whose beta should decrease
    double gap = -kInf;
};

Violation most_violating(const std::vector<Eigen::Index>& active, const Vector& beta, const Vector& grad,
                         double c, double eps) {
    double best_lo = -kInf;
    double best_hi = kInf;
    Violation v;
    for (const Eigen::Index k : active) {
        const double lo = lower_bias(beta[k], grad[k], c, eps);
        const double hi = upper_bias(beta[k], grad[k], c, eps);
        if (lo > best_lo) {
            best_lo = lo;
            v.up = k;
        }
        if (hi < best_hi) {
            best_hi = hi;
            v.down = k;
        }
    }
    if (v.up >= 0 && v.down >= 0) v.gap = best_lo - best_hi;
    return v;
}

// Partner for i maximising the predicted decrease (lo_i - hi_k)^2 / eta_ik among violators.
Eigen::Index second_order_partner(const std::vector<Eigen::Index>& active, Eigen::Index i, const Vector& beta,
                                  const Vector& grad, const Matrix& gram, const Vector& diag, double c,
                                  double eps) {
    const double lo_i = lower_bias(beta[i], grad[i], c, eps);
    const double kii = diag[i];
    const double* gi = gram.data() + i * gram.cols();
    Eigen::Index best = -1;
    double best_score = -kInf;
    for (const Eigen::Index k : active) {
        const double hi = upper_bias(beta[k], grad[k], c, eps);
        if (!(hi < lo_i)) continue;
        const double b = lo_i - hi;
        const double a = std::max(kii + diag[k] - 2.0 * gi[k], 1e-12);
        const double score = b * b / a;
        if (score > best_score) {
            best_score = score;
            best = k;
        }
    }
    return best;
}

struct PairStep {
    double t = 0.0;
    double delta = 0.0;
};

// Exact minimiser of the piecewise quadratic pair subproblem (beta_i += t, beta_j -= t)
// over the feasible segment. On each piece the objective change is
// 1/2 eta t^2 + q t + const, evaluated in that form to avoid cancellation near the optimum.
PairStep solve_pair(double eta, double dgrad, double bi, double bj, double c, double eps) {
    const double t_lo = std::max(-c - bi, bj - c);
    const double t_hi = std::min(c - bi, bj + c);

    std::array<double, 4> knots{t_lo, t_hi, t_lo, t_lo};
    std::size_t n = 2;
    if (-bi > t_lo && -bi < t_hi) knots[n++] = -bi;
    if (bj > t_lo && bj < t_hi) knots[n++] = bj;
    std::sort(knots.begin(), knots.begin() + static_cast<std::ptrdiff_t>(n));

    PairStep best;  // t = 0 is always feasible
    double best_mass = std::abs(bi) + std::abs(bj);

    for (std::size_t s = 0; s + 1 < n; ++s) {
        const double a = knots[s];
        const double b = knots[s + 1];
        const double mid = 0.5 * (a + b);
        const double si = sign(bi + mid);
        const double sj = sign(bj - mid);
        const double q = dgrad + eps * (si - sj);
        // |bi + t| = si (bi + t) on this piece, so the constant term is 0 or -2|bi| exactly.
        const double offset = eps * ((si * bi - std::abs(bi)) + (sj * bj - std::abs(bj)));
        auto consider = [&](double t) {
            const double delta = 0.5 * eta * t * t + q * t + offset;
            const double mass = std::abs(bi + t) + std::abs(bj - t);
            if (delta < best.delta || (delta == best.delta && mass < best_mass)) {
                best = {t, delta};
                best_mass = mass;
            }
        };
        double t;
        if (eta > 1e-12) {
            t = std::clamp(-q / eta, a, b);
        } else {
            t = q < 0.0 ? b : a;
        }
        consider(a);
        consider(b);
        consider(t);
    }
    return best;
}

double objective_from_gradient(const Vector& beta, const Vector& grad, const Vector& y, double eps) {
    // K beta = grad + y
    return 0.5 * beta.dot(grad + y) + eps * beta.lpNorm<1>() - y.dot(beta);
}

}  // namespace

void TrainingSet::validate() const {
    if (x.rows() < 2) throw InputError("training set needs at least 2 rows");
    if (x.rows() != y.size()) {
        throw InputError("training set has " + std::to_string(x.rows()) + " rows but " +
                         std::to_string(y.size()) + " targets");
    }
    if (x.cols() < 1) throw InputError("training set has no features");
    if (!x.values.allFinite() || !y.allFinite()) throw InputError("training set contains non-finite values");
}

void HyperParams::validate() const {
    if (!(c > 0.0) || !std::isfinite(c)) throw InputError("C must be a positive finite number");
    if (!(epsilon >= 0.0) || !std::isfinite(epsilon)) throw InputError("epsilon must be >= 0");
    kernel.validate();
}

std::size_t SolverConfig::iteration_cap(std::size_t m) const {
    if (max_iterations) return *max_iterations;
    constexpr std::size_t kCap = 100'000'000;
    return std::min<std::size_t>(kCap, 10'000 * std::max<std::size_t>(m, 1));
}

void SolverConfig::validate() const {
    if (!(kkt_tolerance > 0.0)) throw InputError("kkt_tolerance must be > 0");
    if (max_iterations && *max_iterations == 0) throw InputError("max_iterations must be > 0");
}

DualSolution solve_dual_full(const TrainingSet& train, const HyperParams& hyper, const SolverConfig& config) {
    train.validate();
    hyper.validate();
    return solve_dual_full(train, gram_matrix(hyper.kernel, train.x), hyper, config);
}

DualSolution solve_dual_full(const TrainingSet& train, const Matrix& gram, const HyperParams& hyper,
                             const SolverConfig& config) {
    train.validate();
    hyper.validate();
    config.validate();
    const Eigen::Index m = train.size();
    if (gram.rows() != m || gram.cols() != m) throw InputError("kernel matrix does not match training set");

    const double c = hyper.c;
    const double eps = hyper.epsilon;
    const Vector& y = train.y;
    const std::size_t cap = config.iteration_cap(static_cast<std::size_t>(m));

    Vector beta = Vector::Zero(m);
    Vector grad = -y;

    std::vector<Eigen::Index> all(static_cast<std::size_t>(m));
    std::iota(all.begin(), all.end(), Eigen::Index{0});
    std::vector<Eigen::Index> active = all;
    bool shrunk = false;
    const std::size_t shrink_every = std::min<std::size_t>(static_cast<std::size_t>(m), 1000);

    const Vector diag = gram.diagonal();
    SolverReport report;
    if (config.record_trajectory) report.trajectory.push_back(0.0);

    auto rebuild_gradient = [&] {
        grad = gram * beta - y;
    };

    std::size_t iter = 0;
    Violation v;
    bool have_v = false;  // v already matches the current gradient
    for (;;) {
        if (!have_v) v = most_violating(active, beta, grad, c, eps);
        have_v = false;
        if (v.gap <= config.kkt_tolerance) {
            if (!shrunk) break;
            rebuild_gradient();
            active = all;
            shrunk = false;
            v = most_violating(active, beta, grad, c, eps);
            if (v.gap <= config.kkt_tolerance) break;
        }
        if (iter >= cap) {
            if (shrunk) rebuild_gradient();
            report.iterations = iter;
            report.max_kkt_violation = std::max(0.0, most_violating(all, beta, grad, c, eps).gap);
            report.dual_objective = objective_from_gradient(beta, grad, y, eps);
            throw ConvergenceError("dual solver hit the iteration cap (" + std::to_string(cap) +
                                       ") with KKT violation " + std::to_string(report.max_kkt_violation),
                                   std::move(report));
        }

        const Eigen::Index i = v.up;
        Eigen::Index j = second_order_partner(active, i, beta, grad, gram, diag, c, eps);
        if (j < 0) j = v.down;
        double eta = gram(i, i) + gram(j, j) - 2.0 * gram(i, j);
        PairStep step = solve_pair(eta, grad[i] - grad[j], beta[i], beta[j], c, eps);
        if (step.t == 0.0 && j != v.down) {
            j = v.down;
            eta = gram(i, i) + gram(j, j) - 2.0 * gram(i, j);
            step = solve_pair(eta, grad[i] - grad[j], beta[i], beta[j], c, eps);
        }
        const double bi = beta[i];
        const double bj = beta[j];
        const double t = step.t;
        if (t == 0.0) {
            // No representable descent left along the most violating pair.
            if (shrunk) rebuild_gradient();
            report.iterations = iter;
            report.max_kkt_violation = std::max(0.0, most_violating(all, beta, grad, c, eps).gap);
            report.dual_objective = objective_from_gradient(beta, grad, y, eps);
            throw ConvergenceError("dual solver stalled with KKT violation " +
                                       std::to_string(report.max_kkt_violation),
                                   std::move(report));
        }

        double ni = bi + t;
        double nj = bj - t;
        if (t == -bi) ni = 0.0;
        if (t == bj) nj = 0.0;
        if (t == c - bi) ni = c;
        if (t == -c - bi) ni = -c;
        if (t == bj + c) nj = -c;
        if (t == bj - c) nj = c;
        ni = std::clamp(ni, -c, c);
        nj = std::clamp(nj, -c, c);
        const double di = ni - bi;
        const double dj = nj - bj;
        beta[i] = ni;
        beta[j] = nj;
        {
            // gradient update fused with the next first-order scan
            const double* gi = gram.data() + i * m;
            const double* gj = gram.data() + j * m;
            double best_lo = -kInf;
            double best_hi = kInf;
            v = Violation{};
            for (const Eigen::Index k : active) {
                const double g = grad[k] + (di * gi[k] + dj * gj[k]);
                grad[k] = g;
                const double lo = lower_bias(beta[k], g, c, eps);
                const double hi = upper_bias(beta[k], g, c, eps);
                if (lo > best_lo) {
                    best_lo = lo;
                    v.up = k;
                }
                if (hi < best_hi) {
                    best_hi = hi;
                    v.down = k;
                }
            }
            if (v.up >= 0 && v.down >= 0) v.gap = best_lo - best_hi;
            have_v = true;
        }
        ++iter;

        if (config.record_trajectory) {
            if (shrunk) {
                report.trajectory.push_back(dual_objective(gram, beta, y, eps));
            } else {
                report.trajectory.push_back(objective_from_gradient(beta, grad, y, eps));
            }
        }

        if (config.shrink && iter % shrink_every == 0) {
            const Violation cur = most_violating(active, beta, grad, c, eps);
            if (cur.gap > config.kkt_tolerance) {
                const double top_lo = lower_bias(beta[cur.up], grad[cur.up], c, eps);
                const double bottom_hi = upper_bias(beta[cur.down], grad[cur.down], c, eps);
                std::vector<Eigen::Index> keep;
                keep.reserve(active.size());
                for (const Eigen::Index k : active) {
                    const bool idle = lower_bias(beta[k], grad[k], c, eps) < bottom_hi &&
                                      upper_bias(beta[k], grad[k], c, eps) > top_lo;
                    if (!idle) keep.push_back(k);
                }
                if (keep.size() < active.size() && keep.size() >= 2) {
                    active = std::move(keep);
                    shrunk = true;
                    have_v = false;
                }
            }
        }
    }
    if (shrunk) rebuild_gradient();

    report.iterations = iter;
    report.max_kkt_violation = std::max(0.0, most_violating(all, beta, grad, c, eps).gap);
    report.dual_objective = dual_objective(gram, beta, y, eps);

    DualSolution out;
    out.bias = bias_from_gradient(beta, grad, c, eps);
    out.beta = std::move(beta);
    out.report = std::move(report);
    return out;
}

SvrModel solve_dual(const TrainingSet& train, const HyperParams& hyper, const SolverConfig& config) {
    return make_model(train, solve_dual_full(train, hyper, config), hyper);
}

SvrModel solve_dual(const TrainingSet& train, const Matrix& gram, const HyperParams& hyper,
                    const SolverConfig& config) {
    return make_model(train, solve_dual_full(train, gram, hyper, config), hyper);
}

SvrModel make_model(const TrainingSet& train, const DualSolution& solution, const HyperParams& hyper) {
    std::vector<Eigen::Index> keep;
    for (Eigen::Index i = 0; i < solution.beta.size(); ++i) {
        if (std::abs(solution.beta[i]) > kPruneThreshold) keep.push_back(i);
    }
    SvrModel model;
    model.support_vectors.names = train.x.names;
    model.support_vectors.values.resize(static_cast<Eigen::Index>(keep.size()), train.x.cols());
    model.beta.resize(static_cast<Eigen::Index>(keep.size()));
    for (std::size_t r = 0; r < keep.size(); ++r) {
        const auto row = static_cast<Eigen::Index>(r);
        model.support_vectors.values.row(row) = train.x.values.row(keep[r]);
        model.beta[row] = solution.beta[keep[r]];
    }
    model.bias = solution.bias;
    model.hyper = hyper;
    model.solver_report = solution.report;
    model.solver_report.trajectory.clear();
    return model;
}

double predict(const SvrModel& model, std::span<const double> x) {
    if (static_cast<Eigen::Index>(x.size()) != model.feature_count()) {
        throw InputError("predict: expected " + std::to_string(model.feature_count()) + " features, got " +
                         std::to_string(x.size()));
    }
    double f = model.bias;
    const Matrix& sv = model.support_vectors.values;
    for (Eigen::Index r = 0; r < sv.rows(); ++r) {
        f += model.beta[r] * kernel_eval(model.kernel(), row_span(sv, r), x);
    }
    return f;
}

Vector predict(const SvrModel& model, const Matrix& x) {
    Vector out(x.rows());
    for (Eigen::Index r = 0; r < x.rows(); ++r) out[r] = predict(model, row_span(x, r));
    return out;
}

double compute_bias(const TrainingSet& train, const Vector& beta, const KernelSpec& kernel,
                    const HyperParams& hyper) {
    const Eigen::Index m = train.size();
    if (beta.size() != m) throw InputError("compute_bias: beta length differs from training size");
    Vector grad(m);
    for (Eigen::Index i = 0; i < m; ++i) {
        double f = 0.0;
        for (Eigen::Index j = 0; j < m; ++j) {
            if (beta[j] != 0.0) f += beta[j] * kernel_eval(kernel, row_span(train.x.values, j), row_span(train.x.values, i));
        }
        grad[i] = f - train.y[i];
    }
    return bias_from_gradient(beta, grad, hyper.c, hyper.epsilon);
}

double dual_objective(const Matrix& gram, const Vector& beta, const Vector& y, double epsilon) {
    return 0.5 * beta.dot(gram * beta) + epsilon * beta.lpNorm<1>() - y.dot(beta);
}

double max_kkt_violation(const Matrix& gram, const Vector& beta, const Vector& y, const HyperParams& hyper) {
    const Vector grad = gram * beta - y;
    std::vector<Eigen::Index> all(static_cast<std::size_t>(beta.size()));
    std::iota(all.begin(), all.end(), Eigen::Index{0});
    return std::max(0.0, most_violating(all, beta, grad, hyper.c, hyper.epsilon).gap);
}

}  // namespace airsvr
