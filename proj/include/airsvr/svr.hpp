#pragma once

#include "airsvr/error.hpp"
#include "airsvr/kernels.hpp"
#include "airsvr/matrix.hpp"

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace airsvr {

// The (x_i, y_i) pairs a model is trained on. y is expected standardized.
struct TrainingSet {
    FeatureMatrix x;
    Vector y;

    Eigen::Index size() const { return x.rows(); }
    // Throws InputError unless m >= 2, rows(x) == len(y) and every value is finite.
    void validate() const;
};

struct HyperParams {
    double c = 1.0;        // box bound on each dual coefficient
    double epsilon = 0.1;  // half-width of the insensitive tube
    KernelSpec kernel;

    void validate() const;
    friend bool operator==(const HyperParams&, const HyperParams&) = default;
};

struct SolverConfig {
    double kkt_tolerance = 1e-3;
    // Unset: 10 * 1000 * m pair updates, capped at 1e8.
    std::optional<std::size_t> max_iterations;
    bool shrink = false;
    // Record the dual objective after every accepted pair update.
    bool record_trajectory = false;

    std::size_t iteration_cap(std::size_t m) const;
    void validate() const;
};

struct SolverReport {
    std::size_t iterations = 0;
    double max_kkt_violation = 0.0;
    double dual_objective = 0.0;
    std::vector<double> trajectory;
};

// Thrown when the iteration cap fires first; carries the best-so-far diagnostics.
class ConvergenceError : public Error {
public:
    ConvergenceError(const std::string& what, SolverReport report)
        : Error(what), report_(std::move(report)) {}
    const SolverReport& report() const noexcept { return report_; }

private:
    SolverReport report_;
};

// Net dual coefficient beta_i = alpha_i^+ - alpha_i^- for every training point.
struct DualSolution {
    Vector beta;
    double bias = 0.0;
    SolverReport report;
};

struct SvrModel {
    FeatureMatrix support_vectors;
    Vector beta;
    double bias = 0.0;
    HyperParams hyper;
    std::string target_name;
    SolverReport solver_report;

    const KernelSpec& kernel() const { return hyper.kernel; }
    Eigen::Index feature_count() const { return support_vectors.cols(); }
};

// Minimises 1/2 b'Kb + eps |b|_1 - y'b  s.t.  sum(b) = 0, -C <= b_i <= C
// by pairwise updates on the maximally violating pair.
DualSolution solve_dual_full(const TrainingSet& train, const HyperParams& hyper,
                             const SolverConfig& config = {});
// Same, reusing a precomputed kernel matrix of train.x under hyper.kernel.
DualSolution solve_dual_full(const TrainingSet& train, const Matrix& gram, const HyperParams& hyper,
                             const SolverConfig& config = {});

SvrModel solve_dual(const TrainingSet& train, const HyperParams& hyper, const SolverConfig& config = {});
SvrModel solve_dual(const TrainingSet& train, const Matrix& gram, const HyperParams& hyper,
                    const SolverConfig& config = {});

// Keeps the rows with |beta_i| > 1e-9.
SvrModel make_model(const TrainingSet& train, const DualSolution& solution, const HyperParams& hyper);

double predict(const SvrModel& model, std::span<const double> x);
Vector predict(const SvrModel& model, const Matrix& x);

// Mean KKT-implied bias over free points, else midpoint of the interval allowed by bound points.
double compute_bias(const TrainingSet& train, const Vector& beta, const KernelSpec& kernel,
                    const HyperParams& hyper);

double dual_objective(const Matrix& gram, const Vector& beta, const Vector& y, double epsilon);
// max(0, max_i lo_i - min_j hi_j) over the feasible-bias intervals of every point.
double max_kkt_violation(const Matrix& gram, const Vector& beta, const Vector& y, const HyperParams& hyper);

}  // namespace airsvr
