#include "airsvr/svr.hpp"
#include "oracles/qp_oracle.hpp"

#include <doctest.h>

#include <cmath>
#include <random>

using namespace airsvr;

namespace {

TrainingSet make_set(const Matrix& x, const Vector& y) {
    TrainingSet t;
    t.x.values = x;
    for (Eigen::Index c = 0; c < x.cols(); ++c) t.x.names.push_back("f" + std::to_string(c));
    t.y = y;
    return t;
}

TrainingSet line_set() {
    Matrix x(4, 1);
    x << 0, 1, 2, 3;
    Vector y(4);
    y << 0, 1, 2, 3;
    return make_set(x, y);
}

TrainingSet random_set(std::mt19937_64& rng, int m, int d) {
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    Matrix x(m, d);
    for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = u(rng);
    Vector y(m);
    for (int i = 0; i < m; ++i) y[i] = std::sin(2.0 * x(i, 0)) + 0.3 * u(rng);
    return make_set(x, y);
}

}  // namespace

TEST_CASE("zero targets give the zero model") {
    Matrix x(5, 2);
    x.setRandom();
    const auto train = make_set(x, Vector::Zero(5));
    for (double c : {0.5, 10.0}) {
        const DualSolution s = solve_dual_full(train, {c, 0.1, KernelSpec::rbf(1.0)});
        CHECK(s.beta.cwiseAbs().maxCoeff() == 0.0);
        CHECK(s.bias == 0.0);
        CHECK(s.report.dual_objective == 0.0);
    }
}

TEST_CASE("constant targets inside the tube: beta zero and bias equals the constant") {
    Matrix x(6, 1);
    x << 0, 1, 2, 3, 4, 5;
    const auto train = make_set(x, Vector::Constant(6, 2.5));
    const HyperParams hp{5.0, 0.1, KernelSpec::rbf(0.5)};
    const DualSolution s = solve_dual_full(train, hp);
    CHECK(s.beta.cwiseAbs().maxCoeff() == 0.0);
    CHECK(s.bias == doctest::Approx(2.5).epsilon(1e-15));
    CHECK(compute_bias(train, s.beta, hp.kernel, hp) == doctest::Approx(2.5).epsilon(1e-15));
}

TEST_CASE("linear data: tube interpolation and agreement with the QP oracle") {
    const auto train = line_set();
    const HyperParams hp{100.0, 0.05, KernelSpec::polynomial(1, 1.0, 0.0)};
    SolverConfig cfg;
    cfg.kkt_tolerance = 1e-9;
    const DualSolution s = solve_dual_full(train, hp, cfg);
    const SvrModel model = make_model(train, s, hp);

    for (Eigen::Index i = 0; i < 4; ++i) {
        const double f = predict(model, row_span(train.x.values, i));
        CHECK(std::abs(f - train.y[i]) <= 0.05 + 1e-6);
    }

    // Hand solution: w = 29/30, b = 0.05, dual optimum -w^2/2.
    const double w = 29.0 / 30.0;
    CHECK(s.report.dual_objective == doctest::Approx(-0.5 * w * w).epsilon(1e-8));

    const Matrix gram = gram_matrix(hp.kernel, train.x);
    const auto ref = oracle::solve_svr_dual(gram, train.y, hp.c, hp.epsilon);
    CHECK(std::abs(s.report.dual_objective - ref.objective) <= 1e-4 * std::abs(ref.objective));
    CHECK(std::abs(s.bias - ref.bias) <= 1e-3);
    CHECK(s.bias == doctest::Approx(0.05).epsilon(1e-6));

    const std::vector<double> probe{1.5};
    const double f15 = predict(model, probe);
    CHECK(f15 >= 1.45);
    CHECK(f15 <= 1.55);
}

TEST_CASE("two points at opposite bounds: bias is the interval midpoint") {
    // y = (3, 1), C = 0.1, eps = 0.1: the unconstrained step overshoots the box so
    // beta = (C, -C) and the feasible bias interval is [1.2 - 0.1 k, 2.8 + 0.1 k].
    Matrix x(2, 1);
    x << 0.0, 2.0;
    Vector y(2);
    y << 3.0, 1.0;
    const auto train = make_set(x, y);
    const HyperParams hp{0.1, 0.1, KernelSpec::rbf(0.5)};
    const DualSolution s = solve_dual_full(train, hp);
    CHECK(s.beta[0] == 0.1);
    CHECK(s.beta[1] == -0.1);
    CHECK(s.bias == doctest::Approx(2.0).epsilon(1e-12));
    CHECK(compute_bias(train, s.beta, hp.kernel, hp) == doctest::Approx(2.0).epsilon(1e-12));
}

TEST_CASE("predict on degenerate models") {
    SvrModel empty;
    empty.support_vectors.values = Matrix(0, 2);
    empty.beta = Vector(0);
    empty.bias = 3.0;
    empty.hyper.kernel = KernelSpec::rbf(1.0);
    const std::vector<double> p{10.0, -4.0};
    CHECK(predict(empty, p) == 3.0);

    SvrModel one;
    one.support_vectors.values = Matrix(1, 2);
    one.support_vectors.values << 0.5, 0.25;
    one.beta = Vector::Ones(1);
    one.hyper.kernel = KernelSpec::rbf(2.0);
    const std::vector<double> s{0.5, 0.25};
    CHECK(predict(one, s) == 1.0);
    const std::vector<double> bad{1.0};
    CHECK_THROWS_AS(predict(one, bad), InputError);
}

TEST_CASE("solver matches the oracle on small random problems") {
    std::mt19937_64 rng(2024);
    std::uniform_real_distribution<double> uc(1.0, 100.0);
    std::uniform_real_distribution<double> ue(0.001, 0.1);
    SolverConfig cfg;
    cfg.kkt_tolerance = 1e-6;
    for (int trial = 0; trial < 12; ++trial) {
        const int m = 3 + trial % 6;
        const auto train = random_set(rng, m, 1 + trial % 3);
        const KernelSpec k = trial % 2 ? KernelSpec::rbf(1.0) : KernelSpec::polynomial(2, 0.5, 1.0);
        const HyperParams hp{uc(rng), ue(rng), k};
        const DualSolution s = solve_dual_full(train, hp, cfg);
        const Matrix gram = gram_matrix(k, train.x);
        const auto ref = oracle::solve_svr_dual(gram, train.y, hp.c, hp.epsilon);
        CHECK(std::abs(s.report.dual_objective - ref.objective) <= 1e-4 * std::max(std::abs(ref.objective), 1e-9));
        const Vector mine = gram * s.beta + Vector::Constant(m, s.bias);
        const Vector theirs = gram * ref.beta + Vector::Constant(m, ref.bias);
        CHECK((mine - theirs).cwiseAbs().maxCoeff() <= 1e-3);
    }
}

TEST_CASE("KKT properties of converged solutions") {
    std::mt19937_64 rng(99);
    std::uniform_real_distribution<double> uc(0.1, 50.0);
    std::uniform_real_distribution<double> ue(0.0, 0.3);
    for (int trial = 0; trial < 40; ++trial) {
        const auto train = random_set(rng, 10 + trial, 2);
        const HyperParams hp{uc(rng), ue(rng), KernelSpec::rbf(0.9)};
        const SolverConfig cfg;
        const DualSolution s = solve_dual_full(train, hp, cfg);
        CHECK(std::abs(s.beta.sum()) <= 1e-8);
        CHECK(s.beta.maxCoeff() <= hp.c);
        CHECK(s.beta.minCoeff() >= -hp.c);
        CHECK(s.report.max_kkt_violation <= cfg.kkt_tolerance);
        const Matrix gram = gram_matrix(hp.kernel, train.x);
        CHECK(max_kkt_violation(gram, s.beta, train.y, hp) <= cfg.kkt_tolerance);
        const Vector f = gram * s.beta + Vector::Constant(train.size(), s.bias);
        for (Eigen::Index i = 0; i < train.size(); ++i) {
            if (std::abs(f[i] - train.y[i]) < hp.epsilon - 10 * cfg.kkt_tolerance) CHECK(s.beta[i] == 0.0);
        }
    }
}

TEST_CASE("dual objective never increases along the update trajectory") {
    std::mt19937_64 rng(17);
    const auto train = random_set(rng, 40, 2);
    SolverConfig cfg;
    cfg.record_trajectory = true;
    const DualSolution s = solve_dual_full(train, {20.0, 0.01, KernelSpec::rbf(2.0)}, cfg);
    REQUIRE(s.report.trajectory.size() == s.report.iterations + 1);
    for (std::size_t k = 1; k < s.report.trajectory.size(); ++k) {
        CHECK(s.report.trajectory[k] <= s.report.trajectory[k - 1] + 1e-12);
    }
}

TEST_CASE("duplicated training point leaves predictions unchanged") {
    std::mt19937_64 rng(23);
    const auto train = random_set(rng, 15, 2);
    TrainingSet dup = train;
    dup.x.values.conservativeResize(16, Eigen::NoChange);
    dup.x.values.row(15) = train.x.values.row(4);
    dup.y.conservativeResize(16);
    dup.y[15] = train.y[4];
    const HyperParams hp{3.0, 0.05, KernelSpec::rbf(1.0)};
    SolverConfig cfg;
    cfg.kkt_tolerance = 1e-9;
    const SvrModel a = solve_dual(train, hp, cfg);
    const SvrModel b = solve_dual(dup, hp, cfg);
    Matrix probe(50, 2);
    probe.setRandom();
    CHECK((predict(a, probe) - predict(b, probe)).cwiseAbs().maxCoeff() <= 1e-6);
}

TEST_CASE("shrinking reaches the same solution") {
    std::mt19937_64 rng(31);
    const auto train = random_set(rng, 120, 2);
    const HyperParams hp{10.0, 0.05, KernelSpec::rbf(1.5)};
    SolverConfig plain;
    SolverConfig shrink;
    shrink.shrink = true;
    const SvrModel a = solve_dual(train, hp, plain);
    const SvrModel b = solve_dual(train, hp, shrink);
    CHECK(b.solver_report.max_kkt_violation <= shrink.kkt_tolerance);
    CHECK((predict(a, train.x.values) - predict(b, train.x.values)).cwiseAbs().maxCoeff() <= 1e-2);
}

TEST_CASE("solver is deterministic") {
    std::mt19937_64 rng(41);
    const auto train = random_set(rng, 30, 3);
    const HyperParams hp{7.0, 0.02, KernelSpec::polynomial(3, 0.3, 1.0)};
    const DualSolution a = solve_dual_full(train, hp);
    const DualSolution b = solve_dual_full(train, hp);
    CHECK(a.beta == b.beta);
    CHECK(a.bias == b.bias);
}

TEST_CASE("solver errors") {
    auto train = line_set();
    CHECK_THROWS_AS(solve_dual_full(train, {0.0, 0.1, KernelSpec::rbf(1.0)}), InputError);
    CHECK_THROWS_AS(solve_dual_full(train, {1.0, -0.1, KernelSpec::rbf(1.0)}), InputError);

    SolverConfig capped;
    capped.max_iterations = 1;
    capped.kkt_tolerance = 1e-12;
    std::mt19937_64 rng(1);
    const auto hard = random_set(rng, 30, 2);
    try {
        solve_dual_full(hard, {10.0, 0.01, KernelSpec::rbf(1.0)}, capped);
        FAIL("expected ConvergenceError");
    } catch (const ConvergenceError& e) {
        CHECK(e.report().iterations == 1);
        CHECK(e.report().max_kkt_violation > 0.0);
    }

    train.y[2] = std::nan("");
    CHECK_THROWS_AS(solve_dual_full(train, {1.0, 0.1, KernelSpec::rbf(1.0)}), InputError);
}
