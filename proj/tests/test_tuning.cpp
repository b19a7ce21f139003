#include "airsvr/error.hpp"
#include "airsvr/tuning.hpp"

#include <doctest.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

using namespace airsvr;

namespace {

// sin(x) on an even grid over [0, 2pi], shuffled; the last 30% is held out.
struct SineData {
    TrainingSet train;
    Matrix hold_x;
    Vector hold_y;
};

SineData sine_data(std::uint64_t seed) {
    const int n = 200;
    std::vector<int> order(n);
    for (int i = 0; i < n; ++i) order[i] = i;
    std::shuffle(order.begin(), order.end(), std::mt19937_64(seed));
    const int n_train = 140;
    SineData d;
    d.train.x.names = {"x"};
    d.train.x.values.resize(n_train, 1);
    d.train.y.resize(n_train);
    d.hold_x.resize(n - n_train, 1);
    d.hold_y.resize(n - n_train);
    for (int k = 0; k < n; ++k) {
        const double x = 2.0 * std::numbers::pi * order[k] / (n - 1);
        if (k < n_train) {
            d.train.x.values(k, 0) = x;
            d.train.y[k] = std::sin(x);
        } else {
            d.hold_x(k - n_train, 0) = x;
            d.hold_y[k - n_train] = std::sin(x);
        }
    }
    return d;
}

std::string log_text(const SearchResult& r) {
    std::ostringstream os;
    write_trial_log(os, r);
    return os.str();
}

}  // namespace

TEST_CASE("time_series_split") {
    const auto p = time_series_split(12, 3);
    REQUIRE(p.folds.size() == 3);
    CHECK(p.folds[0].train_end == 3);
    CHECK(p.folds[0].val_begin == 3);
    CHECK(p.folds[0].val_end == 6);
    CHECK(p.folds[1].train_end == 6);
    CHECK(p.folds[1].val_end == 9);
    CHECK(p.folds[2].train_end == 9);
    CHECK(p.folds[2].val_end == 12);

    const auto q = time_series_split(14, 3);  // remainder 2 goes to block one
    CHECK(q.folds[0].train_end == 5);
    CHECK(q.folds[2].val_end == 14);

    CHECK_THROWS_AS(time_series_split(5, 5), InputError);
    CHECK_THROWS_AS(time_series_split(10, 0), InputError);
    CHECK_NOTHROW(time_series_split(12, 5));

    for (std::size_t n = 4; n < 80; ++n) {
        for (std::size_t k = 1; 2 * (k + 1) <= n; ++k) {
            const auto s = time_series_split(n, k);
            REQUIRE(s.folds.size() == k);
            for (std::size_t i = 0; i < k; ++i) {
                const auto& f = s.folds[i];
                CHECK(f.train_end > 0);
                CHECK(f.val_begin >= f.train_end);
                CHECK(f.val_end > f.val_begin);
                CHECK(f.val_end <= n);
                if (i > 0) CHECK(f.train_end > s.folds[i - 1].train_end);
            }
            CHECK(s.folds.back().val_end == n);
        }
    }
}

TEST_CASE("candidate draws stay inside the search space") {
    const auto grid = default_epsilon_grid();
    REQUIRE(grid.size() == 100);
    CHECK(grid.front() == 0.001);
    CHECK(grid.back() == 0.1);

    SearchSpace s;
    s.iterations = 5000;
    s.seed = 99;
    s.kernels = {KernelChoice{}, KernelChoice{KernelType::Polynomial, std::nullopt, 3, 1.0}};
    const auto c = draw_candidates(s);
    std::size_t poly = 0;
    for (const auto& d : c) {
        CHECK(d.c >= 1.0);
        CHECK(d.c <= 100.0);
        const double k = std::round(d.epsilon * 1000.0);
        CHECK(k >= 1.0);
        CHECK(k <= 100.0);
        CHECK(d.epsilon == k / 1000.0);
        poly += d.kernel_index;
    }
    CHECK(poly > 2000);
    CHECK(poly < 3000);

    const auto again = draw_candidates(s);
    for (std::size_t i = 0; i < c.size(); ++i) {
        CHECK(c[i].c == again[i].c);
        CHECK(c[i].epsilon == again[i].epsilon);
    }
    s.seed = 100;
    CHECK(draw_candidates(s)[0].c != c[0].c);

    SearchSpace bad;
    bad.iterations = 0;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    bad = SearchSpace{};
    bad.epsilon_grid.clear();
    CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("best-trial selection") {
    auto t = [](std::size_t i, double c, double e, double mean) {
        TrialResult r;
        r.index = i;
        r.c = c;
        r.epsilon = e;
        r.mean = mean;
        return r;
    };
    const double inf = std::numeric_limits<double>::infinity();
    CHECK(select_best({t(0, 5, 0.01, 0.3), t(1, 2, 0.05, 0.2), t(2, 9, 0.01, 0.4)}) == 1);
    CHECK(select_best({t(0, 5, 0.01, 0.2), t(1, 2, 0.05, 0.2)}) == 1);
    CHECK(select_best({t(0, 2, 0.05, 0.2), t(1, 2, 0.01, 0.2)}) == 1);
    CHECK(select_best({t(0, 2, 0.05, inf), t(1, 90, 0.09, 0.5)}) == 1);
    CHECK_THROWS_AS(select_best({t(0, 2, 0.05, inf), t(1, 3, 0.05, inf)}), SearchError);
}

TEST_CASE("random search on a noiseless sine") {
    const auto start = std::chrono::steady_clock::now();
    const auto d = sine_data(2024);
    const auto plan = time_series_split(140, 5);
    SearchSpace space;
    space.seed = 7;
    const auto r = random_search(d.train, space, plan);
    REQUIRE(r.trials.size() == 60);

    for (const auto& t : r.trials) {
        double s = 0.0;
        for (double v : t.per_fold) s += v;
        CHECK(t.mean == s / static_cast<double>(t.per_fold.size()));
        CHECK(r.best().mean <= t.mean);
    }

    SearchSpace fixed;
    fixed.c_min = fixed.c_max = 1.0;
    fixed.epsilon_grid = {0.1};
    fixed.iterations = 1;
    const auto baseline = random_search(d.train, fixed, plan);
    CHECK(r.best().mean <= baseline.best().mean);

    const auto hp = resolve_hyper(r.best(), d.train.x.values);
    const auto model = solve_dual(d.train, hp);
    const Vector e = predict(model, d.hold_x) - d.hold_y;
    const double rmse = std::sqrt(e.squaredNorm() / static_cast<double>(e.size()));
    MESSAGE("sine holdout rmse " << rmse);
    CHECK(rmse <= 0.05);
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    CHECK(secs < 10.0);

    SUBCASE("reproducible and thread independent") {
        const auto again = random_search(d.train, space, plan);
        CHECK(log_text(again) == log_text(r));
        SearchOptions opt;
        opt.threads = 4;
        const auto threaded = random_search(d.train, space, plan, opt);
        CHECK(log_text(threaded) == log_text(r));
        CHECK(threaded.best_index == r.best_index);
    }
    SUBCASE("order of trial evaluation does not matter") {
        auto shuffled = r.trials;
        std::shuffle(shuffled.begin(), shuffled.end(), std::mt19937_64(3));
        CHECK(shuffled[select_best(shuffled)].index == r.best().index);
    }
    SUBCASE("solver failures count as infinite cost") {
        SearchOptions opt;
        opt.solver.max_iterations = 1;
        CHECK_THROWS_AS(random_search(d.train, space, plan, opt), SearchError);
    }
}

TEST_CASE("trial log layout") {
    const auto d = sine_data(1);
    SearchSpace space;
    space.iterations = 3;
    const auto r = random_search(d.train, space, time_series_split(140, 2));
    const auto text = log_text(r);
    CHECK(text.rfind("trial_index,C,epsilon,kernel,fold1_rmse,fold2_rmse,mean_rmse\n", 0) == 0);
    CHECK(std::count(text.begin(), text.end(), '\n') == 4);
    CHECK(text.find(",rbf:auto,") != std::string::npos);
}
