#include <cmath>
#include <vector>

#include <doctest.h>

#include "rbdsde/barrier.hpp"
#include "rbdsde/drivers.hpp"
#include "rbdsde/errors.hpp"
#include "rbdsde/rng.hpp"
#include "rbdsde/scenario_tree.hpp"
#include "rbdsde/solver.hpp"

using namespace rbdsde;

namespace {

DriverPair zero_drivers() {
    DriverSpec f, g;
    f.L = 0.0;
    g.L = 0.0;
    g.alpha = 0.25;
    return DriverPair(f, g);
}

} // namespace

TEST_CASE("implicit penalty step closed form") {
    // Unconstrained branch: a already above the barrier.
    CHECK(implicit_penalty_step(2.0, 1.0, 5.0) == doctest::Approx(2.0));
    // Soft branch: (0 + 1*1) / (1 + 1) = 0.5.
    CHECK(implicit_penalty_step(0.0, 1.0, 1.0) == doctest::Approx(0.5));
    // Stiff limit approaches the hard reflection max(a, xi).
    CHECK(implicit_penalty_step(0.0, 1.0, 1e6) == doctest::Approx(1.0).epsilon(1e-5));
    CHECK_THROWS_AS(implicit_penalty_step(0.0, 1.0, -0.5), InvalidInputError);

    // y solves y = a + n*dt*(y - xi)^- ; check the defining identity and the
    // monotonicity in both a and the penalty strength.
    RandomStream stream(7, 7);
    for (int trial = 0; trial < 200; ++trial) {
        const double a = 4.0 * stream.next_uniform() - 2.0;
        const double xi = 4.0 * stream.next_uniform() - 2.0;
        const double ndt = 10.0 * stream.next_uniform();
        const double y = implicit_penalty_step(a, xi, ndt);
        CHECK(std::abs(y - a - ndt * std::max(xi - y, 0.0)) <= 1e-12 * (1.0 + std::abs(y)));
        CHECK(implicit_penalty_step(a + 0.1, xi, ndt) >= y);
        CHECK(implicit_penalty_step(a, xi, ndt + 0.5) >= y - 1e-15);
    }
}

TEST_CASE("projection is exact on the outcome span") {
    LevyMeasure measure({{1.0, 0.8}, {-0.7, 0.9}});
    TeugelsBasis basis = teugels_basis(measure);
    ScenarioTree tree = build_tree(measure, basis, 1.0, 5, 1, 3);
    const auto& law = tree.law();

    RandomStream stream(11, 0);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<double> next(static_cast<std::size_t>(law.num_outcomes));
        for (double& v : next) v = 2.0 * stream.next_uniform() - 1.0;
        Projection proj = project_Z(tree, next);
        CHECK(proj.residual <= 1e-12);

        // Reconstruct each outcome from the fitted loadings.
        for (int o = 0; o < law.num_outcomes; ++o) {
            double fit = proj.mean;
            for (int j = 0; j < law.basis_dim; ++j)
                fit += proj.z[static_cast<std::size_t>(j)] * law.dH[static_cast<std::size_t>(o)][static_cast<std::size_t>(j)];
            CHECK(fit == doctest::Approx(next[static_cast<std::size_t>(o)]).epsilon(1e-10));
        }

        double mean = 0.0;
        for (int o = 0; o < law.num_outcomes; ++o) mean += law.prob[static_cast<std::size_t>(o)] * next[static_cast<std::size_t>(o)];
        CHECK(proj.mean == doctest::Approx(mean).epsilon(1e-13));
    }

    CHECK_THROWS_AS(project_Z(tree, std::vector<double>{1.0}), InvalidInputError);
}

TEST_CASE("degenerate basis is rejected at tree construction") {
    LevyMeasure measure({{1.0, 1.0}, {-1.0, 1.0}});
    // Hand-built basis with two identical rows: the one-step increments are
    // linearly dependent and the Gram matrix has no Cholesky factor.
    TeugelsBasis broken(2, {1.0, 0.0, 1.0, 0.0}, {2.0, 0.0, 2.0, 0.0, 2.0, 0.0});
    CHECK_THROWS_AS(build_tree(measure, broken, 1.0, 4, 1, 0), NumericalError);
}

TEST_CASE("penalized solve terminates at the barrier's last value") {
    LevyMeasure measure({{1.0, 1.0}});
    TeugelsBasis basis = teugels_basis(measure);
    ScenarioTree tree = build_tree(measure, basis, 1.0, 10, 3, 21);
    BarrierSpec spec;
    spec.family = BarrierFamily::Linear;
    spec.c0 = 1.0;
    spec.c1 = -1.0;
    Barrier barrier = make_barrier(spec, tree);

    SolutionTriple sol = solve_penalized(tree, zero_drivers(), barrier, 16);
    for (int p = 0; p < 3; ++p)
        for (int s = 0; s < tree.num_states(10); ++s) {
            CHECK(sol.y_value(p, tree, 10, s) == barrier.value(10, s));
            CHECK(sol.y_plus(p, tree, 10, s) == sol.y_value(p, tree, 10, s));
        }
    CHECK_FALSE(sol.stiffness_warning);
    CHECK(sol.max_projection_residual <= 1e-12);
}

TEST_CASE("unpenalized solve ignores the barrier") {
    LevyMeasure measure({{1.0, 1.0}});
    TeugelsBasis basis = teugels_basis(measure);
    ScenarioTree tree = build_tree(measure, basis, 1.0, 8, 2, 4);
    BarrierSpec spec;
    spec.family = BarrierFamily::Constant;
    spec.c0 = 1.0;                  // binding barrier
    spec.terminal_override = 0.3;   // but the terminal sits below it
    Barrier barrier = make_barrier(spec, tree);

    SolutionTriple sol = solve_penalized(tree, zero_drivers(), barrier, 0);
    for (int p = 0; p < 2; ++p)
        for (int k = 0; k <= 8; ++k)
            for (int s = 0; s < tree.num_states(k); ++s)
                CHECK(sol.y_value(p, tree, k, s) == doctest::Approx(0.3).epsilon(1e-13));
    for (const auto& ks : sol.k_star_incr)
        for (double v : ks) CHECK(v == 0.0);
}

TEST_CASE("value process is monotone in the penalty level") {
    LevyMeasure measure({{1.0, 1.0}});
    TeugelsBasis basis = teugels_basis(measure);
    ScenarioTree tree = build_tree(measure, basis, 1.0, 10, 4, 9);
    BarrierSpec spec;
    spec.family = BarrierFamily::Linear;
    spec.c0 = 1.0;
    spec.c1 = -1.0;
    Barrier barrier = make_barrier(spec, tree);
    DriverPair drivers = zero_drivers();

    SolutionTriple prev = solve_penalized(tree, drivers, barrier, 2);
    for (int n : {4, 8, 16, 32}) {
        SolutionTriple cur = solve_penalized(tree, drivers, barrier, n);
        for (int p = 0; p < 4; ++p)
            for (int idx = 0; idx < tree.total_nodes(); ++idx) {
                CHECK(prev.y[static_cast<std::size_t>(p)].v[static_cast<std::size_t>(idx)] <=
                      cur.y[static_cast<std::size_t>(p)].v[static_cast<std::size_t>(idx)] + 1e-12);
                CHECK(prev.y[static_cast<std::size_t>(p)].v_plus[static_cast<std::size_t>(idx)] <=
                      cur.y[static_cast<std::size_t>(p)].v_plus[static_cast<std::size_t>(idx)] + 1e-12);
            }
        prev = std::move(cur);
    }
}

TEST_CASE("stiffness warning past the threshold") {
    LevyMeasure measure({{1.0, 1.0}});
    TeugelsBasis basis = teugels_basis(measure);
    ScenarioTree tree = build_tree(measure, basis, 1.0, 50, 1, 2);
    BarrierSpec spec;
    spec.family = BarrierFamily::Linear;
    spec.c0 = 1.0;
    spec.c1 = -1.0;
    Barrier barrier = make_barrier(spec, tree);

    CHECK_FALSE(solve_penalized(tree, zero_drivers(), barrier, 1024).stiffness_warning);
    CHECK(solve_penalized(tree, zero_drivers(), barrier, 1000000).stiffness_warning);
}

TEST_CASE("right-jump corrections switch on at the designated level") {
    LevyMeasure measure({{1.0, 1.0}});
    TeugelsBasis basis = teugels_basis(measure);
    ScenarioTree tree = build_tree(measure, basis, 1.0, 10, 2, 13);
    BarrierSpec spec;
    spec.family = BarrierFamily::Linear;
    spec.c0 = 1.0;
    spec.c1 = -1.0;
    spec.right_jumps = {{0.5, -0.6}};
    Barrier barrier = make_barrier(spec, tree);
    DriverPair drivers = zero_drivers();

    CHECK(barrier.right_jump_times(1).indices.empty());
    REQUIRE(barrier.right_jump_times(2).indices == std::vector<int>{5});

    SolutionTriple coarse = solve_penalized(tree, drivers, barrier, 1);
    for (const auto& kp : coarse.k_plus)
        for (double v : kp) CHECK(v == 0.0);

    SolutionTriple fine = solve_penalized(tree, drivers, barrier, 2);
    double jump_mass = 0.0;
    for (int p = 0; p < 2; ++p) {
        for (int k = 0; k < 10; ++k)
            for (int s = 0; s < tree.num_states(k); ++s)
                if (k != 5)
                    CHECK(fine.k_plus[static_cast<std::size_t>(p)][static_cast<std::size_t>(tree.inner_index(k, s))] == 0.0);
        for (int s = 0; s < tree.num_states(5); ++s)
            jump_mass += tree.node_prob(5, s) *
                         fine.k_plus[static_cast<std::size_t>(p)][static_cast<std::size_t>(tree.inner_index(5, s))];
    }
    CHECK(jump_mass > 0.0);
}

TEST_CASE("frozen drift reproduces the matching live coefficient") {
    LevyMeasure measure({{1.0, 1.0}});
    TeugelsBasis basis = teugels_basis(measure);
    ScenarioTree tree = build_tree(measure, basis, 1.0, 10, 3, 6);
    BarrierSpec spec;
    spec.family = BarrierFamily::Linear;
    spec.c0 = 1.0;
    spec.c1 = -1.0;
    Barrier barrier = make_barrier(spec, tree);

    DriverSpec f;
    f.L = 0.0;
    DriverSpec g;
    g.a = 0.25; // exogenous constant
    g.L = 0.0;
    g.alpha = 0.25;
    DriverPair drivers(f, g);

    SolutionTriple live = solve_penalized(tree, drivers, barrier, 8);

    std::vector<std::vector<double>> frozen(3, std::vector<double>(static_cast<std::size_t>(tree.total_inner_nodes()), 0.25));
    SolveOptions opts;
    opts.frozen_g = &frozen;
    SolutionTriple replay = solve_penalized(tree, drivers, barrier, 8, opts);

    for (int p = 0; p < 3; ++p)
        for (int idx = 0; idx < tree.total_nodes(); ++idx)
            CHECK(replay.y[static_cast<std::size_t>(p)].v[static_cast<std::size_t>(idx)] ==
                  live.y[static_cast<std::size_t>(p)].v[static_cast<std::size_t>(idx)]);
}

TEST_CASE("reflection increments survive re-extraction") {
    LevyMeasure measure({{1.0, 1.0}});
    TeugelsBasis basis = teugels_basis(measure);
    ScenarioTree tree = build_tree(measure, basis, 1.0, 20, 4, 15);
    BarrierSpec spec;
    spec.family = BarrierFamily::Linear;
    spec.c0 = 1.0;
    spec.c1 = -1.0;
    Barrier barrier = make_barrier(spec, tree);
    DriverSpec f;
    f.a = 0.1;
    f.b = 0.2;
    f.L = 0.2;
    DriverSpec g;
    g.a = 0.15;
    g.L = 0.0;
    g.alpha = 0.25;
    DriverPair drivers(f, g);

    SolutionTriple sol = solve_penalized(tree, drivers, barrier, 16);
    KExtraction extraction = extract_K(tree, sol, drivers, barrier);
    CHECK(extraction.max_mismatch <= 1e-8);
    CHECK(extraction.min_increment >= -1e-10);
    REQUIRE(extraction.expected_k.size() == 21);
    CHECK(extraction.expected_k.front() == 0.0);
    for (std::size_t k = 1; k < extraction.expected_k.size(); ++k)
        CHECK(extraction.expected_k[k] >= extraction.expected_k[k - 1] - 1e-12);

    // Tampering with an increment is caught.
    sol.k_star_incr[0][5] += 1e-3;
    CHECK_THROWS_AS(extract_K(tree, sol, drivers, barrier), ConsistencyError);
}
