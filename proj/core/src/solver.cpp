#include "rbdsde/solver.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "detail_linalg.hpp"
#include "detail_parallel.hpp"
#include "rbdsde/errors.hpp"

namespace rbdsde {

Projection project_Z(const ScenarioTree& tree, std::span<const double> next_values) {
    const OutcomeLaw& law = tree.law();
    if (static_cast<int>(next_values.size()) != law.num_outcomes)
        throw InvalidInputError("projection needs one value per outcome");
    const int m = law.basis_dim;
    if (law.gram_chol.empty())
        throw NumericalError("one-step Gram matrix of the martingale increments is numerically singular");

    Projection out;
    for (int o = 0; o < law.num_outcomes; ++o)
        out.mean += law.prob[static_cast<std::size_t>(o)] * next_values[static_cast<std::size_t>(o)];

    // Normal equations. The increments are exactly centered, so the constant
    // and the loadings decouple: Gram * z = weighted covariance.
    out.z.assign(static_cast<std::size_t>(m), 0.0);
    for (int o = 0; o < law.num_outcomes; ++o) {
        const double w = law.prob[static_cast<std::size_t>(o)] *
                         (next_values[static_cast<std::size_t>(o)] - out.mean);
        for (int j = 0; j < m; ++j)
            out.z[static_cast<std::size_t>(j)] += w * law.dH[static_cast<std::size_t>(o)][static_cast<std::size_t>(j)];
    }
    detail::cholesky_solve(law.gram_chol, m, out.z);

    double rss = 0.0;
    for (int o = 0; o < law.num_outcomes; ++o) {
        double fit = out.mean;
        for (int j = 0; j < m; ++j)
            fit += out.z[static_cast<std::size_t>(j)] * law.dH[static_cast<std::size_t>(o)][static_cast<std::size_t>(j)];
        const double r = next_values[static_cast<std::size_t>(o)] - fit;
        rss += law.prob[static_cast<std::size_t>(o)] * r * r;
    }
    out.residual = std::sqrt(std::max(0.0, rss));
    return out;
}

double implicit_penalty_step(double a, double xi, double n_dt) {
    if (n_dt < 0.0)
        throw InvalidInputError("penalty weight must be >= 0");
    if (a >= xi)
        return a;
    return (a + n_dt * xi) / (1.0 + n_dt);
}

SolutionTriple solve_penalized(const ScenarioTree& tree, const DriverPair& drivers,
                               const Barrier& barrier, int n, const SolveOptions& options) {
    if (n < 0)
        throw InvalidInputError("penalty level must be >= 0");
    const Grid& grid = tree.grid();
    const int N = grid.N;
    const int P = tree.scenarios();
    const int m = tree.law().basis_dim;
    const double dt = grid.dt;
    const double n_dt = static_cast<double>(n) * dt;

    if (options.frozen_g) {
        if (static_cast<int>(options.frozen_g->size()) != P)
            throw InvalidInputError("frozen backward-noise values cover the wrong scenario count");
        for (const auto& row : *options.frozen_g)
            if (static_cast<int>(row.size()) != tree.total_inner_nodes())
                throw InvalidInputError("frozen backward-noise values cover the wrong node count");
    }

    // Correction times are fixed per n: the grid points where the barrier's
    // right jump is steep enough to clear the -1/n threshold.
    std::vector<char> designated(static_cast<std::size_t>(N), 0);
    if (n >= 1)
        for (int k : barrier.right_jump_times(n).indices)
            designated[static_cast<std::size_t>(k)] = 1;

    SolutionTriple sol;
    sol.penalty_level = n;
    sol.stiffness_warning = n_dt > options.stiffness_warn_threshold;
    sol.y.resize(static_cast<std::size_t>(P));
    sol.z.resize(static_cast<std::size_t>(P));
    sol.y_cont.resize(static_cast<std::size_t>(P));
    sol.k_star_incr.resize(static_cast<std::size_t>(P));
    sol.k_plus.resize(static_cast<std::size_t>(P));

    std::vector<double> residuals(static_cast<std::size_t>(P), 0.0);
    detail::parallel_for(P, options.jobs, [&](int p) {
        TreeField& y = sol.y[static_cast<std::size_t>(p)];
        y = make_tree_field(tree);
        auto& z = sol.z[static_cast<std::size_t>(p)];
        auto& y_cont = sol.y_cont[static_cast<std::size_t>(p)];
        auto& k_star = sol.k_star_incr[static_cast<std::size_t>(p)];
        auto& k_plus = sol.k_plus[static_cast<std::size_t>(p)];
        z.assign(static_cast<std::size_t>(tree.total_inner_nodes()) * m, 0.0);
        y_cont.assign(static_cast<std::size_t>(tree.total_inner_nodes()), 0.0);
        k_star.assign(static_cast<std::size_t>(tree.total_inner_nodes()), 0.0);
        k_plus.assign(static_cast<std::size_t>(tree.total_inner_nodes()), 0.0);

        for (int s = 0; s < tree.num_states(N); ++s) {
            const int idx = tree.node_index(N, s);
            y.v[static_cast<std::size_t>(idx)] = barrier.value(N, s);
            y.v_plus[static_cast<std::size_t>(idx)] = y.v[static_cast<std::size_t>(idx)];
        }

        const BrownianPath& bp = tree.brownian(p);
        std::vector<double> next(static_cast<std::size_t>(tree.law().num_outcomes));
        double worst_residual = 0.0;
        for (int level = N - 1; level >= 0; --level) {
            const double t = grid.time(level);
            const double dB = bp.increments[static_cast<std::size_t>(level)];
            for (int s = 0; s < tree.num_states(level); ++s) {
                const int idx = tree.inner_index(level, s);
                for (int o = 0; o < tree.law().num_outcomes; ++o)
                    next[static_cast<std::size_t>(o)] =
                        y.v[static_cast<std::size_t>(tree.node_index(level + 1, tree.child_state(level, s, o)))];
                Projection proj = project_Z(tree, next);
                worst_residual = std::max(worst_residual, proj.residual);
                y_cont[static_cast<std::size_t>(idx)] = proj.mean;
                for (int j = 0; j < m; ++j)
                    z[static_cast<std::size_t>(idx) * m + j] = proj.z[static_cast<std::size_t>(j)];

                const double f_val = drivers.f()(t, proj.mean, proj.z);
                const double g_val = options.frozen_g
                                         ? (*options.frozen_g)[static_cast<std::size_t>(p)][static_cast<std::size_t>(idx)]
                                         : drivers.g()(t, proj.mean, proj.z);
                const double a = proj.mean + f_val * dt + g_val * dB;

                double yplus = a;
                if (n >= 1)
                    yplus = implicit_penalty_step(a, barrier.value_plus(level, s), n_dt);
                k_star[static_cast<std::size_t>(idx)] = std::max(0.0, yplus - a);

                double yv = yplus;
                if (designated[static_cast<std::size_t>(level)]) {
                    const double xi = barrier.value(level, s);
                    if (xi > yplus) {
                        yv = xi;
                        k_plus[static_cast<std::size_t>(idx)] = xi - yplus;
                    }
                }
                y.v_plus[static_cast<std::size_t>(tree.node_index(level, s))] = yplus;
                y.v[static_cast<std::size_t>(tree.node_index(level, s))] = yv;
            }
        }
        residuals[static_cast<std::size_t>(p)] = worst_residual;
    });
    sol.max_projection_residual = *std::max_element(residuals.begin(), residuals.end());
    return sol;
}

KExtraction extract_K(const ScenarioTree& tree, const SolutionTriple& sol, const DriverPair& drivers,
                      const Barrier& barrier) {
    const Grid& grid = tree.grid();
    const int N = grid.N;
    const int P = sol.scenarios();
    if (P != tree.scenarios())
        throw InvalidInputError("solution covers a different scenario count than the tree");
    const int m = tree.law().basis_dim;
    const double dt = grid.dt;

    std::vector<char> designated(static_cast<std::size_t>(N), 0);
    if (sol.penalty_level >= 1)
        for (int k : barrier.right_jump_times(sol.penalty_level).indices)
            designated[static_cast<std::size_t>(k)] = 1;

    KExtraction out;
    std::vector<double> next(static_cast<std::size_t>(tree.law().num_outcomes));
    for (int p = 0; p < P; ++p) {
        const TreeField& y = sol.y[static_cast<std::size_t>(p)];
        const BrownianPath& bp = tree.brownian(p);
        for (int level = N - 1; level >= 0; --level) {
            const double t = grid.time(level);
            const double dB = bp.increments[static_cast<std::size_t>(level)];
            for (int s = 0; s < tree.num_states(level); ++s) {
                const int idx = tree.inner_index(level, s);
                for (int o = 0; o < tree.law().num_outcomes; ++o)
                    next[static_cast<std::size_t>(o)] =
                        y.v[static_cast<std::size_t>(tree.node_index(level + 1, tree.child_state(level, s, o)))];
                const Projection proj = project_Z(tree, next);

                const double rec_star = sol.k_star_incr[static_cast<std::size_t>(p)][static_cast<std::size_t>(idx)];
                const double rec_plus = sol.k_plus[static_cast<std::size_t>(p)][static_cast<std::size_t>(idx)];
                out.min_increment = std::min({out.min_increment, rec_star, rec_plus});
                if (rec_star < -1e-10 || rec_plus < -1e-10)
                    throw ConsistencyError("recorded reflection increment is negative at scenario " +
                                           std::to_string(p) + ", step " + std::to_string(level));

                double mismatch = std::abs(proj.mean - sol.y_cont[static_cast<std::size_t>(p)][static_cast<std::size_t>(idx)]);
                const auto z_row = sol.z_row(p, tree, level, s);
                for (int j = 0; j < m; ++j)
                    mismatch = std::max(mismatch, std::abs(proj.z[static_cast<std::size_t>(j)] -
                                                           z_row[static_cast<std::size_t>(j)]));

                const double f_val = drivers.f()(t, proj.mean, proj.z);
                const double g_val = drivers.g()(t, proj.mean, proj.z);
                const double drift = f_val * dt + g_val * dB;
                const double yplus = y.v_plus[static_cast<std::size_t>(tree.node_index(level, s))];
                const double yv = y.v[static_cast<std::size_t>(tree.node_index(level, s))];

                // Each outcome implies its own continuous increment through
                // the discrete equation; exact representation makes them all
                // agree, so the spread doubles as a projection check.
                for (int o = 0; o < tree.law().num_outcomes; ++o) {
                    double fit = 0.0;
                    for (int j = 0; j < m; ++j)
                        fit += proj.z[static_cast<std::size_t>(j)] *
                               tree.law().dH[static_cast<std::size_t>(o)][static_cast<std::size_t>(j)];
                    const double implied = yplus - drift - (next[static_cast<std::size_t>(o)] - fit);
                    mismatch = std::max(mismatch, std::abs(implied - rec_star));
                }
                mismatch = std::max(mismatch, std::abs((yv - yplus) - rec_plus));
                if (!designated[static_cast<std::size_t>(level)] && rec_plus != 0.0)
                    throw ConsistencyError("reflection right jump recorded away from a correction time at step " +
                                           std::to_string(level));
                if (mismatch > 1e-8)
                    throw ConsistencyError("recomputed reflection increments disagree with the recorded ones by " +
                                           std::to_string(mismatch) + " at scenario " + std::to_string(p) +
                                           ", step " + std::to_string(level));
                out.max_mismatch = std::max(out.max_mismatch, mismatch);
            }
        }
    }

    out.expected_k.assign(static_cast<std::size_t>(N) + 1, 0.0);
    for (int p = 0; p < P; ++p) {
        const std::vector<double> path = sol.expected_k_path(p, tree);
        for (int k = 0; k <= N; ++k)
            out.expected_k[static_cast<std::size_t>(k)] += path[static_cast<std::size_t>(k)] / static_cast<double>(P);
    }
    return out;
}

} // namespace rbdsde
