#include "rbdsde/reflection.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "detail_parallel.hpp"
#include "rbdsde/errors.hpp"
#include "rbdsde/solver.hpp"
#include "rbdsde/verify.hpp"

namespace rbdsde {

namespace {

/// Scalar fixed point a = base + f(t, a) dt, contractive for L_f dt < 1.
double continuation_fixed_point(const Driver& f, double t, double base, double dt) {
    double a = base + f(t, base, {}) * dt;
    for (int it = 0; it < 10000; ++it) {
        const double next = base + f(t, a, {}) * dt;
        if (std::abs(next - a) <= 5e-16 * (1.0 + std::abs(next)))
            return next;
        a = next;
    }
    throw NumericalError("continuation fixed point failed to converge; generator too stiff for this step");
}

} // namespace

SolutionTriple snell_oracle(const ScenarioTree& tree, const DriverPair& drivers,
                            const Barrier& barrier) {
    if (drivers.f().depends_on_z())
        throw InvalidInputError("reference solver handles generators f(t, y) only; this one reads z");
    if (drivers.g_depends_on_solution())
        throw InvalidInputError("reference solver needs an exogenous backward-noise coefficient g(t)");
    const Grid& grid = tree.grid();
    if (!(drivers.lipschitz_f() * grid.dt < 1.0))
        throw StepSizeError("implicit continuation step needs L_f * dt < 1; got " +
                            std::to_string(drivers.lipschitz_f() * grid.dt));

    const int N = grid.N;
    const int P = tree.scenarios();
    const int m = tree.law().basis_dim;

    SolutionTriple sol;
    sol.penalty_level = 0;
    sol.y.resize(static_cast<std::size_t>(P));
    sol.z.resize(static_cast<std::size_t>(P));
    sol.y_cont.resize(static_cast<std::size_t>(P));
    sol.k_star_incr.resize(static_cast<std::size_t>(P));
    sol.k_plus.resize(static_cast<std::size_t>(P));

    double worst_residual = 0.0;
    for (int p = 0; p < P; ++p) {
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
        for (int level = N - 1; level >= 0; --level) {
            const double t = grid.time(level);
            const double dB = bp.increments[static_cast<std::size_t>(level)];
            const double g_val = drivers.g()(t, 0.0, {});
            for (int s = 0; s < tree.num_states(level); ++s) {
                const int idx = tree.inner_index(level, s);
                for (int o = 0; o < tree.law().num_outcomes; ++o)
                    next[static_cast<std::size_t>(o)] =
                        y.v[static_cast<std::size_t>(tree.node_index(level + 1, tree.child_state(level, s, o)))];
                Projection proj = project_Z(tree, next);
                worst_residual = std::max(worst_residual, proj.residual);
                for (int j = 0; j < m; ++j)
                    z[static_cast<std::size_t>(idx) * m + j] = proj.z[static_cast<std::size_t>(j)];

                const double a = continuation_fixed_point(drivers.f(), t, proj.mean + g_val * dB, grid.dt);
                y_cont[static_cast<std::size_t>(idx)] = a;
                const double vplus = std::max(barrier.value_plus(level, s), a);
                const double vv = std::max(barrier.value(level, s), vplus);
                k_star[static_cast<std::size_t>(idx)] = vplus - a;
                k_plus[static_cast<std::size_t>(idx)] = vv - vplus;
                y.v_plus[static_cast<std::size_t>(tree.node_index(level, s))] = vplus;
                y.v[static_cast<std::size_t>(tree.node_index(level, s))] = vv;
            }
        }
    }
    sol.max_projection_residual = worst_residual;
    return sol;
}

std::vector<TreeField> snell_envelope(const ScenarioTree& tree, const std::vector<TreeField>& payoff) {
    if (payoff.empty())
        throw InvalidInputError("need at least one payoff field");
    const int N = tree.grid().N;
    std::vector<TreeField> out(payoff.size());
    for (std::size_t p = 0; p < payoff.size(); ++p) {
        const TreeField& pay = payoff[p];
        if (static_cast<int>(pay.v.size()) != tree.total_nodes() ||
            static_cast<int>(pay.v_plus.size()) != tree.total_nodes())
            throw InvalidInputError("payoff field does not cover the tree's nodes");
        TreeField& s_field = out[p];
        s_field = make_tree_field(tree);
        for (int s = 0; s < tree.num_states(N); ++s) {
            const int idx = tree.node_index(N, s);
            s_field.v[static_cast<std::size_t>(idx)] = pay.v[static_cast<std::size_t>(idx)];
            s_field.v_plus[static_cast<std::size_t>(idx)] = pay.v[static_cast<std::size_t>(idx)];
        }
        for (int level = N - 1; level >= 0; --level)
            for (int s = 0; s < tree.num_states(level); ++s) {
                const int idx = tree.node_index(level, s);
                double mean = 0.0;
                for (int o = 0; o < tree.law().num_outcomes; ++o)
                    mean += tree.law().prob[static_cast<std::size_t>(o)] *
                            s_field.v[static_cast<std::size_t>(
                                tree.node_index(level + 1, tree.child_state(level, s, o)))];
                const double splus = std::max(pay.v_plus[static_cast<std::size_t>(idx)], mean);
                s_field.v_plus[static_cast<std::size_t>(idx)] = splus;
                s_field.v[static_cast<std::size_t>(idx)] = std::max(pay.v[static_cast<std::size_t>(idx)], splus);
            }
    }
    return out;
}

MertensDecomposition mertens_decompose(const ScenarioTree& tree, const std::vector<TreeField>& v,
                                       double tol) {
    const int N = tree.grid().N;
    MertensDecomposition out;
    out.k_star_incr.resize(v.size());
    out.k_plus.resize(v.size());
    for (std::size_t p = 0; p < v.size(); ++p) {
        const TreeField& f = v[p];
        if (static_cast<int>(f.v.size()) != tree.total_nodes())
            throw InvalidInputError("value field does not cover the tree's nodes");
        auto& k_star = out.k_star_incr[p];
        auto& k_plus = out.k_plus[p];
        k_star.assign(static_cast<std::size_t>(tree.total_inner_nodes()), 0.0);
        k_plus.assign(static_cast<std::size_t>(tree.total_inner_nodes()), 0.0);
        for (int level = 0; level < N; ++level)
            for (int s = 0; s < tree.num_states(level); ++s) {
                const int idx = tree.inner_index(level, s);
                const double vv = f.v[static_cast<std::size_t>(tree.node_index(level, s))];
                const double vplus = f.v_plus[static_cast<std::size_t>(tree.node_index(level, s))];
                double mean = 0.0;
                for (int o = 0; o < tree.law().num_outcomes; ++o)
                    mean += tree.law().prob[static_cast<std::size_t>(o)] *
                            f.v[static_cast<std::size_t>(tree.node_index(level + 1, tree.child_state(level, s, o)))];
                if (vv - vplus < -tol)
                    throw InvalidInputError("field is not a strong supermartingale: right limit exceeds the value at step " +
                                            std::to_string(level));
                if (vplus - mean < -tol)
                    throw InvalidInputError("field is not a strong supermartingale: right limit below the one-step mean at step " +
                                            std::to_string(level));
                k_plus[static_cast<std::size_t>(idx)] = vv - vplus;
                k_star[static_cast<std::size_t>(idx)] = vplus - mean;
                // M = V + K: the defect of one martingale step is exactly the
                // identity the increments were built from, so it only sees
                // rounding.
                const double defect = mean + k_plus[static_cast<std::size_t>(idx)] +
                                      k_star[static_cast<std::size_t>(idx)] - vv;
                out.max_martingale_residual = std::max(out.max_martingale_residual, std::abs(defect));
            }
    }
    return out;
}

PathMertens mertens_decompose(const RegulatedPath& v, double tol) {
    const int n = v.size();
    PathMertens out;
    out.k_plus.assign(static_cast<std::size_t>(n), 0.0);
    std::vector<double> k_star_cum(static_cast<std::size_t>(n), 0.0), k_total(static_cast<std::size_t>(n), 0.0),
        k_total_plus(static_cast<std::size_t>(n), 0.0);
    for (int k = 0; k + 1 < n; ++k) {
        const double jump = v.v[static_cast<std::size_t>(k)] - v.v_plus[static_cast<std::size_t>(k)];
        const double slope = v.v_plus[static_cast<std::size_t>(k)] - v.v[static_cast<std::size_t>(k) + 1];
        if (jump < -tol)
            throw InvalidInputError("path is not nonincreasing: right limit exceeds the value at index " +
                                    std::to_string(k));
        if (slope < -tol)
            throw InvalidInputError("path is not nonincreasing over the interval starting at index " +
                                    std::to_string(k));
        out.k_plus[static_cast<std::size_t>(k)] = jump;
        k_star_cum[static_cast<std::size_t>(k) + 1] = k_star_cum[static_cast<std::size_t>(k)] + slope;
        k_total[static_cast<std::size_t>(k) + 1] = k_total[static_cast<std::size_t>(k)] + jump + slope;
    }
    for (int k = 0; k < n; ++k)
        k_total_plus[static_cast<std::size_t>(k)] = k_total[static_cast<std::size_t>(k)] +
                                                    out.k_plus[static_cast<std::size_t>(k)];
    k_total_plus[static_cast<std::size_t>(n) - 1] = k_total[static_cast<std::size_t>(n) - 1];

    std::vector<double> m_const(static_cast<std::size_t>(n), v.v[0]);
    out.martingale = make_regulated(v.times, m_const, m_const);
    out.k_star = make_regulated(v.times, k_star_cum, k_star_cum);
    out.k_total = make_regulated(v.times, k_total, k_total_plus);
    return out;
}

SkorokhodReport skorokhod_residual(const ScenarioTree& tree, const SolutionTriple& sol,
                                   const Barrier& barrier) {
    const int N = tree.grid().N;
    const int P = sol.scenarios();
    if (P != tree.scenarios())
        throw InvalidInputError("solution covers a different scenario count than the tree");
    SkorokhodReport out;
    double total = 0.0;
    for (int p = 0; p < P; ++p) {
        for (int level = 0; level < N; ++level)
            for (int s = 0; s < tree.num_states(level); ++s) {
                const int idx = tree.inner_index(level, s);
                const double w = tree.node_prob(level, s);
                const double star = sol.k_star_incr[static_cast<std::size_t>(p)][static_cast<std::size_t>(idx)];
                const double jump = sol.k_plus[static_cast<std::size_t>(p)][static_cast<std::size_t>(idx)];
                if (star != 0.0)
                    total += w * std::abs(sol.y_plus(p, tree, level, s) - barrier.value_plus(level, s)) * star;
                if (jump != 0.0)
                    total += w * std::abs(sol.y_value(p, tree, level, s) - barrier.value(level, s)) * jump;
            }
    }
    out.residual = total / static_cast<double>(P);
    out.max_barrier_gap = sol.max_barrier_gap(tree, barrier);
    return out;
}

ConvergenceReport penalization_sweep(const ScenarioTree& tree, const DriverPair& drivers,
                                     const Barrier& barrier, const std::vector<int>& schedule,
                                     const SweepOptions& options) {
    if (schedule.empty())
        throw InvalidInputError("penalty schedule must not be empty");
    for (std::size_t i = 0; i < schedule.size(); ++i) {
        if (schedule[i] < 1)
            throw InvalidInputError("penalty schedule entries must be >= 1");
        if (i > 0 && schedule[i] <= schedule[i - 1])
            throw InvalidInputError("penalty schedule must be strictly increasing");
    }

    SolveOptions solve_opts;
    solve_opts.jobs = options.jobs;

    ConvergenceReport report;
    report.rows.resize(schedule.size());
    SolutionTriple current = solve_penalized(tree, drivers, barrier, schedule[0], solve_opts);
    for (std::size_t i = 0; i < schedule.size(); ++i) {
        ConvergenceRow& row = report.rows[i];
        row.n = schedule[i];
        row.violation = current.max_barrier_gap(tree, barrier);
        row.skorokhod = skorokhod_residual(tree, current, barrier).residual;
        row.jumps_active = static_cast<int>(barrier.right_jump_times(schedule[i]).indices.size());
        const BetaNorms norms = beta_norms(tree, current, barrier, drivers, options.beta);
        row.norm_y = norms.sup_term + norms.y_integral;
        row.norm_z = norms.z_integral;
        row.norm_k = norms.k_terminal_sq;
        row.data_norm = norms.data_norm;
        row.solution_norm = norms.solution_norm();
        if (options.oracle) {
            row.has_oracle = true;
            row.oracle_err = sup_node_distance(current, *options.oracle);
        }

        if (i + 1 < schedule.size()) {
            SolutionTriple next = solve_penalized(tree, drivers, barrier, schedule[i + 1], solve_opts);
            row.cauchy_diff = sup_node_distance(current, next);
            double defect = 0.0;
            for (int p = 0; p < current.scenarios(); ++p)
                for (std::size_t q = 0; q < current.y[static_cast<std::size_t>(p)].v.size(); ++q) {
                    defect = std::max(defect, current.y[static_cast<std::size_t>(p)].v[q] -
                                                  next.y[static_cast<std::size_t>(p)].v[q]);
                    defect = std::max(defect, current.y[static_cast<std::size_t>(p)].v_plus[q] -
                                                  next.y[static_cast<std::size_t>(p)].v_plus[q]);
                }
            row.monotone_defect = std::max(0.0, defect);
            if (drivers.f().depends_on_z()) {
                const ComparisonInstance inst =
                    make_comparison_instance(tree, drivers.f(), drivers.f(), current, next);
                row.positivity_ok = comparison_check(inst).positivity_ok;
            }
            current = std::move(next);
        } else {
            row.cauchy_diff = std::numeric_limits<double>::quiet_NaN();
        }
    }
    report.limit = std::move(current);
    return report;
}

namespace {

/// Weighted L2 distance between consecutive outer iterates on the values the
/// frozen coefficient actually reads (continuation mean and control rows).
double picard_distance(const ScenarioTree& tree, const SolutionTriple& a, const SolutionTriple& b,
                       double beta) {
    const int N = tree.grid().N;
    const int m = tree.law().basis_dim;
    const double dt = tree.grid().dt;
    double acc = 0.0;
    for (int p = 0; p < a.scenarios(); ++p)
        for (int level = 0; level < N; ++level) {
            const double w = std::exp(beta * tree.grid().time(level)) * dt;
            for (int s = 0; s < tree.num_states(level); ++s) {
                const int idx = tree.inner_index(level, s);
                const double dy = a.y_cont[static_cast<std::size_t>(p)][static_cast<std::size_t>(idx)] -
                                  b.y_cont[static_cast<std::size_t>(p)][static_cast<std::size_t>(idx)];
                double dz2 = 0.0;
                for (int j = 0; j < m; ++j) {
                    const double dz = a.z[static_cast<std::size_t>(p)][static_cast<std::size_t>(idx) * m + j] -
                                      b.z[static_cast<std::size_t>(p)][static_cast<std::size_t>(idx) * m + j];
                    dz2 += dz * dz;
                }
                acc += w * tree.node_prob(level, s) * (dy * dy + dz2);
            }
        }
    return std::sqrt(acc / static_cast<double>(a.scenarios()));
}

} // namespace

PicardResult picard_outer_loop(const ScenarioTree& tree, const DriverPair& drivers,
                               const Barrier& barrier, int n, int max_iters, double tol, double beta,
                               int jobs) {
    if (max_iters < 1)
        throw InvalidInputError("need at least one refinement");
    if (!(tol > 0.0))
        throw InvalidInputError("convergence tolerance must be positive");

    const int P = tree.scenarios();
    const Grid& grid = tree.grid();
    const int m = tree.law().basis_dim;

    // Frozen coefficient values from one iterate (zeros for the first solve).
    std::vector<std::vector<double>> frozen(
        static_cast<std::size_t>(P),
        std::vector<double>(static_cast<std::size_t>(tree.total_inner_nodes()), 0.0));
    const std::vector<double> zero_z(static_cast<std::size_t>(m), 0.0);
    auto fill_frozen = [&](const SolutionTriple* prev) {
        for (int p = 0; p < P; ++p)
            for (int level = 0; level < grid.N; ++level)
                for (int s = 0; s < tree.num_states(level); ++s) {
                    const int idx = tree.inner_index(level, s);
                    const double yv = prev ? (*prev).y_cont[static_cast<std::size_t>(p)][static_cast<std::size_t>(idx)] : 0.0;
                    const std::span<const double> zr = prev ? (*prev).z_row(p, tree, level, s)
                                                           : std::span<const double>(zero_z);
                    frozen[static_cast<std::size_t>(p)][static_cast<std::size_t>(idx)] =
                        drivers.g()(grid.time(level), yv, zr);
                }
    };

    SolveOptions solve_opts;
    solve_opts.jobs = jobs;
    solve_opts.frozen_g = &frozen;

    fill_frozen(nullptr);
    SolutionTriple prev = solve_penalized(tree, drivers, barrier, n, solve_opts);

    PicardResult result;
    for (int it = 1; it <= max_iters; ++it) {
        fill_frozen(&prev);
        SolutionTriple cur = solve_penalized(tree, drivers, barrier, n, solve_opts);
        const double diff = picard_distance(tree, cur, prev, beta);
        result.diffs.push_back(diff);
        if (result.diffs.size() >= 2) {
            const double d0 = result.diffs[result.diffs.size() - 2];
            result.ratios.push_back(d0 == 0.0 ? 0.0 : diff / d0);
        }
        result.iterations = it;
        prev = std::move(cur);
        if (diff <= tol) {
            result.converged = true;
            break;
        }
    }
    if (!result.converged) {
        std::string trace;
        for (double d : result.diffs)
            trace += (trace.empty() ? "" : ", ") + std::to_string(d);
        throw DivergenceError("outer fixed-point loop did not reach tolerance " + std::to_string(tol) +
                              " after " + std::to_string(max_iters) + " refinements; distances: " + trace);
    }
    result.solution = std::move(prev);
    return result;
}

SnellInput build_snell_input(const ScenarioTree& tree, const DriverPair& drivers,
                             const Barrier& barrier) {
    if (drivers.f().depends_on_y() || drivers.f().depends_on_z())
        throw InvalidInputError("shifted-payoff construction needs a generator f(t) free of the solution");
    if (drivers.g_depends_on_solution())
        throw InvalidInputError("shifted-payoff construction needs an exogenous backward-noise coefficient g(t)");

    const Grid& grid = tree.grid();
    const int N = grid.N;
    const int P = tree.scenarios();

    SnellInput input;
    input.eta.resize(static_cast<std::size_t>(P));
    for (int p = 0; p < P; ++p) {
        const BrownianPath& bp = tree.brownian(p);
        std::vector<double> accum(static_cast<std::size_t>(N) + 1, 0.0);
        for (int k = 0; k < N; ++k)
            accum[static_cast<std::size_t>(k) + 1] =
                accum[static_cast<std::size_t>(k)] +
                drivers.f()(grid.time(k), 0.0, {}) * grid.dt +
                drivers.g()(grid.time(k), 0.0, {}) * bp.increments[static_cast<std::size_t>(k)];

        // psi = E[terminal total | node], a martingale field on the lattice.
        TreeField psi = make_tree_field(tree);
        for (int s = 0; s < tree.num_states(N); ++s)
            psi.v[static_cast<std::size_t>(tree.node_index(N, s))] =
                barrier.value(N, s) + accum[static_cast<std::size_t>(N)];
        for (int level = N - 1; level >= 0; --level)
            for (int s = 0; s < tree.num_states(level); ++s) {
                double mean = 0.0;
                for (int o = 0; o < tree.law().num_outcomes; ++o)
                    mean += tree.law().prob[static_cast<std::size_t>(o)] *
                            psi.v[static_cast<std::size_t>(tree.node_index(level + 1, tree.child_state(level, s, o)))];
                psi.v[static_cast<std::size_t>(tree.node_index(level, s))] = mean;
            }

        TreeField& eta = input.eta[static_cast<std::size_t>(p)];
        eta = make_tree_field(tree);
        for (int level = 0; level < N; ++level)
            for (int s = 0; s < tree.num_states(level); ++s) {
                const int idx = tree.node_index(level, s);
                const double shift = accum[static_cast<std::size_t>(level)] -
                                     psi.v[static_cast<std::size_t>(idx)];
                eta.v[static_cast<std::size_t>(idx)] = barrier.value(level, s) + shift;
                eta.v_plus[static_cast<std::size_t>(idx)] = barrier.value_plus(level, s) + shift;
            }
        // The terminal vanishes identically; verify to rounding, then pin it
        // so downstream envelopes see an exact zero.
        for (int s = 0; s < tree.num_states(N); ++s) {
            const int idx = tree.node_index(N, s);
            const double raw = barrier.value(N, s) + accum[static_cast<std::size_t>(N)] -
                               psi.v[static_cast<std::size_t>(idx)];
            const double scale = 1.0 + std::abs(barrier.value(N, s)) +
                                 std::abs(accum[static_cast<std::size_t>(N)]);
            if (std::abs(raw) > 1e-9 * scale)
                throw ConsistencyError("shifted payoff does not vanish at the terminal");
            eta.v[static_cast<std::size_t>(idx)] = 0.0;
            eta.v_plus[static_cast<std::size_t>(idx)] = 0.0;
        }
    }
    return input;
}

} // namespace rbdsde
