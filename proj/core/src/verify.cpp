#include "rbdsde/verify.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "rbdsde/errors.hpp"
#include "rbdsde/solver.hpp"

namespace rbdsde {

GammaResult doleans_gamma(std::span<const double> p, const std::vector<std::vector<double>>& zeta,
                          const std::vector<std::vector<double>>& dH, double dt, int s_index,
                          int t_index) {
    if (s_index < 0 || t_index < s_index || t_index > static_cast<int>(p.size()))
        throw InvalidInputError("step range is out of bounds");
    if (zeta.size() != p.size() || dH.size() != p.size())
        throw InvalidInputError("per-step data arrays disagree in length");
    if (!(dt > 0.0))
        throw InvalidInputError("step size must be positive");

    GammaResult out;
    out.steps = t_index - s_index;
    double drift_sum = 0.0;
    double jump_prod = 1.0;
    for (int k = s_index; k < t_index; ++k) {
        const auto& zk = zeta[static_cast<std::size_t>(k)];
        const auto& hk = dH[static_cast<std::size_t>(k)];
        if (zk.size() != hk.size())
            throw InvalidInputError("loading and increment vectors disagree in length at step " +
                                    std::to_string(k));
        double zh = 0.0;
        for (std::size_t j = 0; j < zk.size(); ++j)
            zh += zk[j] * hk[j];
        const double jump_factor = 1.0 + zh;
        if (!(jump_factor > 0.0))
            throw AssumptionViolationError("stochastic exponential loses positivity at step " +
                                           std::to_string(k) + ": jump factor " +
                                           std::to_string(jump_factor));
        const double full_factor = 1.0 + p[static_cast<std::size_t>(k)] * dt + zh;
        if (!(full_factor > 0.0))
            throw AssumptionViolationError("stochastic exponential loses positivity at step " +
                                           std::to_string(k) + ": drift-included factor " +
                                           std::to_string(full_factor));
        out.recursion *= full_factor;
        drift_sum += p[static_cast<std::size_t>(k)] * dt;
        jump_prod *= jump_factor;
    }
    out.closed_form = std::exp(drift_sum) * jump_prod;
    return out;
}

ComparisonInstance make_comparison_instance(const ScenarioTree& tree, const Driver& f1,
                                            const Driver& f2, const SolutionTriple& sol1,
                                            const SolutionTriple& sol2) {
    const int P = tree.scenarios();
    if (sol1.scenarios() != P || sol2.scenarios() != P)
        throw InvalidInputError("solutions cover a different scenario count than the tree");
    const int N = tree.grid().N;
    const int m = tree.law().basis_dim;
    const int inner = tree.total_inner_nodes();
    for (const SolutionTriple* s : {&sol1, &sol2})
        if (static_cast<int>(s->z[0].size()) != inner * m ||
            static_cast<int>(s->y_cont[0].size()) != inner)
            throw InvalidInputError("solution does not cover the tree's inner nodes");

    ComparisonInstance inst;
    inst.tree = &tree;
    inst.sol1 = &sol1;
    inst.sol2 = &sol2;
    inst.p.assign(static_cast<std::size_t>(P), std::vector<double>(static_cast<std::size_t>(inner), 0.0));
    inst.zeta.assign(static_cast<std::size_t>(P),
                     std::vector<double>(static_cast<std::size_t>(inner) * m, 0.0));
    inst.u.assign(static_cast<std::size_t>(P), std::vector<double>(static_cast<std::size_t>(inner), 0.0));

    std::vector<double> chain(static_cast<std::size_t>(m));
    for (int p = 0; p < P; ++p)
        for (int level = 0; level < N; ++level) {
            const double t = tree.grid().time(level);
            for (int s = 0; s < tree.num_states(level); ++s) {
                const int idx = tree.inner_index(level, s);
                const double y1 = sol1.y_cont[static_cast<std::size_t>(p)][static_cast<std::size_t>(idx)];
                const double y2 = sol2.y_cont[static_cast<std::size_t>(p)][static_cast<std::size_t>(idx)];
                const auto z1 = sol1.z_row(p, tree, level, s);
                const auto z2 = sol2.z_row(p, tree, level, s);

                // Difference quotients of a Lipschitz function lie in
                // [-L, L]; clamping enforces that for quotients whose tiny
                // denominators would otherwise amplify rounding noise in the
                // numerator into arbitrarily large values.
                const double bound = f1.lipschitz();
                const auto clamp = [bound](double q) {
                    return std::clamp(q, -bound, bound);
                };

                const double dy = y1 - y2;
                if (dy != 0.0)
                    inst.p[static_cast<std::size_t>(p)][static_cast<std::size_t>(idx)] =
                        clamp((f1(t, y1, z1) - f1(t, y2, z1)) / dy);

                // Swap z coordinates one at a time, keeping the first
                // solution's tail, so the quotients telescope exactly.
                chain.assign(z1.begin(), z1.end());
                double prev_val = f1(t, y2, chain);
                double norm_sq = 0.0;
                for (int j = 0; j < m; ++j) {
                    chain[static_cast<std::size_t>(j)] = z2[static_cast<std::size_t>(j)];
                    const double cur_val = f1(t, y2, chain);
                    const double dz = z1[static_cast<std::size_t>(j)] - z2[static_cast<std::size_t>(j)];
                    double zj = 0.0;
                    if (dz != 0.0)
                        zj = clamp((prev_val - cur_val) / dz);
                    inst.zeta[static_cast<std::size_t>(p)][static_cast<std::size_t>(idx) * m + j] = zj;
                    norm_sq += zj * zj;
                    prev_val = cur_val;
                    inst.max_abs_zeta_component = std::max(inst.max_abs_zeta_component, std::abs(zj));
                }
                inst.max_zeta_norm = std::max(inst.max_zeta_norm, std::sqrt(norm_sq));
                inst.max_abs_p = std::max(
                    inst.max_abs_p,
                    std::abs(inst.p[static_cast<std::size_t>(p)][static_cast<std::size_t>(idx)]));

                const double gap = f1(t, y2, z2) - f2(t, y2, z2);
                inst.u[static_cast<std::size_t>(p)][static_cast<std::size_t>(idx)] = gap;
                inst.max_u = std::max(inst.max_u, gap);
            }
        }
    return inst;
}

ComparisonReport comparison_check(const ComparisonInstance& instance, double tol) {
    const ScenarioTree& tree = *instance.tree;
    const SolutionTriple& sol1 = *instance.sol1;
    const SolutionTriple& sol2 = *instance.sol2;
    const int N = tree.grid().N;
    const int m = tree.law().basis_dim;

    ComparisonReport report;
    report.max_u = instance.max_u;
    double worst = -std::numeric_limits<double>::infinity();
    for (int p = 0; p < sol1.scenarios(); ++p)
        for (int level = 0; level <= N; ++level)
            for (int s = 0; s < tree.num_states(level); ++s) {
                const int idx = tree.node_index(level, s);
                const double gap = std::max(
                    sol1.y[static_cast<std::size_t>(p)].v[static_cast<std::size_t>(idx)] -
                        sol2.y[static_cast<std::size_t>(p)].v[static_cast<std::size_t>(idx)],
                    sol1.y[static_cast<std::size_t>(p)].v_plus[static_cast<std::size_t>(idx)] -
                        sol2.y[static_cast<std::size_t>(p)].v_plus[static_cast<std::size_t>(idx)]);
                if (gap > worst) {
                    worst = gap;
                    report.worst_gap = gap;
                    report.worst_scenario = p;
                    report.worst_level = level;
                    report.worst_state = s;
                }
            }
    report.ordered = report.worst_gap <= tol;

    for (int p = 0; p < sol1.scenarios(); ++p)
        for (int level = 0; level < N; ++level)
            for (int s = 0; s < tree.num_states(level); ++s) {
                const int idx = tree.inner_index(level, s);
                for (int o = 0; o < tree.law().num_outcomes; ++o) {
                    double zh = 0.0;
                    for (int j = 0; j < m; ++j)
                        zh += instance.zeta[static_cast<std::size_t>(p)][static_cast<std::size_t>(idx) * m + j] *
                              tree.law().dH[static_cast<std::size_t>(o)][static_cast<std::size_t>(j)];
                    report.min_positivity = std::min(report.min_positivity, 1.0 + zh);
                }
            }
    report.positivity_ok = report.min_positivity > 0.0;
    return report;
}

double energy_identity_residual(const ScenarioTree& tree, const SolutionTriple& sol) {
    const int N = tree.grid().N;
    if (sol.scenarios() != tree.scenarios())
        throw InvalidInputError("solution covers a different scenario count than the tree");

    double worst = 0.0;
    for (int p = 0; p < sol.scenarios(); ++p) {
        const TreeField& y = sol.y[static_cast<std::size_t>(p)];
        for (int level = 0; level < N; ++level)
            for (int s = 0; s < tree.num_states(level); ++s) {
                const int idx = tree.node_index(level, s);
                const double yv = y.v[static_cast<std::size_t>(idx)];
                const double yplus = y.v_plus[static_cast<std::size_t>(idx)];
                const double dplus = yplus - yv;
                worst = std::max(worst, std::abs((yplus * yplus - yv * yv) -
                                                 (2.0 * yv * dplus + dplus * dplus)));
                for (int o = 0; o < tree.law().num_outcomes; ++o) {
                    const double ynext = y.v[static_cast<std::size_t>(
                        tree.node_index(level + 1, tree.child_state(level, s, o)))];
                    const double d = ynext - yplus;
                    worst = std::max(worst, std::abs((ynext * ynext - yplus * yplus) -
                                                     (2.0 * yplus * d + d * d)));
                }
            }

        // Telescoped along the fixed sampled paths: the per-step expansions
        // must chain back to the endpoint difference.
        for (const auto& states : tree.sampled_paths().states) {
            double acc = 0.0;
            for (int level = 0; level < N; ++level) {
                const int idx = tree.node_index(level, states[static_cast<std::size_t>(level)]);
                const int nidx = tree.node_index(level + 1, states[static_cast<std::size_t>(level) + 1]);
                const double yv = y.v[static_cast<std::size_t>(idx)];
                const double yplus = y.v_plus[static_cast<std::size_t>(idx)];
                const double ynext = y.v[static_cast<std::size_t>(nidx)];
                const double dplus = yplus - yv;
                const double d = ynext - yplus;
                acc += 2.0 * yv * dplus + dplus * dplus;
                acc += 2.0 * yplus * d + d * d;
            }
            const double y0 = y.v[static_cast<std::size_t>(tree.node_index(0, states[0]))];
            const double yT = y.v[static_cast<std::size_t>(
                tree.node_index(N, states[static_cast<std::size_t>(N)]))];
            worst = std::max(worst, std::abs(acc - (yT * yT - y0 * y0)));
        }
    }
    return worst;
}

double energy_identity_residual(const RegulatedPath& path) {
    const int n = path.size();
    double worst = 0.0;
    double acc = 0.0;
    for (int k = 0; k < n; ++k) {
        const double yv = path.v[static_cast<std::size_t>(k)];
        const double yplus = path.v_plus[static_cast<std::size_t>(k)];
        const double dplus = yplus - yv;
        worst = std::max(worst, std::abs((yplus * yplus - yv * yv) -
                                         (2.0 * yv * dplus + dplus * dplus)));
        acc += 2.0 * yv * dplus + dplus * dplus;
        if (k + 1 < n) {
            const double ynext = path.v[static_cast<std::size_t>(k) + 1];
            const double d = ynext - yplus;
            worst = std::max(worst, std::abs((ynext * ynext - yplus * yplus) -
                                             (2.0 * yplus * d + d * d)));
            acc += 2.0 * yplus * d + d * d;
        }
    }
    const double y0 = path.v[0];
    const double yT = path.v[static_cast<std::size_t>(n) - 1];
    worst = std::max(worst, std::abs(acc - (yT * yT - y0 * y0)));
    return worst;
}

RepresentationResult representation_residual(const ScenarioTree& tree,
                                             std::span<const double> terminal_values) {
    const int N = tree.grid().N;
    const int m = tree.law().basis_dim;
    if (static_cast<int>(terminal_values.size()) != tree.num_states(N))
        throw InvalidInputError("terminal values must cover the last level's states");

    RepresentationResult out;
    out.z.assign(static_cast<std::size_t>(tree.total_inner_nodes()) * m, 0.0);
    std::vector<double> cur(terminal_values.begin(), terminal_values.end());
    std::vector<double> next_vals(static_cast<std::size_t>(tree.law().num_outcomes));
    for (int level = N - 1; level >= 0; --level) {
        std::vector<double> prev(static_cast<std::size_t>(tree.num_states(level)));
        for (int s = 0; s < tree.num_states(level); ++s) {
            for (int o = 0; o < tree.law().num_outcomes; ++o)
                next_vals[static_cast<std::size_t>(o)] =
                    cur[static_cast<std::size_t>(tree.child_state(level, s, o))];
            const Projection proj = project_Z(tree, next_vals);
            out.max_residual = std::max(out.max_residual, proj.residual);
            prev[static_cast<std::size_t>(s)] = proj.mean;
            const int idx = tree.inner_index(level, s);
            for (int j = 0; j < m; ++j)
                out.z[static_cast<std::size_t>(idx) * m + j] = proj.z[static_cast<std::size_t>(j)];
        }
        cur = std::move(prev);
    }
    out.expectation = cur[0];
    return out;
}

BetaNorms beta_norms(const ScenarioTree& tree, const SolutionTriple& sol, const Barrier& barrier,
                     const DriverPair& drivers, double beta) {
    const Grid& grid = tree.grid();
    const int N = grid.N;
    const int m = tree.law().basis_dim;
    const int P = sol.scenarios();
    if (P != tree.scenarios())
        throw InvalidInputError("solution covers a different scenario count than the tree");

    BetaNorms out;
    out.beta = beta;

    std::vector<double> wexp(static_cast<std::size_t>(N) + 1);
    for (int k = 0; k <= N; ++k)
        wexp[static_cast<std::size_t>(k)] = std::exp(beta * grid.time(k));

    // Running maximum of the weighted square along the fixed sampled paths,
    // averaged over scenarios and paths.
    const auto& sampled = tree.sampled_paths().states;
    double sup_acc = 0.0;
    for (int p = 0; p < P; ++p) {
        const TreeField& y = sol.y[static_cast<std::size_t>(p)];
        for (const auto& states : sampled) {
            double run = 0.0;
            for (int k = 0; k <= N; ++k) {
                const int idx = tree.node_index(k, states[static_cast<std::size_t>(k)]);
                const double a = y.v[static_cast<std::size_t>(idx)];
                const double b = y.v_plus[static_cast<std::size_t>(idx)];
                run = std::max(run, wexp[static_cast<std::size_t>(k)] * std::max(a * a, b * b));
            }
            sup_acc += run;
        }
    }
    out.sup_term = sup_acc / (static_cast<double>(P) * static_cast<double>(sampled.size()));

    for (int p = 0; p < P; ++p) {
        const TreeField& y = sol.y[static_cast<std::size_t>(p)];
        for (int level = 0; level < N; ++level) {
            const double w = wexp[static_cast<std::size_t>(level)] * grid.dt;
            for (int s = 0; s < tree.num_states(level); ++s) {
                const double prob = tree.node_prob(level, s);
                const double yplus = y.v_plus[static_cast<std::size_t>(tree.node_index(level, s))];
                out.y_integral += w * prob * yplus * yplus / static_cast<double>(P);
                const int idx = tree.inner_index(level, s);
                double z2 = 0.0;
                for (int j = 0; j < m; ++j) {
                    const double zj = sol.z[static_cast<std::size_t>(p)][static_cast<std::size_t>(idx) * m + j];
                    z2 += zj * zj;
                }
                out.z_integral += w * prob * z2 / static_cast<double>(P);
            }
        }
    }

    // E|K_T|^2 exactly: propagate, per lattice state, the occupation mass and
    // the first two unnormalized moments of the accumulated increments.
    for (int p = 0; p < P; ++p) {
        std::vector<double> w0 = {1.0}, s1 = {0.0}, s2 = {0.0};
        for (int level = 0; level < N; ++level) {
            const int ns_next = tree.num_states(level + 1);
            std::vector<double> w0n(static_cast<std::size_t>(ns_next), 0.0),
                s1n(static_cast<std::size_t>(ns_next), 0.0), s2n(static_cast<std::size_t>(ns_next), 0.0);
            for (int s = 0; s < tree.num_states(level); ++s) {
                const int idx = tree.inner_index(level, s);
                const double inc =
                    sol.k_plus[static_cast<std::size_t>(p)][static_cast<std::size_t>(idx)] +
                    sol.k_star_incr[static_cast<std::size_t>(p)][static_cast<std::size_t>(idx)];
                for (int o = 0; o < tree.law().num_outcomes; ++o) {
                    const double q = tree.law().prob[static_cast<std::size_t>(o)];
                    const int c = tree.child_state(level, s, o);
                    w0n[static_cast<std::size_t>(c)] += q * w0[static_cast<std::size_t>(s)];
                    s1n[static_cast<std::size_t>(c)] +=
                        q * (s1[static_cast<std::size_t>(s)] + w0[static_cast<std::size_t>(s)] * inc);
                    s2n[static_cast<std::size_t>(c)] +=
                        q * (s2[static_cast<std::size_t>(s)] + 2.0 * inc * s1[static_cast<std::size_t>(s)] +
                             w0[static_cast<std::size_t>(s)] * inc * inc);
                }
            }
            w0 = std::move(w0n);
            s1 = std::move(s1n);
            s2 = std::move(s2n);
        }
        double ekt2 = 0.0;
        for (double v : s2)
            ekt2 += v;
        out.k_terminal_sq += ekt2 / static_cast<double>(P);
    }

    // Data side: barrier running maximum under the doubled weight plus the
    // driver integrals at the origin.
    double bar_acc = 0.0;
    for (const auto& states : sampled) {
        double run = 0.0;
        for (int k = 0; k <= N; ++k) {
            const double a = barrier.value(k, states[static_cast<std::size_t>(k)]);
            const double b = barrier.value_plus(k, states[static_cast<std::size_t>(k)]);
            const double w2 = wexp[static_cast<std::size_t>(k)] * wexp[static_cast<std::size_t>(k)];
            run = std::max(run, w2 * std::max(a * a, b * b));
        }
        bar_acc += run;
    }
    out.data_norm = bar_acc / static_cast<double>(sampled.size());
    for (int k = 0; k < N; ++k) {
        const double f0 = drivers.f()(grid.time(k), 0.0, {});
        const double g0 = drivers.g()(grid.time(k), 0.0, {});
        out.data_norm += wexp[static_cast<std::size_t>(k)] * grid.dt * (f0 * f0 + g0 * g0);
    }
    return out;
}

} // namespace rbdsde
