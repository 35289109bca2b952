#ifndef RBDSDE_TEST_ORACLES_HPP
#define RBDSDE_TEST_ORACLES_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <vector>

#include "rbdsde/levy.hpp"
#include "rbdsde/scenario_tree.hpp"

namespace test_oracles {

/// Independent orthonormalization oracle. Instead of the moment recursion the
/// library uses, this evaluates candidate polynomials directly at the atoms
/// and orthonormalizes under the inner product
///   <p, q> = sum_j lambda_j x_j^2 p(x_j) q(x_j),
/// by classical Gram-Schmidt on the monomials. Returns the lower-triangular
/// coefficient rows (ascending powers), one row per basis polynomial.
inline std::vector<std::vector<double>> gram_schmidt_at_atoms(const rbdsde::LevyMeasure& measure) {
    const auto& atoms = measure.atoms();
    const int n = static_cast<int>(atoms.size());

    auto inner = [&](const std::vector<double>& p, const std::vector<double>& q) {
        double acc = 0.0;
        for (const auto& atom : atoms) {
            double pv = 0.0, qv = 0.0;
            for (std::size_t i = p.size(); i-- > 0;) pv = pv * atom.x + p[i];
            for (std::size_t i = q.size(); i-- > 0;) qv = qv * atom.x + q[i];
            acc += atom.lambda * atom.x * atom.x * pv * qv;
        }
        return acc;
    };

    std::vector<std::vector<double>> rows;
    for (int k = 0; k < n; ++k) {
        std::vector<double> cand(static_cast<std::size_t>(k) + 1, 0.0);
        cand[static_cast<std::size_t>(k)] = 1.0; // monomial x^k
        for (const auto& prev : rows) {
            const double coeff = inner(cand, prev);
            for (std::size_t i = 0; i < prev.size(); ++i) cand[i] -= coeff * prev[i];
        }
        const double norm2 = inner(cand, cand);
        if (norm2 <= 0) throw std::runtime_error("degenerate measure handed to the test oracle");
        const double inv = 1.0 / std::sqrt(norm2);
        for (double& c : cand) c *= inv;
        rows.push_back(std::move(cand));
    }
    return rows;
}

/// Best value over all lattice-Markov stopping rules: one stop/continue bit
/// per inner (level, state) node, reward on stopping the collapsed
/// max(value, right limit) at the node, forced terminal reward at level N.
/// Exhaustive over all 2^(inner nodes) rules, so keep the trees tiny. The
/// optimal rule evaluates through exactly the same sums as a backward
/// recursion, which is what makes equality against it exact rather than
/// approximate.
inline double best_lattice_stopping(const rbdsde::ScenarioTree& tree,
                                    const std::vector<double>& collapsed_reward,
                                    const std::vector<double>& terminal_reward) {
    const int N = tree.grid().N;
    const int inner = tree.total_inner_nodes();
    if (inner >= 25) throw std::runtime_error("lattice too large for exhaustive stopping rules");
    const auto& law = tree.law();

    double best = -std::numeric_limits<double>::infinity();
    for (std::uint64_t mask = 0; mask < (std::uint64_t{1} << inner); ++mask) {
        std::vector<double> val(terminal_reward);
        for (int k = N - 1; k >= 0; --k) {
            std::vector<double> cur(static_cast<std::size_t>(tree.num_states(k)));
            for (int s = 0; s < tree.num_states(k); ++s) {
                const int idx = tree.inner_index(k, s);
                if (mask >> idx & 1) {
                    cur[static_cast<std::size_t>(s)] = collapsed_reward[static_cast<std::size_t>(idx)];
                } else {
                    double acc = 0.0;
                    for (int o = 0; o < law.num_outcomes; ++o)
                        acc += law.prob[static_cast<std::size_t>(o)] *
                               val[static_cast<std::size_t>(tree.child_state(k, s, o))];
                    cur[static_cast<std::size_t>(s)] = acc;
                }
            }
            val = std::move(cur);
        }
        best = std::max(best, val[0]);
    }
    return best;
}

/// Same search over history-dependent rules: one bit per node of the
/// non-recombining outcome tree. Rewards are still read off the lattice
/// state the history lands in, so a match against the Markov search and the
/// recursion confirms that recombination loses nothing.
inline double best_history_stopping(const rbdsde::ScenarioTree& tree,
                                    const std::vector<double>& collapsed_reward,
                                    const std::vector<double>& terminal_reward) {
    const int N = tree.grid().N;
    const auto& law = tree.law();
    const int branches = law.num_outcomes;

    // History node counts per level and their lattice states.
    std::vector<int> level_count(static_cast<std::size_t>(N) + 1);
    std::vector<int> offset(static_cast<std::size_t>(N) + 1);
    int total_inner = 0;
    std::vector<std::vector<int>> state_of(static_cast<std::size_t>(N) + 1);
    level_count[0] = 1;
    state_of[0] = {0};
    for (int k = 0; k < N; ++k) {
        offset[static_cast<std::size_t>(k)] = total_inner;
        total_inner += level_count[static_cast<std::size_t>(k)];
        level_count[static_cast<std::size_t>(k) + 1] = level_count[static_cast<std::size_t>(k)] * branches;
        auto& next = state_of[static_cast<std::size_t>(k) + 1];
        next.resize(static_cast<std::size_t>(level_count[static_cast<std::size_t>(k) + 1]));
        for (int h = 0; h < level_count[static_cast<std::size_t>(k)]; ++h)
            for (int o = 0; o < branches; ++o)
                next[static_cast<std::size_t>(h * branches + o)] =
                    tree.child_state(k, state_of[static_cast<std::size_t>(k)][static_cast<std::size_t>(h)], o);
    }
    if (total_inner >= 25) throw std::runtime_error("history tree too large for exhaustive stopping rules");

    double best = -std::numeric_limits<double>::infinity();
    for (std::uint64_t mask = 0; mask < (std::uint64_t{1} << total_inner); ++mask) {
        std::vector<double> val(static_cast<std::size_t>(level_count[static_cast<std::size_t>(N)]));
        for (int h = 0; h < level_count[static_cast<std::size_t>(N)]; ++h)
            val[static_cast<std::size_t>(h)] =
                terminal_reward[static_cast<std::size_t>(state_of[static_cast<std::size_t>(N)][static_cast<std::size_t>(h)])];
        for (int k = N - 1; k >= 0; --k) {
            std::vector<double> cur(static_cast<std::size_t>(level_count[static_cast<std::size_t>(k)]));
            for (int h = 0; h < level_count[static_cast<std::size_t>(k)]; ++h) {
                const int bit = offset[static_cast<std::size_t>(k)] + h;
                const int state = state_of[static_cast<std::size_t>(k)][static_cast<std::size_t>(h)];
                if (mask >> bit & 1) {
                    cur[static_cast<std::size_t>(h)] =
                        collapsed_reward[static_cast<std::size_t>(tree.inner_index(k, state))];
                } else {
                    double acc = 0.0;
                    for (int o = 0; o < branches; ++o)
                        acc += law.prob[static_cast<std::size_t>(o)] * val[static_cast<std::size_t>(h * branches + o)];
                    cur[static_cast<std::size_t>(h)] = acc;
                }
            }
            val = std::move(cur);
        }
        best = std::max(best, val[0]);
    }
    return best;
}

} // namespace test_oracles

#endif
