#ifndef RBDSDE_SOLUTION_HPP
#define RBDSDE_SOLUTION_HPP

#include <span>
#include <vector>

#include "rbdsde/scenario_tree.hpp"

namespace rbdsde {

/// A regulated process on the jump lattice of one scenario: value and right
/// limit per (level, state) node, flat-indexed by ScenarioTree::node_index.
struct TreeField {
    std::vector<double> v;
    std::vector<double> v_plus;
};

TreeField make_tree_field(const ScenarioTree& tree, double fill = 0.0);

/// Discrete solution triple of one reflected equation on a tree.
///
/// Per scenario p:
///   y[p]                value process, with right limits, on every node;
///   z[p]                control row of length m per inner node, the exact
///                       least-squares loading of the next-level values on
///                       the martingale increments (predictable: assigned on
///                       (t_k, t_{k+1}] from time-t_k data);
///   y_cont[p]           continuation mean per inner node (the conditional
///                       expectation the step's coefficients were evaluated at);
///   k_star_incr[p]      increment of the continuous reflection part over
///                       (t_k, t_{k+1}] per inner node, >= 0;
///   k_plus[p]           right jump of the reflection at t_k per inner node,
///                       >= 0, nonzero only at designated correction times.
///
/// K starts at zero and its cumulative value along a lattice path is the sum
/// of the two increment kinds along that path.
struct SolutionTriple {
    std::vector<TreeField> y;
    std::vector<std::vector<double>> z;
    std::vector<std::vector<double>> y_cont;
    std::vector<std::vector<double>> k_star_incr;
    std::vector<std::vector<double>> k_plus;

    int penalty_level = 0;              // the n this was solved at; 0 = unreflected
    bool stiffness_warning = false;     // n*dt exceeded the stiffness threshold
    double max_projection_residual = 0.0;

    int scenarios() const { return static_cast<int>(y.size()); }

    double y_value(int p, const ScenarioTree& t, int level, int state) const {
        return y[p].v[t.node_index(level, state)];
    }
    double y_plus(int p, const ScenarioTree& t, int level, int state) const {
        return y[p].v_plus[t.node_index(level, state)];
    }
    std::span<const double> z_row(int p, const ScenarioTree& t, int level, int state) const {
        int m = t.law().basis_dim;
        return {z[p].data() + static_cast<std::size_t>(t.inner_index(level, state)) * m,
                static_cast<std::size_t>(m)};
    }

    /// Expected cumulative reflection E[K_{t_k}] per scenario (K is 0 at t_0;
    /// index k runs 0..N). Exact on the lattice via the node probabilities.
    std::vector<double> expected_k_path(int p, const ScenarioTree& tree) const;

    /// Expected terminal reflection E[K_T] of one scenario.
    double expected_k_terminal(int p, const ScenarioTree& tree) const;

    /// Largest gap max(xi - Y, 0) over all nodes and scenarios, checking both
    /// the values and the right limits against the barrier's.
    double max_barrier_gap(const ScenarioTree& tree, const class Barrier& barrier) const;
};

/// Supremum over scenarios and nodes of |a - b| across values and right
/// limits; the metric used by sweep Cauchy columns and uniqueness checks.
double sup_node_distance(const SolutionTriple& a, const SolutionTriple& b);

} // namespace rbdsde

#endif
