#include "rbdsde/solution.hpp"

#include <algorithm>
#include <cmath>

#include "rbdsde/barrier.hpp"
#include "rbdsde/errors.hpp"

namespace rbdsde {

TreeField make_tree_field(const ScenarioTree& tree, double fill) {
    TreeField f;
    f.v.assign(static_cast<std::size_t>(tree.total_nodes()), fill);
    f.v_plus.assign(static_cast<std::size_t>(tree.total_nodes()), fill);
    return f;
}

std::vector<double> SolutionTriple::expected_k_path(int p, const ScenarioTree& tree) const {
    const int N = tree.grid().N;
    std::vector<double> out(static_cast<std::size_t>(N) + 1, 0.0);
    double acc = 0.0;
    for (int level = 0; level < N; ++level) {
        double mean = 0.0;
        for (int s = 0; s < tree.num_states(level); ++s) {
            const int idx = tree.inner_index(level, s);
            mean += tree.node_prob(level, s) *
                    (k_plus[static_cast<std::size_t>(p)][static_cast<std::size_t>(idx)] +
                     k_star_incr[static_cast<std::size_t>(p)][static_cast<std::size_t>(idx)]);
        }
        acc += mean;
        out[static_cast<std::size_t>(level) + 1] = acc;
    }
    return out;
}

double SolutionTriple::expected_k_terminal(int p, const ScenarioTree& tree) const {
    return expected_k_path(p, tree).back();
}

double SolutionTriple::max_barrier_gap(const ScenarioTree& tree, const Barrier& barrier) const {
    double worst = 0.0;
    const int N = tree.grid().N;
    for (int p = 0; p < scenarios(); ++p)
        for (int level = 0; level <= N; ++level)
            for (int s = 0; s < tree.num_states(level); ++s) {
                const int idx = tree.node_index(level, s);
                worst = std::max(worst, barrier.value(level, s) -
                                            y[static_cast<std::size_t>(p)].v[static_cast<std::size_t>(idx)]);
                worst = std::max(worst, barrier.value_plus(level, s) -
                                            y[static_cast<std::size_t>(p)].v_plus[static_cast<std::size_t>(idx)]);
            }
    return worst;
}

double sup_node_distance(const SolutionTriple& a, const SolutionTriple& b) {
    if (a.scenarios() != b.scenarios())
        throw InvalidInputError("solutions cover different scenario counts");
    double worst = 0.0;
    for (int p = 0; p < a.scenarios(); ++p) {
        const TreeField& fa = a.y[static_cast<std::size_t>(p)];
        const TreeField& fb = b.y[static_cast<std::size_t>(p)];
        if (fa.v.size() != fb.v.size())
            throw InvalidInputError("solutions live on different trees");
        for (std::size_t i = 0; i < fa.v.size(); ++i) {
            worst = std::max(worst, std::abs(fa.v[i] - fb.v[i]));
            worst = std::max(worst, std::abs(fa.v_plus[i] - fb.v_plus[i]));
        }
    }
    return worst;
}

} // namespace rbdsde
