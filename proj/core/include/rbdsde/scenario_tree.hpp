#ifndef RBDSDE_SCENARIO_TREE_HPP
#define RBDSDE_SCENARIO_TREE_HPP

#include <cstdint>
#include <span>
#include <vector>

#include "rbdsde/levy.hpp"

namespace rbdsde {

struct Grid {
    double T = 1.0;
    int N = 1;       // number of steps; N+1 grid points
    double dt = 1.0;
    std::vector<double> times; // size N+1, times[k] = k*dt

    double time(int k) const { return times[k]; }
};

/// One Brownian scenario: values at grid points (starting at 0) and the step
/// increments. In the doubly stochastic setting the whole Brownian path of a
/// scenario is known when the backward recursion runs, so increments[k] may
/// be consumed at time t_k.
struct BrownianPath {
    std::vector<double> values;      // size N+1
    std::vector<double> increments;  // size N
};

/// Exact one-step law of the jump part on a grid of step dt. Outcome 0 is
/// "no jump" with probability 1 - lambda*dt; outcome j >= 1 is a jump of the
/// j-th atom with probability lambda_j*dt. Steps with more than one jump are
/// dropped (an O(dt^2) event). The compensation inside the martingale
/// increments is kept exact, so the increments are exactly centered under
/// this law; the one-step second-moment (Gram) matrix is NOT renormalized to
/// delta_ij*dt and differs from it at O(dt^2).
struct OutcomeLaw {
    int num_outcomes = 0;                     // num_atoms + 1
    int basis_dim = 0;                        // m
    std::vector<double> prob;                 // per outcome
    std::vector<JumpOutcome> outcome;         // per outcome
    std::vector<std::vector<double>> dH;      // per outcome: m martingale increments
    std::vector<double> gram;                 // m x m row-major: sum_o p_o dH_i dH_j
    std::vector<double> gram_chol;            // lower Cholesky factor of gram
};

/// Pre-sampled paths through the jump lattice, used wherever a pathwise
/// functional (a running maximum, a telescoped identity) cannot be reduced to
/// per-node expectations. Sampled once per tree from a dedicated stream, so
/// every consumer sees the same fixed set.
struct SampledPaths {
    int count = 0;
    std::vector<std::vector<int>> states;   // per path: state index at each level 0..N
};

struct TreeOptions {
    int sampled_path_count = 256;
    std::int64_t max_total_states = 2'000'000;
};

/// Discretization of the two-noise setup: a uniform grid, P Brownian
/// scenarios, and one shared recombining lattice for the jump part. A lattice
/// state at level k is the vector of per-atom jump counts so far; every
/// adapted quantity the solvers handle (barriers through the running jump
/// total, value processes, control processes) is a function of (level, state)
/// once the Brownian scenario is fixed.
class ScenarioTree {
public:
    const Grid& grid() const { return grid_; }
    const LevyMeasure& measure() const { return measure_; }
    const TeugelsBasis& basis() const { return basis_; }
    const OutcomeLaw& law() const { return law_; }
    std::uint64_t seed() const { return seed_; }
    bool recombining() const { return recombining_; }

    int scenarios() const { return static_cast<int>(paths_.size()); }
    const BrownianPath& brownian(int p) const { return paths_[p]; }

    int num_states(int level) const { return static_cast<int>(state_prob_[level].size()); }
    /// State reached from (level, state) under an outcome; level < N.
    int child_state(int level, int state, int outcome) const {
        return child_[level][state * law_.num_outcomes + outcome];
    }
    /// Running jump total L_{t_k} at a state.
    double levy_value(int level, int state) const { return levy_[level][state]; }
    /// Probability of occupying a state at a level.
    double node_prob(int level, int state) const { return state_prob_[level][state]; }
    /// Per-atom jump counts of a state.
    std::span<const int> state_counts(int level, int state) const;

    /// Flat index over all (level, state) nodes, levels 0..N.
    int node_index(int level, int state) const { return node_offset_[level] + state; }
    /// Flat index over inner nodes only (levels 0..N-1), where the one-step
    /// objects (Z, K increments, continuation values) live.
    int inner_index(int level, int state) const { return node_offset_[level] + state; }
    int total_nodes() const { return total_nodes_; }
    int total_inner_nodes() const { return node_offset_[grid_.N]; }

    const SampledPaths& sampled_paths() const { return sampled_; }

    /// Same tree with the Brownian scenarios reordered; scenario j of the
    /// result is scenario perm[j] of this tree. Lattice, law and sampled
    /// paths are shared unchanged.
    ScenarioTree permuted_scenarios(std::span<const int> perm) const;

    friend ScenarioTree build_tree(const LevyMeasure&, const TeugelsBasis&, double, int, int,
                                   std::uint64_t, const TreeOptions&);

private:
    ScenarioTree() = default;

    Grid grid_;
    LevyMeasure measure_{std::vector<LevyAtom>{{1.0, 1.0}}};
    TeugelsBasis basis_{1, {1.0}, {1.0, 1.0, 1.0, 1.0}};
    OutcomeLaw law_;
    std::uint64_t seed_ = 0;
    bool recombining_ = true;

    std::vector<BrownianPath> paths_;
    std::vector<std::vector<int>> counts_;      // per level: flattened state count vectors
    std::vector<std::vector<int>> child_;       // per level < N
    std::vector<std::vector<double>> levy_;     // per level
    std::vector<std::vector<double>> state_prob_;
    std::vector<int> node_offset_;              // per level, prefix sum of state counts
    int total_nodes_ = 0;
    SampledPaths sampled_;
};

/// Build the shared discretization. Requires lambda*dt < 1 (throws
/// StepSizeError otherwise, naming the offending product); all randomness is
/// derived from the seed through per-scenario streams, so the same inputs
/// reproduce the same tree bit for bit and scenario p never changes when P
/// grows past it.
ScenarioTree build_tree(const LevyMeasure& measure, const TeugelsBasis& basis, double T, int N,
                        int P, std::uint64_t seed, const TreeOptions& options = {});

} // namespace rbdsde

#endif
