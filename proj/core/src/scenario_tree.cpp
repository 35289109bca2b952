#include "rbdsde/scenario_tree.hpp"

#include <cmath>
#include <cstddef>
#include <map>
#include <string>
#include <utility>

#include "detail_linalg.hpp"
#include "rbdsde/errors.hpp"
#include "rbdsde/rng.hpp"

namespace rbdsde {

namespace {

// Stream ids: scenario p uses id p; the lattice path sampler uses a fixed
// offset well above any realistic scenario count so adding scenarios never
// touches it.
constexpr std::uint64_t SAMPLED_PATH_STREAM = 1u << 20;

void enumerate_states(int num_atoms, int level, std::vector<int>& flat,
                      std::map<std::vector<int>, int>& index) {
    // All jump-count vectors with total <= level, lexicographic order.
    std::vector<int> c(static_cast<std::size_t>(num_atoms), 0);
    while (true) {
        int total = 0;
        for (int v : c)
            total += v;
        if (total <= level) {
            index.emplace(c, static_cast<int>(index.size()));
            flat.insert(flat.end(), c.begin(), c.end());
        }
        // Odometer increment with per-digit cap at `level`.
        int pos = num_atoms - 1;
        while (pos >= 0) {
            if (c[static_cast<std::size_t>(pos)] < level) {
                ++c[static_cast<std::size_t>(pos)];
                for (int q = pos + 1; q < num_atoms; ++q)
                    c[static_cast<std::size_t>(q)] = 0;
                break;
            }
            --pos;
        }
        if (pos < 0)
            break;
    }
}

} // namespace

std::span<const int> ScenarioTree::state_counts(int level, int state) const {
    const int na = measure_.num_atoms();
    return {counts_[static_cast<std::size_t>(level)].data() + static_cast<std::size_t>(state) * na,
            static_cast<std::size_t>(na)};
}

ScenarioTree ScenarioTree::permuted_scenarios(std::span<const int> perm) const {
    if (perm.size() != paths_.size())
        throw InvalidInputError("scenario permutation has wrong size");
    ScenarioTree t(*this);
    std::vector<bool> seen(perm.size(), false);
    for (std::size_t j = 0; j < perm.size(); ++j) {
        const int src = perm[j];
        if (src < 0 || src >= scenarios())
            throw InvalidInputError("scenario permutation entry out of range");
        if (seen[static_cast<std::size_t>(src)])
            throw InvalidInputError("scenario permutation repeats entry " + std::to_string(src));
        seen[static_cast<std::size_t>(src)] = true;
        t.paths_[j] = paths_[static_cast<std::size_t>(src)];
    }
    return t;
}

ScenarioTree build_tree(const LevyMeasure& measure, const TeugelsBasis& basis, double T, int N,
                        int P, std::uint64_t seed, const TreeOptions& options) {
    if (!(T > 0.0))
        throw InvalidInputError("horizon must be positive");
    if (N < 1)
        throw InvalidInputError("need at least one time step");
    if (P < 1)
        throw InvalidInputError("need at least one scenario");

    ScenarioTree tree;
    tree.grid_.T = T;
    tree.grid_.N = N;
    tree.grid_.dt = T / static_cast<double>(N);
    tree.grid_.times.resize(static_cast<std::size_t>(N) + 1);
    for (int k = 0; k <= N; ++k)
        tree.grid_.times[static_cast<std::size_t>(k)] = tree.grid_.dt * static_cast<double>(k);
    tree.measure_ = measure;
    tree.basis_ = basis;
    tree.seed_ = seed;

    const double dt = tree.grid_.dt;
    const double lambda = measure.total_intensity();
    if (!(lambda * dt < 1.0))
        throw StepSizeError("one-step jump probability lambda*dt = " + std::to_string(lambda * dt) +
                            " must be < 1; refine the grid");

    // One-step outcome law, shared by every node.
    const int na = measure.num_atoms();
    OutcomeLaw& law = tree.law_;
    law.num_outcomes = na + 1;
    law.basis_dim = basis.dimension();
    law.prob.resize(static_cast<std::size_t>(law.num_outcomes));
    law.outcome.resize(static_cast<std::size_t>(law.num_outcomes));
    law.dH.resize(static_cast<std::size_t>(law.num_outcomes));
    law.prob[0] = 1.0 - lambda * dt;
    law.outcome[0] = std::nullopt;
    law.dH[0] = teugels_increment(basis, std::nullopt, dt);
    for (int j = 0; j < na; ++j) {
        law.prob[static_cast<std::size_t>(j) + 1] = measure.atoms()[static_cast<std::size_t>(j)].lambda * dt;
        law.outcome[static_cast<std::size_t>(j) + 1] = measure.atoms()[static_cast<std::size_t>(j)].x;
        law.dH[static_cast<std::size_t>(j) + 1] =
            teugels_increment(basis, measure.atoms()[static_cast<std::size_t>(j)].x, dt);
    }
    const int m = law.basis_dim;
    law.gram.assign(static_cast<std::size_t>(m) * m, 0.0);
    for (int o = 0; o < law.num_outcomes; ++o)
        for (int i = 0; i < m; ++i)
            for (int j = 0; j < m; ++j)
                law.gram[static_cast<std::size_t>(i) * m + j] +=
                    law.prob[static_cast<std::size_t>(o)] * law.dH[static_cast<std::size_t>(o)][static_cast<std::size_t>(i)] *
                    law.dH[static_cast<std::size_t>(o)][static_cast<std::size_t>(j)];
    if (!detail::cholesky(law.gram, m, law.gram_chol))
        throw NumericalError("one-step Gram matrix of the martingale increments is numerically singular");

    // Recombining lattice of jump-count states, level by level.
    tree.counts_.resize(static_cast<std::size_t>(N) + 1);
    tree.levy_.resize(static_cast<std::size_t>(N) + 1);
    tree.state_prob_.resize(static_cast<std::size_t>(N) + 1);
    tree.child_.resize(static_cast<std::size_t>(N));
    tree.node_offset_.resize(static_cast<std::size_t>(N) + 1);

    std::map<std::vector<int>, int> prev_index;
    std::int64_t total = 0;
    for (int level = 0; level <= N; ++level) {
        std::map<std::vector<int>, int> index;
        enumerate_states(na, level, tree.counts_[static_cast<std::size_t>(level)], index);
        const int ns = static_cast<int>(index.size());
        total += ns;
        if (total > options.max_total_states)
            throw InvalidInputError("jump lattice would exceed " + std::to_string(options.max_total_states) +
                                    " states; reduce N or the number of atoms");
        tree.node_offset_[static_cast<std::size_t>(level)] = static_cast<int>(total - ns);

        auto& levy = tree.levy_[static_cast<std::size_t>(level)];
        levy.resize(static_cast<std::size_t>(ns));
        for (int s = 0; s < ns; ++s) {
            double L = 0.0;
            for (int j = 0; j < na; ++j)
                L += tree.counts_[static_cast<std::size_t>(level)][static_cast<std::size_t>(s) * na + j] *
                     measure.atoms()[static_cast<std::size_t>(j)].x;
            levy[static_cast<std::size_t>(s)] = L;
        }

        if (level > 0) {
            // Children of the previous level into this one.
            auto& child = tree.child_[static_cast<std::size_t>(level - 1)];
            const int prev_ns = static_cast<int>(prev_index.size());
            child.resize(static_cast<std::size_t>(prev_ns) * law.num_outcomes);
            std::vector<int> c(static_cast<std::size_t>(na));
            for (const auto& [vec, s] : prev_index) {
                for (int o = 0; o < law.num_outcomes; ++o) {
                    c = vec;
                    if (o > 0)
                        ++c[static_cast<std::size_t>(o - 1)];
                    child[static_cast<std::size_t>(s) * law.num_outcomes + o] = index.at(c);
                }
            }
        }
        prev_index = std::move(index);
    }
    tree.total_nodes_ = static_cast<int>(total);

    // Occupation probabilities by forward propagation, in fixed order.
    tree.state_prob_[0] = {1.0};
    for (int level = 0; level < N; ++level) {
        auto& next = tree.state_prob_[static_cast<std::size_t>(level) + 1];
        next.assign(tree.levy_[static_cast<std::size_t>(level) + 1].size(), 0.0);
        const auto& cur = tree.state_prob_[static_cast<std::size_t>(level)];
        for (int s = 0; s < static_cast<int>(cur.size()); ++s)
            for (int o = 0; o < law.num_outcomes; ++o)
                next[static_cast<std::size_t>(tree.child_state(level, s, o))] +=
                    cur[static_cast<std::size_t>(s)] * law.prob[static_cast<std::size_t>(o)];
    }

    // Brownian scenarios, one counter-based stream per scenario index.
    tree.paths_.resize(static_cast<std::size_t>(P));
    const double sqdt = std::sqrt(dt);
    for (int p = 0; p < P; ++p) {
        RandomStream stream(seed, static_cast<std::uint64_t>(p));
        auto& path = tree.paths_[static_cast<std::size_t>(p)];
        path.values.resize(static_cast<std::size_t>(N) + 1);
        path.increments.resize(static_cast<std::size_t>(N));
        path.values[0] = 0.0;
        for (int k = 0; k < N; ++k) {
            path.increments[static_cast<std::size_t>(k)] = sqdt * stream.next_normal();
            path.values[static_cast<std::size_t>(k) + 1] =
                path.values[static_cast<std::size_t>(k)] + path.increments[static_cast<std::size_t>(k)];
        }
    }

    // Fixed set of sampled lattice paths for pathwise functionals.
    RandomStream pstream(seed, SAMPLED_PATH_STREAM);
    tree.sampled_.count = options.sampled_path_count;
    tree.sampled_.states.resize(static_cast<std::size_t>(options.sampled_path_count));
    for (auto& sp : tree.sampled_.states) {
        sp.resize(static_cast<std::size_t>(N) + 1);
        sp[0] = 0;
        for (int k = 0; k < N; ++k) {
            double u = pstream.next_uniform();
            int o = law.num_outcomes - 1;
            for (int cand = 0; cand < law.num_outcomes; ++cand) {
                if (u < law.prob[static_cast<std::size_t>(cand)]) {
                    o = cand;
                    break;
                }
                u -= law.prob[static_cast<std::size_t>(cand)];
            }
            sp[static_cast<std::size_t>(k) + 1] = tree.child_state(k, sp[static_cast<std::size_t>(k)], o);
        }
    }

    return tree;
}

} // namespace rbdsde
