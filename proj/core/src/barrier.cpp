#include "rbdsde/barrier.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "rbdsde/errors.hpp"

namespace rbdsde {

Barrier::Barrier(BarrierSpec spec, const ScenarioTree& tree) : spec_(std::move(spec)), tree_(&tree) {
    if (spec_.family == BarrierFamily::PolyLevy && spec_.poly.empty())
        throw InvalidInputError("state-dependent barrier needs at least one polynomial coefficient");

    const Grid& g = tree.grid();
    jump_index_.reserve(spec_.right_jumps.size());
    for (std::size_t i = 0; i < spec_.right_jumps.size(); ++i) {
        const double t = spec_.right_jumps[i].t;
        const int k = static_cast<int>(std::llround(t / g.dt));
        if (k < 0 || k >= g.N || std::abs(t - g.time(std::clamp(k, 0, g.N))) > 1e-9 * g.dt)
            throw InvalidInputError("barrier right jump at t = " + std::to_string(t) +
                                    " is not at a grid point strictly before the horizon");
        if (std::find(jump_index_.begin(), jump_index_.end(), k) != jump_index_.end())
            throw InvalidInputError("barrier declares two right jumps at the same grid point");
        jump_index_.push_back(k);
    }
}

double Barrier::family_value(int level, int state) const {
    const double t = tree_->grid().time(level);
    switch (spec_.family) {
    case BarrierFamily::Constant:
        return spec_.c0;
    case BarrierFamily::Linear:
        return spec_.c0 + spec_.c1 * t;
    case BarrierFamily::PolyLevy: {
        const double L = tree_->levy_value(level, state);
        double v = 0.0;
        for (std::size_t i = spec_.poly.size(); i-- > 0;)
            v = v * L + spec_.poly[i];
        if (spec_.floor)
            v = std::max(*spec_.floor, v);
        return v;
    }
    }
    throw InvalidInputError("unknown barrier family");
}

double Barrier::value(int level, int state) const {
    if (level == tree_->grid().N && spec_.terminal_override)
        return *spec_.terminal_override;
    return family_value(level, state);
}

double Barrier::value_plus(int level, int state) const {
    double v = value(level, state);
    if (level < tree_->grid().N)
        for (std::size_t i = 0; i < jump_index_.size(); ++i)
            if (jump_index_[i] == level)
                v += spec_.right_jumps[i].delta_plus;
    return v;
}

JumpArray Barrier::right_jump_times(int n) const {
    if (n < 1)
        throw InvalidInputError("jump threshold level must be >= 1");
    JumpArray out;
    out.level = n;
    const double threshold = -1.0 / static_cast<double>(n);
    for (std::size_t i = 0; i < jump_index_.size(); ++i)
        if (spec_.right_jumps[i].delta_plus < threshold)
            out.indices.push_back(jump_index_[i]);
    std::sort(out.indices.begin(), out.indices.end());
    return out;
}

RegulatedPath Barrier::deterministic_path() const {
    if (state_dependent())
        throw InvalidInputError("barrier depends on the jump state; evaluate it along a trajectory instead");
    const Grid& g = tree_->grid();
    std::vector<double> v(static_cast<std::size_t>(g.N) + 1), vp(static_cast<std::size_t>(g.N) + 1);
    for (int k = 0; k <= g.N; ++k) {
        v[static_cast<std::size_t>(k)] = value(k, 0);
        vp[static_cast<std::size_t>(k)] = value_plus(k, 0);
    }
    return make_regulated(g.times, v, vp);
}

RegulatedPath Barrier::path_along(std::span<const int> states) const {
    const Grid& g = tree_->grid();
    if (static_cast<int>(states.size()) != g.N + 1)
        throw InvalidInputError("state trajectory must have one state per grid point");
    std::vector<double> v(static_cast<std::size_t>(g.N) + 1), vp(static_cast<std::size_t>(g.N) + 1);
    for (int k = 0; k <= g.N; ++k) {
        v[static_cast<std::size_t>(k)] = value(k, states[static_cast<std::size_t>(k)]);
        vp[static_cast<std::size_t>(k)] = value_plus(k, states[static_cast<std::size_t>(k)]);
    }
    return make_regulated(g.times, v, vp);
}

Barrier make_barrier(const BarrierSpec& spec, const ScenarioTree& tree) { return Barrier(spec, tree); }

} // namespace rbdsde
