#ifndef RBDSDE_BARRIER_HPP
#define RBDSDE_BARRIER_HPP

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "rbdsde/regulated.hpp"
#include "rbdsde/scenario_tree.hpp"

namespace rbdsde {

enum class BarrierFamily {
    Constant,   // xi_t = c0
    Linear,     // xi_t = c0 + c1 * t
    PolyLevy,   // xi_t = phi(L_t), phi polynomial; optionally floored
};

struct BarrierTimedJump {
    double t;           // must lie on the grid, strictly before T
    double delta_plus;  // right jump xi_{t+} - xi_t added at that grid point
};

/// Declarative barrier description. The barrier doubles as the terminal
/// condition: the solution always terminates at the barrier's final value.
/// An explicit terminal is expressed as terminal_override, i.e. still as
/// "the barrier's last value", never as an independent parameter.
struct BarrierSpec {
    BarrierFamily family = BarrierFamily::Constant;
    double c0 = 0.0;
    double c1 = 0.0;
    std::vector<double> poly;            // PolyLevy: phi coefficients, ascending powers
    std::optional<double> floor;         // PolyLevy: value = max(floor, phi(L))
    std::vector<BarrierTimedJump> right_jumps;
    std::optional<double> terminal_override;
};

/// A barrier bound to a tree. Values are functions of (level, state): the
/// deterministic families ignore the state, the PolyLevy family reads the
/// running jump total, which is exactly what makes it adapted. Right jumps
/// are supported at deterministic grid times only; that restriction is what
/// lets the penalization's correction times be computed once per n instead
/// of per path.
class Barrier {
public:
    Barrier(BarrierSpec spec, const ScenarioTree& tree);

    const BarrierSpec& spec() const { return spec_; }

    double value(int level, int state) const;
    double value_plus(int level, int state) const;
    bool state_dependent() const { return spec_.family == BarrierFamily::PolyLevy; }

    /// Grid indices whose right jump is below -1/n; n >= 1. Deterministic by
    /// construction (jumps live at fixed grid times). Nested in n.
    JumpArray right_jump_times(int n) const;

    /// The barrier as a regulated path. Only meaningful for state-independent
    /// families; throws InvalidInputError for PolyLevy.
    RegulatedPath deterministic_path() const;

    /// The barrier evaluated along a state trajectory (one state per level).
    RegulatedPath path_along(std::span<const int> states) const;

private:
    double family_value(int level, int state) const;

    BarrierSpec spec_;
    const ScenarioTree* tree_;
    std::vector<int> jump_index_;     // grid index per right jump
};

/// Validating factory: jump times must sit on the grid (relative tolerance
/// 1e-9 of dt) and strictly before T; PolyLevy requires at least one
/// coefficient. Throws InvalidInputError naming the offending entry.
Barrier make_barrier(const BarrierSpec& spec, const ScenarioTree& tree);

} // namespace rbdsde

#endif
