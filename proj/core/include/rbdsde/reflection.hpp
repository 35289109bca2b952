#ifndef RBDSDE_REFLECTION_HPP
#define RBDSDE_REFLECTION_HPP

#include <optional>
#include <vector>

#include "rbdsde/barrier.hpp"
#include "rbdsde/drivers.hpp"
#include "rbdsde/regulated.hpp"
#include "rbdsde/scenario_tree.hpp"
#include "rbdsde/solution.hpp"

namespace rbdsde {

/// Reference solution by dynamic programming for the restricted class
/// f = f(t, y), g = g(t): terminal at the barrier's last value, then
///   a_k        the continuation value, solving the scalar fixed point
///              a = E[V_{k+1} | node] + f(t_k, a) dt + g(t_k) dB_k
///              (a contraction iff L_f * dt < 1; StepSizeError otherwise);
///   V(t_k+)  = max(barrier right limit, a_k)    stop inside the interval;
///   V(t_k)   = max(barrier value, V(t_k+))      stop at the point.
/// Z is the least-squares projection of the next-level values, and the
/// reflection increments are the drift-adjusted supermartingale decomposition
/// of V: right jump V(t_k) - V(t_k+) and interval increment V(t_k+) - a_k,
/// both nonnegative by construction. The restriction keeps the oracle free of
/// the penalization machinery it is meant to check. Drivers outside the
/// restricted class are rejected with InvalidInputError.
SolutionTriple snell_oracle(const ScenarioTree& tree, const DriverPair& drivers,
                            const Barrier& barrier);

/// Plain discrete Snell envelope of a payoff field (no drivers): per scenario
/// S_N = payoff_N, S(t_k+) = max(payoff_+, E[S_{k+1}|node]), S(t_k) =
/// max(payoff, S(t_k+)).
std::vector<TreeField> snell_envelope(const ScenarioTree& tree,
                                      const std::vector<TreeField>& payoff);

/// Decomposition of a discrete strong supermartingale V into a node-wise
/// martingale M minus a predictable nondecreasing K, split into the interval
/// part and the right jumps:
///   k_plus       = V(t_k) - V(t_k+)                  >= 0,
///   k_star_incr  = V(t_k+) - E[V(t_{k+1}) | node]    >= 0.
/// The input must satisfy both inequalities within tol (InvalidInputError
/// otherwise; note this is slightly stronger than requiring V(t_k) to
/// dominate both terms, which alone would let the interval increments go
/// negative). max_martingale_residual reports the worst node-wise defect of
/// M = V + K, which is zero up to rounding by construction.
struct MertensDecomposition {
    std::vector<std::vector<double>> k_star_incr;  // [scenario][inner node]
    std::vector<std::vector<double>> k_plus;
    double max_martingale_residual = 0.0;
};

MertensDecomposition mertens_decompose(const ScenarioTree& tree,
                                       const std::vector<TreeField>& v, double tol = 1e-10);

/// Deterministic special case on a single regulated path: expectations drop
/// out, M is a constant, K* and the total K are returned as paths.
struct PathMertens {
    RegulatedPath martingale;
    RegulatedPath k_star;       // right-continuous, cumulative
    RegulatedPath k_total;      // k_star plus accumulated right jumps (ladlag)
    std::vector<double> k_plus; // right jump of K at each grid point
};

PathMertens mertens_decompose(const RegulatedPath& v, double tol = 1e-10);

/// Discrete minimality condition of the reflection, scenario-averaged:
///   sum_k (Y carried into the interval - left envelope of xi) * dK*
/// + sum_k (Y(t_k) - xi(t_k)) * right jump of K at t_k,
/// each term weighted by its node probability and taken in absolute value,
/// so the result is >= 0 and vanishes exactly when each pairing is slack.
/// The left-envelope pairing uses the barrier value carried on the interval
/// (its right limit at the previous grid point), the jump pairing the
/// barrier value at the point itself. Domination failures do not poison the
/// residual; the worst gap is reported separately.
struct SkorokhodReport {
    double residual = 0.0;
    double max_barrier_gap = 0.0;
};

SkorokhodReport skorokhod_residual(const ScenarioTree& tree, const SolutionTriple& sol,
                                   const Barrier& barrier);

/// One row of a penalization sweep. cauchy_diff is sup-node distance to the
/// NEXT schedule entry's solution (NaN in the last row). oracle_err is filled
/// only when a reference solution was supplied. violation is the worst
/// barrier gap max(xi - Y, 0). jumps_active counts the designated correction
/// times at this n. monotone_defect is the worst violation of
/// Y^n <= Y^{n_next} (0 when the comparison holds), and positivity_ok
/// reports the node-wise structural condition backing that comparison
/// (trivially true when f does not read z).
struct ConvergenceRow {
    int n = 0;
    double cauchy_diff = 0.0;
    double violation = 0.0;
    double skorokhod = 0.0;
    double norm_y = 0.0;
    double norm_z = 0.0;
    double norm_k = 0.0;
    double oracle_err = 0.0;
    bool has_oracle = false;
    int jumps_active = 0;
    double monotone_defect = 0.0;
    bool positivity_ok = true;
    double data_norm = 0.0;
    double solution_norm = 0.0;
};

struct ConvergenceReport {
    std::vector<ConvergenceRow> rows;
    SolutionTriple limit;   // solution at the last schedule entry
};

struct SweepOptions {
    const SolutionTriple* oracle = nullptr;
    double beta = 1.0;
    int jobs = 1;
};

/// Run solve_penalized for every n of a strictly increasing schedule and
/// collect the convergence diagnostics. The violation column is checked to
/// be nonincreasing only by callers (it is a property of the data, not a
/// precondition here).
ConvergenceReport penalization_sweep(const ScenarioTree& tree, const DriverPair& drivers,
                                     const Barrier& barrier, const std::vector<int>& schedule,
                                     const SweepOptions& options = {});

/// Outer fixed-point loop for a fully coupled backward coefficient: freeze
/// (y, z) at the previous iterate, solve with g evaluated on the frozen
/// values as an exogenous drift, and repeat until the weighted L2 distance
/// (the exponential-in-time norm of dY plus dZ) between consecutive
/// iterates drops below tol. The penalty level n is held fixed across
/// iterations. diffs[i] is the distance after refinement i+1; ratios are the
/// successive quotients (the empirical contraction factor). Throws
/// DivergenceError with the trace when max_iters refinements do not reach
/// tol. A g that never reads (y, z) converges in one refinement: the second
/// solve reproduces the first exactly.
struct PicardResult {
    SolutionTriple solution;
    std::vector<double> diffs;
    std::vector<double> ratios;
    int iterations = 0;     // refinements performed
    bool converged = false;
};

PicardResult picard_outer_loop(const ScenarioTree& tree, const DriverPair& drivers,
                               const Barrier& barrier, int n, int max_iters, double tol,
                               double beta = 1.0, int jobs = 1);

/// The shifted payoff whose plain Snell envelope reproduces the reference
/// value process: eta(t_k) = xi(t_k) + (accumulated f dt + g dB up to t_k)
/// - E[terminal total | node]. Built for the same restricted class as the
/// oracle but with f independent of y too (otherwise the accumulation is
/// path dependent and no longer a lattice field). eta vanishes at the
/// terminal by construction; that is validated here.
struct SnellInput {
    std::vector<TreeField> eta;
};

SnellInput build_snell_input(const ScenarioTree& tree, const DriverPair& drivers,
                             const Barrier& barrier);

} // namespace rbdsde

#endif
