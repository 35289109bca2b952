#ifndef RBDSDE_VERIFY_HPP
#define RBDSDE_VERIFY_HPP

#include <span>
#include <string>
#include <vector>

#include "rbdsde/barrier.hpp"
#include "rbdsde/drivers.hpp"
#include "rbdsde/scenario_tree.hpp"
#include "rbdsde/solution.hpp"

namespace rbdsde {

/// Discrete stochastic exponential along one realized path of per-step data.
/// The recursion Gamma_{k+1} = Gamma_k * (1 + p_k dt + sum_j zeta_k[j] dH_k[j])
/// is the ground truth the comparison argument uses; the closed form
/// exp(sum p dt) * prod(1 + sum zeta dH) matches it to O(dt) and is returned
/// alongside for cross-checking. Requires 1 + sum zeta dH > 0 at every step
/// (AssumptionViolationError naming the first offending step otherwise), and
/// the drift-included factor is also required positive.
struct GammaResult {
    double recursion = 1.0;
    double closed_form = 1.0;
    int steps = 0;
};

GammaResult doleans_gamma(std::span<const double> p,
                          const std::vector<std::vector<double>>& zeta,
                          const std::vector<std::vector<double>>& dH,
                          double dt, int s_index, int t_index);

/// Data backing one application of the comparison argument: two solutions on
/// the same tree whose generators and terminals are ordered. From the solved
/// values the instance materializes, per inner node,
///   p     the y-difference quotient of the first generator,
///   zeta  the z-difference quotients along the coordinate-swap chain
///         (coordinate k replaced one at a time, first solution's tail),
///   u     the generator gap at the second solution's arguments, <= 0.
/// Difference quotients with vanishing denominators are set to 0. The
/// declared Lipschitz bound caps |p| and each |zeta_k|; the Euclidean norm of
/// zeta is only reported (it can exceed the bound for genuinely multivariate
/// generators without breaking the argument's hypotheses node-wise).
struct ComparisonInstance {
    const ScenarioTree* tree = nullptr;
    const SolutionTriple* sol1 = nullptr;
    const SolutionTriple* sol2 = nullptr;
    std::vector<std::vector<double>> p;     // [scenario][inner node]
    std::vector<std::vector<double>> zeta;  // [scenario][inner node * m + j]
    std::vector<std::vector<double>> u;     // [scenario][inner node]
    double max_abs_p = 0.0;
    double max_abs_zeta_component = 0.0;
    double max_zeta_norm = 0.0;
    double max_u = 0.0;
};

/// Build the instance; f1/f2 are the two generators (g must have been shared
/// and exogenous for the solves). Throws InvalidInputError when the solutions
/// disagree in shape with the tree.
ComparisonInstance make_comparison_instance(const ScenarioTree& tree, const Driver& f1,
                                            const Driver& f2, const SolutionTriple& sol1,
                                            const SolutionTriple& sol2);

struct ComparisonReport {
    bool ordered = true;            // Y1 <= Y2 + tol node-wise
    double worst_gap = 0.0;         // max(Y1 - Y2) over nodes (signed)
    int worst_scenario = -1;
    int worst_level = -1;
    int worst_state = -1;
    bool positivity_ok = true;      // 1 + sum zeta dH > 0 at every node/outcome
    double min_positivity = 1.0;    // smallest such factor found
    double max_u = 0.0;
};

/// Check the ordering conclusion and the structural positivity hypothesis it
/// rests on. tol defaults to 1e-12.
ComparisonReport comparison_check(const ComparisonInstance& instance, double tol = 1e-12);

/// Worst defect of the pathwise square-expansion identities on a solution:
/// per step |Y_next|^2 - |Y_+|^2 against 2 Y_+ dY + |dY|^2, per grid point
/// the right-jump analogue, and the fully telescoped form along the tree's
/// sampled paths. Pure algebra, so the result is rounding noise; anything
/// beyond ~1e-10 indicates corrupted values.
double energy_identity_residual(const ScenarioTree& tree, const SolutionTriple& sol);

/// Same identity on a standalone regulated path.
double energy_identity_residual(const RegulatedPath& path);

/// Predictable representation of a terminal lattice functional: backward
/// projection onto the martingale increments, level by level. Returns the
/// worst per-node fit residual (exactly representable here, so ~0), the
/// root expectation and the projection loadings per inner node.
struct RepresentationResult {
    double max_residual = 0.0;
    double expectation = 0.0;
    std::vector<double> z;   // [inner node * m + j]
};

RepresentationResult representation_residual(const ScenarioTree& tree,
                                             std::span<const double> terminal_values);

/// Weighted norms of a solution under the exponential weight exp(beta t):
///   sup_term    mean over scenarios and sampled lattice paths of the running
///               maximum of exp(beta t_k) |Y|^2 (values and right limits);
///   y_integral  E sum exp(beta t_k) |Y(t_k+)|^2 dt   (left Riemann sum);
///   z_integral  E sum exp(beta t_k) |Z_k|^2 dt;
///   k_terminal_sq  E |K_T|^2, exact on the lattice by propagating first and
///               second moments of the additive increments;
///   data_norm   barrier running maximum under exp(2 beta t) plus the
///               at-zero driver integrals.
/// The sampled-path estimate of the suprema is exact whenever the field does
/// not depend on the lattice state (every acceptance instance); otherwise it
/// is a fixed-seed Monte Carlo estimate, identical across calls on the same
/// tree so that sweep trends are not polluted by resampling.
struct BetaNorms {
    double beta = 0.0;
    double sup_term = 0.0;
    double y_integral = 0.0;
    double z_integral = 0.0;
    double k_terminal_sq = 0.0;
    double data_norm = 0.0;

    double solution_norm() const { return sup_term + y_integral + z_integral + k_terminal_sq; }
};

BetaNorms beta_norms(const ScenarioTree& tree, const SolutionTriple& sol, const Barrier& barrier,
                     const DriverPair& drivers, double beta);

} // namespace rbdsde

#endif
