#ifndef RBDSDE_SOLVER_HPP
#define RBDSDE_SOLVER_HPP

#include <span>
#include <vector>

#include "rbdsde/barrier.hpp"
#include "rbdsde/drivers.hpp"
#include "rbdsde/scenario_tree.hpp"
#include "rbdsde/solution.hpp"

namespace rbdsde {

struct Projection {
    double mean = 0.0;          // probability-weighted mean of the inputs
    std::vector<double> z;      // loadings on the martingale increments
    double residual = 0.0;      // weighted L2 residual of the fit
};

/// Project next-step values (one per outcome, in law order) onto the span of
/// the one-step martingale increments: weighted least squares against the
/// exact one-step Gram matrix. With d atoms there are d+1 outcomes and the
/// span of {1, dH_1..dH_d} covers all of them, so the residual is zero up to
/// rounding; it is still computed and returned for diagnostics. Throws
/// NumericalError if the Gram matrix is numerically singular.
Projection project_Z(const ScenarioTree& tree, std::span<const double> next_values);

/// Closed-form solution of y = a + n*dt*(y - xi)^-:
/// y = a when a >= xi, else (a + n*dt*xi) / (1 + n*dt). Increasing in a and
/// in n*dt, and -> max(a, xi) as n*dt -> infinity.
double implicit_penalty_step(double a, double xi, double n_dt);

struct SolveOptions {
    int jobs = 1;
    double stiffness_warn_threshold = 1e4;  // warn when n*dt exceeds this
    /// When set, g is not evaluated at the current (y, z) but read from these
    /// per-scenario, per-inner-node values (the outer loop's frozen drift).
    const std::vector<std::vector<double>>* frozen_g = nullptr;
};

/// Backward penalized solve at penalty level n on a built tree.
///
/// Per scenario, from the terminal (the barrier's last value) down:
///   (y_hat, z) = project_Z over the children;
///   a = y_hat + f(t_k, y_hat, z) dt + g(t_k, y_hat, z) dB_k
///       (the Brownian increment is usable at t_k: the scenario's whole
///       Brownian path is conditioning information);
///   Y_{k+} solves the implicit penalty step against the barrier's right
///   limit, accruing the continuous reflection increment n*dt*(Y_{k+}-xi_+)^-;
///   at the designated correction times for this n (grid points whose right
///   jump is below -1/n) the value is reflected: Y_k = max(xi_k, Y_{k+}) with
///   right reflection jump (Y_{k+}-xi_k)^-; elsewhere Y_k = Y_{k+}.
///
/// n = 0 disables the penalty and all corrections: a plain (unreflected)
/// backward equation, used by comparison instances. n*dt past the stiffness
/// threshold only sets a warning flag; the closed-form step is uncondition-
/// ally stable.
SolutionTriple solve_penalized(const ScenarioTree& tree, const DriverPair& drivers,
                               const Barrier& barrier, int n, const SolveOptions& options = {});

struct KExtraction {
    double max_mismatch = 0.0;         // recomputed vs recorded increments
    double min_increment = 0.0;        // most negative recorded increment
    std::vector<double> expected_k;    // mean over scenarios of E[K_{t_k}]
};

/// Recompute the reflection increments as the residual of the discrete
/// equation, node by node and outcome by outcome, and compare against the
/// recorded ones. Mismatch beyond 1e-8 throws ConsistencyError; the recorded
/// increments are also checked to be nondecreasing within 1e-10.
KExtraction extract_K(const ScenarioTree& tree, const SolutionTriple& sol,
                      const DriverPair& drivers, const Barrier& barrier);

} // namespace rbdsde

#endif
