#ifndef RBDSDE_LEVY_HPP
#define RBDSDE_LEVY_HPP

#include <optional>
#include <vector>

namespace rbdsde {

/// One atom of a finite jump measure: jumps of size x arrive at rate lambda.
struct LevyAtom {
    double x;
    double lambda;
};

/// Finite-activity pure-jump Levy measure given by its atoms. Construction
/// validates: at least one atom, x != 0, lambda > 0, sizes pairwise distinct.
class LevyMeasure {
public:
    explicit LevyMeasure(std::vector<LevyAtom> atoms);

    const std::vector<LevyAtom>& atoms() const { return atoms_; }
    int num_atoms() const { return static_cast<int>(atoms_.size()); }

    /// Total arrival intensity, sum of the atom rates.
    double total_intensity() const { return total_intensity_; }

private:
    std::vector<LevyAtom> atoms_;
    double total_intensity_;
};

/// i-th moment of the measure, sum_j lambda_j x_j^i, evaluated in extended
/// precision. Requires i >= 0; moment(0) is the total intensity.
double moment(const LevyMeasure& measure, int i);

/// A one-step outcome of the jump part: either no jump or a jump of a known
/// size. Kept as an optional so "no jump" cannot be confused with size 0
/// (which is not a legal atom anyway).
using JumpOutcome = std::optional<double>;

/// Orthonormalized basis of the power-jump martingales of a measure.
///
/// The k-th power-jump process accumulates the k-th powers of the jumps; its
/// compensated version has predictable bracket growth rate m_{i+j} between
/// components i and j, which is the inner product <x^{i-1}, x^{j-1}> under
/// the measure x^2 nu(dx). Gram-Schmidt on the monomials under that inner
/// product yields a lower-triangular change of basis alpha with positive
/// diagonal such that the transformed martingales have bracket delta_ij * t.
///
/// With a finite measure the polynomial space has dimension equal to the
/// number of (numerically distinguishable) atoms; orthonormalization stops
/// when the next residual norm, relative to the raw monomial's norm, falls
/// below rank_tol.
class TeugelsBasis {
public:
    TeugelsBasis(int dimension, std::vector<double> alpha_lower, std::vector<double> moments);

    int dimension() const { return dimension_; }

    /// Entry alpha[i][j] of the lower-triangular change of basis, 0-based,
    /// j <= i. The diagonal is strictly positive.
    double alpha(int i, int j) const;

    /// Moment m_i = integral of x^i against the measure, available for
    /// i = 0 .. 2*dimension + 1.
    double moment(int i) const;

    /// Orthonormal polynomial q_k(x) = sum_j alpha[k][j] x^j, 0-based k.
    double eval_q(int k, double x) const;

    /// Jump of the k-th orthonormalized martingale when the driving process
    /// jumps by x: q_k(x) * x. The compensator part is continuous, so this is
    /// the whole jump.
    double jump_of_component(int k, double x) const { return eval_q(k, x) * x; }

private:
    int dimension_;
    std::vector<double> alpha_;   // row-major lower triangle stored dense, dimension x dimension
    std::vector<double> moments_; // moments_[i] = m_i, i = 0 .. 2*dimension+1
};

/// Build the orthonormalized basis for a measure. rank_tol is the relative
/// residual threshold of the rank detection.
TeugelsBasis teugels_basis(const LevyMeasure& measure, double rank_tol = 1e-10);

/// Exact one-step increments of the orthonormalized martingales over a step
/// of length dt, given the step's outcome. Component j of the raw compensated
/// increment is x^j - m_j*dt on a jump of size x and -m_j*dt on no jump; the
/// result is the alpha image of that vector. Weighted by the one-step outcome
/// law these increments have mean exactly zero.
std::vector<double> teugels_increment(const TeugelsBasis& basis, const JumpOutcome& outcome, double dt);

} // namespace rbdsde

#endif
