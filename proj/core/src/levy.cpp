#include "rbdsde/levy.hpp"

#include <cmath>
#include <cstddef>
#include <string>
#include <utility>

#include "rbdsde/errors.hpp"

namespace rbdsde {

LevyMeasure::LevyMeasure(std::vector<LevyAtom> atoms) : atoms_(std::move(atoms)) {
    if (atoms_.empty())
        throw InvalidInputError("levy measure needs at least one atom");
    total_intensity_ = 0.0;
    for (std::size_t j = 0; j < atoms_.size(); ++j) {
        const auto& a = atoms_[j];
        if (!(a.x != 0.0) || !std::isfinite(a.x))
            throw InvalidInputError("levy atom " + std::to_string(j) + ": size must be finite and nonzero");
        if (!(a.lambda > 0.0) || !std::isfinite(a.lambda))
            throw InvalidInputError("levy atom " + std::to_string(j) + ": intensity must be positive");
        for (std::size_t i = 0; i < j; ++i)
            if (atoms_[i].x == a.x)
                throw InvalidInputError("levy atoms " + std::to_string(i) + " and " + std::to_string(j) +
                                        " share the size " + std::to_string(a.x));
        total_intensity_ += a.lambda;
    }
}

double moment(const LevyMeasure& measure, int i) {
    if (i < 0)
        throw InvalidInputError("moment order must be nonnegative");
    long double acc = 0.0L;
    for (const auto& a : measure.atoms()) {
        long double p = 1.0L;
        for (int k = 0; k < i; ++k)
            p *= static_cast<long double>(a.x);
        acc += static_cast<long double>(a.lambda) * p;
    }
    return static_cast<double>(acc);
}

TeugelsBasis::TeugelsBasis(int dimension, std::vector<double> alpha_lower, std::vector<double> moments)
    : dimension_(dimension), alpha_(std::move(alpha_lower)), moments_(std::move(moments)) {
    if (dimension_ < 1)
        throw InvalidInputError("basis dimension must be >= 1");
    if (alpha_.size() != static_cast<std::size_t>(dimension_) * dimension_)
        throw InvalidInputError("basis alpha matrix has wrong size");
    if (moments_.size() < static_cast<std::size_t>(2 * dimension_ + 2))
        throw InvalidInputError("basis moment table too short");
}

double TeugelsBasis::alpha(int i, int j) const {
    return alpha_[static_cast<std::size_t>(i) * dimension_ + j];
}

double TeugelsBasis::moment(int i) const {
    return moments_.at(static_cast<std::size_t>(i));
}

double TeugelsBasis::eval_q(int k, double x) const {
    // Horner on row k of alpha: q_k(x) = sum_{j<=k} alpha[k][j] x^j.
    double acc = 0.0;
    for (int j = k; j >= 0; --j)
        acc = acc * x + alpha(k, j);
    return acc;
}

namespace {

// Inner product of two monomial-coefficient vectors under x^2 nu(dx),
// expressed through the moment table: <x^a, x^b> = m_{a+b+2}.
long double poly_inner(const std::vector<long double>& p, const std::vector<long double>& q,
                       const std::vector<long double>& m) {
    long double acc = 0.0L;
    for (std::size_t a = 0; a < p.size(); ++a) {
        if (p[a] == 0.0L)
            continue;
        for (std::size_t b = 0; b < q.size(); ++b)
            acc += p[a] * q[b] * m[a + b + 2];
    }
    return acc;
}

} // namespace

TeugelsBasis teugels_basis(const LevyMeasure& measure, double rank_tol) {
    if (!(rank_tol > 0.0))
        throw InvalidInputError("rank_tol must be positive");
    const int max_dim = measure.num_atoms();

    // Moment table up to the largest order any inner product can request:
    // degrees up to max_dim - 1 on each side plus the x^2 weight.
    std::vector<long double> m(static_cast<std::size_t>(2 * max_dim + 2), 0.0L);
    for (std::size_t i = 0; i < m.size(); ++i) {
        long double acc = 0.0L;
        for (const auto& a : measure.atoms()) {
            long double p = 1.0L;
            for (std::size_t k = 0; k < i; ++k)
                p *= static_cast<long double>(a.x);
            acc += static_cast<long double>(a.lambda) * p;
        }
        m[i] = acc;
    }

    // Modified Gram-Schmidt on the monomials with one re-orthogonalization
    // pass; extended precision keeps the Gram identity well below 1e-10 even
    // for moderately ill-conditioned atom sets.
    std::vector<std::vector<long double>> q; // accepted orthonormal rows (coefficients)
    for (int i = 0; i < max_dim; ++i) {
        std::vector<long double> v(static_cast<std::size_t>(i) + 1, 0.0L);
        v[static_cast<std::size_t>(i)] = 1.0L;
        const long double raw_norm = std::sqrt(poly_inner(v, v, m));
        for (int pass = 0; pass < 2; ++pass) {
            for (const auto& qk : q) {
                const long double c = poly_inner(v, qk, m);
                for (std::size_t j = 0; j < qk.size(); ++j)
                    v[j] -= c * qk[j];
            }
        }
        const long double norm2 = poly_inner(v, v, m);
        const long double norm = norm2 > 0.0L ? std::sqrt(norm2) : 0.0L;
        if (norm < static_cast<long double>(rank_tol) * raw_norm)
            break; // rank detected: the next monomial adds nothing
        for (auto& c : v)
            c /= norm;
        q.push_back(std::move(v));
    }
    if (q.empty())
        throw NumericalError("orthonormalization found no usable direction");

    const int dim = static_cast<int>(q.size());
    std::vector<double> alpha(static_cast<std::size_t>(dim) * dim, 0.0);
    for (int i = 0; i < dim; ++i)
        for (int j = 0; j <= i; ++j)
            alpha[static_cast<std::size_t>(i) * dim + j] = static_cast<double>(q[i][j]);

    std::vector<double> moments(static_cast<std::size_t>(2 * dim + 2));
    for (std::size_t i = 0; i < moments.size(); ++i)
        moments[i] = static_cast<double>(m.size() > i ? m[i] : 0.0L);

    return TeugelsBasis(dim, std::move(alpha), std::move(moments));
}

std::vector<double> teugels_increment(const TeugelsBasis& basis, const JumpOutcome& outcome, double dt) {
    const int dim = basis.dimension();
    // Raw compensated increments dY_j = x^j - m_j dt (or -m_j dt), then the
    // alpha image. Extended precision so the law-weighted mean cancels to the
    // last bit.
    std::vector<long double> dy(static_cast<std::size_t>(dim));
    long double xp = 1.0L;
    for (int j = 1; j <= dim; ++j) {
        if (outcome)
            xp *= static_cast<long double>(*outcome);
        dy[static_cast<std::size_t>(j - 1)] =
            (outcome ? xp : 0.0L) - static_cast<long double>(basis.moment(j)) * static_cast<long double>(dt);
    }
    std::vector<double> dh(static_cast<std::size_t>(dim));
    for (int i = 0; i < dim; ++i) {
        long double acc = 0.0L;
        for (int j = 0; j <= i; ++j)
            acc += static_cast<long double>(basis.alpha(i, j)) * dy[static_cast<std::size_t>(j)];
        dh[static_cast<std::size_t>(i)] = static_cast<double>(acc);
    }
    return dh;
}

} // namespace rbdsde
