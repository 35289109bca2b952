#ifndef RBDSDE_DRIVERS_HPP
#define RBDSDE_DRIVERS_HPP

#include <span>
#include <string>

namespace rbdsde {

enum class DriverFamily {
    Affine,       // a + b*y + c*z[0]
    Sin,          // a * sin(b*y)
    ZNormClipped, // c * min(|z|, clip)
};

/// Parameters of one driver plus its declared regularity constants. L is the
/// declared Lipschitz constant; for the backward-noise coefficient g the pair
/// (L, alpha) declares |g(y,z)-g(y',z')|^2 <= L|y-y'|^2 + alpha|z-z'|^2 and
/// alpha must lie strictly inside (0, 1/2).
struct DriverSpec {
    DriverFamily family = DriverFamily::Affine;
    double a = 0.0;
    double b = 0.0;
    double c = 0.0;
    double clip = 1e6;
    double L = 0.0;
    double alpha = 0.25; // used for g only
};

class Driver {
public:
    explicit Driver(DriverSpec spec) : spec_(std::move(spec)) {}

    double operator()(double t, double y, std::span<const double> z) const;

    const DriverSpec& spec() const { return spec_; }
    double lipschitz() const { return spec_.L; }
    bool depends_on_y() const;
    bool depends_on_z() const;

private:
    DriverSpec spec_;
};

/// The two coefficients of one equation. Construction enforces
/// 0 < alpha_g < 1/2 and then verifies both declared constants by sampling
/// random probe pairs: |f - f'| <= L_f (|dy| + |dz|) for the generator and
/// the squared form above for g. An under-declared constant is rejected with
/// InvalidInputError; the probes are internally seeded, so the check is
/// deterministic.
class DriverPair {
public:
    DriverPair(DriverSpec f_spec, DriverSpec g_spec, int probe_dim = 2);

    const Driver& f() const { return f_; }
    const Driver& g() const { return g_; }
    double lipschitz_f() const { return f_.lipschitz(); }
    double lipschitz_g() const { return g_.lipschitz(); }
    double alpha_g() const { return g_.spec().alpha; }

    /// True when g reads the solution (y or z); such a pair needs the outer
    /// fixed-point loop for a fully coupled solve.
    bool g_depends_on_solution() const { return g_.depends_on_y() || g_.depends_on_z(); }

private:
    Driver f_;
    Driver g_;
};

} // namespace rbdsde

#endif
