#include "rbdsde/drivers.hpp"

#include <cmath>
#include <string>
#include <vector>

#include "rbdsde/errors.hpp"
#include "rbdsde/rng.hpp"

namespace rbdsde {

namespace {

double znorm(std::span<const double> z) {
    double s = 0.0;
    for (double v : z)
        s += v * v;
    return std::sqrt(s);
}

} // namespace

double Driver::operator()(double t, double y, std::span<const double> z) const {
    (void)t;
    switch (spec_.family) {
    case DriverFamily::Affine:
        return spec_.a + spec_.b * y + (z.empty() ? 0.0 : spec_.c * z[0]);
    case DriverFamily::Sin:
        return spec_.a * std::sin(spec_.b * y);
    case DriverFamily::ZNormClipped:
        return spec_.c * std::min(znorm(z), spec_.clip);
    }
    throw InvalidInputError("unknown driver family");
}

bool Driver::depends_on_y() const {
    switch (spec_.family) {
    case DriverFamily::Affine:
        return spec_.b != 0.0;
    case DriverFamily::Sin:
        return spec_.a != 0.0 && spec_.b != 0.0;
    case DriverFamily::ZNormClipped:
        return false;
    }
    return false;
}

bool Driver::depends_on_z() const {
    switch (spec_.family) {
    case DriverFamily::Affine:
        return spec_.c != 0.0;
    case DriverFamily::Sin:
        return false;
    case DriverFamily::ZNormClipped:
        return spec_.c != 0.0;
    }
    return false;
}

DriverPair::DriverPair(DriverSpec f_spec, DriverSpec g_spec, int probe_dim)
    : f_(std::move(f_spec)), g_(std::move(g_spec)) {
    if (probe_dim < 1)
        throw InvalidInputError("probe dimension must be >= 1");
    if (f_.lipschitz() < 0.0)
        throw InvalidInputError("generator Lipschitz constant must be >= 0");
    const double alpha = g_.spec().alpha;
    if (!(alpha > 0.0) || !(alpha < 0.5))
        throw InvalidInputError("backward-noise z-coefficient alpha = " + std::to_string(alpha) +
                                " must lie strictly inside (0, 1/2)");
    if (g_.spec().L < 0.0)
        throw InvalidInputError("backward-noise y-coefficient must be >= 0");

    // Verify the declared constants on random probe pairs. The tolerance
    // absorbs roundoff only; a genuinely under-declared constant fails by a
    // margin far above it.
    RandomStream rng(0x5eedu, 0x11u);
    std::vector<double> z1(static_cast<std::size_t>(probe_dim)), z2(static_cast<std::size_t>(probe_dim));
    const double slack = 1e-9;
    for (int it = 0; it < 4096; ++it) {
        const double t = rng.next_uniform();
        const double scale = (it % 3 == 0) ? 100.0 : 1.0;
        const double y1 = scale * (2.0 * rng.next_uniform() - 1.0);
        const double y2 = scale * (2.0 * rng.next_uniform() - 1.0);
        for (int j = 0; j < probe_dim; ++j) {
            z1[static_cast<std::size_t>(j)] = scale * (2.0 * rng.next_uniform() - 1.0);
            z2[static_cast<std::size_t>(j)] = scale * (2.0 * rng.next_uniform() - 1.0);
        }
        double dz = 0.0;
        for (int j = 0; j < probe_dim; ++j) {
            const double d = z1[static_cast<std::size_t>(j)] - z2[static_cast<std::size_t>(j)];
            dz += d * d;
        }
        const double dy = std::abs(y1 - y2);

        const double df = std::abs(f_(t, y1, z1) - f_(t, y2, z2));
        const double f_bound = f_.lipschitz() * (dy + std::sqrt(dz));
        if (df > f_bound + slack * (1.0 + f_bound))
            throw InvalidInputError("declared generator Lipschitz constant " +
                                    std::to_string(f_.lipschitz()) + " is violated by a probe pair");

        const double dg = g_(t, y1, z1) - g_(t, y2, z2);
        const double g_bound = g_.spec().L * dy * dy + alpha * dz;
        if (dg * dg > g_bound + slack * (1.0 + g_bound))
            throw InvalidInputError("declared backward-noise constants (L = " +
                                    std::to_string(g_.spec().L) + ", alpha = " + std::to_string(alpha) +
                                    ") are violated by a probe pair");
    }
}

} // namespace rbdsde
