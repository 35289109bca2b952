#ifndef RBDSDE_SIMULATE_HPP
#define RBDSDE_SIMULATE_HPP

#include <cstdint>
#include <span>
#include <vector>

#include "rbdsde/levy.hpp"
#include "rbdsde/rng.hpp"

namespace rbdsde {

struct LevyPathEvent {
    double time;
    double size;
};

/// Sample one continuous-time compound-Poisson path on [0, T]: exponential
/// inter-arrival gaps at the total intensity, sizes categorical with weights
/// lambda_j / lambda. Events are returned sorted by time.
std::vector<LevyPathEvent> simulate_levy_path(const LevyMeasure& measure, double T, RandomStream& stream);

/// Convenience overload seeding its own stream.
std::vector<LevyPathEvent> simulate_levy_path(const LevyMeasure& measure, double T, std::uint64_t seed);

struct BracketEstimate {
    double estimate;
    double std_err;
    long paths;
};

/// Monte Carlo estimate of the realized quadratic covariation between
/// orthonormalized components i and j at time T (0-based indices): per path
/// the sum over events of q_i(x) x * q_j(x) x, averaged over paths. The mean
/// is delta_ij * T, which is what makes this an end-to-end check of the
/// orthonormalization. std_err is the sample standard error of the mean.
BracketEstimate empirical_bracket(std::span<const std::vector<LevyPathEvent>> paths,
                                  const TeugelsBasis& basis, int i, int j, double T);

} // namespace rbdsde

#endif
