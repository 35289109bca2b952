#include "rbdsde/simulate.hpp"

#include <cmath>
#include <string>

#include "rbdsde/errors.hpp"

namespace rbdsde {

std::vector<LevyPathEvent> simulate_levy_path(const LevyMeasure& measure, double T, RandomStream& stream) {
    if (!(T >= 0.0))
        throw InvalidInputError("horizon must be nonnegative");
    const double lambda = measure.total_intensity();
    std::vector<LevyPathEvent> events;
    double t = 0.0;
    while (true) {
        t += -std::log(stream.next_uniform()) / lambda;
        if (t >= T)
            break;
        // Categorical size draw by inverse CDF over the atom intensities.
        double u = stream.next_uniform() * lambda;
        double size = measure.atoms().back().x;
        for (const auto& a : measure.atoms()) {
            if (u < a.lambda) {
                size = a.x;
                break;
            }
            u -= a.lambda;
        }
        events.push_back({t, size});
    }
    return events;
}

std::vector<LevyPathEvent> simulate_levy_path(const LevyMeasure& measure, double T, std::uint64_t seed) {
    RandomStream stream(seed, 0);
    return simulate_levy_path(measure, T, stream);
}

BracketEstimate empirical_bracket(std::span<const std::vector<LevyPathEvent>> paths,
                                  const TeugelsBasis& basis, int i, int j, double T) {
    if (paths.empty())
        throw InvalidInputError("empirical bracket needs at least one path");
    if (i < 0 || i >= basis.dimension() || j < 0 || j >= basis.dimension())
        throw InvalidInputError("bracket component out of range");
    double sum = 0.0, sum_sq = 0.0;
    for (const auto& path : paths) {
        double b = 0.0;
        for (const auto& ev : path) {
            if (ev.time > T)
                throw InvalidInputError("path event beyond the horizon at t=" + std::to_string(ev.time));
            b += basis.jump_of_component(i, ev.size) * basis.jump_of_component(j, ev.size);
        }
        sum += b;
        sum_sq += b * b;
    }
    const double n = static_cast<double>(paths.size());
    const double mean = sum / n;
    const double var = n > 1.0 ? (sum_sq - n * mean * mean) / (n - 1.0) : 0.0;
    return {mean, std::sqrt(std::max(var, 0.0) / n), static_cast<long>(paths.size())};
}

} // namespace rbdsde
