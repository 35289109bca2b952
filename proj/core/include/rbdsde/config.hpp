#ifndef RBDSDE_CONFIG_HPP
#define RBDSDE_CONFIG_HPP

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "rbdsde/barrier.hpp"
#include "rbdsde/drivers.hpp"
#include "rbdsde/levy.hpp"

namespace rbdsde {

/// One experiment, deserialized from a single JSON file and fully validated.
/// Validation failures throw ConfigError naming the offending field by its
/// dotted path ("drivers.g.alpha: ..."). Invariants enforced here:
/// 0 < alpha < 1/2, lambda*T/N < 1, penalty schedule strictly increasing
/// with entries >= 1, right-jump times on the grid and before T.
struct ExperimentConfig {
    std::vector<LevyAtom> atoms;

    double T = 1.0;
    int N = 1;
    int scenarios = 1;
    std::uint64_t seed = 0;

    DriverSpec f;
    DriverSpec g;

    BarrierSpec barrier;

    std::vector<int> penalty_schedule;

    double beta = 1.0;

    std::string output_dir = ".";
    bool write_csv = true;
    bool write_json = true;
};

ExperimentConfig load_config(const std::string& path);
ExperimentConfig parse_config(const std::string& json_text);

/// Canonical JSON rendering of a validated config (sorted keys, no
/// timestamps), used to echo the effective configuration into reports.
std::string dump_config(const ExperimentConfig& config);

} // namespace rbdsde

#endif
