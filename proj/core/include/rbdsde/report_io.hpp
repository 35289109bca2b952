#ifndef RBDSDE_REPORT_IO_HPP
#define RBDSDE_REPORT_IO_HPP

#include <string>
#include <vector>

#include "rbdsde/reflection.hpp"

namespace rbdsde {

/// Shortest exact decimal rendering of a double ('.' decimal separator,
/// locale independent); NaN renders as an empty field in CSV and null in
/// JSON, which is how optional columns are expressed.
std::string format_double(double x);

/// CSV with a header row, ',' separators, '.' decimals and no timestamps;
/// byte-identical for identical inputs.
std::string convergence_csv(const ConvergenceReport& report);
std::string convergence_json(const ConvergenceReport& report);

/// Per-time summary of a solved triple: scenario means of the value process,
/// its right limits, the cumulative reflection parts and the control norm.
std::string solution_times_csv(const ScenarioTree& tree, const SolutionTriple& sol);

void write_text_file(const std::string& path, const std::string& content);

} // namespace rbdsde

#endif
