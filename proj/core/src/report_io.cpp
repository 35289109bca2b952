#include "rbdsde/report_io.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>

#include <json.hpp>

#include "rbdsde/errors.hpp"

namespace rbdsde {

std::string format_double(double x) {
    if (std::isnan(x))
        return "";
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), x);
    return std::string(buf, res.ptr);
}

namespace {

nlohmann::json row_json(const ConvergenceRow& row) {
    nlohmann::json j;
    j["n"] = row.n;
    if (std::isnan(row.cauchy_diff))
        j["cauchy_diff"] = nullptr;
    else
        j["cauchy_diff"] = row.cauchy_diff;
    j["violation"] = row.violation;
    j["skorokhod"] = row.skorokhod;
    j["norm_Y"] = row.norm_y;
    j["norm_Z"] = row.norm_z;
    j["norm_K"] = row.norm_k;
    if (row.has_oracle)
        j["oracle_err"] = row.oracle_err;
    j["jumps_active"] = row.jumps_active;
    j["monotone_defect"] = row.monotone_defect;
    j["positivity_ok"] = row.positivity_ok;
    j["data_norm"] = row.data_norm;
    j["solution_norm"] = row.solution_norm;
    return j;
}

} // namespace

std::string convergence_csv(const ConvergenceReport& report) {
    bool with_oracle = false;
    for (const ConvergenceRow& row : report.rows)
        with_oracle = with_oracle || row.has_oracle;

    std::string out = "n,cauchy_diff,violation,skorokhod,norm_Y,norm_Z,norm_K";
    if (with_oracle)
        out += ",oracle_err";
    out += "\n";
    for (const ConvergenceRow& row : report.rows) {
        out += std::to_string(row.n);
        out += ",";
        out += format_double(row.cauchy_diff);
        out += ",";
        out += format_double(row.violation);
        out += ",";
        out += format_double(row.skorokhod);
        out += ",";
        out += format_double(row.norm_y);
        out += ",";
        out += format_double(row.norm_z);
        out += ",";
        out += format_double(row.norm_k);
        if (with_oracle) {
            out += ",";
            out += format_double(row.has_oracle ? row.oracle_err
                                                : std::numeric_limits<double>::quiet_NaN());
        }
        out += "\n";
    }
    return out;
}

std::string convergence_json(const ConvergenceReport& report) {
    nlohmann::json j;
    j["rows"] = nlohmann::json::array();
    for (const ConvergenceRow& row : report.rows)
        j["rows"].push_back(row_json(row));
    return j.dump(2) + "\n";
}

std::string solution_times_csv(const ScenarioTree& tree, const SolutionTriple& sol) {
    const int N = tree.grid().N;
    const int P = sol.scenarios();
    const int m = tree.law().basis_dim;

    std::string out = "t,y_mean,y_plus_mean,k_star_mean,k_jump_mean,z_norm\n";
    std::vector<double> k_star_cum(static_cast<std::size_t>(P), 0.0),
        k_jump_cum(static_cast<std::size_t>(P), 0.0);
    for (int level = 0; level <= N; ++level) {
        double y_mean = 0.0, y_plus_mean = 0.0, z_norm = 0.0, star_mean = 0.0, jump_mean = 0.0;
        for (int p = 0; p < P; ++p) {
            star_mean += k_star_cum[static_cast<std::size_t>(p)] / static_cast<double>(P);
            jump_mean += k_jump_cum[static_cast<std::size_t>(p)] / static_cast<double>(P);
            double z2 = 0.0;
            for (int s = 0; s < tree.num_states(level); ++s) {
                const double prob = tree.node_prob(level, s);
                const int idx = tree.node_index(level, s);
                y_mean += prob * sol.y[static_cast<std::size_t>(p)].v[static_cast<std::size_t>(idx)] /
                          static_cast<double>(P);
                y_plus_mean += prob *
                               sol.y[static_cast<std::size_t>(p)].v_plus[static_cast<std::size_t>(idx)] /
                               static_cast<double>(P);
                if (level < N) {
                    const int inner = tree.inner_index(level, s);
                    for (int j = 0; j < m; ++j) {
                        const double zj =
                            sol.z[static_cast<std::size_t>(p)][static_cast<std::size_t>(inner) * m + j];
                        z2 += prob * zj * zj;
                    }
                    k_star_cum[static_cast<std::size_t>(p)] +=
                        prob * sol.k_star_incr[static_cast<std::size_t>(p)][static_cast<std::size_t>(inner)];
                    k_jump_cum[static_cast<std::size_t>(p)] +=
                        prob * sol.k_plus[static_cast<std::size_t>(p)][static_cast<std::size_t>(inner)];
                }
            }
            z_norm += std::sqrt(z2) / static_cast<double>(P);
        }
        out += format_double(tree.grid().time(level));
        out += ",";
        out += format_double(y_mean);
        out += ",";
        out += format_double(y_plus_mean);
        out += ",";
        out += format_double(star_mean);
        out += ",";
        out += format_double(jump_mean);
        out += ",";
        out += format_double(level < N ? z_norm : std::numeric_limits<double>::quiet_NaN());
        out += "\n";
    }
    return out;
}

void write_text_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out)
        throw ConfigError("output: cannot open '" + path + "' for writing");
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    out.flush();
    if (!out)
        throw ConfigError("output: failed writing '" + path + "'");
}

} // namespace rbdsde
