#include "rbdsde/config.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "rbdsde/errors.hpp"

namespace rbdsde {

namespace {

using nlohmann::json;

[[noreturn]] void fail(const std::string& path, const std::string& msg) {
    throw ConfigError(path + ": " + msg);
}

void check_keys(const json& obj, const std::string& path, std::initializer_list<const char*> allowed) {
    for (const auto& item : obj.items()) {
        bool known = false;
        for (const char* key : allowed)
            if (item.key() == key) {
                known = true;
                break;
            }
        if (!known)
            fail(path + "." + item.key(), "unknown field");
    }
}

const json& require_field(const json& obj, const std::string& path, const char* key) {
    const auto it = obj.find(key);
    if (it == obj.end())
        fail(path + "." + key, "missing required field");
    return *it;
}

const json* optional_field(const json& obj, const char* key) {
    const auto it = obj.find(key);
    return it == obj.end() ? nullptr : &*it;
}

double as_double(const json& v, const std::string& path) {
    if (!v.is_number())
        fail(path, "expected a number");
    const double x = v.get<double>();
    if (!std::isfinite(x))
        fail(path, "must be finite");
    return x;
}

int as_int(const json& v, const std::string& path) {
    if (!v.is_number_integer())
        fail(path, "expected an integer");
    return v.get<int>();
}

std::uint64_t as_seed(const json& v, const std::string& path) {
    if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<std::int64_t>() >= 0))
        fail(path, "expected a nonnegative integer");
    return v.get<std::uint64_t>();
}

bool as_bool(const json& v, const std::string& path) {
    if (!v.is_boolean())
        fail(path, "expected a boolean");
    return v.get<bool>();
}

std::string as_string(const json& v, const std::string& path) {
    if (!v.is_string())
        fail(path, "expected a string");
    return v.get<std::string>();
}

DriverSpec parse_driver(const json& obj, const std::string& path, bool is_g) {
    if (!obj.is_object())
        fail(path, "expected an object");
    if (is_g)
        check_keys(obj, path, {"family", "a", "b", "c", "clip", "L", "alpha"});
    else
        check_keys(obj, path, {"family", "a", "b", "c", "clip", "L"});

    DriverSpec spec;
    const std::string family = as_string(require_field(obj, path, "family"), path + ".family");
    if (family == "affine")
        spec.family = DriverFamily::Affine;
    else if (family == "sin")
        spec.family = DriverFamily::Sin;
    else if (family == "znorm")
        spec.family = DriverFamily::ZNormClipped;
    else
        fail(path + ".family", "unknown driver family '" + family + "' (expected affine, sin or znorm)");

    if (const json* v = optional_field(obj, "a"))
        spec.a = as_double(*v, path + ".a");
    if (const json* v = optional_field(obj, "b"))
        spec.b = as_double(*v, path + ".b");
    if (const json* v = optional_field(obj, "c"))
        spec.c = as_double(*v, path + ".c");
    if (const json* v = optional_field(obj, "clip")) {
        spec.clip = as_double(*v, path + ".clip");
        if (!(spec.clip > 0.0))
            fail(path + ".clip", "must be positive");
    }
    if (const json* v = optional_field(obj, "L")) {
        spec.L = as_double(*v, path + ".L");
        if (spec.L < 0.0)
            fail(path + ".L", "must be >= 0");
    }
    if (is_g) {
        if (const json* v = optional_field(obj, "alpha"))
            spec.alpha = as_double(*v, path + ".alpha");
        if (!(spec.alpha > 0.0) || !(spec.alpha < 0.5))
            fail(path + ".alpha", "must lie strictly inside (0, 1/2)");
    }
    return spec;
}

BarrierSpec parse_barrier(const json& obj, const std::string& path, double T, int N) {
    if (!obj.is_object())
        fail(path, "expected an object");
    check_keys(obj, path,
               {"family", "c0", "c1", "poly", "floor", "right_jumps", "terminal_override"});

    BarrierSpec spec;
    const std::string family = as_string(require_field(obj, path, "family"), path + ".family");
    if (family == "constant")
        spec.family = BarrierFamily::Constant;
    else if (family == "linear")
        spec.family = BarrierFamily::Linear;
    else if (family == "poly_levy")
        spec.family = BarrierFamily::PolyLevy;
    else
        fail(path + ".family",
             "unknown barrier family '" + family + "' (expected constant, linear or poly_levy)");

    if (const json* v = optional_field(obj, "c0"))
        spec.c0 = as_double(*v, path + ".c0");
    if (const json* v = optional_field(obj, "c1"))
        spec.c1 = as_double(*v, path + ".c1");
    if (const json* v = optional_field(obj, "poly")) {
        if (!v->is_array())
            fail(path + ".poly", "expected an array of coefficients");
        for (std::size_t i = 0; i < v->size(); ++i)
            spec.poly.push_back(as_double((*v)[i], path + ".poly[" + std::to_string(i) + "]"));
    }
    if (spec.family == BarrierFamily::PolyLevy && spec.poly.empty())
        fail(path + ".poly", "poly_levy barrier needs at least one coefficient");
    if (const json* v = optional_field(obj, "floor"))
        spec.floor = as_double(*v, path + ".floor");
    if (const json* v = optional_field(obj, "terminal_override"))
        spec.terminal_override = as_double(*v, path + ".terminal_override");

    if (const json* v = optional_field(obj, "right_jumps")) {
        if (!v->is_array())
            fail(path + ".right_jumps", "expected an array");
        const double dt = T / static_cast<double>(N);
        for (std::size_t i = 0; i < v->size(); ++i) {
            const std::string jpath = path + ".right_jumps[" + std::to_string(i) + "]";
            const json& jv = (*v)[i];
            if (!jv.is_object())
                fail(jpath, "expected an object");
            check_keys(jv, jpath, {"t", "delta_plus"});
            BarrierTimedJump jump;
            jump.t = as_double(require_field(jv, jpath, "t"), jpath + ".t");
            jump.delta_plus =
                as_double(require_field(jv, jpath, "delta_plus"), jpath + ".delta_plus");
            const int k = static_cast<int>(std::llround(jump.t / dt));
            if (k < 0 || k >= N || std::abs(jump.t - static_cast<double>(k) * dt) > 1e-9 * dt)
                fail(jpath + ".t", "must sit on the time grid, strictly before the horizon");
            spec.right_jumps.push_back(jump);
        }
    }
    return spec;
}

std::vector<int> parse_penalty(const json& obj, const std::string& path) {
    if (!obj.is_object())
        fail(path, "expected an object");
    check_keys(obj, path, {"schedule", "geometric"});
    const json* sched = optional_field(obj, "schedule");
    const json* geom = optional_field(obj, "geometric");
    if (sched && geom)
        fail(path, "give either schedule or geometric, not both");
    if (!sched && !geom)
        fail(path, "missing schedule (or geometric)");

    std::vector<int> out;
    if (sched) {
        if (!sched->is_array() || sched->empty())
            fail(path + ".schedule", "expected a nonempty array");
        for (std::size_t i = 0; i < sched->size(); ++i)
            out.push_back(as_int((*sched)[i], path + ".schedule[" + std::to_string(i) + "]"));
    } else {
        const std::string gpath = path + ".geometric";
        if (!geom->is_object())
            fail(gpath, "expected an object");
        check_keys(*geom, gpath, {"start", "factor", "count"});
        const int start = as_int(require_field(*geom, gpath, "start"), gpath + ".start");
        const int factor = as_int(require_field(*geom, gpath, "factor"), gpath + ".factor");
        const int count = as_int(require_field(*geom, gpath, "count"), gpath + ".count");
        if (start < 1)
            fail(gpath + ".start", "must be >= 1");
        if (factor < 2)
            fail(gpath + ".factor", "must be >= 2");
        if (count < 1)
            fail(gpath + ".count", "must be >= 1");
        long long n = start;
        for (int i = 0; i < count; ++i) {
            if (n > 1'000'000'000)
                fail(gpath, "schedule overflows past 1e9");
            out.push_back(static_cast<int>(n));
            n *= factor;
        }
    }
    for (std::size_t i = 0; i < out.size(); ++i) {
        if (out[i] < 1)
            fail(path + ".schedule[" + std::to_string(i) + "]", "must be >= 1");
        if (i > 0 && out[i] <= out[i - 1])
            fail(path + ".schedule[" + std::to_string(i) + "]",
                 "schedule must be strictly increasing");
    }
    return out;
}

} // namespace

ExperimentConfig parse_config(const std::string& json_text) {
    json root;
    try {
        root = json::parse(json_text);
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }
    if (!root.is_object())
        fail("config", "top level must be an object");
    check_keys(root, "config", {"levy", "grid", "drivers", "barrier", "penalty", "beta", "output"});

    ExperimentConfig cfg;

    const json& levy = require_field(root, "config", "levy");
    if (!levy.is_object())
        fail("levy", "expected an object");
    check_keys(levy, "levy", {"atoms"});
    const json& atoms = require_field(levy, "levy", "atoms");
    if (!atoms.is_array() || atoms.empty())
        fail("levy.atoms", "expected a nonempty array");
    for (std::size_t i = 0; i < atoms.size(); ++i) {
        const std::string apath = "levy.atoms[" + std::to_string(i) + "]";
        const json& av = atoms[i];
        if (!av.is_object())
            fail(apath, "expected an object");
        check_keys(av, apath, {"x", "lambda"});
        LevyAtom atom;
        atom.x = as_double(require_field(av, apath, "x"), apath + ".x");
        atom.lambda = as_double(require_field(av, apath, "lambda"), apath + ".lambda");
        if (atom.x == 0.0)
            fail(apath + ".x", "jump size must be nonzero");
        if (!(atom.lambda > 0.0))
            fail(apath + ".lambda", "intensity must be positive");
        cfg.atoms.push_back(atom);
    }
    for (std::size_t i = 0; i < cfg.atoms.size(); ++i)
        for (std::size_t j = i + 1; j < cfg.atoms.size(); ++j)
            if (cfg.atoms[i].x == cfg.atoms[j].x)
                fail("levy.atoms[" + std::to_string(j) + "].x", "jump sizes must be distinct");

    const json& grid = require_field(root, "config", "grid");
    if (!grid.is_object())
        fail("grid", "expected an object");
    check_keys(grid, "grid", {"T", "N", "scenarios", "seed"});
    cfg.T = as_double(require_field(grid, "grid", "T"), "grid.T");
    if (!(cfg.T > 0.0))
        fail("grid.T", "horizon must be positive");
    cfg.N = as_int(require_field(grid, "grid", "N"), "grid.N");
    if (cfg.N < 1)
        fail("grid.N", "must be >= 1");
    cfg.scenarios = as_int(require_field(grid, "grid", "scenarios"), "grid.scenarios");
    if (cfg.scenarios < 1)
        fail("grid.scenarios", "must be >= 1");
    if (const json* v = optional_field(grid, "seed"))
        cfg.seed = as_seed(*v, "grid.seed");

    double lambda = 0.0;
    for (const LevyAtom& atom : cfg.atoms)
        lambda += atom.lambda;
    if (!(lambda * cfg.T / static_cast<double>(cfg.N) < 1.0))
        fail("grid.N", "one-step jump probability lambda*T/N must be < 1; refine the grid");

    const json& drivers = require_field(root, "config", "drivers");
    if (!drivers.is_object())
        fail("drivers", "expected an object");
    check_keys(drivers, "drivers", {"f", "g"});
    cfg.f = parse_driver(require_field(drivers, "drivers", "f"), "drivers.f", false);
    cfg.g = parse_driver(require_field(drivers, "drivers", "g"), "drivers.g", true);

    cfg.barrier = parse_barrier(require_field(root, "config", "barrier"), "barrier", cfg.T, cfg.N);
    cfg.penalty_schedule = parse_penalty(require_field(root, "config", "penalty"), "penalty");

    if (const json* v = optional_field(root, "beta")) {
        cfg.beta = as_double(*v, "beta");
        if (cfg.beta < 0.0)
            fail("beta", "must be >= 0");
    }

    if (const json* v = optional_field(root, "output")) {
        if (!v->is_object())
            fail("output", "expected an object");
        check_keys(*v, "output", {"dir", "formats"});
        if (const json* d = optional_field(*v, "dir"))
            cfg.output_dir = as_string(*d, "output.dir");
        if (const json* fm = optional_field(*v, "formats")) {
            if (!fm->is_array())
                fail("output.formats", "expected an array");
            cfg.write_csv = false;
            cfg.write_json = false;
            for (std::size_t i = 0; i < fm->size(); ++i) {
                const std::string s =
                    as_string((*fm)[i], "output.formats[" + std::to_string(i) + "]");
                if (s == "csv")
                    cfg.write_csv = true;
                else if (s == "json")
                    cfg.write_json = true;
                else
                    fail("output.formats[" + std::to_string(i) + "]",
                         "unknown format '" + s + "' (expected csv or json)");
            }
        }
    }
    return cfg;
}

ExperimentConfig load_config(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw ConfigError("config: cannot read file '" + path + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_config(buf.str());
}

std::string dump_config(const ExperimentConfig& config) {
    json root;
    for (const LevyAtom& atom : config.atoms)
        root["levy"]["atoms"].push_back({{"x", atom.x}, {"lambda", atom.lambda}});
    root["grid"] = {{"T", config.T},
                    {"N", config.N},
                    {"scenarios", config.scenarios},
                    {"seed", config.seed}};

    auto driver_json = [](const DriverSpec& spec, bool is_g) {
        json d;
        switch (spec.family) {
        case DriverFamily::Affine:
            d["family"] = "affine";
            break;
        case DriverFamily::Sin:
            d["family"] = "sin";
            break;
        case DriverFamily::ZNormClipped:
            d["family"] = "znorm";
            break;
        }
        d["a"] = spec.a;
        d["b"] = spec.b;
        d["c"] = spec.c;
        d["clip"] = spec.clip;
        d["L"] = spec.L;
        if (is_g)
            d["alpha"] = spec.alpha;
        return d;
    };
    root["drivers"]["f"] = driver_json(config.f, false);
    root["drivers"]["g"] = driver_json(config.g, true);

    json barrier;
    switch (config.barrier.family) {
    case BarrierFamily::Constant:
        barrier["family"] = "constant";
        break;
    case BarrierFamily::Linear:
        barrier["family"] = "linear";
        break;
    case BarrierFamily::PolyLevy:
        barrier["family"] = "poly_levy";
        break;
    }
    barrier["c0"] = config.barrier.c0;
    barrier["c1"] = config.barrier.c1;
    if (!config.barrier.poly.empty())
        barrier["poly"] = config.barrier.poly;
    if (config.barrier.floor)
        barrier["floor"] = *config.barrier.floor;
    if (config.barrier.terminal_override)
        barrier["terminal_override"] = *config.barrier.terminal_override;
    for (const BarrierTimedJump& jump : config.barrier.right_jumps)
        barrier["right_jumps"].push_back({{"t", jump.t}, {"delta_plus", jump.delta_plus}});
    root["barrier"] = std::move(barrier);

    root["penalty"]["schedule"] = config.penalty_schedule;
    root["beta"] = config.beta;
    root["output"]["dir"] = config.output_dir;
    json formats = json::array();
    if (config.write_csv)
        formats.push_back("csv");
    if (config.write_json)
        formats.push_back("json");
    root["output"]["formats"] = std::move(formats);

    return root.dump(2) + "\n";
}

} // namespace rbdsde
