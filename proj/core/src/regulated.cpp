#include "rbdsde/regulated.hpp"

#include <string>
#include <utility>

#include "rbdsde/errors.hpp"

namespace rbdsde {

RegulatedPath make_regulated(std::vector<double> times, std::vector<double> v, std::vector<double> v_plus) {
    if (times.empty() || times.size() != v.size() || v.size() != v_plus.size())
        throw InvalidInputError("regulated path arrays must be nonempty and of equal size");
    for (std::size_t k = 1; k < times.size(); ++k)
        if (!(times[k] > times[k - 1]))
            throw InvalidInputError("regulated path times must be strictly increasing");
    if (v_plus.back() != v.back())
        throw InvalidInputError("regulated path must close flat: the terminal right limit equals the value");
    RegulatedPath p;
    p.times = std::move(times);
    p.v = std::move(v);
    p.v_plus = std::move(v_plus);
    return p;
}

RegulatedPath make_right_continuous(std::vector<double> times, std::vector<double> v) {
    auto v_plus = v;
    return make_regulated(std::move(times), std::move(v), std::move(v_plus));
}

JumpArray right_jump_times(const RegulatedPath& path, int n) {
    if (n < 1)
        throw InvalidInputError("jump threshold level must be >= 1, got " + std::to_string(n));
    JumpArray a;
    a.level = n;
    const double threshold = -1.0 / static_cast<double>(n);
    for (int k = 0; k < path.size(); ++k)
        if (path.right_jump(k) < threshold)
            a.indices.push_back(k);
    return a;
}

RegulatedPath left_envelope(const RegulatedPath& path) {
    RegulatedPath e;
    e.times = path.times;
    e.v.resize(path.v.size());
    e.v[0] = path.v[0];
    for (std::size_t k = 1; k < path.v.size(); ++k)
        e.v[k] = path.v_plus[k - 1];
    // The path is constant on open intervals, so its left upper limits and
    // the path itself share every right limit.
    e.v_plus = path.v_plus;
    e.v_plus.back() = e.v.back();
    return e;
}

PathDecomposition decompose_right_jumps(const RegulatedPath& path) {
    PathDecomposition d;
    d.jump_cumulative.resize(path.v.size());
    double acc = 0.0;
    for (int k = 0; k < path.size(); ++k) {
        d.jump_cumulative[static_cast<std::size_t>(k)] = acc;
        acc += path.right_jump(k);
    }
    d.star.times = path.times;
    d.star.v.resize(path.v.size());
    d.star.v_plus.resize(path.v.size());
    for (std::size_t k = 0; k < path.v.size(); ++k) {
        d.star.v[k] = path.v[k] - d.jump_cumulative[k];
        // star_plus = v_plus - (jumps through t_k) = v - (jumps before t_k):
        // the remainder is right continuous by construction.
        d.star.v_plus[k] = d.star.v[k];
    }
    return d;
}

} // namespace rbdsde
