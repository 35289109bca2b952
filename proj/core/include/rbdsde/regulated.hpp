#ifndef RBDSDE_REGULATED_HPP
#define RBDSDE_REGULATED_HPP

#include <vector>

namespace rbdsde {

/// A regulated (ladlag) path on a finite grid. v[k] is the value at t_k,
/// v_plus[k] the value held on the open interval (t_k, t_{k+1}); the path is
/// piecewise constant between grid points. Right jumps v_plus[k] - v[k] and
/// left jumps v[k+1] - v_plus[k] are both allowed; at the final time the
/// right limit coincides with the value (v_plus.back() == v.back()).
struct RegulatedPath {
    std::vector<double> times;
    std::vector<double> v;
    std::vector<double> v_plus;

    int size() const { return static_cast<int>(times.size()); }
    double right_jump(int k) const { return v_plus[k] - v[k]; }
};

/// Validating constructor; throws InvalidInputError on size mismatches,
/// non-increasing times, or a terminal right limit differing from the value.
RegulatedPath make_regulated(std::vector<double> times, std::vector<double> v, std::vector<double> v_plus);

/// Convenience: a right-continuous path (v_plus == v).
RegulatedPath make_right_continuous(std::vector<double> times, std::vector<double> v);

/// Grid indices whose downward right jump crosses the 1/n threshold.
struct JumpArray {
    int level = 0;                 // the n the threshold 1/n belongs to
    std::vector<int> indices;      // ascending grid indices with v_plus - v < -1/n
};

/// Indices k with v_plus[k] - v[k] < -1/n, strict inequality. Requires n >= 1.
/// The arrays are nested in n: a jump past -1/n is also past -1/(n+1).
JumpArray right_jump_times(const RegulatedPath& path, int n);

/// Largest left upper semicontinuous process below the path at grid times:
/// the value carried into t_k from the left, i.e. v_plus[k-1], with the
/// convention that at t_0 it is v[0]. Right limits are inherited unchanged
/// (the path is constant on open intervals).
RegulatedPath left_envelope(const RegulatedPath& path);

/// Decomposition into the right-continuous part and the accumulated right
/// jumps: v[k] = star[k] + sum_{j<k} (v_plus[j] - v[j]). For a
/// right-continuous path the jumping part is identically zero.
struct PathDecomposition {
    RegulatedPath star;                    // right-continuous remainder
    std::vector<double> jump_cumulative;   // sum of right jumps strictly before t_k
};

PathDecomposition decompose_right_jumps(const RegulatedPath& path);

} // namespace rbdsde

#endif
