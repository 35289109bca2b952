#include <algorithm>
#include <vector>

#include <doctest.h>

#include "rbdsde/errors.hpp"
#include "rbdsde/regulated.hpp"
#include "rbdsde/rng.hpp"

using namespace rbdsde;

TEST_CASE("regulated path validation") {
    CHECK_THROWS_AS(make_regulated({0.0, 1.0}, {1.0}, {1.0, 1.0}), InvalidInputError);
    CHECK_THROWS_AS(make_regulated({0.0, 0.0}, {1.0, 1.0}, {1.0, 1.0}), InvalidInputError);
    // Terminal right limit must equal the terminal value.
    CHECK_THROWS_AS(make_regulated({0.0, 1.0}, {1.0, 0.5}, {1.0, 0.6}), InvalidInputError);

    RegulatedPath p = make_regulated({0.0, 0.5, 1.0}, {1.0, 0.8, 0.2}, {0.9, 0.8, 0.2});
    CHECK(p.size() == 3);
    CHECK(p.right_jump(0) == doctest::Approx(-0.1));
    CHECK(p.right_jump(1) == doctest::Approx(0.0));
}

TEST_CASE("right-continuous convenience") {
    RegulatedPath p = make_right_continuous({0.0, 1.0}, {0.3, 0.7});
    CHECK(p.v_plus == p.v);
}

TEST_CASE("jump detection threshold is strict") {
    RegulatedPath p = make_regulated({0.0, 0.5, 1.0}, {1.0, 0.5, 0.0}, {0.4, 0.5, 0.0});
    // The jump is -0.6: not below -1/1, but below -1/2.
    CHECK(right_jump_times(p, 1).indices.empty());
    JumpArray at2 = right_jump_times(p, 2);
    REQUIRE(at2.indices.size() == 1);
    CHECK(at2.indices[0] == 0);
    CHECK(at2.level == 2);
    CHECK_THROWS_AS(right_jump_times(p, 0), InvalidInputError);

    // Exactly -1/n does not count: strict inequality.
    RegulatedPath q = make_regulated({0.0, 1.0, 2.0}, {1.0, 1.0, 1.0}, {0.5, 1.0, 1.0});
    CHECK(right_jump_times(q, 2).indices.empty());
    CHECK(right_jump_times(q, 3).indices.size() == 1);
}

TEST_CASE("jump sets are nested in n") {
    RandomStream stream(404, 2);
    for (int trial = 0; trial < 40; ++trial) {
        const int n_pts = 6;
        std::vector<double> times, v, vp;
        for (int k = 0; k < n_pts; ++k) {
            times.push_back(k);
            v.push_back(2.0 * stream.next_uniform() - 1.0);
            vp.push_back(2.0 * stream.next_uniform() - 1.0);
        }
        vp.back() = v.back();
        RegulatedPath p = make_regulated(times, v, vp);
        for (int n = 1; n < 12; ++n) {
            auto coarse = right_jump_times(p, n).indices;
            auto fine = right_jump_times(p, n + 1).indices;
            for (int idx : coarse)
                CHECK(std::find(fine.begin(), fine.end(), idx) != fine.end());
        }
    }
}

TEST_CASE("left envelope carries the pre-jump value") {
    RegulatedPath p = make_regulated({0.0, 1.0, 2.0}, {1.0, 0.2, 0.1}, {0.6, 0.15, 0.1});
    RegulatedPath env = left_envelope(p);
    CHECK(env.v[0] == doctest::Approx(1.0));   // convention at the start
    CHECK(env.v[1] == doctest::Approx(0.6));   // v_plus[0]
    CHECK(env.v[2] == doctest::Approx(0.15));  // v_plus[1]
    // Right limits are shared on open intervals; at the last time the
    // envelope closes on its own value.
    CHECK(env.v_plus[0] == doctest::Approx(0.6));
    CHECK(env.v_plus[1] == doctest::Approx(0.15));
    CHECK(env.v_plus[2] == doctest::Approx(0.15));
}

TEST_CASE("right-jump decomposition reconstructs the path") {
    RegulatedPath p = make_regulated({0.0, 1.0, 2.0, 3.0}, {1.0, 0.4, 0.9, 0.2}, {0.7, 0.5, 0.9, 0.2});
    PathDecomposition d = decompose_right_jumps(p);

    // star is right-continuous and the jump account adds back up.
    for (int k = 0; k < p.size(); ++k) {
        CHECK(d.star.v_plus[static_cast<std::size_t>(k)] == doctest::Approx(d.star.v[static_cast<std::size_t>(k)]).epsilon(1e-14));
        CHECK(d.star.v[static_cast<std::size_t>(k)] + d.jump_cumulative[static_cast<std::size_t>(k)] ==
              doctest::Approx(p.v[static_cast<std::size_t>(k)]).epsilon(1e-14));
    }

    RegulatedPath rc = make_right_continuous({0.0, 1.0, 2.0}, {0.5, 0.2, 0.8});
    PathDecomposition d2 = decompose_right_jumps(rc);
    for (double j : d2.jump_cumulative) CHECK(j == 0.0);
}
