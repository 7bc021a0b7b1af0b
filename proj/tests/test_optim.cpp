#include "cagrad/optim.hpp"

#include <cmath>

#include "catch_amalgamated.hpp"

using namespace cagrad;
using Catch::Matchers::WithinAbs;

TEST_CASE("sgd_step", "[optim]") {
  REQUIRE(sgd_step(ParamVector{1, 1}, std::vector<double>{1, 0}, 0.5).values ==
          std::vector<double>{0.5, 1.0});
  REQUIRE(sgd_step(ParamVector{2, 3}, std::vector<double>{0, 0}, 0.1).values ==
          std::vector<double>{2.0, 3.0});
  REQUIRE(sgd_step(ParamVector{0, 0}, std::vector<double>{-2, 4}, 0.25).values ==
          std::vector<double>{0.5, -1.0});
  REQUIRE_THROWS_AS(sgd_step(ParamVector{0.0}, std::vector<double>{1.0}, 0.0),
                    InvalidInputError);
}

TEST_CASE("adam_step closed forms", "[optim]") {
  SECTION("first step is roughly -alpha * sign(d)") {
    AdamState st(1);
    const ParamVector out = adam_step(st, ParamVector{0.0}, std::vector<double>{10.0}, 0.1);
    REQUIRE_THAT(out[0], WithinAbs(-0.0999999999, 1e-12));
    REQUIRE(st.step_count == 1);
  }
  SECTION("zero update leaves theta unchanged") {
    AdamState st(2);
    const ParamVector out =
        adam_step(st, ParamVector{1.0, -2.0}, std::vector<double>{0.0, 0.0}, 0.1);
    REQUIRE(out.values == std::vector<double>{1.0, -2.0});
  }
  SECTION("two identical steps match the hand-unrolled recurrence") {
    AdamState st(1);
    ParamVector theta{0.0};
    theta = adam_step(st, theta, std::vector<double>{1.0}, 0.1);
    REQUIRE_THAT(theta[0], WithinAbs(-0.09999999900000002, 1e-15));
    theta = adam_step(st, theta, std::vector<double>{1.0}, 0.1);
    REQUIRE_THAT(theta[0], WithinAbs(-0.19999999799999935, 1e-13));
    REQUIRE(st.step_count == 2);
  }
}

TEST_CASE("adam moves monotonically against a constant direction after warmup",
          "[optim][property]") {
  AdamState st(2);
  ParamVector theta{5.0, -3.0};
  const std::vector<double> d = {1.0, -2.0};
  for (int t = 0; t < 50; ++t) theta = adam_step(st, theta, d, 0.01);
  for (int t = 0; t < 150; ++t) {
    const ParamVector next = adam_step(st, theta, d, 0.01);
    REQUIRE(next[0] < theta[0]);  // d positive: theta decreases
    REQUIRE(next[1] > theta[1]);  // d negative: theta increases
    theta = next;
  }
}

TEST_CASE("decaying_step_size", "[optim]") {
  REQUIRE(decaying_step_size(2.0, 1.0, 1.0, 0.5) == 0.5);
  REQUIRE(decaying_step_size(2.0, 1.0, 1.0, 0.0) == 0.0);
  REQUIRE(decaying_step_size(2.0, 4.0, 2.0, 1.0) == 0.125);
  REQUIRE_THROWS_AS(decaying_step_size(1.0, 1.0, 1.0, 0.5), InvalidInputError);
  REQUIRE_THROWS_AS(decaying_step_size(0.5, 1.0, 1.0, 0.5), InvalidInputError);
  REQUIRE_THROWS_AS(decaying_step_size(2.0, 1.0, 0.0, 0.5), InvalidInputError);
  REQUIRE_THROWS_AS(decaying_step_size(2.0, 0.0, 1.0, 0.5), InvalidInputError);
}
