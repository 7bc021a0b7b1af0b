#include "cagrad/solvers.hpp"

#include <cmath>

#include "catch_amalgamated.hpp"

#include "cagrad/rng.hpp"

using namespace cagrad;
using Catch::Matchers::WithinAbs;

TEST_CASE("project_to_simplex examples", "[solvers]") {
  SECTION("already on the simplex") {
    SimplexWeights w = project_to_simplex(std::vector<double>{0.3, 0.7});
    REQUIRE(w[0] == 0.3);
    REQUIRE(w[1] == 0.7);
  }
  SECTION("uniform shift") {
    SimplexWeights w = project_to_simplex(std::vector<double>{0.7, 0.5});
    REQUIRE_THAT(w[0], WithinAbs(0.6, 1e-15));
    REQUIRE_THAT(w[1], WithinAbs(0.4, 1e-15));
  }
  SECTION("negative coordinate clipped") {
    SimplexWeights w = project_to_simplex(std::vector<double>{2.0, -1.0});
    REQUIRE_THAT(w[0], WithinAbs(1.0, 1e-15));
    REQUIRE(w[1] == 0.0);
  }
  SECTION("empty input") {
    REQUIRE_THROWS_AS(project_to_simplex(std::vector<double>{}), InvalidInputError);
  }
}

TEST_CASE("projection is idempotent and optimal", "[solvers][property]") {
  RngStream rng(11);
  for (int t = 0; t < 50; ++t) {
    const std::size_t k = 2 + rng.next_below(5);
    std::vector<double> v(k);
    for (double& x : v) x = rng.next_uniform(-3, 3);
    const SimplexWeights p = project_to_simplex(v);
    const SimplexWeights p2 = project_to_simplex(p.span());
    for (std::size_t i = 0; i < k; ++i) REQUIRE(p[i] == p2[i]);
    const double best = distance(p.span(), v);
    std::vector<double> q(k);
    for (int s = 0; s < 500; ++s) {
      double total = 0.0;
      for (double& x : q) {
        x = -std::log(1.0 - rng.next_unit());
        total += x;
      }
      for (double& x : q) x /= total;
      REQUIRE(distance(q, v) >= best - 1e-12);
    }
  }
}

TEST_CASE("solve_minnorm_weights examples", "[solvers]") {
  SECTION("symmetric pair") {
    SimplexWeights w = solve_minnorm_weights(Matrix{{1, 0}, {0, 1}});
    REQUIRE_THAT(w[0], WithinAbs(0.5, 1e-12));
  }
  SECTION("analytic 1-D quadratic") {
    // rows (2,0),(0,1): minimize 4w^2 + (1-w)^2 => w = 0.2
    SimplexWeights w = solve_minnorm_weights(Matrix{{4, 0}, {0, 1}});
    REQUIRE_THAT(w[0], WithinAbs(0.2, 1e-12));
    REQUIRE_THAT(w[1], WithinAbs(0.8, 1e-12));
  }
  SECTION("single task") {
    SimplexWeights w = solve_minnorm_weights(Matrix{{9}});
    REQUIRE(w[0] == 1.0);
  }
  SECTION("identical rows pick the midpoint") {
    SimplexWeights w = solve_minnorm_weights(Matrix{{1, 1}, {1, 1}});
    REQUIRE(w[0] == 0.5);
  }
}

TEST_CASE("gram validation rejects bad matrices", "[solvers]") {
  REQUIRE_THROWS_AS(solve_minnorm_weights(Matrix{{1, 0}, {0, -1}}),
                    NumericalDegeneracyError);
  REQUIRE_THROWS_AS(solve_minnorm_weights(Matrix{{1, 0.5}, {0, 1}}),
                    NumericalDegeneracyError);
  REQUIRE_THROWS_AS(solve_minnorm_weights(Matrix{{1, 0}}), InvalidInputError);
  SolverSettings bad;
  bad.max_iters = 0;
  REQUIRE_THROWS_AS(solve_minnorm_weights(Matrix{{1}}, bad), InvalidInputError);
}

TEST_CASE("minnorm PGD matches a dense grid for K = 3", "[solvers]") {
  // rows (1,0), (0,1), (0.9,0.9) in the plane
  const Matrix rows = {{1, 0}, {0, 1}, {0.9, 0.9}};
  const TaskGradients g(rows);
  const GramBias gb = gram_and_bias(g);
  SolverSettings s;
  s.max_iters = 5000;
  const SimplexWeights w = solve_minnorm_weights(gb.gram, s);
  const double got = detail::quadratic_form(gb.gram, w.span());

  double best = std::numeric_limits<double>::infinity();
  const int n = 600;
  for (int i = 0; i <= n; ++i) {
    for (int j = 0; i + j <= n; ++j) {
      const std::vector<double> cand = {static_cast<double>(i) / n,
                                        static_cast<double>(j) / n,
                                        static_cast<double>(n - i - j) / n};
      best = std::min(best, detail::quadratic_form(gb.gram, cand));
    }
  }
  REQUIRE(got <= best + 1e-8);
}

TEST_CASE("solve_cagrad_weights examples", "[solvers]") {
  SECTION("symmetric pair, c = 0.5") {
    const TaskGradients g(Matrix{{1, 0}, {0, 1}});
    const GramBias gb = gram_and_bias(g);
    const CagradWeights sol = solve_cagrad_weights(gb.gram, gb.bias, norm(g.g0()), 0.5);
    REQUIRE_THAT(sol.weights[0], WithinAbs(0.5, 1e-10));
    REQUIRE_THAT(sol.f_star, WithinAbs(0.75, 1e-12));
    // lambda* = ||g_w*|| / sqrt(phi) = (sqrt(2)/2) / (0.5 * sqrt(2)/2) = 2
    REQUIRE_THAT(sol.lambda_star, WithinAbs(2.0, 1e-9));
  }
  SECTION("c = 0 picks the cheapest vertex, ties to the lowest index") {
    const CagradWeights sol =
        solve_cagrad_weights(Matrix{{1, 0}, {0, 1}}, std::vector<double>{0.5, 0.5}, 1.0, 0.0);
    REQUIRE(sol.weights[0] == 1.0);
    REQUIRE(sol.weights[1] == 0.0);
    REQUIRE(sol.f_star == 0.5);
    REQUIRE(std::isinf(sol.lambda_star));
  }
  SECTION("golden from the 1-D grid oracle: rows (2,0),(0,1), c = 0.5") {
    const TaskGradients g(Matrix{{2, 0}, {0, 1}});
    const GramBias gb = gram_and_bias(g);
    const CagradWeights sol = solve_cagrad_weights(gb.gram, gb.bias, norm(g.g0()), 0.5);
    // dense grid over w in [0,1] puts the optimum on the second vertex
    REQUIRE_THAT(sol.weights[0], WithinAbs(0.0, 1e-9));
    REQUIRE_THAT(sol.f_star, WithinAbs(1.0590169943749475, 1e-10));
  }
  SECTION("c < 0 is rejected") {
    REQUIRE_THROWS_AS(solve_cagrad_weights(Matrix{{1}}, std::vector<double>{1}, 1.0, -0.1),
                      InvalidInputError);
  }
}

TEST_CASE("cagrad dual matches a dense grid for K = 3", "[solvers]") {
  const Matrix rows = {{1.0, 0.2}, {-0.3, 1.1}, {0.6, -0.4}};
  const TaskGradients g(rows);
  const GramBias gb = gram_and_bias(g);
  const double g0n = norm(g.g0());
  for (double c : {0.3, 0.7}) {
    SolverSettings s;
    s.max_iters = 5000;
    const CagradWeights sol = solve_cagrad_weights(gb.gram, gb.bias, g0n, c, s);
    double best = std::numeric_limits<double>::infinity();
    const int n = 600;
    for (int i = 0; i <= n; ++i) {
      for (int j = 0; i + j <= n; ++j) {
        const std::vector<double> cand = {static_cast<double>(i) / n,
                                          static_cast<double>(j) / n,
                                          static_cast<double>(n - i - j) / n};
        best = std::min(best, cagrad_dual_objective(gb.gram, gb.bias, c * g0n, cand));
      }
    }
    REQUIRE(sol.f_star <= best + 1e-8);
  }
}

TEST_CASE("pareto_stationarity examples", "[solvers]") {
  SECTION("hull contains the origin") {
    REQUIRE_THAT(pareto_stationarity(TaskGradients(Matrix{{1, 0}, {-1, 0}})),
                 WithinAbs(0.0, 1e-12));
  }
  SECTION("orthonormal pair") {
    REQUIRE_THAT(pareto_stationarity(TaskGradients(Matrix{{1, 0}, {0, 1}})),
                 WithinAbs(0.7071067811865476, 1e-12));
  }
  SECTION("single gradient") {
    REQUIRE_THAT(pareto_stationarity(TaskGradients(Matrix{{1, 0}})), WithinAbs(1.0, 1e-12));
  }
}

TEST_CASE("primal_oracle examples", "[solvers]") {
  SECTION("symmetric pair, c = 0.5") {
    const TaskGradients g(Matrix{{1, 0}, {0, 1}});
    const PrimalOracleResult r = primal_oracle(g, 0.5, 2001);
    REQUIRE_THAT(r.value, WithinAbs(0.75, 1e-3));
  }
  SECTION("c = 0 degenerates to the averaged gradient") {
    const TaskGradients g(Matrix{{2, 0}, {0, 1}});
    const PrimalOracleResult r = primal_oracle(g, 0.0, 5);
    REQUIRE(r.d == std::vector<double>{1.0, 0.5});
    REQUIRE(r.value == 0.5);  // min(<g1,g0>, <g2,g0>) = min(2, 0.5)
  }
  SECTION("golden grid value matches the dual path: rows (2,0),(0,1), c = 0.8") {
    const TaskGradients g(Matrix{{2, 0}, {0, 1}});
    const PrimalOracleResult r = primal_oracle(g, 0.8, 2001);
    REQUIRE_THAT(r.value, WithinAbs(1.394427190999916, 1e-3));
    const GramBias gb = gram_and_bias(g);
    const CagradWeights sol = solve_cagrad_weights(gb.gram, gb.bias, norm(g.g0()), 0.8);
    REQUIRE_THAT(r.value, WithinAbs(sol.f_star, 1e-3));
  }
  SECTION("budget < 1 is rejected") {
    REQUIRE_THROWS_AS(primal_oracle(TaskGradients(Matrix{{1, 0}}), 0.5, 0),
                      InvalidInputError);
  }
}

TEST_CASE("oracle value is nondecreasing along nested budgets", "[solvers][property]") {
  const TaskGradients g(Matrix{{1.2, -0.3}, {-0.4, 0.9}});
  SECTION("grid refinement chain") {
    double prev = -std::numeric_limits<double>::infinity();
    for (long budget = 11; budget <= 641; budget = 2 * budget - 1) {
      const double v = primal_oracle(g, 0.6, budget).value;
      REQUIRE(v >= prev);
      prev = v;
    }
  }
  SECTION("random-search prefixes in four dimensions") {
    const TaskGradients g4(Matrix{{1, 0, 0, 0.5}, {0, 1, -0.5, 0}, {0.3, 0.3, 0.3, 0.3}});
    double prev = -std::numeric_limits<double>::infinity();
    for (long budget : {10L, 100L, 1000L, 5000L}) {
      const double v = primal_oracle(g4, 0.5, budget).value;
      REQUIRE(v >= prev);
      prev = v;
    }
  }
}

TEST_CASE("dual objective is convex along random segments", "[solvers][property]") {
  RngStream rng(23);
  for (int t = 0; t < 200; ++t) {
    const std::size_t k = 2 + rng.next_below(3);
    std::vector<double> flat(k * 2);
    for (double& x : flat) x = rng.next_uniform(-1, 1);
    const TaskGradients g(k, 2, std::move(flat));
    const GramBias gb = gram_and_bias(g);
    const double sqrt_phi = 0.5 * norm(g.g0());
    auto rand_w = [&] {
      std::vector<double> q(k);
      double total = 0;
      for (double& x : q) {
        x = -std::log(1.0 - rng.next_unit());
        total += x;
      }
      for (double& x : q) x /= total;
      return q;
    };
    const auto w1 = rand_w(), w2 = rand_w();
    const double tt = rng.next_unit();
    std::vector<double> mix(k);
    for (std::size_t i = 0; i < k; ++i) mix[i] = tt * w1[i] + (1 - tt) * w2[i];
    const double lhs = cagrad_dual_objective(gb.gram, gb.bias, sqrt_phi, mix);
    const double rhs = tt * cagrad_dual_objective(gb.gram, gb.bias, sqrt_phi, w1) +
                       (1 - tt) * cagrad_dual_objective(gb.gram, gb.bias, sqrt_phi, w2);
    REQUIRE(lhs <= rhs + 1e-9);
  }
}
