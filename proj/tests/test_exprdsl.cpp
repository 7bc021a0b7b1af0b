#include "cagrad/exprdsl.hpp"

#include <cmath>
#include <cstdio>
#include <functional>

#include "catch_amalgamated.hpp"

#include "cagrad/rng.hpp"

using namespace cagrad;
using Catch::Matchers::WithinAbs;

namespace {

const char* kToyF1 = "log(max(abs(0.5*(-x1-7) - tanh(-x2)), 0.000005)) + 6";

}  // namespace

TEST_CASE("parse basics", "[exprdsl]") {
  SECTION("simple tree") {
    const ExprAst ast = parse("x1*x1 + 2");
    REQUIRE(ast.nodes[static_cast<std::size_t>(ast.root)].kind == NodeKind::add);
    REQUIRE(ast.max_var == 1);
    REQUIRE(eval(ast, ParamVector{3.0}) == 11.0);
  }
  SECTION("full toy sub-expression") {
    const ExprAst ast = parse(kToyF1);
    REQUIRE(ast.max_var == 2);
    // at theta = (0, 10): log(|-3.5 + tanh(10)|) + 6
    const double expected = std::log(std::abs(0.5 * (-0.0 - 7) - std::tanh(-10.0))) + 6;
    REQUIRE_THAT(eval(ast, ParamVector{0.0, 10.0}), WithinAbs(expected, 1e-15));
  }
  SECTION("wrong arity is a parse error") {
    REQUIRE_THROWS_AS(parse("max(x1)"), ParseError);
    REQUIRE_THROWS_AS(parse("tanh(x1, x2)"), ParseError);
  }
  SECTION("unknown identifier") {
    REQUIRE_THROWS_AS(parse("y1 + 1"), ParseError);
    REQUIRE_THROWS_AS(parse("x0"), ParseError);
    REQUIRE_THROWS_AS(parse("x"), ParseError);
  }
  SECTION("syntax errors carry byte offsets") {
    try {
      parse("x1 + ");
      FAIL("expected ParseError");
    } catch (const ParseError& e) {
      REQUIRE(e.offset == 5);
    }
    try {
      parse("x1 + (x2");
      FAIL("expected ParseError");
    } catch (const ParseError& e) {
      REQUIRE(e.offset == 8);
    }
  }
  SECTION("empty input") {
    REQUIRE_THROWS_AS(parse("   "), ParseError);
  }
}

TEST_CASE("precedence and associativity", "[exprdsl]") {
  SECTION("pow binds tighter than unary minus") {
    REQUIRE(eval(parse("-2^2"), ParamVector{0.0}) == -4.0);
  }
  SECTION("unary minus binds tighter than mul") {
    REQUIRE(eval(parse("-2*3"), ParamVector{0.0}) == -6.0);
  }
  SECTION("pow is right-associative") {
    REQUIRE(eval(parse("2^3^2"), ParamVector{0.0}) == 512.0);
  }
  SECTION("sub is left-associative") {
    REQUIRE(eval(parse("8 - 4 - 2"), ParamVector{0.0}) == 2.0);
  }
  SECTION("negative exponent") {
    REQUIRE(eval(parse("2^-2"), ParamVector{0.0}) == 0.25);
  }
}

TEST_CASE("eval edge conventions", "[exprdsl]") {
  SECTION("max/min tie takes the first argument; abs(0) = 0") {
    REQUIRE(eval(parse("max(x1, 1)"), ParamVector{1.0}) == 1.0);
    REQUIRE(eval(parse("abs(x1)"), ParamVector{0.0}) == 0.0);
  }
  SECTION("domain errors") {
    REQUIRE_THROWS_AS(eval(parse("x1/x1"), ParamVector{0.0}), EvalDomainError);
    REQUIRE_THROWS_AS(eval(parse("log(x1)"), ParamVector{0.0}), EvalDomainError);
    REQUIRE_THROWS_AS(eval(parse("log(x1)"), ParamVector{-1.0}), EvalDomainError);
    REQUIRE_THROWS_AS(eval(parse("sqrt(x1)"), ParamVector{-1.0}), EvalDomainError);
    REQUIRE_THROWS_AS(eval(parse("x1^0.5"), ParamVector{-2.0}), EvalDomainError);
    REQUIRE_THROWS_AS(eval(parse("x1^-1"), ParamVector{0.0}), EvalDomainError);
  }
  SECTION("variable beyond dimension") {
    REQUIRE_THROWS_AS(eval(parse("x3"), ParamVector{1.0, 2.0}), InvalidInputError);
  }
  SECTION("determinism: identical input, identical bits") {
    const ExprAst ast = parse(kToyF1);
    const ParamVector theta{-3.217, 4.881};
    REQUIRE(eval(ast, theta) == eval(ast, theta));
  }
}

TEST_CASE("grad basics", "[exprdsl]") {
  SECTION("x^2 at 3") {
    const std::vector<double> g = grad(parse("x1*x1"), ParamVector{3.0});
    REQUIRE_THAT(g[0], WithinAbs(6.0, 1e-15));
  }
  SECTION("tanh slope at 0") {
    const std::vector<double> g = grad(parse("tanh(x1)"), ParamVector{0.0});
    REQUIRE(g[0] == 1.0);
  }
  SECTION("pow with constant exponent") {
    const std::vector<double> g = grad(parse("x1^3"), ParamVector{2.0});
    REQUIRE_THAT(g[0], WithinAbs(12.0, 1e-12));
  }
  SECTION("pow with varying exponent") {
    const std::vector<double> g = grad(parse("2^x1"), ParamVector{3.0});
    REQUIRE_THAT(g[0], WithinAbs(8.0 * std::log(2.0), 1e-12));
  }
  SECTION("abs slope conventions") {
    REQUIRE(grad(parse("abs(x1)"), ParamVector{2.0})[0] == 1.0);
    REQUIRE(grad(parse("abs(x1)"), ParamVector{-2.0})[0] == -1.0);
    REQUIRE(grad(parse("abs(x1)"), ParamVector{0.0})[0] == 0.0);
  }
  SECTION("max tie propagates the first argument") {
    const std::vector<double> g = grad(parse("max(2*x1, x1 + 1)"), ParamVector{1.0});
    REQUIRE(g[0] == 2.0);
  }
}

TEST_CASE("grad is linear in the expression", "[exprdsl][property]") {
  const ExprAst f = parse("tanh(x1)*x2");
  const ExprAst g = parse("x1*x1 + exp(0.5*x2)");
  const ExprAst combo = parse("1.5*(tanh(x1)*x2) - 2.5*(x1*x1 + exp(0.5*x2))");
  RngStream rng(5);
  for (int t = 0; t < 100; ++t) {
    const ParamVector theta{rng.next_uniform(-2, 2), rng.next_uniform(-2, 2)};
    const std::vector<double> gf = grad(f, theta);
    const std::vector<double> gg = grad(g, theta);
    const std::vector<double> gc = grad(combo, theta);
    for (int i = 0; i < 2; ++i) {
      REQUIRE_THAT(gc[static_cast<std::size_t>(i)],
                   WithinAbs(1.5 * gf[static_cast<std::size_t>(i)] -
                             2.5 * gg[static_cast<std::size_t>(i)], 1e-12));
    }
  }
}

TEST_CASE("print round-trips structurally", "[exprdsl][property]") {
  SECTION("hand cases") {
    for (const char* text :
         {"x1*x1 + 2", kToyF1, "-x1^2", "(x1 + x2)*x1", "x1 - (x2 - 1)",
          "x1/(x2*x2)", "2^-2", "min(x1, max(x2, 0.5))", "-(x1 + 1)"}) {
      const ExprAst ast = parse(text);
      const ExprAst again = parse(print(ast));
      INFO(text << "  ->  " << print(ast));
      REQUIRE(structurally_equal(ast, again));
    }
  }
  SECTION("random trees") {
    RngStream rng(99);
    std::function<std::string(int)> gen = [&](int depth) -> std::string {
      if (depth <= 0 || rng.next_below(4) == 0) {
        if (rng.next_below(2) == 0) return "x" + std::to_string(1 + rng.next_below(3));
        char buf[32];
        std::snprintf(buf, sizeof(buf), "%.3g", rng.next_uniform(0.0, 9.0));
        return buf;
      }
      switch (rng.next_below(9)) {
        case 0: return "-" + gen(depth - 1);
        case 1: return "tanh(" + gen(depth - 1) + ")";
        case 2: return "abs(" + gen(depth - 1) + ")";
        case 3: return gen(depth - 1) + " + " + gen(depth - 1);
        case 4: return gen(depth - 1) + " - " + gen(depth - 1);
        case 5: return gen(depth - 1) + "*" + gen(depth - 1);
        case 6: return gen(depth - 1) + "/" + gen(depth - 1);
        case 7: return "max(" + gen(depth - 1) + ", " + gen(depth - 1) + ")";
        default: return "(" + gen(depth - 1) + ")^2";
      }
    };
    for (int t = 0; t < 500; ++t) {
      const ExprAst ast = parse(gen(5));
      const std::string text = print(ast);
      INFO(text);
      REQUIRE(structurally_equal(ast, parse(text)));
    }
  }
}

TEST_CASE("forward mode matches finite differences away from kinks",
          "[exprdsl][property]") {
  const ExprAst ast = parse(kToyF1);
  RngStream rng(17);
  int checked = 0;
  while (checked < 100) {
    const ParamVector theta{rng.next_uniform(-10, 10), rng.next_uniform(-10, 10)};
    if (nonsmooth_margin(ast, theta) < 1e-4) continue;
    const std::vector<double> g = grad(ast, theta);
    for (std::size_t i = 0; i < 2; ++i) {
      const double h = 1e-6 * (1.0 + std::abs(theta[i]));
      ParamVector lo = theta, hi = theta;
      lo[i] -= h;
      hi[i] += h;
      const double fd = (eval(ast, hi) - eval(ast, lo)) / (2 * h);
      const double scale = std::max({1.0, std::abs(fd), std::abs(g[i])});
      REQUIRE_THAT(g[i], WithinAbs(fd, 1e-5 * scale));
    }
    ++checked;
  }
}

TEST_CASE("nonsmooth_margin reports kink distance", "[exprdsl]") {
  const ExprAst ast = parse("max(x1, 1) + abs(x2)");
  REQUIRE_THAT(nonsmooth_margin(ast, ParamVector{1.25, 3.0}), WithinAbs(0.25, 1e-15));
  REQUIRE_THAT(nonsmooth_margin(ast, ParamVector{5.0, 0.1}), WithinAbs(0.1, 1e-15));
  REQUIRE(std::isinf(nonsmooth_margin(parse("x1*x1"), ParamVector{1.0})));
}
