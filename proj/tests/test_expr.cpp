#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "distint/differentiate.hpp"
#include "distint/expr.hpp"
#include "distint/parse.hpp"

using namespace distint;

namespace {

ExprPtr random_leaf(std::mt19937& rng) {
    std::uniform_real_distribution<double> u01(0.0, 1.0);
    std::uniform_real_distribution<double> ualpha(-4.0, 4.0);
    std::uniform_int_distribution<int> pick(0, 4);
    switch (pick(rng)) {
        case 0: return make_const(ualpha(rng));
        case 1: return make_power(u01(rng), ualpha(rng),
                                  u01(rng) < 0.3 ? Side::right : Side::both,
                                  u01(rng) < 0.3);
        case 2: {
            double beta = 0.5 + 2.5 * u01(rng);
            return make_chirp(u01(rng), ualpha(rng), beta,
                              u01(rng) < 0.5 ? Trig::sin : Trig::cos,
                              u01(rng) < 0.3 ? Side::left : Side::both, u01(rng) < 0.3);
        }
        case 3: return make_poly({u01(rng), ualpha(rng), u01(rng)});
        default:
            return make_smooth_trig(u01(rng) < 0.5 ? SmoothE::Kind::sin_k
                                                   : SmoothE::Kind::cos_k,
                                    1.0 + u01(rng), ualpha(rng));
    }
}

ExprPtr random_expr(std::mt19937& rng, int depth = 0) {
    std::uniform_real_distribution<double> u01(0.0, 1.0);
    double roll = u01(rng);
    if (depth < 2 && roll < 0.25) {
        std::vector<ExprPtr> terms;
        int n = 2 + static_cast<int>(u01(rng) * 2);
        for (int i = 0; i < n; ++i) terms.push_back(random_expr(rng, depth + 1));
        return make_sum(std::move(terms));
    }
    if (depth < 2 && roll < 0.45)
        return make_product(make_poly({u01(rng), u01(rng)}), random_expr(rng, depth + 1));
    if (roll < 0.6) return make_scale(-2.0 + 4.0 * u01(rng), random_leaf(rng));
    return random_leaf(rng);
}

}  // namespace

TEST_CASE("parse maps constructor arguments directly") {
    ExprPtr e = parse_or_throw("chirp(a=0, alpha=-3, beta=1, sin)");
    const auto* c = std::get_if<ChirpE>(&e->v);
    REQUIRE(c != nullptr);
    CHECK(c->a == 0.0);
    CHECK(c->alpha == -3.0);
    CHECK(c->beta == 1.0);
    CHECK(c->trig == Trig::sin);
    CHECK(c->side == Side::both);
    CHECK_FALSE(c->sgn);
}

TEST_CASE("indicator restriction of a singular power is legal") {
    ExprPtr e = parse_or_throw("pow(alpha=-0.5) * indicator(0,1)");
    CHECK(eval(e, 0.25) == Catch::Approx(2.0));  // x^-1/2 at 1/4
    CHECK(eval(e, 2.0) == 0.0);
}

TEST_CASE("two non-smooth factors are rejected with diagnostics") {
    ParseResult r = parse("chirp(alpha=1,beta=1,sin) * chirp(alpha=1,beta=1,cos)");
    auto* d = std::get_if<ParseDiagnostics>(&r);
    REQUIRE(d != nullptr);
    CHECK(d->message.find("non-smooth") != std::string::npos);
}

TEST_CASE("malformed input reports offset and expected tokens") {
    ParseResult r = parse("chirp(alpha=-3, beta=1)");
    auto* d = std::get_if<ParseDiagnostics>(&r);
    REQUIRE(d != nullptr);  // missing trailing sin|cos
    CHECK(d->position <= std::string("chirp(alpha=-3, beta=1)").size());
    REQUIRE_FALSE(d->expected.empty());

    ParseResult r2 = parse("pow(alpha=");
    auto* d2 = std::get_if<ParseDiagnostics>(&r2);
    REQUIRE(d2 != nullptr);
    CHECK(d2->position == 10);
}

TEST_CASE("semantic errors: beta <= 0 and indicator lo >= hi") {
    CHECK(std::holds_alternative<ParseDiagnostics>(parse("chirp(alpha=1,beta=0,sin)")));
    CHECK(std::holds_alternative<ParseDiagnostics>(parse("indicator(1,1)")));
    CHECK(std::holds_alternative<ParseDiagnostics>(parse("indicator(2,1)")));
}

TEST_CASE("eval_at on chirps") {
    ExprPtr e = make_chirp(0.0, 1.0, 1.0, Trig::sin);
    const double x = 2.0 / M_PI;
    CHECK(eval_at(e, x).value() == Catch::Approx(x * std::sin(M_PI / 2)));

    ExprPtr e2 = make_chirp(0.0, -3.0, 1.0, Trig::sin);
    CHECK(eval_at(e2, 0.0).value() == 0.0);  // s_{alpha,beta}(0) = 0

    ExprPtr e3 = make_power(0.0, -0.5);
    CHECK_FALSE(eval_at(e3, 0.0).has_value());
}

TEST_CASE("eval_at at indicator jumps is undefined") {
    ExprPtr e = make_indicator(0.0, 1.0);
    CHECK_FALSE(eval_at(e, 0.0).has_value());
    CHECK_FALSE(eval_at(e, 1.0).has_value());
    CHECK(eval_at(e, 0.5).value() == 1.0);
    CHECK(eval_at(e, -0.5).value() == 0.0);
}

TEST_CASE("step sequence evaluation over harmonic cells") {
    // c_n = (-1)^n: value on [1/(n+1), 1/n)
    ExprPtr e = parse_or_throw("step(cn=(-1)^n)");
    const auto* s = std::get_if<StepE>(&e->v);
    REQUIRE(s != nullptr);
    CHECK(eval(e, 0.75) == -1.0);   // cell n=1
    CHECK(eval(e, 0.4) == 1.0);     // cell n=2: [1/3, 1/2)
    CHECK(eval(e, 0.5) == -1.0);    // left-closed: 0.5 in cell 1
    CHECK(eval(e, 0.0) == 0.0);
    CHECK(eval(e, 1.0) == 0.0);
    CHECK(eval(e, 1.5) == 0.0);

    ExprPtr f = parse_or_throw("step(cn=(-1)^n*n*(n+1))");
    CHECK(eval(f, 0.75) == -2.0);
    CHECK(eval(f, 0.4) == 6.0);
}

TEST_CASE("singular points are collected, deduplicated and sorted") {
    ExprPtr c = make_chirp(0.5, -1.0, 1.0, Trig::sin);
    CHECK(singular_points(c, 0.0, 1.0) == std::vector<double>{0.5});

    ExprPtr s = make_sum({make_chirp(0.0, -1.0, 1.0, Trig::sin), make_indicator(0.2, 0.8)});
    CHECK(singular_points(s, 0.0, 1.0) == std::vector<double>{0.0, 0.2, 0.8});

    ExprPtr sm = make_smooth_trig(SmoothE::Kind::sin_k);
    CHECK(singular_points(sm, 0.0, 1.0).empty());

    ExprPtr p = make_periodic(1.0, make_chirp(0.5, 0.0, 1.0, Trig::sin));
    auto pts = singular_points(p, 0.0, 2.0);
    CHECK(pts == std::vector<double>{0.0, 0.5, 1.0, 1.5, 2.0});
}

TEST_CASE("differentiate closed forms") {
    // d/dx cos(1/x) = x^-2 sin(1/x)
    ExprPtr e = make_chirp(0.0, 0.0, 1.0, Trig::cos);
    ExprPtr d = differentiate(e);
    for (double x : {0.3, 0.7, 1.9, -0.4}) {
        double expect = std::sin(1.0 / x) / (x * x);
        CHECK(eval(d, x) == Catch::Approx(expect).margin(1e-12));
    }

    // d/dx [x^-1 cos(1/x)] = -x^-2 cos(1/x) + x^-3 sin(1/x), x > 0
    ExprPtr e2 = make_chirp(0.0, -1.0, 1.0, Trig::cos, Side::right);
    ExprPtr d2 = differentiate(e2);
    for (double x : {0.21, 0.63, 1.7}) {
        double expect = -std::cos(1.0 / x) / (x * x) + std::sin(1.0 / x) / (x * x * x);
        CHECK(eval(d2, x) == Catch::Approx(expect).margin(1e-12));
    }

    CHECK(eval(differentiate(make_const(5.0)), 0.37) == 0.0);
}

TEST_CASE("differentiate rejects step and indicator nodes") {
    CHECK_THROWS_AS(differentiate(make_indicator(0, 1)), std::domain_error);
    CHECK_THROWS_AS(differentiate(make_step(0, SeqNode::var())), std::domain_error);
}

TEST_CASE("differentiate agrees with centered finite differences") {
    std::mt19937 rng(20240811);
    std::uniform_real_distribution<double> ux(-2.0, 2.0);
    std::uniform_real_distribution<double> ualpha(-4.0, 4.0);
    std::uniform_real_distribution<double> u01(0.0, 1.0);

    int checked = 0;
    while (checked < 100) {
        ExprPtr e;
        double roll = u01(rng);
        if (roll < 0.4) {
            double beta = 0.5 + 2.5 * u01(rng);
            e = make_chirp(0.0, ualpha(rng), beta,
                           u01(rng) < 0.5 ? Trig::sin : Trig::cos);
        } else if (roll < 0.7) {
            e = make_power(0.0, ualpha(rng), Side::both, u01(rng) < 0.5);
        } else if (roll < 0.85) {
            e = make_product(make_poly({1.0, 0.5, -0.25}),
                             make_chirp(0.0, ualpha(rng), 1.0, Trig::sin));
        } else {
            e = make_smooth_trig(SmoothE::Kind::exp_k, 0.5, 0.2);
        }
        double x = ux(rng);
        if (std::fabs(x) < 0.4) continue;  // keep clear of the center
        ExprPtr d = differentiate(e);
        double h = 1e-6 * (1.0 + std::fabs(x));
        double fd = (eval(e, x + h) - eval(e, x - h)) / (2 * h);
        double sym = eval(d, x);
        double scale = std::max({1.0, std::fabs(sym), std::fabs(fd)});
        REQUIRE(std::fabs(sym - fd) / scale < 1e-5);
        ++checked;
    }
}

TEST_CASE("print/parse round-trip is structural identity") {
    std::mt19937 rng(987654);
    for (int i = 0; i < 200; ++i) {
        ExprPtr e = random_expr(rng);
        std::string text = print_expr(e);
        INFO(text);
        ExprPtr back = parse_or_throw(text);
        REQUIRE(equal(e, back));
    }
}

TEST_CASE("parse handles the grammar corners") {
    CHECK(eval(parse_or_throw("poly(0,0,3)"), 2.0) == Catch::Approx(12.0));
    CHECK(eval(parse_or_throw("sin(2*x)"), 0.25) == Catch::Approx(std::sin(0.5)));
    CHECK(eval(parse_or_throw("exp(x-1)"), 1.0) == Catch::Approx(1.0));
    CHECK(eval(parse_or_throw("periodic(2; poly(0,1))"), 3.5) == Catch::Approx(1.5));
    CHECK(eval(parse_or_throw("3 * sin(x) + 2"), 0.0) == Catch::Approx(2.0));
    CHECK(eval(parse_or_throw("1 - sin(x)"), 0.0) == Catch::Approx(1.0));
    CHECK(eval(parse_or_throw("(1 + poly(0,1)) * chirp(alpha=0,beta=1,sin)"), 1.0 / M_PI) ==
          Catch::Approx(2.0 * std::sin(M_PI)).margin(1e-15));
}
