#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "distint/integrate.hpp"
#include "distint/integrate_ops.hpp"
#include "distint/parse.hpp"

using namespace distint;

namespace {

// Abel-regularization oracle for int_1^inf t sin t dt: numerical integrals
// of t sin(t) e^(-eps t) extrapolated to eps -> 0 by Neville in eps. The
// integrals are summed over half-period segments with compensated addition,
// which keeps the roundoff of the heavily cancelling tail near machine level
// so the extrapolation has clean inputs.
double abel_oracle_t_sin_t() {
    std::vector<double> eps, val;
    for (int i = 0; i < 8; ++i) {
        const double e = 0.4 / std::pow(2.0, i);
        auto f = [e](double t) { return t * std::sin(t) * std::exp(-e * t); };
        const double T = M_PI * std::ceil(60.0 / e / M_PI);
        double sum = 0.0, comp = 0.0;
        quad::Budget b{50'000'000};
        for (double z = 1.0; z < T; z += M_PI) {
            const double z2 = std::min(z + M_PI, T);
            quad::Panel p = quad::gk15(f, z, z2, b);
            const double y = p.value - comp;
            const double t = sum + y;
            comp = (t - sum) - y;
            sum = t;
        }
        eps.push_back(e);
        val.push_back(sum);
    }
    for (size_t k = 1; k < val.size(); ++k)
        for (size_t i = val.size() - 1; i >= k; --i)
            val[i] = val[i] + eps[i] * (val[i] - val[i - 1]) / (eps[i - k] - eps[i]);
    return val.back();
}

ExprPtr chirp_m3() { return parse_or_throw("chirp(alpha=-3,beta=1,sin)"); }

}  // namespace

TEST_CASE("step series integral equals -1/2") {
    ExprPtr e = parse_or_throw("step(cn=(-1)^n*n*(n+1))");
    IntegralResult r = dist_integrate(e, 0.0, 1.0);
    CHECK(r.status == IntStatus::Finite);
    CHECK(r.value == Catch::Approx(-0.5).margin(1e-4));
}

TEST_CASE("non-DPHK chirp with dual oracles") {
    const double expect = std::cos(1.0) - std::sin(1.0);

    SECTION("reduction value") {
        IntegralResult r = dist_integrate(chirp_m3(), 0.0, 1.0);
        CHECK(r.status == IntStatus::Finite);
        CHECK(r.value == Catch::Approx(expect).margin(1e-6));
        REQUIRE_FALSE(r.trace.empty());
        CHECK(r.trace.front().strategy == "reduce");
    }
    SECTION("Abel regularization oracle agrees") {
        static const double abel = abel_oracle_t_sin_t();
        CHECK(abel == Catch::Approx(expect).margin(1e-7));
        IntegralResult r = dist_integrate(chirp_m3(), 0.0, 1.0);
        CHECK(r.value == Catch::Approx(abel).margin(1e-5));
    }
    SECTION("Hake fallback agrees") {
        IntegralResult hake =
            dist_integrate(chirp_m3(), 0.0, 1.0, default_config(), Strategy::hake);
        CHECK(hake.status == IntStatus::Finite);
        CHECK(hake.value == Catch::Approx(expect).margin(1e-5));
    }
    SECTION("mirrored center at the right endpoint") {
        // |x-1|^-3 sin(|x-1|^-1) over [0,1] maps to the same value under
        // u = 1 - x
        ExprPtr m = parse_or_throw("chirp(a=1,alpha=-3,beta=1,sin)");
        IntegralResult r = dist_integrate(m, 0.0, 1.0);
        CHECK(r.status == IntStatus::Finite);
        CHECK(r.value == Catch::Approx(expect).margin(1e-6));
    }
}

TEST_CASE("non-integrable powers get infinity statuses") {
    IntegralResult r = dist_integrate(parse_or_throw("pow(alpha=-1)"), 0.0, 1.0);
    CHECK(r.status == IntStatus::PlusInfinity);

    IntegralResult r2 =
        dist_integrate(parse_or_throw("-2 * pow(alpha=-1.5)"), 0.0, 1.0);
    CHECK(r2.status == IntStatus::MinusInfinity);

    // signed 1/x over a symmetric interval: opposite one-sided infinities
    IntegralResult r3 =
        dist_integrate(parse_or_throw("pow(alpha=-1, signed=true)"), -1.0, 1.0);
    CHECK(r3.status == IntStatus::NotIntegrable);
}

TEST_CASE("linearity over random in-family pairs") {
    std::mt19937 rng(77);
    std::uniform_real_distribution<double> u(-2.0, 2.0);
    for (int i = 0; i < 100; ++i) {
        const double al = u(rng), be = u(rng);
        ExprPtr f = make_chirp(0.0, -1.0 - std::fabs(u(rng)), 1.0, Trig::sin);
        ExprPtr g = make_poly({u(rng), u(rng)});
        ExprPtr combo = make_sum({make_scale(al, f), make_scale(be, g)});
        IntegralResult rf = dist_integrate(f, 0.0, 1.0);
        IntegralResult rg = dist_integrate(g, 0.0, 1.0);
        IntegralResult rc = dist_integrate(combo, 0.0, 1.0);
        REQUIRE(rf.status == IntStatus::Finite);
        REQUIRE(rc.status == IntStatus::Finite);
        REQUIRE(std::fabs(rc.value - (al * rf.value + be * rg.value)) <=
                rf.error_estimate + rg.error_estimate + rc.error_estimate + 1e-9);
    }
}

TEST_CASE("additivity at a random interior split") {
    std::mt19937 rng(88);
    std::uniform_real_distribution<double> u(0.05, 0.95);
    ExprPtr e = chirp_m3();
    IntegralResult whole = dist_integrate(e, 0.0, 1.0);
    for (int i = 0; i < 10; ++i) {
        const double c = u(rng);
        IntegralResult l = dist_integrate(e, 0.0, c);
        IntegralResult r = dist_integrate(e, c, 1.0);
        REQUIRE(std::fabs(l.value + r.value - whole.value) <= 1e-8 +
                l.error_estimate + r.error_estimate + whole.error_estimate);
    }
}

TEST_CASE("agrees with absolute integration on Lebesgue fixtures") {
    std::mt19937 rng(99);
    std::uniform_real_distribution<double> u(-2.0, 2.0);
    std::uniform_real_distribution<double> u01(0.0, 1.0);
    for (int i = 0; i < 50; ++i) {
        ExprPtr e;
        switch (i % 4) {
            case 0: e = make_poly({u(rng), u(rng), u(rng)}); break;
            case 1: e = make_scale(1.0 + u01(rng), make_power(0.0, -0.5, Side::right)); break;
            case 2: {
                // bounded chirp
                e = make_chirp(u01(rng), 0.5 * u01(rng), 1.0, Trig::sin);
                break;
            }
            default:
                e = make_product(make_smooth_trig(SmoothE::Kind::exp_k, -1.0, 0.0),
                                 make_poly({1.0, u(rng)}));
        }
        QuadResult abs = integrate_abs(e, 0.0, 1.0);
        IntegralResult dist = dist_integrate(e, 0.0, 1.0);
        REQUIRE(dist.status == IntStatus::Finite);
        const double scale = std::max(1.0, std::fabs(abs.value));
        REQUIRE(std::fabs(dist.value - abs.value) <= 1e-9 * scale);
    }
}

TEST_CASE("null sets do not change the integral") {
    ExprPtr e = chirp_m3();
    IntegralResult base = dist_integrate(e, 0.0, 1.0);
    // an indicator of a near-degenerate interval contributes nothing
    const double c = 0.5;
    ExprPtr padded = make_sum(
        {e, make_scale(1e6, make_indicator(c, std::nextafter(c, 1.0)))});
    IntegralResult r = dist_integrate(padded, 0.0, 1.0);
    CHECK(r.value == Catch::Approx(base.value).margin(1e-8));
}

TEST_CASE("bounded convergence on squeezed chirps") {
    ExprPtr h = chirp_m3();
    IntegralResult target = dist_integrate(h, 0.0, 1.0);
    const double n = 1000.0;
    IntegralResult rn = dist_integrate(make_scale(n / (n + 1.0), h), 0.0, 1.0);
    CHECK(rn.value == Catch::Approx(target.value).margin(1e-5 + std::fabs(target.value) / n));
}

TEST_CASE("monotone convergence for truncated powers") {
    // g_n = min(n, x^-1/2) increases to x^-1/2 with integral 2
    auto truncated = [](double n) {
        // min(n, x^-1/2) = n on [0, n^-2] plus x^-1/2 on [n^-2, 1]
        const double c = 1.0 / (n * n);
        return make_sum({make_scale(n, make_indicator(0.0, c)),
                         detail::product_any(make_indicator(c, 1.0),
                                             make_power(0.0, -0.5, Side::right))});
    };
    double prev = -HUGE_VAL;
    for (double n : {10.0, 100.0, 1000.0, 10000.0}) {
        IntegralResult r = dist_integrate(truncated(n), 0.0, 1.0);
        REQUIRE(r.status == IntStatus::Finite);
        CHECK(r.value >= prev - 1e-12);
        prev = r.value;
    }
    CHECK(prev == Catch::Approx(2.0).margin(1e-3));
}

TEST_CASE("Fatou inequality on the same family") {
    // g_n alternates between two integrable profiles; liminf g_n = min of them
    ExprPtr g1 = parse_or_throw("poly(0,1)");
    ExprPtr g2 = parse_or_throw("poly(0,0,1)");  // x^2 <= x on [0,1]
    IntegralResult liminf_int = dist_integrate(g2, 0.0, 1.0);
    const double i1 = dist_integrate(g1, 0.0, 1.0).value;
    const double i2 = liminf_int.value;
    CHECK(liminf_int.value <= std::min(i1, i2) + 1e-10);
}

TEST_CASE("power weights keep integrability") {
    ExprPtr weighted = parse_or_throw("pow(a=1,alpha=0.5) * chirp(alpha=-3,beta=1,sin)");
    IntegralResult r = dist_integrate(weighted, 0.0, 1.0);
    CHECK(r.status == IntStatus::Finite);
    // cross-check against integration by parts with the same weight handled
    // as a smooth factor away from 1 (value sanity: finite and stable)
    IntegralResult r2 = dist_integrate(weighted, 0.0, 1.0);
    CHECK(r.value == Catch::Approx(r2.value));
}

TEST_CASE("integration against smooth multipliers (DI.3)") {
    SECTION("psi == 1 degenerates to the plain integral") {
        ExprPtr f = chirp_m3();
        IntegralResult direct = dist_integrate(f, 0.0, 1.0);
        IntegralResult parts = integrate_against_smooth(f, make_const(1.0), 0.0, 1.0);
        CHECK(parts.value == Catch::Approx(direct.value).margin(1e-12));
    }
    SECTION("constant against cosine") {
        IntegralResult r = integrate_against_smooth(
            make_const(1.0), make_smooth_trig(SmoothE::Kind::cos_k), 0.0, M_PI);
        CHECK(r.value == Catch::Approx(0.0).margin(1e-10));
    }
    SECTION("chirp against x merges exponents") {
        ExprPtr f = chirp_m3();
        ExprPtr psi = make_poly({0.0, 1.0});
        IntegralResult parts = integrate_against_smooth(f, psi, 0.0, 1.0);
        // oracle: x * x^-3 sin(1/x) = x^-2 sin(1/x), a legal chirp
        IntegralResult merged =
            dist_integrate(parse_or_throw("chirp(alpha=-2,beta=1,sin)"), 0.0, 1.0);
        REQUIRE(merged.status == IntStatus::Finite);
        CHECK(parts.value == Catch::Approx(merged.value).margin(1e-6));
    }
    SECTION("residual on mixed fixtures") {
        std::mt19937 rng(4242);
        std::uniform_real_distribution<double> u(-1.0, 1.0);
        for (int i = 0; i < 20; ++i) {
            ExprPtr f;
            if (i % 2)
                f = make_chirp(0.0, -1.5 - u(rng) * 0.4, 1.0, Trig::sin);
            else
                f = make_poly({u(rng), u(rng), u(rng)});
            ExprPtr psi = make_poly({1.0, 0.5 * u(rng), 0.25 * u(rng)});
            IntegralResult parts = integrate_against_smooth(f, psi, 0.0, 1.0);
            IntegralResult direct =
                dist_integrate(make_product(psi, f), 0.0, 1.0);
            REQUIRE(parts.status == IntStatus::Finite);
            REQUIRE(direct.status == IntStatus::Finite);
            REQUIRE(std::fabs(parts.value - direct.value) <= 1e-6);
        }
    }
}

TEST_CASE("improper integrals toward infinity") {
    SECTION("exponential decay at order zero") {
        IntegralResult r = integrate_improper(parse_or_throw("exp(-1*x)"), 0.0);
        CHECK(r.status == IntStatus::Finite);
        CHECK(r.value == Catch::Approx(1.0).margin(1e-8));
    }
    SECTION("sin integrates to 1 at order one") {
        IntegralResult r = integrate_improper(parse_or_throw("sin(x)"), 0.0);
        CHECK(r.status == IntStatus::Finite);
        CHECK(r.value == Catch::Approx(1.0).margin(1e-3));
    }
    SECTION("t sin t matches the Abel oracle at order two") {
        static const double abel = abel_oracle_t_sin_t();
        IntegralResult r =
            integrate_improper(parse_or_throw("poly(0,1) * sin(x)"), 1.0);
        CHECK(r.status == IntStatus::Finite);
        CHECK(r.value == Catch::Approx(abel).margin(2e-4));
    }
    SECTION("positive divergence is flagged") {
        IntegralResult r = integrate_improper(make_const(1.0), 0.0);
        CHECK(r.status == IntStatus::PlusInfinity);
    }
}

TEST_CASE("change of variables") {
    SECTION("power substitution on x^-1/2") {
        Transform tr{TransformKind::power, 1.0, 0.0, 2.0};
        ChangeOfVariables cv =
            change_of_variables(parse_or_throw("pow(alpha=-0.5)"), tr, 0.0, 1.0);
        CHECK(cv.original.value == Catch::Approx(2.0).margin(1e-8));
        CHECK(cv.substituted.value == Catch::Approx(2.0).margin(1e-8));
    }
    SECTION("inverse substitution ties the chirp to t sin t") {
        Transform tr{TransformKind::inverse};
        ChangeOfVariables cv = change_of_variables(chirp_m3(), tr, 0.0, 1.0);
        REQUIRE(cv.original.status == IntStatus::Finite);
        REQUIRE(cv.substituted.status == IntStatus::Finite);
        CHECK(cv.original.value == Catch::Approx(cv.substituted.value).margin(1e-5));
    }
    SECTION("affine stretch of sine") {
        Transform tr{TransformKind::affine, 2.0, 0.0};
        ChangeOfVariables cv =
            change_of_variables(parse_or_throw("sin(x)"), tr, 0.0, M_PI);
        CHECK(cv.original.value == Catch::Approx(2.0).margin(1e-10));
        CHECK(cv.substituted.value == Catch::Approx(2.0).margin(1e-10));
    }
    SECTION("steps are not closed under the inverse map") {
        Transform tr{TransformKind::inverse};
        CHECK_THROWS_AS(change_of_variables(parse_or_throw("step(cn=1)"), tr, 0.0, 1.0),
                        UnsupportedTransform);
    }
}

TEST_CASE("moments over the line") {
    SECTION("gaussian normalization") {
        // exp(-x^2)
        ExprPtr g = make_smooth_trig(SmoothE::Kind::exp_k, 1.0, 0.0);
        // represent exp(-x^2) via ext node: use product of exp(-x)*... not in
        // grammar; build with an ext smooth node
        auto ext = std::make_shared<ExtSmooth>();
        ext->name = "gauss";
        ext->value = [](double x) { return std::exp(-x * x); };
        ext->derivative = []() -> ExprPtr {
            auto d = std::make_shared<ExtSmooth>();
            d->name = "gauss'";
            d->value = [](double x) { return -2.0 * x * std::exp(-x * x); };
            d->derivative = []() -> ExprPtr {
                throw std::runtime_error("second derivative unused");
            };
            return make_ext_smooth(d);
        };
        ExprPtr gauss = make_ext_smooth(ext);
        (void)g;
        CesaroValue m0 = moment(gauss, 0);
        CHECK(m0.status == CesaroStatus::Converged);
        CHECK(m0.value == Catch::Approx(std::sqrt(M_PI)).margin(1e-6));
        CesaroValue m1 = moment(gauss, 1);
        CHECK(m1.status == CesaroStatus::Converged);
        CHECK(m1.value == Catch::Approx(0.0).margin(1e-8));
    }
    SECTION("compactly supported chirp reduces to quadrature") {
        ExprPtr e = parse_or_throw("chirp(alpha=0,beta=1,sin) * indicator(-1,1)");
        CesaroValue m0 = moment(e, 0);
        CHECK(m0.status == CesaroStatus::Converged);
        QuadResult left = integrate_abs(parse_or_throw("chirp(alpha=0,beta=1,sin)"), -1.0, 0.0);
        QuadResult right = integrate_abs(parse_or_throw("chirp(alpha=0,beta=1,sin)"), 0.0, 1.0);
        CHECK(m0.value == Catch::Approx(left.value + right.value).margin(1e-6));
    }
}

TEST_CASE("Peano reconstruction") {
    SECTION("vanishing top derivative gives the Taylor polynomial") {
        auto vals = reconstruct_from_peano(make_const(0.0), {1.0, 2.0}, 0.0, 1.0, 2,
                                           {0.25, 0.5, 1.0});
        for (const auto& [x, fx] : vals) CHECK(fx == Catch::Approx(1.0 + 2.0 * x).margin(1e-10));
    }
    SECTION("constant second derivative gives the square") {
        auto vals = reconstruct_from_peano(make_const(2.0), {0.0, 0.0}, 0.0, 1.0, 2,
                                           {0.5, 1.0});
        CHECK(vals[0].second == Catch::Approx(0.25).margin(1e-10));
        CHECK(vals[1].second == Catch::Approx(1.0).margin(1e-10));
    }
    SECTION("chirp first derivative matches the indefinite fixture") {
        auto vals = reconstruct_from_peano(chirp_m3(), {0.0}, 0.0, 1.0, 1, {1.0});
        CHECK(vals[0].second ==
              Catch::Approx(std::cos(1.0) - std::sin(1.0)).margin(1e-6));
    }
}

TEST_CASE("mean value theorems") {
    SECTION("first: linear integrand against unit weight") {
        double xi = mvt_find_xi(MvtKind::first, parse_or_throw("poly(0,1)"),
                                make_const(1.0), 0.0, 1.0);
        CHECK(xi == Catch::Approx(0.5).margin(1e-8));
    }
    SECTION("second: residual vanishes at the reported point") {
        ExprPtr f = parse_or_throw("poly(0,1)");
        ExprPtr psi = parse_or_throw("exp(x)");
        double xi = mvt_find_xi(MvtKind::second, f, psi, 0.0, 1.0);
        IndefiniteEvaluator F(f, 0.0, 1.0);
        const double lhs = integrate_against_smooth(f, psi, 0.0, 1.0).value;
        const double res =
            eval(psi, 0.0) * F(xi) + eval(psi, 1.0) * (F(1.0) - F(xi)) - lhs;
        CHECK(std::fabs(res) <= 1e-8);
    }
    SECTION("bonnet: chirp against 1+x") {
        ExprPtr f = chirp_m3();
        ExprPtr psi = parse_or_throw("poly(1,1)");
        double xi = mvt_find_xi(MvtKind::bonnet, f, psi, 0.0, 1.0);
        IndefiniteEvaluator F(f, 0.0, 1.0);
        const double lhs = integrate_against_smooth(f, psi, 0.0, 1.0).value;
        const double res = eval(psi, 1.0) * (F(1.0) - F(xi)) - lhs;
        CHECK(std::fabs(res) <= 1e-6);
    }
    SECTION("hypothesis violations are reported") {
        CHECK_THROWS_AS(mvt_find_xi(MvtKind::bonnet, parse_or_throw("poly(0,1)"),
                                    parse_or_throw("exp(-1*x)"), 0.0, 1.0),
                        HypothesisViolation);
        CHECK_THROWS_AS(mvt_find_xi(MvtKind::second, parse_or_throw("poly(0,1)"),
                                    parse_or_throw("sin(10*x)"), 0.0, 1.0),
                        HypothesisViolation);
        CHECK_THROWS_AS(mvt_find_xi(MvtKind::bonnet, parse_or_throw("step(cn=1)"),
                                    parse_or_throw("poly(1,1)"), 0.0, 1.0),
                        ResidualNotBracketed);
    }
}

TEST_CASE("hake consistency: reduction and endpoint limit agree when forced") {
    IntegralResult red =
        dist_integrate(chirp_m3(), 0.0, 1.0, default_config(), Strategy::reduction);
    IntegralResult hk =
        dist_integrate(chirp_m3(), 0.0, 1.0, default_config(), Strategy::hake);
    REQUIRE(red.status == IntStatus::Finite);
    REQUIRE(hk.status == IntStatus::Finite);
    CHECK(std::fabs(red.value - hk.value) <= 1e-5);
}

TEST_CASE("indefinite integral samples") {
    auto pts = indefinite(make_const(2.0), 0.0, {0.5, 1.0});
    CHECK(pts[0].second.value == Catch::Approx(1.0));
    CHECK(pts[1].second.value == Catch::Approx(2.0));

    auto chirp_pts = indefinite(chirp_m3(), 0.0, {1.0});
    CHECK(chirp_pts[0].second.value ==
          Catch::Approx(std::cos(1.0) - std::sin(1.0)).margin(1e-6));

    // step: F(1) - F(1/2) equals the first cell contribution a_1
    ExprPtr st = parse_or_throw("step(cn=(-1)^n*n*(n+1))");
    auto sp = indefinite(st, 0.0, {0.5, 1.0});
    const double a1 = -1.0 * 2.0 * (1.0 - 0.5);
    CHECK(sp[1].second.value - sp[0].second.value == Catch::Approx(a1).margin(1e-4));
}
