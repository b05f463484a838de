#pragma once

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "distint/integrate.hpp"

namespace distint {

struct HypothesisViolation : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct ResidualNotBracketed : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Change of variables (types I, II and IV)
// ---------------------------------------------------------------------------

enum class TransformKind { affine, power, inverse };

struct Transform {
    TransformKind kind;
    double p = 1.0, q = 0.0;  // affine: x = p t + q
    double alpha = 1.0;       // power: x = t^alpha on [0, d]
};

struct ChangeOfVariables {
    ExprPtr transformed;
    IntegralResult original;
    IntegralResult substituted;
    double t_lo = 0.0, t_hi = 0.0;  // transformed domain (t_hi may be +inf)
};

namespace detail {

inline ExprPtr power_substitution(const ExprPtr& e, double al) {
    // maps f(x) on [0, d] to f(t^al) * al * t^(al-1)
    if (const auto* c = std::get_if<ConstE>(&e->v))
        return make_scale(c->c * al, make_power(0.0, al - 1.0, Side::right));
    if (const auto* p = std::get_if<PowerE>(&e->v)) {
        if (p->a != 0.0) throw UnsupportedTransform("power substitution needs center 0");
        return make_scale(al, make_power(0.0, al * p->alpha + al - 1.0, Side::right));
    }
    if (const auto* c = std::get_if<ChirpE>(&e->v)) {
        if (c->a != 0.0) throw UnsupportedTransform("power substitution needs center 0");
        return make_expr(ProductE{
            make_scale(al, make_power(0.0, al - 1.0, Side::right)),
            make_chirp(0.0, al * c->alpha, al * c->beta, c->trig, Side::right, c->sgn)});
    }
    if (const auto* i = std::get_if<IndicatorE>(&e->v)) {
        const double lo = i->lo <= 0.0 ? 0.0 : std::pow(i->lo, 1.0 / al);
        return make_expr(ProductE{
            make_indicator(lo, std::pow(i->hi, 1.0 / al)),
            make_scale(al, make_power(0.0, al - 1.0, Side::right))});
    }
    if (const auto* s = std::get_if<ScaleE>(&e->v))
        return make_scale(s->k, power_substitution(s->inner, al));
    if (const auto* s = std::get_if<SumE>(&e->v)) {
        std::vector<ExprPtr> terms;
        for (const auto& t : s->terms) terms.push_back(power_substitution(t, al));
        return make_sum(std::move(terms));
    }
    throw UnsupportedTransform("leaf not closed under the power substitution");
}

inline ExprPtr inverse_substitution(const ExprPtr& e) {
    // maps f(x) on (0, 1] to f(1/t) t^-2 on [1, inf)
    if (const auto* c = std::get_if<ConstE>(&e->v))
        return make_scale(c->c, make_power(0.0, -2.0, Side::right));
    if (const auto* p = std::get_if<PowerE>(&e->v)) {
        if (p->a != 0.0) throw UnsupportedTransform("inverse substitution needs center 0");
        return make_power(0.0, -p->alpha - 2.0, Side::right);
    }
    if (const auto* c = std::get_if<ChirpE>(&e->v)) {
        if (c->a != 0.0) throw UnsupportedTransform("inverse substitution needs center 0");
        if (c->beta != 1.0)
            throw UnsupportedTransform("inverse substitution is closed only for beta = 1");
        // |1/t|^alpha trig(t) t^-2
        ExprPtr trig = make_smooth_trig(
            c->trig == Trig::sin ? SmoothE::Kind::sin_k : SmoothE::Kind::cos_k);
        return make_product(trig, make_power(0.0, -c->alpha - 2.0, Side::right));
    }
    if (const auto* s = std::get_if<ScaleE>(&e->v))
        return make_scale(s->k, inverse_substitution(s->inner));
    if (const auto* s = std::get_if<SumE>(&e->v)) {
        std::vector<ExprPtr> terms;
        for (const auto& t : s->terms) terms.push_back(inverse_substitution(t));
        return make_sum(std::move(terms));
    }
    if (const auto* pr = std::get_if<ProductE>(&e->v)) {
        if (const auto* i = std::get_if<IndicatorE>(&pr->smooth->v)) {
            if (i->lo <= 0.0 && i->hi >= 1.0) return inverse_substitution(pr->general);
        }
        throw UnsupportedTransform("product not closed under the inverse substitution");
    }
    throw UnsupportedTransform("leaf not closed under the inverse substitution");
}

}  // namespace detail

/// Substitutes the variable and returns the transformed integrand together
/// with both side integrals, as a verification surface for the substitution
/// identities. power requires lo = 0; inverse maps (0, 1] to [1, inf) with a
/// Cesaro integral on the unbounded side.
inline ChangeOfVariables change_of_variables(const ExprPtr& e, const Transform& tr,
                                             double lo, double hi,
                                             const Config& cfg = default_config()) {
    ChangeOfVariables out;
    out.original = dist_integrate(e, lo, hi, cfg);
    switch (tr.kind) {
        case TransformKind::affine: {
            ExprPtr mapped = transform_affine(e, tr.p, tr.q);
            out.transformed = make_scale(tr.p, mapped);
            out.t_lo = (lo - tr.q) / tr.p;
            out.t_hi = (hi - tr.q) / tr.p;
            out.substituted = dist_integrate(out.transformed, out.t_lo, out.t_hi, cfg);
            return out;
        }
        case TransformKind::power: {
            if (lo != 0.0)
                throw UnsupportedTransform("power substitution needs the endpoint 0");
            if (!(tr.alpha > 0.0))
                throw UnsupportedTransform("power substitution needs alpha > 0");
            out.transformed = detail::power_substitution(e, tr.alpha);
            out.t_lo = 0.0;
            out.t_hi = std::pow(hi, 1.0 / tr.alpha);
            out.substituted = dist_integrate(out.transformed, out.t_lo, out.t_hi, cfg);
            return out;
        }
        case TransformKind::inverse: {
            if (lo != 0.0 || hi != 1.0)
                throw UnsupportedTransform("inverse substitution maps (0,1] to [1,inf)");
            out.transformed = detail::inverse_substitution(e);
            out.t_lo = 1.0;
            out.t_hi = HUGE_VAL;
            out.substituted = integrate_improper(out.transformed, 1.0, cfg);
            return out;
        }
    }
    throw UnsupportedTransform("unknown transform");
}

// ---------------------------------------------------------------------------
// Moments over the whole line (e.v.-style)
// ---------------------------------------------------------------------------

/// dist int f(x) x^n dx (C), split at the origin into two one-sided improper
/// integrals. EvDisagreement flags opposite infinities.
inline CesaroValue moment(const ExprPtr& e, int n,
                          const Config& cfg = default_config(), int k_max = -1) {
    std::vector<double> coeffs(static_cast<size_t>(n) + 1, 0.0);
    coeffs.back() = 1.0;
    ExprPtr weighted = n == 0 ? e : detail::product_any(make_poly(coeffs), e);

    IntegralResult right = integrate_improper(weighted, 0.0, cfg, k_max);
    ExprPtr mirrored = reflect_about(weighted, 0.0);
    IntegralResult left = integrate_improper(mirrored, 0.0, cfg, k_max);

    CesaroValue out;
    out.order_k = 0;
    const bool rinf = right.status == IntStatus::PlusInfinity ||
                      right.status == IntStatus::MinusInfinity;
    const bool linf = left.status == IntStatus::PlusInfinity ||
                      left.status == IntStatus::MinusInfinity;
    if (rinf && linf && right.status != left.status) {
        out.status = CesaroStatus::EvDisagreement;
        return out;
    }
    if (rinf || linf) {
        out.status = CesaroStatus::Diverged;
        return out;
    }
    if (right.status != IntStatus::Finite || left.status != IntStatus::Finite) {
        out.status = CesaroStatus::Inconclusive;
        return out;
    }
    out.status = CesaroStatus::Converged;
    out.value = right.value + left.value;
    out.diagnostics = right.error_estimate + left.error_estimate;
    return out;
}

// ---------------------------------------------------------------------------
// Peano-derivative reconstruction
// ---------------------------------------------------------------------------

/// f(x) = sum_j inits[j] (x-a)^j / j! + n-fold iterated integral of fn,
/// the iterated integral collapsed through the Cauchy kernel
/// (1/(n-1)!) int_a^x (x-t)^(n-1) fn(t) dt.
inline std::vector<std::pair<double, double>> reconstruct_from_peano(
    const ExprPtr& fn, const std::vector<double>& inits, double a, double n_unused_b,
    int n, const std::vector<double>& grid, const Config& cfg = default_config()) {
    (void)n_unused_b;
    if (static_cast<int>(inits.size()) != n)
        throw std::invalid_argument("reconstruct_from_peano: inits must have length n");
    if (n < 1) throw std::invalid_argument("reconstruct_from_peano: n >= 1");

    double fact_n1 = 1.0;
    for (int i = 2; i <= n - 1; ++i) fact_n1 *= i;

    std::vector<std::pair<double, double>> out;
    for (double x : grid) {
        double taylor = 0.0, fact = 1.0;
        for (int j = 0; j < n; ++j) {
            if (j > 0) fact *= j;
            taylor += inits[static_cast<size_t>(j)] * std::pow(x - a, j) / fact;
        }
        double iterated = 0.0;
        if (n == 1) {
            iterated = dist_integrate(fn, a, x, cfg).value;
        } else {
            // (x - t)^(n-1) expanded in t
            std::vector<double> kernel(static_cast<size_t>(n), 0.0);
            double binom = 1.0;
            for (int i = 0; i <= n - 1; ++i) {
                kernel[static_cast<size_t>(i)] =
                    binom * std::pow(x, n - 1 - i) * ((i % 2) ? -1.0 : 1.0);
                binom *= static_cast<double>(n - 1 - i) / static_cast<double>(i + 1);
            }
            ExprPtr weighted = detail::product_any(make_poly(kernel), fn);
            iterated = dist_integrate(weighted, a, x, cfg).value / fact_n1;
        }
        out.emplace_back(x, taylor + iterated);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Mean value theorems
// ---------------------------------------------------------------------------

enum class MvtKind { first, second, bonnet };

namespace detail {

inline bool contains_step(const ExprPtr& e) {
    if (std::holds_alternative<StepE>(e->v)) return true;
    if (const auto* s = std::get_if<SumE>(&e->v)) {
        for (const auto& t : s->terms)
            if (contains_step(t)) return true;
        return false;
    }
    if (const auto* p = std::get_if<ProductE>(&e->v))
        return contains_step(p->smooth) || contains_step(p->general);
    if (const auto* s = std::get_if<ScaleE>(&e->v)) return contains_step(s->inner);
    if (const auto* p = std::get_if<PeriodicE>(&e->v)) return contains_step(p->base);
    return false;
}

inline double bisect(const std::function<double(double)>& r, double lo, double hi,
                     double rlo, int iters = 200) {
    double rl = rlo;
    for (int i = 0; i < iters; ++i) {
        const double mid = 0.5 * (lo + hi);
        const double rm = r(mid);
        if (rm == 0.0) return mid;
        if ((rl < 0) != (rm < 0))
            hi = mid;
        else {
            lo = mid;
            rl = rm;
        }
    }
    return 0.5 * (lo + hi);
}

}  // namespace detail

/// Finds xi solving the requested mean value identity by a dense scan plus
/// bisection on the continuous residual.
///  first:  int f psi = f(xi) int psi        (f with the Darboux property)
///  second: int f psi = psi(a) F(xi) + psi(b)(F(b) - F(xi))
///  bonnet: int f psi = psi(b) (F(b) - F(xi))  (psi positive increasing)
inline double mvt_find_xi(MvtKind kind, const ExprPtr& f, const ExprPtr& psi, double a,
                          double b, const Config& cfg = default_config()) {
    if (!is_smooth(psi)) throw HypothesisViolation("psi must be smooth");
    const int grid_n = 400;
    std::vector<double> grid(grid_n);
    for (int i = 0; i < grid_n; ++i)
        grid[static_cast<size_t>(i)] =
            a + (b - a) * (i + 0.5) / static_cast<double>(grid_n);

    // hypothesis checks on the sample grid
    if (kind == MvtKind::first || kind == MvtKind::bonnet) {
        for (double x : grid)
            if (!(eval(psi, x) > 0)) throw HypothesisViolation("psi must be positive");
    }
    if (kind == MvtKind::second || kind == MvtKind::bonnet) {
        bool inc = true, dec = true;
        for (int i = 1; i < grid_n; ++i) {
            const double p0 = eval(psi, grid[static_cast<size_t>(i - 1)]);
            const double p1 = eval(psi, grid[static_cast<size_t>(i)]);
            inc = inc && p1 >= p0;
            dec = dec && p1 <= p0;
        }
        if (kind == MvtKind::second && !(inc || dec))
            throw HypothesisViolation("psi must be monotonic");
        if (kind == MvtKind::bonnet && !inc)
            throw HypothesisViolation("psi must be increasing");
    }
    if (detail::contains_step(f))
        throw ResidualNotBracketed(
            "step integrands have a discontinuous indefinite integral");

    IntegralResult fpsi = integrate_against_smooth(f, psi, a, b, cfg);
    if (fpsi.status != IntStatus::Finite)
        throw std::runtime_error("mvt_find_xi: int f psi is not finite");

    std::function<double(double)> residual;
    IndefiniteEvaluator F(f, a, b, cfg);
    double Fb = 0.0, int_psi = 0.0;
    if (kind == MvtKind::first) {
        QuadResult ip = integrate_abs(psi, a, b, cfg);
        int_psi = ip.value;
        residual = [&, int_psi](double xi) {
            return eval(f, xi) * int_psi - fpsi.value;
        };
    } else {
        Fb = F(b);
        if (kind == MvtKind::second) {
            const double pa = eval(psi, a), pb = eval(psi, b);
            residual = [&, pa, pb](double xi) {
                const double Fx = F(xi);
                return pa * Fx + pb * (Fb - Fx) - fpsi.value;
            };
        } else {
            const double pb = eval(psi, b);
            residual = [&, pb](double xi) { return pb * (Fb - F(xi)) - fpsi.value; };
        }
    }

    double prev_x = grid[0];
    double prev_r = residual(prev_x);
    if (prev_r == 0.0) return prev_x;
    for (int i = 1; i < grid_n; ++i) {
        const double x = grid[static_cast<size_t>(i)];
        const double r = residual(x);
        if (r == 0.0) return x;
        if ((prev_r < 0) != (r < 0)) return detail::bisect(residual, prev_x, x, prev_r);
        prev_x = x;
        prev_r = r;
    }
    throw ResidualNotBracketed("no sign change of the mean value residual");
}

}  // namespace distint
