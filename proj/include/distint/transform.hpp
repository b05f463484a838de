#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

#include "distint/expr.hpp"

namespace distint {

struct UnsupportedTransform : std::runtime_error {
    using std::runtime_error::runtime_error;
};

namespace detail {

inline std::vector<double> poly_compose_affine(const std::vector<double>& c, double p,
                                               double q) {
    // coefficients of sum c_i (p t + q)^i by Horner in the polynomial ring
    std::vector<double> out{0.0};
    for (size_t i = c.size(); i-- > 0;) {
        // out = out * (p t + q) + c[i]
        std::vector<double> next(out.size() + 1, 0.0);
        for (size_t j = 0; j < out.size(); ++j) {
            next[j] += out[j] * q;
            next[j + 1] += out[j] * p;
        }
        next[0] += c[i];
        while (next.size() > 1 && next.back() == 0.0) next.pop_back();
        out = std::move(next);
    }
    return out;
}

}  // namespace detail

/// t |-> e(p*t + q) as a mapped expression (no Jacobian factor).
/// Chirps and steps only survive |p| == 1 (their inner scale is fixed).
inline ExprPtr transform_affine(const ExprPtr& e, double p, double q) {
    if (p == 0.0) throw UnsupportedTransform("affine transform needs p != 0");
    if (const auto* c = std::get_if<ConstE>(&e->v)) return make_const(c->c);
    if (const auto* pw = std::get_if<PowerE>(&e->v)) {
        const double a = (pw->a - q) / p;
        Side side = pw->side;
        double sign = 1.0;
        if (p < 0 && side == Side::right) side = Side::left;
        else if (p < 0 && side == Side::left) side = Side::right;
        if (pw->sgn && p < 0) sign = -1.0;
        return make_scale(sign * std::pow(std::fabs(p), pw->alpha),
                          make_power(a, pw->alpha, side, pw->sgn));
    }
    if (const auto* c = std::get_if<ChirpE>(&e->v)) {
        if (std::fabs(p) != 1.0)
            throw UnsupportedTransform("chirp is not closed under inner scaling");
        const double a = (c->a - q) / p;
        Side side = c->side;
        double sign = 1.0;
        if (p < 0 && side == Side::right) side = Side::left;
        else if (p < 0 && side == Side::left) side = Side::right;
        if (c->sgn && p < 0) sign = -1.0;
        return make_scale(sign, make_chirp(a, c->alpha, c->beta, c->trig, side, c->sgn));
    }
    if (const auto* s = std::get_if<StepE>(&e->v)) {
        if (p != 1.0) throw UnsupportedTransform("step is only closed under translation");
        return make_step(s->a - q, s->coeff);
    }
    if (const auto* i = std::get_if<IndicatorE>(&e->v)) {
        double lo = (i->lo - q) / p, hi = (i->hi - q) / p;
        if (lo > hi) std::swap(lo, hi);
        return make_indicator(lo, hi);
    }
    if (const auto* s = std::get_if<SmoothE>(&e->v)) {
        switch (s->kind) {
            case SmoothE::Kind::poly:
                return make_poly(detail::poly_compose_affine(s->coeffs, p, q));
            case SmoothE::Kind::sin_k:
            case SmoothE::Kind::cos_k:
            case SmoothE::Kind::exp_k:
                return make_smooth_trig(s->kind, s->mul * p, s->mul * q + s->off);
            case SmoothE::Kind::ext: {
                // compose the closure with the affine map
                auto orig = s->ext;
                auto composed = std::make_shared<ExtSmooth>();
                composed->name = orig->name + "@affine";
                composed->value = [orig, p, q](double t) { return orig->value(p * t + q); };
                composed->derivative = [orig, p, q]() {
                    return make_scale(p, transform_affine(orig->derivative(), p, q));
                };
                return make_ext_smooth(composed);
            }
        }
    }
    if (const auto* s = std::get_if<SumE>(&e->v)) {
        std::vector<ExprPtr> terms;
        terms.reserve(s->terms.size());
        for (const auto& t : s->terms) terms.push_back(transform_affine(t, p, q));
        return make_sum(std::move(terms));
    }
    if (const auto* pr = std::get_if<ProductE>(&e->v)) {
        ExprPtr a = transform_affine(pr->smooth, p, q);
        ExprPtr b = transform_affine(pr->general, p, q);
        if (is_smooth(a)) return make_product(a, b);
        if (is_smooth(b)) return make_product(b, a);
        double k = 1.0;
        if (const auto* sc = std::get_if<ScaleE>(&a->v)) { k *= sc->k; a = sc->inner; }
        if (const auto* sc = std::get_if<ScaleE>(&b->v)) { k *= sc->k; b = sc->inner; }
        return make_scale(k, make_expr(ProductE{a, b}));
    }
    if (const auto* s = std::get_if<ScaleE>(&e->v))
        return make_scale(s->k, transform_affine(s->inner, p, q));
    if (std::holds_alternative<PeriodicE>(e->v))
        throw UnsupportedTransform("periodic is not closed under affine maps");
    throw UnsupportedTransform("unsupported node in affine transform");
}

/// Reflection through the point c: x |-> 2c - x.
inline ExprPtr reflect_about(const ExprPtr& e, double c) {
    return transform_affine(e, -1.0, 2.0 * c);
}

}  // namespace distint
