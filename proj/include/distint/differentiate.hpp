#pragma once

#include <stdexcept>

#include "distint/expr.hpp"

namespace distint {

/// Symbolic derivative, valid pointwise away from centers. Defined for
/// Sum/Scale/Product combinations of Const, Smooth, Power and Chirp nodes.
/// StepSeq, Indicator and Periodic have no pointwise derivative here.
inline ExprPtr differentiate(const ExprPtr& e) {
    if (std::holds_alternative<ConstE>(e->v)) return make_const(0.0);

    if (const auto* p = std::get_if<PowerE>(&e->v)) {
        if (p->alpha == 0.0) return make_const(0.0);
        // d|r|^a = a |r|^(a-1) sgn(r); multiplying by sgn toggles the flag
        return make_scale(p->alpha, make_power(p->a, p->alpha - 1.0, p->side, !p->sgn));
    }

    if (const auto* c = std::get_if<ChirpE>(&e->v)) {
        std::vector<ExprPtr> terms;
        if (c->alpha != 0.0)
            terms.push_back(make_scale(
                c->alpha, make_chirp(c->a, c->alpha - 1.0, c->beta, c->trig, c->side, !c->sgn)));
        const Trig other = (c->trig == Trig::sin) ? Trig::cos : Trig::sin;
        const double k = (c->trig == Trig::sin) ? -c->beta : c->beta;
        terms.push_back(make_scale(
            k, make_chirp(c->a, c->alpha - c->beta - 1.0, c->beta, other, c->side, !c->sgn)));
        return make_sum(std::move(terms));
    }

    if (const auto* s = std::get_if<SmoothE>(&e->v)) {
        switch (s->kind) {
            case SmoothE::Kind::poly: {
                if (s->coeffs.size() <= 1) return make_const(0.0);
                std::vector<double> d(s->coeffs.size() - 1);
                for (size_t i = 1; i < s->coeffs.size(); ++i)
                    d[i - 1] = s->coeffs[i] * static_cast<double>(i);
                return make_poly(std::move(d));
            }
            case SmoothE::Kind::sin_k:
                return make_scale(s->mul, make_smooth_trig(SmoothE::Kind::cos_k, s->mul, s->off));
            case SmoothE::Kind::cos_k:
                return make_scale(-s->mul, make_smooth_trig(SmoothE::Kind::sin_k, s->mul, s->off));
            case SmoothE::Kind::exp_k:
                return make_scale(s->mul, make_smooth_trig(SmoothE::Kind::exp_k, s->mul, s->off));
            case SmoothE::Kind::ext:
                return s->ext->derivative();
        }
    }

    if (const auto* s = std::get_if<SumE>(&e->v)) {
        std::vector<ExprPtr> terms;
        terms.reserve(s->terms.size());
        for (const auto& t : s->terms) terms.push_back(differentiate(t));
        return make_sum(std::move(terms));
    }

    if (const auto* p = std::get_if<ProductE>(&e->v)) {
        ExprPtr left = make_expr(ProductE{differentiate(p->smooth), p->general});
        ExprPtr right = make_expr(ProductE{p->smooth, differentiate(p->general)});
        return make_sum({left, right});
    }

    if (const auto* s = std::get_if<ScaleE>(&e->v))
        return make_scale(s->k, differentiate(s->inner));

    throw std::domain_error("differentiate: unsupported node");
}

}  // namespace distint
