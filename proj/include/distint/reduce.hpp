#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

#include "distint/config.hpp"
#include "distint/differentiate.hpp"
#include "distint/expr.hpp"

namespace distint {

/// Rewrite of a chirp term as f = G' + h with G a closed-form sum of
/// higher-exponent chirps (value 0 at the center) and h absolutely
/// integrable near the center.
struct Reduction {
    ExprPtr G;
    ExprPtr h;
    int steps = 0;
    double center = 0.0;
};

namespace detail {

struct ChirpTermParts {
    double scale = 1.0;
    std::vector<ExprPtr> cofactors;  // symbolically differentiable cofactors
    const ChirpE* chirp = nullptr;
};

inline void split_chirp_term(const ExprPtr& e, ChirpTermParts& out) {
    if (const auto* sc = std::get_if<ScaleE>(&e->v)) {
        out.scale *= sc->k;
        split_chirp_term(sc->inner, out);
        return;
    }
    if (const auto* p = std::get_if<ProductE>(&e->v)) {
        split_chirp_term(p->smooth, out);
        split_chirp_term(p->general, out);
        return;
    }
    if (const auto* c = std::get_if<ChirpE>(&e->v)) {
        if (out.chirp) throw std::invalid_argument("chirp_reduce: two chirp factors");
        out.chirp = c;
        return;
    }
    if (const auto* c = std::get_if<ConstE>(&e->v)) {
        out.scale *= c->c;
        return;
    }
    out.cofactors.push_back(e);
}

/// Cofactors must be differentiable away from their own centers; power
/// weights ((x-a)^beta, beta > 0) ride along on pieces that exclude a.
inline bool differentiable_cofactor(const ExprPtr& e) {
    if (std::holds_alternative<StepE>(e->v)) return false;
    if (std::holds_alternative<IndicatorE>(e->v)) return false;
    if (std::holds_alternative<PeriodicE>(e->v)) return false;
    if (const auto* s = std::get_if<SumE>(&e->v)) {
        for (const auto& t : s->terms)
            if (!differentiable_cofactor(t)) return false;
        return true;
    }
    if (const auto* p = std::get_if<ProductE>(&e->v))
        return differentiable_cofactor(p->smooth) && differentiable_cofactor(p->general);
    if (const auto* s = std::get_if<ScaleE>(&e->v))
        return differentiable_cofactor(s->inner);
    return true;
}

inline ExprPtr product_any(ExprPtr a, ExprPtr b) {
    if (is_smooth(a)) return make_product(std::move(a), std::move(b));
    if (is_smooth(b)) return make_product(std::move(b), std::move(a));
    double k = 1.0;
    if (const auto* sc = std::get_if<ScaleE>(&a->v)) { k *= sc->k; a = sc->inner; }
    if (const auto* sc = std::get_if<ScaleE>(&b->v)) { k *= sc->k; b = sc->inner; }
    return make_scale(k, make_expr(ProductE{std::move(a), std::move(b)}));
}

inline ExprPtr cofactor_chain(const std::vector<ExprPtr>& factors, ExprPtr core) {
    ExprPtr out = std::move(core);
    for (auto it = factors.rbegin(); it != factors.rend(); ++it)
        out = product_any(*it, out);
    return out;
}

}  // namespace detail

/// chirp_reduce on a term c * psi(x) * |x-a|^alpha trig(|x-a|^-beta).
///
/// One step rewrites (right-sided form, center shifted to 0)
///   x^a sin(x^-b) = (1/b) d/dx[x^(a+b+1) cos(x^-b)] - ((a+b+1)/b) x^(a+b) cos(x^-b)
/// and the sin/cos mirror; iterating drives every non-derivative exponent
/// past -1 + margin. Boundary terms collect in G (their exponents rise by
/// beta per step and are all positive once alpha > -1 - beta; for steeper
/// chirps the leading G exponents stay nonpositive and the value of G at the
/// center is the Lojasiewicz point value 0, which eval_at encodes for every
/// chirp). Smooth cofactors ride along by the product rule; the psi' G
/// corrections are reduced recursively.
inline Reduction chirp_reduce(const ExprPtr& f, double margin = default_config().margin) {
    detail::ChirpTermParts parts;
    detail::split_chirp_term(f, parts);
    if (!parts.chirp) throw std::invalid_argument("chirp_reduce: no chirp factor");
    const ChirpE chirp = *parts.chirp;
    if (chirp.side != Side::right)
        throw std::invalid_argument(
            "chirp_reduce: needs the right-sided form (reflect left pieces first)");
    for (const auto& s : parts.cofactors)
        if (!detail::differentiable_cofactor(s))
            throw std::invalid_argument("chirp_reduce: non-differentiable cofactor");

    Reduction out;
    out.center = chirp.a;

    struct Pending {
        double coef;
        double alpha;
        Trig trig;
    };
    std::vector<Pending> pending{{parts.scale, chirp.alpha, chirp.trig}};
    std::vector<ExprPtr> g_terms, h_terms;
    const double beta = chirp.beta;
    auto chirp_of = [&](double alpha, Trig trig) {
        // the sign flag is idle on the right half-line
        return make_chirp(chirp.a, alpha, beta, trig, Side::right, false);
    };

    int steps = 0;
    while (!pending.empty()) {
        Pending t = pending.back();
        pending.pop_back();
        if (t.coef == 0.0) continue;
        if (t.alpha > -1.0 + margin) {
            h_terms.push_back(make_scale(t.coef, chirp_of(t.alpha, t.trig)));
            continue;
        }
        ++steps;
        const double lead = t.alpha + beta + 1.0;
        if (t.trig == Trig::sin) {
            g_terms.push_back(make_scale(t.coef / beta, chirp_of(lead, Trig::cos)));
            pending.push_back({-t.coef * lead / beta, t.alpha + beta, Trig::cos});
        } else {
            g_terms.push_back(make_scale(-t.coef / beta, chirp_of(lead, Trig::sin)));
            pending.push_back({t.coef * lead / beta, t.alpha + beta, Trig::sin});
        }
    }
    out.steps = steps;

    ExprPtr G_chirps = make_sum(g_terms);
    ExprPtr h_chirps = make_sum(h_terms);
    if (parts.cofactors.empty()) {
        out.G = G_chirps;
        out.h = h_chirps;
        return out;
    }

    // f = psi (G' + h) = (psi G)' - psi' G + psi h
    out.G = detail::cofactor_chain(parts.cofactors, G_chirps);
    std::vector<ExprPtr> h_parts;
    if (!h_terms.empty())
        h_parts.push_back(detail::cofactor_chain(parts.cofactors, h_chirps));
    ExprPtr psi = parts.cofactors.size() == 1
                      ? parts.cofactors[0]
                      : detail::cofactor_chain(
                            std::vector<ExprPtr>(parts.cofactors.begin() + 1,
                                                 parts.cofactors.end()),
                            parts.cofactors[0]);
    ExprPtr dpsi = differentiate(psi);
    for (const auto& g : g_terms) {
        // -psi' * g may still carry a low exponent; recurse on it
        ExprPtr corr = make_scale(-1.0, detail::product_any(dpsi, g));
        detail::ChirpTermParts cp;
        detail::split_chirp_term(corr, cp);
        if (cp.chirp && cp.chirp->alpha <= -1.0 + margin) {
            Reduction sub = chirp_reduce(corr, margin);
            out.G = make_sum({out.G, sub.G});
            h_parts.push_back(sub.h);
            out.steps += sub.steps;
        } else {
            h_parts.push_back(corr);
        }
    }
    out.h = make_sum(std::move(h_parts));
    return out;
}

}  // namespace distint
