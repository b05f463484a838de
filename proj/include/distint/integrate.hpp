#pragma once

#include <cmath>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "distint/cesaro.hpp"
#include "distint/config.hpp"
#include "distint/expr.hpp"
#include "distint/quadrature.hpp"
#include "distint/reduce.hpp"
#include "distint/transform.hpp"

namespace distint {

enum class IntStatus { Finite, PlusInfinity, MinusInfinity, NotIntegrable, Inconclusive };

inline const char* to_string(IntStatus s) {
    switch (s) {
        case IntStatus::Finite: return "Finite";
        case IntStatus::PlusInfinity: return "PlusInfinity";
        case IntStatus::MinusInfinity: return "MinusInfinity";
        case IntStatus::NotIntegrable: return "NotIntegrable";
        case IntStatus::Inconclusive: return "Inconclusive";
    }
    return "?";
}

struct TraceEntry {
    double lo, hi;
    std::string strategy;
    double value = 0.0;
    double error = 0.0;
    std::string note;
};

struct IntegralResult {
    double value = 0.0;
    IntStatus status = IntStatus::Finite;
    double error_estimate = 0.0;
    std::vector<TraceEntry> trace;
};

enum class Strategy { automatic, abs_only, reduction, series, hake };

namespace detail {

inline IntStatus combine_status(IntStatus a, IntStatus b) {
    if (a == IntStatus::NotIntegrable || b == IntStatus::NotIntegrable)
        return IntStatus::NotIntegrable;
    if (a == IntStatus::Inconclusive || b == IntStatus::Inconclusive)
        return IntStatus::Inconclusive;
    const bool ap = a == IntStatus::PlusInfinity, am = a == IntStatus::MinusInfinity;
    const bool bp = b == IntStatus::PlusInfinity, bm = b == IntStatus::MinusInfinity;
    if ((ap && bm) || (am && bp)) return IntStatus::NotIntegrable;
    if (ap || bp) return IntStatus::PlusInfinity;
    if (am || bm) return IntStatus::MinusInfinity;
    return IntStatus::Finite;
}

inline void merge(IntegralResult& acc, IntegralResult&& part) {
    acc.status = combine_status(acc.status, part.status);
    if (acc.status == IntStatus::Finite) acc.value += part.value;
    acc.error_estimate += part.error_estimate;
    for (auto& t : part.trace) acc.trace.push_back(std::move(t));
}

/// One-sided sign of the term as x approaches `center` from inside [u, v].
inline int sign_near(const ExprPtr& term, double center, double u, double v) {
    const double into = (center == u) ? 1.0 : -1.0;
    int pos = 0, neg = 0;
    for (double d : {1e-3, 1e-5, 1e-7, 1e-9}) {
        const double x = center + into * d * (v - u);
        const double val = eval(term, x);
        if (std::isnan(val)) continue;
        (val >= 0 ? pos : neg)++;
    }
    if (pos > 0 && neg == 0) return 1;
    if (neg > 0 && pos == 0) return -1;
    return 0;
}

/// Replaces both-sided hard nodes centered at `center` by their right-sided
/// restriction (the term is only evaluated to the right of the center).
inline ExprPtr restrict_right(const ExprPtr& e, double center) {
    if (const auto* c = std::get_if<ChirpE>(&e->v)) {
        if (c->a == center && c->side == Side::both)
            return make_chirp(c->a, c->alpha, c->beta, c->trig, Side::right, c->sgn);
        return e;
    }
    if (const auto* p = std::get_if<PowerE>(&e->v)) {
        if (p->a == center && p->side == Side::both)
            return make_power(p->a, p->alpha, Side::right, p->sgn);
        return e;
    }
    if (const auto* pr = std::get_if<ProductE>(&e->v)) {
        ExprPtr a = restrict_right(pr->smooth, center);
        ExprPtr b = restrict_right(pr->general, center);
        return make_expr(ProductE{a, b});
    }
    if (const auto* s = std::get_if<ScaleE>(&e->v))
        return make_scale(s->k, restrict_right(s->inner, center));
    if (const auto* s = std::get_if<SumE>(&e->v)) {
        std::vector<ExprPtr> terms;
        for (const auto& t : s->terms) terms.push_back(restrict_right(t, center));
        return make_sum(std::move(terms));
    }
    return e;
}

/// Reduction strategy on a piece whose left endpoint u is the chirp center:
/// value = psi(v) G(v) - 0 + int_u^v h (the Lojasiewicz boundary value of G
/// at its center is zero).
inline IntegralResult reduce_right_piece(const ExprPtr& term, double u, double v,
                                         const Config& cfg) {
    IntegralResult out;
    Reduction red = chirp_reduce(restrict_right(term, u), cfg.margin);
    const double g_far = eval(red.G, v);
    QuadResult hq = integrate_abs(red.h, u, v, cfg);
    out.value = g_far + hq.value;
    out.error_estimate = hq.abs_error_estimate;
    if (!hq.converged) out.error_estimate += std::fabs(hq.value) * 1e-6;
    TraceEntry te{u, v, "reduce", out.value, out.error_estimate,
                  "steps=" + std::to_string(red.steps)};
    out.trace.push_back(te);
    return out;
}

/// Series strategy for a step piece reaching down to the accumulation point.
inline IntegralResult step_series_piece(const ExprPtr& term, const HardInfo& hard,
                                        double u, double v, const Config& cfg) {
    IntegralResult out;
    const double a = hard.center;
    const double vv = std::min(v, a + 1.0);
    if (vv <= u) {
        out.trace.push_back({u, v, "zero", 0.0, 0.0, "outside step support"});
        return out;
    }
    // exact handling of the (possibly partial) top cell
    long n0 = step_cell_index(std::nextafter(vv - a, 0.0));
    if (n0 < 1) n0 = 1;
    double head = 0.0, head_err = 0.0;
    const double cell_lo = a + 1.0 / (n0 + 1);
    if (vv > cell_lo) {
        QuadResult q = integrate_abs(term, cell_lo, vv, cfg);
        head = q.value;
        head_err = q.abs_error_estimate;
    }
    // Cesaro series over the remaining whole cells, with the smooth cofactor
    // sampled at cell midpoints
    auto cell_term = [&](long j) {
        const long n = n0 + j;
        const double lo = a + 1.0 / (n + 1), hi = a + 1.0 / n;
        const double cn = seq_eval(hard.step->coeff, n);
        if (cn == 0.0) return 0.0;
        const double mid = 0.5 * (lo + hi);
        const double cof = eval(term, mid) / cn;
        return cn * cof * (hi - lo);
    };
    const long N = 1'000'000;
    CesaroValue cv = cesaro_sum_auto(cell_term, N, cfg);
    TraceEntry te{u, v, "series", head + cv.value, head_err + cv.diagnostics,
                  "k=" + std::to_string(cv.order_k) + " status=" + to_string(cv.status)};
    out.trace.push_back(te);
    if (cv.status == CesaroStatus::Converged) {
        out.value = head + cv.value;
        out.error_estimate = head_err + cv.diagnostics;
        return out;
    }
    if (cv.status == CesaroStatus::Diverged) {
        int sg = 0;
        const double tail1 = cell_term(N / 2), tail2 = cell_term(N / 2 + 1);
        if (tail1 > 0 && tail2 > 0) sg = 1;
        if (tail1 < 0 && tail2 < 0) sg = -1;
        out.status = sg > 0   ? IntStatus::PlusInfinity
                     : sg < 0 ? IntStatus::MinusInfinity
                              : IntStatus::NotIntegrable;
        return out;
    }
    out.status = IntStatus::Inconclusive;
    return out;
}

/// Hake endpoint engine: the distributional integral over [u, v] with the
/// only obstruction at x = v equals the Cesaro limit at infinity of the
/// indefinite integral in the inverted phase variable tau = (v - x)^-beta
/// (types II/IV change of variables). The k-fold average collapses by
/// Fubini into a single kernel-weighted integral of the integrand.
inline IntegralResult hake_right_endpoint(const ExprPtr& term, const HardInfo& hard,
                                          double u, double v, const Config& cfg) {
    IntegralResult out;
    const double beta = hard.kind == HardInfo::Kind::chirp ? hard.beta : 1.0;
    auto tau_of = [&](double xi) { return std::pow(v - xi, -beta); };
    auto xi_of = [&](double tau) { return v - std::pow(tau, -1.0 / beta); };

    const double tau_u = tau_of(u);
    const double x0 = 2.0 * tau_u + 2.0;
    const double X = std::max(2.0 * cfg.limit_x_max, 100.0 * x0);
    QuadResult g0 = integrate_abs(term, u, xi_of(x0), cfg);

    const int m = std::max(14, cfg.limit_samples);
    const double span = 1.2;
    std::vector<double> xs(m);
    for (int i = 0; i < m; ++i)
        xs[i] = X * std::pow(10.0, span * (-1.0 + static_cast<double>(i) / (m - 1)));

    // raw indefinite samples (k = 0), accumulated in one pass
    detail::LimitSamples raw;
    raw.x = xs;
    {
        double acc = g0.value;
        double prev = xi_of(x0);
        for (int i = 0; i < m; ++i) {
            const double xi = xi_of(xs[i]);
            acc += integrate_abs(term, prev, xi, cfg).value;
            prev = xi;
            raw.value.push_back(acc);
        }
    }
    CesaroValue best = detail::assess_limit_samples(raw, 0, cfg);
    if (best.status == CesaroStatus::Converged) {
        out.value = best.value;
        out.error_estimate = best.diagnostics + g0.abs_error_estimate;
        out.trace.push_back({u, v, "hake", out.value, out.error_estimate, "k=0"});
        return out;
    }

    // growth exponent of the raw envelope picks the first worthwhile order
    double head_env = 0.0, tail_env = 0.0;
    for (int i = 0; i < m / 2; ++i) head_env = std::max(head_env, std::fabs(raw.value[i]));
    for (int i = m / 2; i < m; ++i) tail_env = std::max(tail_env, std::fabs(raw.value[i]));
    int k_start = 1;
    if (tail_env > 4.0 * head_env && head_env > 0)
        k_start = std::min(cfg.k_max, 1 + static_cast<int>(std::ceil(
                                              std::log10(tail_env / head_env) / span)));

    const bool is_chirp = hard.kind == HardInfo::Kind::chirp;
    bool refined = false;
    CesaroValue settled;
    for (int k = std::max(1, k_start); k <= cfg.k_max; ++k) {
        detail::LimitSamples s;
        s.x = xs;
        for (int i = 0; i < m; ++i) {
            const double x = xs[i];
            const double mass = detail::avg_kernel_int(k - 1, x0, x);
            double integral = g0.value * mass;
            // kernel-weighted part over xi in (xi_of(x0), xi_of(x))
            if (is_chirp) {
                // phase-domain segments between trig zeros, one GK panel each
                auto g = [&](double tau) {
                    const double r = std::pow(tau, -1.0 / beta);
                    const double xi = v - r;
                    return eval(term, xi) * (r / (beta * tau)) *
                           detail::avg_kernel_int(k - 1, tau, x);
                };
                quad::Budget budget{cfg.quad_budget};
                const double offset = (hard.trig == Trig::sin) ? 0.0 : -0.5 * M_PI;
                double z = offset + M_PI * std::ceil((x0 - offset) / M_PI);
                if (z < x0) z += M_PI;
                QuadResult headq = quad::adaptive(g, x0, std::min(z, x), 1e-12, 1e-10, budget);
                double sum = headq.value, err = headq.abs_error_estimate;
                while (z < x) {
                    const double z2 = std::min(z + M_PI, x);
                    quad::Panel p = quad::gk15(g, z, z2, budget);
                    sum += p.value;
                    err += p.err;
                    z = z2;
                }
                integral += sum;
                out.error_estimate += err / mass / m;
            } else {
                auto g = [&](double xi) {
                    return eval(term, xi) * detail::avg_kernel_int(k - 1, tau_of(xi), x);
                };
                quad::Budget budget{cfg.quad_budget};
                QuadResult q = quad::adaptive(g, xi_of(x0), xi_of(x), 1e-10 * mass,
                                              1e-10, budget);
                integral += q.value;
                out.error_estimate += q.abs_error_estimate / mass / m;
            }
            s.value.push_back(integral / mass);
        }
        CesaroValue cv = detail::assess_limit_samples(s, k, cfg);
        if (cv.status == CesaroStatus::Converged) {
            // one refinement pass: the next order damps the base-point
            // artifacts by an extra 1/x and regularity keeps the value
            if (!refined && k < cfg.k_max) {
                refined = true;
                settled = cv;
                continue;
            }
            const double use = (refined && std::fabs(cv.value - settled.value) <
                                               10.0 * cfg.cesaro_tol)
                                   ? cv.value
                                   : (refined ? settled.value : cv.value);
            out.value = use;
            out.error_estimate += cv.diagnostics + g0.abs_error_estimate;
            out.trace.push_back({u, v, "hake", out.value, out.error_estimate,
                                 "k=" + std::to_string(k)});
            return out;
        }
        if (refined) {  // refinement failed to converge; keep the settled one
            out.value = settled.value;
            out.error_estimate += settled.diagnostics + g0.abs_error_estimate;
            out.trace.push_back({u, v, "hake", out.value, out.error_estimate,
                                 "k=" + std::to_string(settled.order_k)});
            return out;
        }
        best = cv;
    }

    if (refined) {
        out.value = settled.value;
        out.error_estimate += settled.diagnostics + g0.abs_error_estimate;
        out.trace.push_back({u, v, "hake", out.value, out.error_estimate,
                             "k=" + std::to_string(settled.order_k)});
        return out;
    }
    if (best.status == CesaroStatus::Diverged) {
        const int sg = sign_near(term, v, u, v);
        out.status = sg > 0   ? IntStatus::PlusInfinity
                     : sg < 0 ? IntStatus::MinusInfinity
                              : IntStatus::NotIntegrable;
    } else {
        out.status = IntStatus::Inconclusive;
    }
    out.trace.push_back({u, v, "hake", 0.0, 0.0, "no order converged"});
    return out;
}

inline IntegralResult hake_piece(const ExprPtr& term, const HardInfo& hard, double u,
                                 double v, const Config& cfg) {
    if (hard.center == v) return hake_right_endpoint(term, hard, u, v, cfg);
    // mirror a left obstruction to the right-endpoint form
    ExprPtr mirrored = reflect_about(term, hard.center);
    HardInfo mh;
    find_hard(mirrored, mh);
    return hake_right_endpoint(mirrored, mh, 2.0 * hard.center - v, hard.center, cfg);
}

inline IntegralResult abs_piece(const ExprPtr& term, double u, double v,
                                const Config& cfg) {
    IntegralResult out;
    QuadResult q = integrate_abs(term, u, v, cfg);
    out.value = q.value;
    out.error_estimate = q.abs_error_estimate;
    if (!q.converged) out.status = IntStatus::Inconclusive;
    out.trace.push_back({u, v, "abs", q.value, q.abs_error_estimate,
                         q.converged ? "" : "not converged"});
    return out;
}

/// Strategy dispatch for one term on one piece (no singular points inside).
inline IntegralResult integrate_piece(const ExprPtr& term, const HardInfo& hard,
                                      double u, double v, const Config& cfg,
                                      Strategy force) {
    IntegralResult out;
    if (dead_side(hard, u, v)) {
        out.trace.push_back({u, v, "zero", 0.0, 0.0, "dead side"});
        return out;
    }

    // a hard center at one end and another structural point at the other end
    // (a power weight, say) would poison the reduction's cofactor
    // derivatives; split so each half sees one troubled endpoint
    if (hard.kind != HardInfo::Kind::none && hard.alpha <= -1.0 &&
        (hard.center == u || hard.center == v)) {
        const double other = (hard.center == u) ? v : u;
        const double w = 1e-9 * (1.0 + std::fabs(other));
        if (!singular_points(term, other - w, other + w).empty()) {
            const double mid = 0.5 * (u + v);
            IntegralResult left = integrate_piece(term, hard, u, mid, cfg, force);
            IntegralResult right = integrate_piece(term, hard, mid, v, cfg, force);
            merge(left, std::move(right));
            return left;
        }
    }

    if (force == Strategy::hake && hard.kind != HardInfo::Kind::none &&
        (hard.center == u || hard.center == v))
        return hake_piece(term, hard, u, v, cfg);

    switch (hard.kind) {
        case HardInfo::Kind::none:
            return abs_piece(term, u, v, cfg);

        case HardInfo::Kind::power: {
            if (hard.center != u && hard.center != v)
                return abs_piece(term, u, v, cfg);  // smooth on this piece
            if (hard.alpha > -1.0) return abs_piece(term, u, v, cfg);
            const int sg = sign_near(term, hard.center, u, v);
            out.status = sg > 0   ? IntStatus::PlusInfinity
                         : sg < 0 ? IntStatus::MinusInfinity
                                  : IntStatus::NotIntegrable;
            out.trace.push_back({u, v, "power", 0.0, 0.0,
                                 std::string("alpha <= -1, ") + to_string(out.status)});
            return out;
        }

        case HardInfo::Kind::chirp: {
            if (hard.center != u && hard.center != v)
                return abs_piece(term, u, v, cfg);
            if (hard.alpha > -1.0 && force != Strategy::reduction)
                return abs_piece(term, u, v, cfg);
            if (hard.center == u) return reduce_right_piece(term, u, v, cfg);
            // mirror a right-centered chirp into the right-sided form
            ExprPtr mirrored = reflect_about(term, hard.center);
            IntegralResult r =
                reduce_right_piece(mirrored, hard.center, 2.0 * hard.center - u, cfg);
            for (auto& t : r.trace) {
                t.lo = u;
                t.hi = v;
                t.note += " (mirrored)";
            }
            return r;
        }

        case HardInfo::Kind::step: {
            const double acc = hard.center;
            if (u <= acc || force == Strategy::series)
                return step_series_piece(term, hard, std::max(u, acc), v, cfg);
            return abs_piece(term, u, v, cfg);
        }
    }
    return abs_piece(term, u, v, cfg);
}

}  // namespace detail

/// The distributional integral over [a, b]: splits at singular points and
/// applies, per piece, absolute quadrature, the chirp reduction, the step
/// Cesaro series, or the Hake endpoint limit. Statuses follow the
/// one-signed-obstruction convention for infinities.
inline IntegralResult dist_integrate(const ExprPtr& e, double a, double b,
                                     const Config& cfg = default_config(),
                                     Strategy force = Strategy::automatic) {
    IntegralResult out;
    if (a == b) return out;
    if (a > b) {
        IntegralResult r = dist_integrate(e, b, a, cfg, force);
        r.value = -r.value;
        if (r.status == IntStatus::PlusInfinity)
            r.status = IntStatus::MinusInfinity;
        else if (r.status == IntStatus::MinusInfinity)
            r.status = IntStatus::PlusInfinity;
        return r;
    }

    std::vector<ExprPtr> terms;
    detail::flatten_terms(e, 1.0, a, b, terms);
    for (const auto& term : terms) {
        double u0 = a, v0 = b;
        if (!detail::clip_indicators(term, u0, v0)) {
            out.trace.push_back({a, b, "zero", 0.0, 0.0, "indicator clip"});
            continue;
        }
        detail::HardInfo hard;
        detail::find_hard(term, hard);

        std::vector<double> pts = singular_points(term, u0, v0);
        std::vector<double> edges{u0};
        for (double p : pts)
            if (p > u0 && p < v0) edges.push_back(p);
        edges.push_back(v0);

        IntegralResult term_result;
        for (size_t i = 0; i + 1 < edges.size(); ++i) {
            IntegralResult piece = detail::integrate_piece(term, hard, edges[i],
                                                           edges[i + 1], cfg, force);
            detail::merge(term_result, std::move(piece));
        }
        detail::merge(out, std::move(term_result));
    }
    return out;
}

/// Indefinite integral samples F(x) = dist int_a^x e, cumulative over the
/// grid; per-point statuses propagate.
inline std::vector<std::pair<double, IntegralResult>> indefinite(
    const ExprPtr& e, double a, const std::vector<double>& grid,
    const Config& cfg = default_config()) {
    std::vector<std::pair<double, IntegralResult>> out;
    IntegralResult acc;
    double prev = a;
    for (double x : grid) {
        IntegralResult step = dist_integrate(e, prev, x, cfg);
        detail::merge(acc, std::move(step));
        IntegralResult point = acc;
        out.emplace_back(x, std::move(point));
        prev = x;
    }
    return out;
}

// ---------------------------------------------------------------------------
// Pointwise-evaluable indefinite integral
// ---------------------------------------------------------------------------

/// F(x) = dist int_a^x e with anchor caching; evaluations between anchors
/// cost one short dist integral.
class IndefiniteEvaluator {
public:
    IndefiniteEvaluator(ExprPtr e, double a, double b,
                        const Config& cfg = default_config())
        : e_(std::move(e)), a_(a), b_(b), cfg_(cfg) {
        cache_[a] = 0.0;
    }

    double operator()(double x) const {
        auto it = cache_.find(x);
        if (it != cache_.end()) return it->second;
        // nearest anchor
        auto up = cache_.lower_bound(x);
        double anchor, base;
        if (up == cache_.end()) {
            anchor = std::prev(up)->first;
            base = std::prev(up)->second;
        } else if (up == cache_.begin()) {
            anchor = up->first;
            base = up->second;
        } else {
            auto lo = std::prev(up);
            if (std::fabs(lo->first - x) <= std::fabs(up->first - x)) {
                anchor = lo->first;
                base = lo->second;
            } else {
                anchor = up->first;
                base = up->second;
            }
        }
        const double val = base + dist_integrate(e_, anchor, x, cfg_).value;
        if (cache_.size() < 4096) cache_[x] = val;
        return val;
    }

    double lo() const { return a_; }
    double hi() const { return b_; }
    const ExprPtr& integrand() const { return e_; }

private:
    ExprPtr e_;
    double a_, b_;
    Config cfg_;
    mutable std::map<double, double> cache_;
};

// ---------------------------------------------------------------------------
// Integration against a smooth multiplier (integration by parts)
// ---------------------------------------------------------------------------

/// dist int_a^b f psi = F(b) psi(b) - dist int_a^b F psi' (per additive
/// term). Chirp pieces of F split into a closed chirp part G, integrated
/// against psi' through the dispatch, and a continuous remainder built from
/// cumulative integrals of the reduction's h part; everything else uses the
/// cached indefinite evaluator directly.
inline IntegralResult integrate_against_smooth(const ExprPtr& f, const ExprPtr& psi,
                                               double a, double b,
                                               const Config& cfg = default_config()) {
    if (!is_smooth(psi))
        throw std::invalid_argument("integrate_against_smooth: psi must be smooth");
    const double psi_b = eval(psi, b);
    ExprPtr dpsi = differentiate(psi);
    bool dpsi_zero = false;
    if (const auto* c = std::get_if<ConstE>(&dpsi->v)) dpsi_zero = c->c == 0.0;

    IntegralResult out;
    out.trace.push_back({a, b, "by-parts", 0.0, 0.0, ""});

    std::vector<ExprPtr> terms;
    detail::flatten_terms(f, 1.0, a, b, terms);
    for (const auto& term : terms) {
        IntegralResult ft = dist_integrate(term, a, b, cfg);
        if (ft.status != IntStatus::Finite) {
            out.status = detail::combine_status(out.status, ft.status);
            continue;
        }
        if (dpsi_zero) {
            out.value += ft.value * psi_b;
            out.error_estimate += ft.error_estimate * std::fabs(psi_b);
            continue;
        }

        detail::HardInfo hard;
        detail::find_hard(term, hard);
        if (hard.kind == detail::HardInfo::Kind::step) {
            // the step's indefinite integral is costly pointwise; multiply
            // through the dispatch instead
            IntegralResult direct =
                dist_integrate(detail::product_any(psi, term), a, b, cfg);
            out.value += direct.value;
            out.error_estimate += direct.error_estimate;
            out.status = detail::combine_status(out.status, direct.status);
            continue;
        }

        double u0 = a, v0 = b;
        if (!detail::clip_indicators(term, u0, v0)) continue;
        std::vector<double> pts = singular_points(term, u0, v0);
        std::vector<double> edges{u0};
        for (double p : pts)
            if (p > u0 && p < v0) edges.push_back(p);
        edges.push_back(v0);

        struct GPiece {
            double lo, hi, center;
            ExprPtr G, h;
            bool mirrored;
        };
        std::vector<GPiece> gpieces;
        const bool chirp_hard = hard.kind == detail::HardInfo::Kind::chirp &&
                                hard.alpha <= -1.0;
        if (chirp_hard) {
            for (size_t i = 0; i + 1 < edges.size(); ++i) {
                const double u = edges[i], v = edges[i + 1];
                if (detail::dead_side(hard, u, v)) continue;
                if (hard.center == u) {
                    Reduction red =
                        chirp_reduce(detail::restrict_right(term, u), cfg.margin);
                    gpieces.push_back({u, v, u, red.G, red.h, false});
                } else if (hard.center == v) {
                    ExprPtr mirrored = reflect_about(term, v);
                    Reduction red =
                        chirp_reduce(detail::restrict_right(mirrored, v), cfg.margin);
                    gpieces.push_back({u, v, v, red.G, red.h, true});
                }
            }
        }

        IndefiniteEvaluator F(term, a, b, cfg);
        // continuous part of F inside a chirp piece, via the h integrals
        auto smooth_F = [&](double x) {
            for (const auto& gp : gpieces) {
                if (x < gp.lo || x > gp.hi) continue;
                if (!gp.mirrored)
                    return F(gp.lo) + integrate_abs(gp.h, gp.lo, x, cfg).value;
                return F(gp.hi) -
                       integrate_abs(gp.h, gp.center, 2.0 * gp.center - x, cfg).value;
            }
            return F(x);
        };

        double f_psi_prime = 0.0, err = 0.0;
        quad::Budget budget{cfg.quad_budget};
        auto integrand = [&](double x) { return smooth_F(x) * eval(dpsi, x); };
        for (size_t i = 0; i + 1 < edges.size(); ++i) {
            QuadResult sq =
                quad::adaptive(integrand, edges[i], edges[i + 1],
                               cfg.quad_abs_tol * 10.0 / (edges.size() - 1), 1e-9, budget);
            f_psi_prime += sq.value;
            err += sq.abs_error_estimate;
        }
        for (const auto& gp : gpieces) {
            IntegralResult gi;
            if (!gp.mirrored) {
                gi = dist_integrate(detail::product_any(dpsi, gp.G), gp.lo, gp.hi, cfg);
                f_psi_prime += gi.value;
            } else {
                ExprPtr dpsi_m = reflect_about(dpsi, gp.center);
                gi = dist_integrate(detail::product_any(dpsi_m, gp.G), gp.center,
                                    2.0 * gp.center - gp.lo, cfg);
                f_psi_prime -= gi.value;
            }
            err += gi.error_estimate;
        }

        out.value += ft.value * psi_b - f_psi_prime;
        out.error_estimate += err + ft.error_estimate * std::fabs(psi_b);
    }
    out.trace.back().value = out.value;
    out.trace.back().error = out.error_estimate;
    return out;
}

// ---------------------------------------------------------------------------
// Improper integrals toward infinity
// ---------------------------------------------------------------------------

/// dist int_a^inf e (C): the Cesaro limit at infinity of the indefinite
/// integral, with the k-fold average collapsed into kernel-weighted
/// integrals of e.
inline IntegralResult integrate_improper(const ExprPtr& e, double a,
                                         const Config& cfg = default_config(),
                                         int k_max = -1) {
    if (k_max < 0) k_max = cfg.k_max;
    IntegralResult out;
    const double x0 = a + 1.0;
    IntegralResult head = dist_integrate(e, a, x0, cfg);
    if (head.status != IntStatus::Finite) return head;
    const double F0 = head.value;
    const double X = cfg.limit_x_max;

    const int m = std::max(6, cfg.limit_samples);
    const double span = 1.2;
    std::vector<double> xs(m);
    for (int i = 0; i < m; ++i)
        xs[i] = X * std::pow(10.0, span * (-1.0 + static_cast<double>(i) / (m - 1)));

    detail::LimitSamples raw;
    raw.x = xs;
    {
        double acc = F0;
        double prev = x0;
        for (int i = 0; i < m; ++i) {
            acc += dist_integrate(e, prev, xs[i], cfg).value;
            prev = xs[i];
            raw.value.push_back(acc);
        }
    }
    CesaroValue best = detail::assess_limit_samples(raw, 0, cfg);
    if (best.status == CesaroStatus::Converged) {
        out.value = best.value;
        out.error_estimate = best.diagnostics + head.error_estimate;
        out.trace.push_back({a, HUGE_VAL, "improper", out.value, out.error_estimate, "k=0"});
        return out;
    }

    bool refined = false;
    CesaroValue settled;
    for (int k = 1; k <= k_max + 1; ++k) {
        detail::LimitSamples s;
        s.x = xs;
        for (int i = 0; i < m; ++i) {
            const double x = xs[i];
            const double mass = detail::avg_kernel_int(k - 1, x0, x);
            quad::Budget budget{cfg.quad_budget};
            auto g = [&](double xi) {
                return eval(e, xi) * detail::avg_kernel_int(k - 1, xi, x);
            };
            QuadResult q = quad::adaptive(g, x0, x, 1e-9 * mass, 1e-10, budget);
            s.value.push_back((F0 * mass + q.value) / mass);
        }
        CesaroValue cv = detail::assess_limit_samples(s, k, cfg);
        if (cv.status == CesaroStatus::Converged) {
            // take one extra order: regularity keeps the value and the next
            // average damps base-point artifacts by another 1/x
            if (!refined && k <= k_max) {
                refined = true;
                settled = cv;
                continue;
            }
            const double use =
                std::fabs(cv.value - settled.value) < 10.0 * cfg.cesaro_tol || !refined
                    ? cv.value
                    : settled.value;
            out.value = use;
            out.error_estimate = cv.diagnostics + head.error_estimate;
            out.trace.push_back(
                {a, HUGE_VAL, "improper", out.value, out.error_estimate,
                 "k=" + std::to_string(refined ? settled.order_k : k)});
            return out;
        }
        if (refined) {
            out.value = settled.value;
            out.error_estimate = settled.diagnostics + head.error_estimate;
            out.trace.push_back({a, HUGE_VAL, "improper", out.value,
                                 out.error_estimate,
                                 "k=" + std::to_string(settled.order_k)});
            return out;
        }
        best = cv;
    }

    if (best.status == CesaroStatus::Diverged) {
        int pos = 0, neg = 0;
        for (double x = x0 + 0.123; x < X; x *= 3.7) {
            const double val = eval(e, x);
            if (std::isnan(val)) continue;
            (val >= 0 ? pos : neg)++;
        }
        out.status = (pos > 0 && neg == 0)   ? IntStatus::PlusInfinity
                     : (neg > 0 && pos == 0) ? IntStatus::MinusInfinity
                                             : IntStatus::NotIntegrable;
    } else {
        out.status = IntStatus::Inconclusive;
    }
    out.trace.push_back({a, HUGE_VAL, "improper", 0.0, 0.0, "no order converged"});
    return out;
}

}  // namespace distint
