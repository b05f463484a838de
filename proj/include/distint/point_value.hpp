#pragma once

#include <cmath>
#include <optional>
#include <vector>

#include "distint/integrate.hpp"
#include "distint/linalg.hpp"

namespace distint {

enum class PointStatus { Exists, NoValue, Inconclusive };

inline const char* to_string(PointStatus s) {
    switch (s) {
        case PointStatus::Exists: return "Exists";
        case PointStatus::NoValue: return "NoValue";
        case PointStatus::Inconclusive: return "Inconclusive";
    }
    return "?";
}

struct PointValue {
    double value = 0.0;
    int order_n = 0;
    PointStatus status = PointStatus::Inconclusive;
    bool has_laterals = false;
    double lateral_left = 0.0, lateral_right = 0.0;
};

namespace detail {

/// Numeric one-sided value through iterated primitives: the n-th primitive
/// from the point satisfies n! P_n(d) / d^n -> value. The primitives come
/// from the Cauchy kernel, with the inner (possibly non-absolutely
/// integrable) moment handled by the distributional dispatch once per order
/// and the outer part accumulated panelwise.
inline PointValue lateral_numeric_right(const ExprPtr& e, double x0, int n_max,
                                        const Config& cfg) {
    PointValue out;
    ExprPtr shifted = transform_affine(e, 1.0, x0);  // e(tau + x0)

    // initial scale: stay inside the nearest foreign singular point
    double d0 = 0.5;
    for (double p : singular_points(shifted, 1e-12, 1.0))
        d0 = std::min(d0, 0.5 * p);

    std::vector<double> mesh{d0};
    std::vector<double> K;           // K_i = dist int_0^{d0} tau^i e
    std::vector<std::vector<double>> M;  // M_i(d_j) = int_{d_j}^{d0} tau^i e
    auto extend_mesh = [&](size_t j_target) {
        while (mesh.size() <= j_target) mesh.push_back(mesh.back() * cfg.mesh_ratio);
    };
    std::int64_t budget_used = 0;
    std::vector<ExprPtr> weighted_cache;
    auto weighted_of = [&](int m) {
        while (static_cast<int>(weighted_cache.size()) <= m) {
            const int i = static_cast<int>(weighted_cache.size());
            std::vector<double> coeffs(static_cast<size_t>(i) + 1, 0.0);
            coeffs.back() = 1.0;
            weighted_cache.push_back(
                i == 0 ? shifted : detail::product_any(make_poly(coeffs), shifted));
        }
        return weighted_cache[static_cast<size_t>(m)];
    };
    auto ensure_moment = [&](int i, size_t j_target) {
        while (static_cast<int>(K.size()) <= i) {
            const int m = static_cast<int>(K.size());
            IntegralResult r = dist_integrate(weighted_of(m), 0.0, d0, cfg);
            K.push_back(r.status == IntStatus::Finite
                            ? r.value
                            : std::numeric_limits<double>::quiet_NaN());
            M.push_back({0.0});
        }
        auto& Mi = M[static_cast<size_t>(i)];
        while (Mi.size() <= j_target) {
            const size_t j = Mi.size();
            Config panel_cfg = cfg;
            panel_cfg.quad_abs_tol =
                1e-11 * std::pow(mesh[j], i) * (mesh[j - 1] - mesh[j]) + 1e-15;
            panel_cfg.quad_rel_tol = 1e-10;
            QuadResult q = integrate_abs(weighted_of(i), mesh[j], mesh[j - 1], panel_cfg);
            budget_used += q.evaluations;
            Mi.push_back(Mi.back() + q.value);
        }
    };

    const int W = 30, step = 6;
    for (int n = 0; n <= n_max; ++n) {
        const int max_j = (n == 0) ? cfg.mesh_points + 40 : cfg.mesh_points;
        const std::int64_t order_cap = budget_used + cfg.quad_budget / (n_max + 2);
        std::vector<double> history;
        double prev_spread = HUGE_VAL;
        int decaying = 0;
        double cand = 0.0, cand_spread = 0.0;
        bool have_cand = false;
        bool order_ok = true;
        for (int end = W; end <= max_j && order_ok; end += step) {
            extend_mesh(static_cast<size_t>(end - 1));
            if (n > 0)
                for (int i = 0; i < n; ++i) {
                    ensure_moment(i, static_cast<size_t>(end - 1));
                    if (std::isnan(K[static_cast<size_t>(i)])) {
                        order_ok = false;  // primitive does not exist finitely
                        break;
                    }
                }
            if (!order_ok) break;

            std::vector<double> P(static_cast<size_t>(end));
            if (n == 0) {
                for (int j = 0; j < end; ++j) {
                    const double val = eval(shifted, mesh[static_cast<size_t>(j)]);
                    P[static_cast<size_t>(j)] = std::isnan(val) ? 0.0 : val;
                }
            } else {
                double fact = 1.0;
                for (int i = 2; i < n; ++i) fact *= i;
                for (int j = 0; j < end; ++j) {
                    const double d = mesh[static_cast<size_t>(j)];
                    double sum = 0.0, binom = 1.0, sign = 1.0;
                    for (int i = 0; i <= n - 1; ++i) {
                        const double inner =
                            K[static_cast<size_t>(i)] - M[static_cast<size_t>(i)][static_cast<size_t>(j)];
                        sum += binom * sign * std::pow(d, n - 1 - i) * inner;
                        binom *= static_cast<double>(n - 1 - i) / static_cast<double>(i + 1);
                        sign = -sign;
                    }
                    P[static_cast<size_t>(j)] = sum / fact;
                }
            }

            const int beg = end - W;
            const double d_ref = mesh[static_cast<size_t>(beg)];
            double est, spread;
            if (n == 0) {
                // a constant fit is only as good as the sample range
                double mn = HUGE_VAL, mx = -HUGE_VAL, sum = 0.0;
                for (int i = beg; i < end; ++i) {
                    const double p = P[static_cast<size_t>(i)];
                    mn = std::min(mn, p);
                    mx = std::max(mx, p);
                    sum += p;
                }
                est = sum / W;
                spread = mx - mn;
            } else {
                std::vector<std::vector<double>> rows;
                std::vector<double> rhs;
                for (int i = beg; i < end; ++i) {
                    std::vector<double> row(static_cast<size_t>(n) + 1);
                    double p = 1.0;
                    const double t = mesh[static_cast<size_t>(i)] / d_ref;
                    for (int c = 0; c <= n; ++c) {
                        row[static_cast<size_t>(c)] = p;
                        p *= t;
                    }
                    rows.push_back(std::move(row));
                    rhs.push_back(P[static_cast<size_t>(i)]);
                }
                std::vector<double> c = least_squares(rows, rhs);
                double fact = 1.0;
                for (int i = 2; i <= n; ++i) fact *= i;
                est = fact * c[static_cast<size_t>(n)] / std::pow(d_ref, n);
                history.push_back(est);
                if (history.size() < 6) continue;
                const size_t h = history.size();
                spread = 0.0;
                for (size_t i = h - std::min<size_t>(h, 5); i < h; ++i)
                    spread = std::max(spread, std::fabs(history[i] - history[h - 1]));
            }
            const double scale = std::max(1.0, std::fabs(est));
            decaying = (spread < prev_spread) ? decaying + 1 : 0;
            prev_spread = spread;
            const double accept = (n == 0) ? 0.2 * cfg.tol : cfg.local_limit_tol;
            if (spread <= accept * scale) {
                out.value = est;
                out.order_n = n;
                out.status = PointStatus::Exists;
                return out;
            }
            if (n == 0 && spread <= cfg.cesaro_tol * scale && decaying >= 2) {
                cand = est;
                cand_spread = spread;
                have_cand = true;
            }
            if (budget_used >= order_cap) break;
        }
        if (n == 0 && have_cand) {
            out.value = cand;
            out.order_n = 0;
            out.status = PointStatus::Exists;
            (void)cand_spread;
            return out;
        }
    }
    // orders exhausted: one-signed growth of the raw samples means the
    // (divergent) value does not exist; mixed behavior stays inconclusive
    bool inc = true, dec = true, one_sign = true;
    std::vector<double> raw;
    for (double d : mesh) {
        const double v = eval(shifted, d);
        if (!std::isnan(v)) raw.push_back(v);
    }
    for (size_t j = 1; j < raw.size(); ++j) {
        inc = inc && std::fabs(raw[j]) >= std::fabs(raw[j - 1]);
        dec = dec && std::fabs(raw[j]) <= std::fabs(raw[j - 1]);
        one_sign = one_sign && (raw[j] > 0) == (raw[0] > 0);
    }
    if (!raw.empty() && inc && one_sign &&
        std::fabs(raw.back()) > 100.0 * std::max(1.0, std::fabs(raw.front()))) {
        out.status = PointStatus::NoValue;
    } else {
        out.status = PointStatus::Inconclusive;
    }
    return out;
}

struct TermCarrier {
    enum class Kind { plain, chirp, power, step, indicator } kind = Kind::plain;
    const ChirpE* chirp = nullptr;
    const PowerE* power = nullptr;
    const StepE* step = nullptr;
    const IndicatorE* ind = nullptr;
};

/// Finds the leaf structurally singular at x0 inside one additive term.
inline void find_carrier_at(const ExprPtr& e, double x0, TermCarrier& out) {
    if (const auto* c = std::get_if<ChirpE>(&e->v)) {
        if (c->a == x0) {
            out.kind = TermCarrier::Kind::chirp;
            out.chirp = c;
        }
    } else if (const auto* p = std::get_if<PowerE>(&e->v)) {
        if (p->a == x0 && out.kind == TermCarrier::Kind::plain) {
            out.kind = TermCarrier::Kind::power;
            out.power = p;
        }
    } else if (const auto* s = std::get_if<StepE>(&e->v)) {
        if (s->a == x0 || s->a + 1.0 == x0) {
            out.kind = TermCarrier::Kind::step;
            out.step = s;
        }
    } else if (const auto* i = std::get_if<IndicatorE>(&e->v)) {
        if ((i->lo == x0 || i->hi == x0) && out.kind == TermCarrier::Kind::plain) {
            out.kind = TermCarrier::Kind::indicator;
            out.ind = i;
        }
    } else if (const auto* p = std::get_if<ProductE>(&e->v)) {
        find_carrier_at(p->smooth, x0, out);
        find_carrier_at(p->general, x0, out);
    } else if (const auto* s = std::get_if<ScaleE>(&e->v)) {
        find_carrier_at(s->inner, x0, out);
    } else if (const auto* s = std::get_if<SumE>(&e->v)) {
        for (const auto& t : s->terms) find_carrier_at(t, x0, out);
    }
}

inline PointValue lateral_term(const ExprPtr& term, double x0, Side side, int n_max,
                               const Config& cfg) {
    PointValue out;
    const double into = side == Side::right ? 1.0 : -1.0;

    TermCarrier carrier;
    find_carrier_at(term, x0, carrier);

    if (carrier.kind == TermCarrier::Kind::plain) {
        // classically smooth from this side; nudge off jump points
        double probe = x0;
        double v = eval(term, probe);
        if (std::isnan(v)) v = eval(term, x0 + into * 1e-13 * (1.0 + std::fabs(x0)));
        if (std::isnan(v)) {
            out.status = PointStatus::Inconclusive;
            return out;
        }
        out.value = v;
        out.status = PointStatus::Exists;
        return out;
    }

    if (carrier.kind == TermCarrier::Kind::chirp) {
        // s_{alpha,beta} has the Lojasiewicz value 0 at its center
        out.value = 0.0;
        out.status = PointStatus::Exists;
        return out;
    }

    if (carrier.kind == TermCarrier::Kind::power) {
        const PowerE& p = *carrier.power;
        const bool live = p.side == Side::both ||
                          (p.side == Side::right && side == Side::right) ||
                          (p.side == Side::left && side == Side::left);
        if (!live || p.alpha > 0.0) {
            out.value = 0.0;
            out.status = PointStatus::Exists;
            return out;
        }
        if (p.alpha == 0.0) {
            const double probe = x0 + into * 1e-9 * (1.0 + std::fabs(x0));
            out.value = eval(term, probe);
            out.status = PointStatus::Exists;
            return out;
        }
        out.status = PointStatus::NoValue;  // one-signed divergence
        return out;
    }

    if (carrier.kind == TermCarrier::Kind::indicator) {
        const double probe = x0 + into * 1e-9 * (1.0 + std::fabs(x0));
        out.value = eval(term, probe);
        out.status = PointStatus::Exists;
        return out;
    }

    // step accumulation (or its outer edge): distributional lateral value by
    // the primitive machinery
    if (carrier.kind == TermCarrier::Kind::step) {
        if (carrier.step->a + 1.0 == x0 || (carrier.step->a == x0 && side == Side::left)) {
            const double probe = x0 + into * 1e-9 * (1.0 + std::fabs(x0));
            out.value = eval(term, probe);
            out.status = PointStatus::Exists;
            return out;
        }
        return lateral_numeric_right(term, x0, n_max, cfg);
    }

    if (side == Side::right) return lateral_numeric_right(term, x0, n_max, cfg);
    return lateral_numeric_right(reflect_about(term, x0), x0, n_max, cfg);
}

}  // namespace detail

/// Distributional lateral value of e at x0 from the chosen side.
inline PointValue lateral_value(const ExprPtr& e, double x0, Side side, int n_max = -1,
                                const Config& cfg = default_config()) {
    if (side == Side::both) throw std::invalid_argument("lateral_value: pick a side");
    if (n_max < 0) n_max = cfg.n_max;
    std::vector<ExprPtr> terms;
    detail::flatten_terms(e, 1.0, x0 - 1.0, x0 + 1.0, terms);
    PointValue out;
    out.status = PointStatus::Exists;
    for (const auto& term : terms) {
        PointValue pv = detail::lateral_term(term, x0, side, n_max, cfg);
        if (pv.status != PointStatus::Exists) {
            out.status = pv.status;
            return out;
        }
        out.value += pv.value;
        out.order_n = std::max(out.order_n, pv.order_n);
    }
    return out;
}

/// Distributional point value of e at x0: the Lojasiewicz value when it
/// exists, NoValue when the lateral values exist but disagree (laterals are
/// reported), Inconclusive when the machinery cannot settle by order n_max.
inline PointValue point_value(const ExprPtr& e, double x0, int n_max = -1,
                              const Config& cfg = default_config()) {
    if (n_max < 0) n_max = cfg.n_max;

    // classical fast path when nothing is structurally singular here
    const double w = 1.0 + std::fabs(x0);
    const auto sing = singular_points(e, x0 - 1e-9 * w, x0 + 1e-9 * w);
    if (sing.empty()) {
        const double v = eval(e, x0);
        if (!std::isnan(v)) {
            PointValue out;
            out.value = v;
            out.status = PointStatus::Exists;
            return out;
        }
    }

    PointValue left = lateral_value(e, x0, Side::left, n_max, cfg);
    PointValue right = lateral_value(e, x0, Side::right, n_max, cfg);
    PointValue out;
    out.has_laterals = true;
    out.lateral_left = left.value;
    out.lateral_right = right.value;
    out.order_n = std::max(left.order_n, right.order_n);
    if (left.status == PointStatus::NoValue || right.status == PointStatus::NoValue) {
        out.status = PointStatus::NoValue;
        return out;
    }
    if (left.status != PointStatus::Exists || right.status != PointStatus::Exists) {
        out.status = PointStatus::Inconclusive;
        return out;
    }
    const double tol = cfg.local_limit_tol;
    const double scale = std::max(1.0, std::max(std::fabs(left.value), std::fabs(right.value)));
    const double gap = std::fabs(left.value - right.value);
    if (gap <= tol * scale) {
        out.value = 0.5 * (left.value + right.value);
        out.status = PointStatus::Exists;
    } else if (gap > 10.0 * tol * scale) {
        out.status = PointStatus::NoValue;
    } else {
        out.status = PointStatus::Inconclusive;
    }
    return out;
}

}  // namespace distint
