#pragma once

#include <complex>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "distint/integrate.hpp"
#include "distint/point_value.hpp"

namespace distint {

// ---------------------------------------------------------------------------
// Kernels
// ---------------------------------------------------------------------------

/// Normalized smoothing kernels. The Poisson kernel lies in both T0 and T1;
/// bump kernels are compactly supported inside [-R, R] and belong to T1 only
/// when centered (x phi'(x) <= 0 needs symmetry about 0).
struct KernelSpec {
    enum class Kind { poisson, bump };
    Kind kind = Kind::poisson;
    double R = 1.0;       // bump: support radius bound
    double shift = 0.0;   // bump: profile center, |shift| < R
    bool normalized = true;
    bool in_T0 = true;
    bool in_T1 = true;
};

inline KernelSpec poisson_kernel() { return KernelSpec{}; }

inline KernelSpec bump_kernel(double R, double shift = 0.0) {
    if (!(R > 0) || std::fabs(shift) >= R)
        throw std::invalid_argument("bump kernel needs |shift| < R");
    KernelSpec k;
    k.kind = KernelSpec::Kind::bump;
    k.R = R;
    k.shift = shift;
    k.in_T0 = true;
    k.in_T1 = (shift == 0.0);
    return k;
}

namespace detail {

inline double bump_profile_mass() {
    // int_-1^1 exp(-1/(1-u^2)) du, evaluated once
    static const double mass = [] {
        quad::Budget b{1'000'000};
        auto g = [](double u) {
            const double d = 1.0 - u * u;
            return d > 0 ? std::exp(-1.0 / d) : 0.0;
        };
        return quad::adaptive(g, -1.0, 1.0, 1e-14, 1e-14, b).value;
    }();
    return mass;
}

/// m-th derivative of the kernel. Poisson derivatives come from the complex
/// partial fraction (y^2+1)^-1 = Im (y-i)^-1; bump derivatives are analytic
/// for m <= 1 and high-order central differences beyond.
inline double kernel_derivative(const KernelSpec& k, int m, double y) {
    if (k.kind == KernelSpec::Kind::poisson) {
        std::complex<double> z(y, -1.0);
        double fact = 1.0;
        for (int i = 2; i <= m; ++i) fact *= i;
        const double sign = (m % 2) ? -1.0 : 1.0;
        return sign * fact * std::imag(std::pow(z, -(m + 1))) / M_PI;
    }
    const double w = k.R - std::fabs(k.shift);
    const double u = (y - k.shift) / w;
    const double norm = 1.0 / (bump_profile_mass() * w);
    if (m == 0) {
        const double d = 1.0 - u * u;
        return d > 0 ? norm * std::exp(-1.0 / d) : 0.0;
    }
    if (m == 1) {
        const double d = 1.0 - u * u;
        if (d <= 0) return 0.0;
        return norm / w * std::exp(-1.0 / d) * (-2.0 * u / (d * d));
    }
    const double h = 1e-4 * w;
    return (kernel_derivative(k, m - 1, y + h) - kernel_derivative(k, m - 1, y - h)) /
           (2.0 * h);
}

inline double kernel_value(const KernelSpec& k, double y) {
    return kernel_derivative(k, 0, y);
}

/// u -> phi((u - x)/t)/t as an expression node, differentiable to any order.
inline ExprPtr kernel_window(const KernelSpec& k, double x, double t, int order = 0) {
    auto ext = std::make_shared<ExtSmooth>();
    ext->name = "kernel_window";
    ext->value = [k, x, t, order](double u) {
        return kernel_derivative(k, order, (u - x) / t) / std::pow(t, order + 1);
    };
    ext->derivative = [k, x, t, order]() { return kernel_window(k, x, t, order + 1); };
    return make_ext_smooth(ext);
}

/// Pointwise adaptive quadrature is enough only when nothing oscillates
/// without bound or needs the distributional dispatch.
inline bool tame_for_pointwise(const ExprPtr& e) {
    if (const auto* p = std::get_if<PowerE>(&e->v)) return p->alpha > -1.0;
    if (std::holds_alternative<ChirpE>(e->v)) return false;
    if (std::holds_alternative<StepE>(e->v)) return false;
    if (const auto* s = std::get_if<SumE>(&e->v)) {
        for (const auto& t : s->terms)
            if (!tame_for_pointwise(t)) return false;
        return true;
    }
    if (const auto* p = std::get_if<ProductE>(&e->v))
        return tame_for_pointwise(p->smooth) && tame_for_pointwise(p->general);
    if (const auto* s = std::get_if<ScaleE>(&e->v)) return tame_for_pointwise(s->inner);
    if (const auto* p = std::get_if<PeriodicE>(&e->v)) return tame_for_pointwise(p->base);
    return true;
}

/// Support bounds from indicator factors and step leaves, when compact.
inline std::optional<std::pair<double, double>> compact_support(const ExprPtr& e) {
    if (const auto* i = std::get_if<IndicatorE>(&e->v)) return {{i->lo, i->hi}};
    if (const auto* s = std::get_if<StepE>(&e->v)) return {{s->a, s->a + 1.0}};
    if (const auto* p = std::get_if<ProductE>(&e->v)) {
        auto a = compact_support(p->smooth);
        auto b = compact_support(p->general);
        if (a && b)
            return {{std::max(a->first, b->first), std::min(a->second, b->second)}};
        return a ? a : b;
    }
    if (const auto* s = std::get_if<ScaleE>(&e->v)) return compact_support(s->inner);
    if (const auto* s = std::get_if<SumE>(&e->v)) {
        std::optional<std::pair<double, double>> box;
        for (const auto& t : s->terms) {
            auto bt = compact_support(t);
            if (!bt) return std::nullopt;
            if (!box)
                box = bt;
            else
                box = {{std::min(box->first, bt->first), std::max(box->second, bt->second)}};
        }
        return box;
    }
    return std::nullopt;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Distribution representations and the field
// ---------------------------------------------------------------------------

struct Atom {
    double c = 1.0;   // weight
    int m = 0;        // derivative order of the delta
    double x0 = 0.0;  // location
};

struct DistRep {
    ExprPtr fn_part;  // may be null
    std::vector<Atom> atoms;
};

inline DistRep dist_rep(ExprPtr fn) { return DistRep{std::move(fn), {}}; }
inline DistRep delta_rep(double c = 1.0, int m = 0, double x0 = 0.0) {
    return DistRep{nullptr, {Atom{c, m, x0}}};
}

struct FieldNode {
    double value = 0.0;
    bool valid = true;
};

struct PhiField {
    KernelSpec kernel;
    std::vector<double> grid_x;
    std::vector<double> grid_t;  // strictly decreasing toward 0
    std::vector<std::vector<FieldNode>> values;  // [ix][it]
};

/// F(x, t) = <f(x + t y), phi(y)>: the fn part integrates against the scaled
/// kernel window through the distributional dispatch (Poisson windows over
/// unbounded supports integrate in the arctan variable when the integrand is
/// absolutely integrable, otherwise with a wide truncation); atoms contribute
/// c (-1)^m phi^(m)((x0-x)/t) / t^(m+1).
inline FieldNode phi_field_at(const DistRep& d, const KernelSpec& kernel, double x,
                              double t, const Config& cfg = default_config()) {
    FieldNode node;
    double value = 0.0;
    if (d.fn_part) {
        const auto support = detail::compact_support(d.fn_part);
        double lo, hi;
        if (kernel.kind == KernelSpec::Kind::bump) {
            const double w = kernel.R - std::fabs(kernel.shift);
            lo = x + t * (kernel.shift - w);
            hi = x + t * (kernel.shift + w);
            if (support) {
                lo = std::max(lo, support->first);
                hi = std::min(hi, support->second);
            }
            if (lo < hi) {
                ExprPtr win = detail::kernel_window(kernel, x, t);
                IntegralResult r = dist_integrate(
                    detail::product_any(win, d.fn_part), lo, hi, cfg);
                if (r.status != IntStatus::Finite) {
                    node.valid = false;
                    return node;
                }
                value += r.value;
            }
        } else if (support) {
            ExprPtr win = detail::kernel_window(kernel, x, t);
            IntegralResult r = dist_integrate(detail::product_any(win, d.fn_part),
                                              support->first, support->second, cfg);
            if (r.status != IntStatus::Finite) {
                node.valid = false;
                return node;
            }
            value += r.value;
        } else if (detail::tame_for_pointwise(d.fn_part)) {
            // Poisson in the compactified variable u = x + t tan(theta)
            quad::Budget budget{cfg.quad_budget};
            auto g = [&](double th) {
                const double u = x + t * std::tan(th);
                const double v = eval(d.fn_part, u);
                return std::isnan(v) ? 0.0 : v;
            };
            std::vector<double> cuts{-0.5 * M_PI};
            for (double s : singular_points(d.fn_part, x - 1e8 * t, x + 1e8 * t))
                cuts.push_back(std::atan((s - x) / t));
            cuts.push_back(0.5 * M_PI);
            std::sort(cuts.begin(), cuts.end());
            double sum = 0.0, err = 0.0;
            for (size_t i = 0; i + 1 < cuts.size(); ++i) {
                if (cuts[i + 1] - cuts[i] < 1e-15) continue;
                QuadResult q = quad::adaptive(g, cuts[i], cuts[i + 1],
                                              cfg.quad_abs_tol, cfg.quad_rel_tol, budget);
                sum += q.value;
                err += q.abs_error_estimate;
            }
            value += sum / M_PI;
        } else {
            // wide truncation; the kernel tail is 1/(pi Y)
            const double Y = 1e7;
            ExprPtr win = detail::kernel_window(kernel, x, t);
            IntegralResult r = dist_integrate(detail::product_any(win, d.fn_part),
                                              x - Y * t, x + Y * t, cfg);
            if (r.status != IntStatus::Finite) {
                node.valid = false;
                return node;
            }
            value += r.value;
        }
    }
    for (const auto& atom : d.atoms) {
        const double sign = (atom.m % 2) ? -1.0 : 1.0;
        value += atom.c * sign * detail::kernel_derivative(kernel, atom.m, (atom.x0 - x) / t) /
                 std::pow(t, atom.m + 1);
    }
    node.value = value;
    return node;
}

inline PhiField phi_field(const DistRep& d, const KernelSpec& kernel,
                          std::vector<double> grid_x, std::vector<double> grid_t,
                          const Config& cfg = default_config()) {
    PhiField field;
    field.kernel = kernel;
    field.grid_x = std::move(grid_x);
    field.grid_t = std::move(grid_t);
    field.values.resize(field.grid_x.size());
    for (size_t ix = 0; ix < field.grid_x.size(); ++ix) {
        field.values[ix].resize(field.grid_t.size());
        for (size_t it = 0; it < field.grid_t.size(); ++it)
            field.values[ix][it] =
                phi_field_at(d, kernel, field.grid_x[ix], field.grid_t[it], cfg);
    }
    return field;
}

// ---------------------------------------------------------------------------
// Radial extremes and the measure verdict
// ---------------------------------------------------------------------------

struct RadialExtremes {
    double sup = -HUGE_VAL, inf = HUGE_VAL;
    bool sup_infinite = false, inf_infinite = false;
};

/// Running extremes of F(x0, t) over a mesh of shrinking t, with monotone
/// blowup flagged as an infinite limit (an honest finite-mesh estimate).
inline RadialExtremes radial_extremes(const DistRep& d, const KernelSpec& kernel,
                                      double x0, const std::vector<double>& t_mesh,
                                      const Config& cfg = default_config()) {
    RadialExtremes out;
    std::vector<double> trail;
    for (double t : t_mesh) {
        FieldNode node = phi_field_at(d, kernel, x0, t, cfg);
        if (!node.valid) continue;
        out.sup = std::max(out.sup, node.value);
        out.inf = std::min(out.inf, node.value);
        trail.push_back(node.value);
    }
    if (trail.size() >= 4) {
        const size_t n = trail.size();
        bool up = true, down = true;
        for (size_t i = n - 3; i < n; ++i) {
            up = up && trail[i] > trail[i - 1];
            down = down && trail[i] < trail[i - 1];
        }
        if (up && trail.back() > cfg.divergence_bound) out.sup_infinite = true;
        if (down && trail.back() < -cfg.divergence_bound) out.inf_infinite = true;
    }
    return out;
}

enum class MeasureVerdict { MeasureConsistent, Violation, Inconclusive };

struct MeasureReport {
    MeasureVerdict verdict = MeasureVerdict::Inconclusive;
    double x = 0.0, t = 0.0, value = 0.0;  // witness for violations
};

/// Numeric screening of the positive-measure criterion: the field must not
/// drift below -M_max with shrinking t. A monotone dive at any sample point,
/// or dips on a nontrivial share of points, is reported as a violation with
/// a witness. This is a one-sided heuristic: consistency is evidence, not
/// proof.
inline MeasureReport measure_verdict(const DistRep& d, const KernelSpec& kernel,
                                     double lo, double hi, int x_samples = 41,
                                     int t_samples = 25, double M_max = 1e6,
                                     const Config& cfg = default_config()) {
    if (!kernel.in_T1)
        throw std::invalid_argument("measure_verdict needs a T1 kernel");
    MeasureReport report;
    std::vector<double> xs;
    for (int i = 0; i < x_samples; ++i)
        xs.push_back(lo + (hi - lo) * (i + 0.5) / x_samples);
    for (const auto& atom : d.atoms)
        if (atom.x0 > lo && atom.x0 < hi) xs.push_back(atom.x0);

    std::vector<double> ts;
    for (int i = 0; i < t_samples; ++i) {
        const double t0 = 0.5 * (hi - lo);
        // geometric toward 0, deep enough to push 1/t^(m+1) beyond M_max
        ts.push_back(t0 * std::pow(3e-9 / t0, static_cast<double>(i) / (t_samples - 1)));
    }

    int dipped = 0;
    for (double x : xs) {
        double worst = HUGE_VAL;
        double worst_t = 0.0;
        std::vector<double> trail;
        for (double t : ts) {
            FieldNode node = phi_field_at(d, kernel, x, t, cfg);
            if (!node.valid) continue;
            trail.push_back(node.value);
            if (node.value < worst) {
                worst = node.value;
                worst_t = t;
            }
        }
        if (worst < -M_max) {
            // does the field keep falling through the smallest t samples?
            bool monotone_dive = false;
            if (trail.size() >= 3) {
                const size_t n = trail.size();
                monotone_dive = trail[n - 1] < trail[n - 2] && trail[n - 2] < trail[n - 3];
            }
            ++dipped;
            if (monotone_dive || worst < report.value) {
                report.x = x;
                report.t = worst_t;
                report.value = worst;
            }
            if (monotone_dive) {
                report.verdict = MeasureVerdict::Violation;
                return report;
            }
        }
    }
    if (dipped * 20 >= static_cast<int>(xs.size())) {  // >= 5% of samples
        report.verdict = MeasureVerdict::Violation;
        return report;
    }
    if (dipped > 0) {
        report.verdict = MeasureVerdict::Inconclusive;
        return report;
    }
    report.verdict = MeasureVerdict::MeasureConsistent;
    return report;
}

// ---------------------------------------------------------------------------
// Poisson boundary behavior
// ---------------------------------------------------------------------------

enum class Approach { radial, angular };

/// Boundary limit of the Poisson integral of e at w, along the radial path
/// or inside a cone of slope M. The limit is extrapolated linearly in t over
/// the last decade of the mesh.
inline PointValue poisson_boundary(const ExprPtr& e, double w, Approach approach,
                                   double M = 1.0,
                                   const Config& cfg = default_config()) {
    const KernelSpec kernel = poisson_kernel();
    DistRep d = dist_rep(e);
    PointValue out;
    const int nt = 14;
    std::vector<double> ts, vs;
    for (int i = 0; i < nt; ++i) {
        const double t = std::pow(10.0, -1.0 - 2.5 * i / (nt - 1));  // 1e-1 .. ~3e-4
        const double x = w + (approach == Approach::angular ? M * t : 0.0);
        FieldNode node = phi_field_at(d, kernel, x, t, cfg);
        if (!node.valid) continue;
        ts.push_back(t);
        vs.push_back(node.value);
    }
    if (ts.size() < 6) {
        out.status = PointStatus::Inconclusive;
        return out;
    }
    // fit F = gamma + c t on the trailing samples
    std::vector<std::vector<double>> rows;
    std::vector<double> rhs;
    const size_t start = ts.size() / 2;
    for (size_t i = start; i < ts.size(); ++i) {
        rows.push_back({1.0, ts[i]});
        rhs.push_back(vs[i]);
    }
    std::vector<double> c = detail::least_squares(rows, rhs);
    double resid = 0.0;
    for (size_t i = start; i < ts.size(); ++i)
        resid = std::max(resid, std::fabs(vs[i] - c[0] - c[1] * ts[i]));
    out.value = c[0];
    const double scale = std::max(1.0, std::fabs(c[0]));
    out.status = resid <= 50.0 * cfg.local_limit_tol * scale ? PointStatus::Exists
                                                             : PointStatus::Inconclusive;
    return out;
}

// ---------------------------------------------------------------------------
// Exports
// ---------------------------------------------------------------------------

inline std::string field_to_csv(const PhiField& f) {
    std::string out = "x,t,F\n";
    for (size_t ix = 0; ix < f.grid_x.size(); ++ix)
        for (size_t it = 0; it < f.grid_t.size(); ++it) {
            if (!f.values[ix][it].valid) continue;
            out += format_number(f.grid_x[ix]) + "," + format_number(f.grid_t[it]) +
                   "," + format_number(f.values[ix][it].value) + "\n";
        }
    return out;
}

}  // namespace distint
