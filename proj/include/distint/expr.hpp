#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

namespace distint {

enum class Side { both, right, left };
enum class Trig { sin, cos };

// ---------------------------------------------------------------------------
// Step-sequence coefficient formulas: a tiny arithmetic language over n.
// Supports +, -, *, /, ^ and the variable n, e.g. (-1)^n*n*(n+1).
// ---------------------------------------------------------------------------

struct SeqNode;
using SeqPtr = std::shared_ptr<const SeqNode>;

struct SeqNode {
    enum class Op { num, var_n, add, sub, mul, div, pow };
    Op op = Op::num;
    double value = 0.0;
    SeqPtr lhs, rhs;

    static SeqPtr number(double v) {
        auto n = std::make_shared<SeqNode>();
        n->op = Op::num;
        n->value = v;
        return n;
    }
    static SeqPtr var() {
        auto n = std::make_shared<SeqNode>();
        n->op = Op::var_n;
        return n;
    }
    static SeqPtr binary(Op op, SeqPtr a, SeqPtr b) {
        auto n = std::make_shared<SeqNode>();
        n->op = op;
        n->lhs = std::move(a);
        n->rhs = std::move(b);
        return n;
    }
};

inline double seq_eval(const SeqPtr& s, long n) {
    using Op = SeqNode::Op;
    switch (s->op) {
        case Op::num: return s->value;
        case Op::var_n: return static_cast<double>(n);
        case Op::add: return seq_eval(s->lhs, n) + seq_eval(s->rhs, n);
        case Op::sub: return seq_eval(s->lhs, n) - seq_eval(s->rhs, n);
        case Op::mul: return seq_eval(s->lhs, n) * seq_eval(s->rhs, n);
        case Op::div: return seq_eval(s->lhs, n) / seq_eval(s->rhs, n);
        case Op::pow: {
            double b = seq_eval(s->lhs, n);
            double e = seq_eval(s->rhs, n);
            // exact alternating signs for integer exponents of negative bases
            if (b < 0 && e == std::floor(e)) {
                double m = std::pow(-b, e);
                return (static_cast<long long>(e) % 2 != 0) ? -m : m;
            }
            return std::pow(b, e);
        }
    }
    return std::numeric_limits<double>::quiet_NaN();
}

inline std::string format_number(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

inline std::string seq_print(const SeqPtr& s) {
    using Op = SeqNode::Op;
    switch (s->op) {
        case Op::num: return format_number(s->value);
        case Op::var_n: return "n";
        case Op::add: return "(" + seq_print(s->lhs) + "+" + seq_print(s->rhs) + ")";
        case Op::sub: return "(" + seq_print(s->lhs) + "-" + seq_print(s->rhs) + ")";
        case Op::mul: return "(" + seq_print(s->lhs) + "*" + seq_print(s->rhs) + ")";
        case Op::div: return "(" + seq_print(s->lhs) + "/" + seq_print(s->rhs) + ")";
        case Op::pow: return "(" + seq_print(s->lhs) + "^" + seq_print(s->rhs) + ")";
    }
    return {};
}

inline bool seq_equal(const SeqPtr& a, const SeqPtr& b) {
    if (a->op != b->op) return false;
    if (a->op == SeqNode::Op::num) return a->value == b->value;
    if (a->op == SeqNode::Op::var_n) return true;
    return seq_equal(a->lhs, b->lhs) && seq_equal(a->rhs, b->rhs);
}

// ---------------------------------------------------------------------------
// Integrand AST
// ---------------------------------------------------------------------------

struct Expr;
using ExprPtr = std::shared_ptr<const Expr>;

struct ConstE {
    double c;
};

/// |x-a|^alpha, optionally one-sided (H(+-(x-a)) factor) or odd (sgn factor).
struct PowerE {
    double a = 0.0;
    double alpha = 1.0;
    Side side = Side::both;
    bool sgn = false;
};

/// |x-a|^alpha * trig(|x-a|^-beta), value 0 at x = a by convention.
struct ChirpE {
    double a = 0.0;
    double alpha = 0.0;
    double beta = 1.0;
    Trig trig = Trig::sin;
    Side side = Side::both;
    bool sgn = false;
};

/// c_n on [a+1/(n+1), a+1/n), zero outside (a, a+1].
struct StepE {
    double a = 0.0;
    SeqPtr coeff;
};

struct IndicatorE {
    double lo, hi;
};

struct ExtSmooth;  // internal C-infinity nodes (kernel windows etc.)

/// Smooth factors: polynomials and sin/cos/exp with an affine inner argument.
struct SmoothE {
    enum class Kind { poly, sin_k, cos_k, exp_k, ext };
    Kind kind = Kind::poly;
    std::vector<double> coeffs;  // poly: sum coeffs[i] x^i
    double mul = 1.0, off = 0.0; // trig/exp: base(mul*x + off)
    std::shared_ptr<const ExtSmooth> ext;
};

struct ExtSmooth {
    std::string name;
    std::function<double(double)> value;
    std::function<ExprPtr()> derivative;  // d/dx of this node as an Expr
};

struct SumE {
    std::vector<ExprPtr> terms;
};

/// smooth * general; the smooth slot must satisfy is_smooth().
struct ProductE {
    ExprPtr smooth;
    ExprPtr general;
};

struct ScaleE {
    double k;
    ExprPtr inner;
};

/// base is defined on [0, period) and repeated.
struct PeriodicE {
    double period;
    ExprPtr base;
};

struct Expr {
    std::variant<ConstE, PowerE, ChirpE, StepE, IndicatorE, SmoothE, SumE,
                 ProductE, ScaleE, PeriodicE>
        v;
};

template <class Node>
ExprPtr make_expr(Node n) {
    auto e = std::make_shared<Expr>();
    e->v = std::move(n);
    return e;
}

inline ExprPtr make_const(double c) { return make_expr(ConstE{c}); }

inline ExprPtr make_power(double a, double alpha, Side side = Side::both, bool sgn = false) {
    return make_expr(PowerE{a, alpha, side, sgn});
}

inline ExprPtr make_chirp(double a, double alpha, double beta, Trig trig,
                          Side side = Side::both, bool sgn = false) {
    if (!(beta > 0)) throw std::invalid_argument("chirp requires beta > 0");
    return make_expr(ChirpE{a, alpha, beta, trig, side, sgn});
}

inline ExprPtr make_step(double a, SeqPtr coeff) {
    return make_expr(StepE{a, std::move(coeff)});
}

inline ExprPtr make_indicator(double lo, double hi) {
    if (!(lo < hi)) throw std::invalid_argument("indicator requires lo < hi");
    return make_expr(IndicatorE{lo, hi});
}

inline ExprPtr make_poly(std::vector<double> coeffs) {
    SmoothE s;
    s.kind = SmoothE::Kind::poly;
    s.coeffs = std::move(coeffs);
    if (s.coeffs.empty()) s.coeffs.push_back(0.0);
    return make_expr(std::move(s));
}

inline ExprPtr make_smooth_trig(SmoothE::Kind kind, double mul = 1.0, double off = 0.0) {
    SmoothE s;
    s.kind = kind;
    s.mul = mul;
    s.off = off;
    return make_expr(std::move(s));
}

inline ExprPtr make_ext_smooth(std::shared_ptr<const ExtSmooth> ext) {
    SmoothE s;
    s.kind = SmoothE::Kind::ext;
    s.ext = std::move(ext);
    return make_expr(std::move(s));
}

inline ExprPtr make_sum(std::vector<ExprPtr> terms) {
    if (terms.empty()) return make_const(0.0);
    if (terms.size() == 1) return terms[0];
    return make_expr(SumE{std::move(terms)});
}

inline ExprPtr make_scale(double k, ExprPtr inner) {
    if (k == 1.0) return inner;
    if (const auto* sc = std::get_if<ScaleE>(&inner->v))
        return make_expr(ScaleE{k * sc->k, sc->inner});
    if (const auto* c = std::get_if<ConstE>(&inner->v)) return make_const(k * c->c);
    return make_expr(ScaleE{k, std::move(inner)});
}

inline ExprPtr make_periodic(double period, ExprPtr base) {
    if (!(period > 0)) throw std::invalid_argument("periodic requires period > 0");
    return make_expr(PeriodicE{period, std::move(base)});
}

bool is_smooth(const ExprPtr& e);  // forward

inline ExprPtr make_product(ExprPtr smooth, ExprPtr general) {
    if (!is_smooth(smooth)) throw std::invalid_argument("product smooth slot is not smooth");
    // keep scales on the outside so construction and parsing agree
    double k = 1.0;
    if (const auto* sc = std::get_if<ScaleE>(&smooth->v)) {
        k *= sc->k;
        smooth = sc->inner;
    }
    if (const auto* sc = std::get_if<ScaleE>(&general->v)) {
        k *= sc->k;
        general = sc->inner;
    }
    if (const auto* c = std::get_if<ConstE>(&smooth->v)) return make_scale(k * c->c, general);
    if (const auto* c = std::get_if<ConstE>(&general->v)) return make_scale(k * c->c, smooth);
    return make_scale(k, make_expr(ProductE{std::move(smooth), std::move(general)}));
}

// ---------------------------------------------------------------------------
// Predicates
// ---------------------------------------------------------------------------

inline bool is_smooth(const ExprPtr& e) {
    if (std::holds_alternative<ConstE>(e->v)) return true;
    if (std::holds_alternative<SmoothE>(e->v)) return true;
    if (const auto* s = std::get_if<SumE>(&e->v)) {
        for (const auto& t : s->terms)
            if (!is_smooth(t)) return false;
        return true;
    }
    if (const auto* p = std::get_if<ProductE>(&e->v))
        return is_smooth(p->smooth) && is_smooth(p->general);
    if (const auto* sc = std::get_if<ScaleE>(&e->v)) return is_smooth(sc->inner);
    return false;
}

/// Leaves that carry genuine non-absolute behavior. Positive-exponent powers,
/// indicators and one-sided steps of exponent 0 are bounded and may multiply
/// anything; these count as "hard".
inline bool is_hard_leaf(const ExprPtr& e) {
    if (std::holds_alternative<ChirpE>(e->v)) return true;
    if (std::holds_alternative<StepE>(e->v)) return true;
    if (std::holds_alternative<PeriodicE>(e->v)) return true;
    if (const auto* p = std::get_if<PowerE>(&e->v)) return p->alpha < 0;
    return false;
}

// ---------------------------------------------------------------------------
// Evaluation. NaN encodes "undefined at this point"; eval_at wraps it in an
// optional for the public surface.
// ---------------------------------------------------------------------------

inline double eval(const ExprPtr& e, double x);

namespace detail {

inline double eval_power(const PowerE& p, double x) {
    const double r = x - p.a;
    if (p.side == Side::right && r < 0) return 0.0;
    if (p.side == Side::left && r > 0) return 0.0;
    if (r == 0.0) {
        if (p.alpha > 0) return 0.0;
        return std::numeric_limits<double>::quiet_NaN();  // 0^0 jump or divergence
    }
    double v = std::pow(std::fabs(r), p.alpha);
    if (p.sgn && r < 0) v = -v;
    return v;
}

inline double eval_chirp(const ChirpE& c, double x) {
    const double r = x - c.a;
    if (r == 0.0) return 0.0;  // s_{alpha,beta}(0) = 0 by definition
    if (c.side == Side::right && r < 0) return 0.0;
    if (c.side == Side::left && r > 0) return 0.0;
    const double ar = std::fabs(r);
    const double phase = std::pow(ar, -c.beta);
    double v = std::pow(ar, c.alpha) *
               (c.trig == Trig::sin ? std::sin(phase) : std::cos(phase));
    if (c.sgn && r < 0) v = -v;
    return v;
}

inline long step_cell_index(double u) {
    // cell n spans [1/(n+1), 1/n); returns 0 when u is not inside any cell
    if (!(u > 0.0) || u >= 1.0) return 0;
    long n = static_cast<long>(std::floor(1.0 / u));
    if (u < 1.0 / static_cast<double>(n + 1)) ++n;
    if (u >= 1.0 / static_cast<double>(n)) --n;
    return n >= 1 ? n : 0;
}

inline double eval_step(const StepE& s, double x) {
    const double u = x - s.a;
    const long n = step_cell_index(u);
    if (n == 0) return 0.0;
    return seq_eval(s.coeff, n);
}

inline double eval_smooth(const SmoothE& s, double x) {
    switch (s.kind) {
        case SmoothE::Kind::poly: {
            double v = 0.0;
            for (size_t i = s.coeffs.size(); i-- > 0;) v = v * x + s.coeffs[i];
            return v;
        }
        case SmoothE::Kind::sin_k: return std::sin(s.mul * x + s.off);
        case SmoothE::Kind::cos_k: return std::cos(s.mul * x + s.off);
        case SmoothE::Kind::exp_k: return std::exp(s.mul * x + s.off);
        case SmoothE::Kind::ext: return s.ext->value(x);
    }
    return std::numeric_limits<double>::quiet_NaN();
}

}  // namespace detail

inline double eval(const ExprPtr& e, double x) {
    if (const auto* c = std::get_if<ConstE>(&e->v)) return c->c;
    if (const auto* p = std::get_if<PowerE>(&e->v)) return detail::eval_power(*p, x);
    if (const auto* c = std::get_if<ChirpE>(&e->v)) return detail::eval_chirp(*c, x);
    if (const auto* s = std::get_if<StepE>(&e->v)) return detail::eval_step(*s, x);
    if (const auto* i = std::get_if<IndicatorE>(&e->v)) {
        if (x == i->lo || x == i->hi) return std::numeric_limits<double>::quiet_NaN();
        return (x > i->lo && x < i->hi) ? 1.0 : 0.0;
    }
    if (const auto* s = std::get_if<SmoothE>(&e->v)) return detail::eval_smooth(*s, x);
    if (const auto* s = std::get_if<SumE>(&e->v)) {
        double v = 0.0;
        for (const auto& t : s->terms) v += eval(t, x);
        return v;
    }
    if (const auto* p = std::get_if<ProductE>(&e->v))
        return eval(p->smooth, x) * eval(p->general, x);
    if (const auto* s = std::get_if<ScaleE>(&e->v)) return s->k * eval(s->inner, x);
    if (const auto* p = std::get_if<PeriodicE>(&e->v)) {
        double u = std::fmod(x, p->period);
        if (u < 0) u += p->period;
        return eval(p->base, u);
    }
    return std::numeric_limits<double>::quiet_NaN();
}

inline std::optional<double> eval_at(const ExprPtr& e, double x) {
    const double v = eval(e, x);
    if (std::isnan(v)) return std::nullopt;
    return v;
}

// ---------------------------------------------------------------------------
// Singular points: centers, accumulation points, indicator edges and period
// boundaries inside [lo, hi]. Drives panel splitting and strategy dispatch.
// ---------------------------------------------------------------------------

namespace detail {

inline void collect_singular(const ExprPtr& e, double lo, double hi,
                             std::vector<double>& out) {
    auto push = [&](double x) {
        if (x >= lo && x <= hi) out.push_back(x);
    };
    if (const auto* p = std::get_if<PowerE>(&e->v)) {
        // every center is a panel boundary, even when the power is continuous
        push(p->a);
    } else if (const auto* c = std::get_if<ChirpE>(&e->v)) {
        push(c->a);
    } else if (const auto* s = std::get_if<StepE>(&e->v)) {
        push(s->a);
        push(s->a + 1.0);
    } else if (const auto* i = std::get_if<IndicatorE>(&e->v)) {
        push(i->lo);
        push(i->hi);
    } else if (const auto* s = std::get_if<SumE>(&e->v)) {
        for (const auto& t : s->terms) collect_singular(t, lo, hi, out);
    } else if (const auto* p = std::get_if<ProductE>(&e->v)) {
        collect_singular(p->smooth, lo, hi, out);
        collect_singular(p->general, lo, hi, out);
    } else if (const auto* s = std::get_if<ScaleE>(&e->v)) {
        collect_singular(s->inner, lo, hi, out);
    } else if (const auto* p = std::get_if<PeriodicE>(&e->v)) {
        const double T = p->period;
        std::vector<double> base;
        collect_singular(p->base, 0.0, T, base);
        base.push_back(0.0);
        const long k0 = static_cast<long>(std::floor(lo / T)) - 1;
        const long k1 = static_cast<long>(std::ceil(hi / T)) + 1;
        for (long k = k0; k <= k1; ++k)
            for (double b : base) push(b + static_cast<double>(k) * T);
    }
}

}  // namespace detail

inline std::vector<double> singular_points(const ExprPtr& e, double lo, double hi) {
    if (!(lo < hi)) throw std::invalid_argument("singular_points requires lo < hi");
    std::vector<double> pts;
    detail::collect_singular(e, lo, hi, pts);
    std::sort(pts.begin(), pts.end());
    pts.erase(std::unique(pts.begin(), pts.end(),
                          [](double a, double b) { return a == b; }),
              pts.end());
    return pts;
}

// ---------------------------------------------------------------------------
// Printer (canonical grammar form; parse(print(e)) is structurally e)
// ---------------------------------------------------------------------------

inline std::string print_expr(const ExprPtr& e);

namespace detail {

inline const char* side_name(Side s) {
    switch (s) {
        case Side::both: return "both";
        case Side::right: return "right";
        case Side::left: return "left";
    }
    return "both";
}

inline std::string print_lin(double mul, double off) {
    std::string s;
    if (mul != 1.0) s += format_number(mul) + "*";
    s += "x";
    if (off != 0.0) {
        if (off > 0)
            s += "+" + format_number(off);
        else
            s += "-" + format_number(-off);
    }
    return s;
}

inline std::string print_factor(const ExprPtr& e) {
    if (std::holds_alternative<SumE>(e->v) || std::holds_alternative<ScaleE>(e->v) ||
        std::holds_alternative<ProductE>(e->v))
        return "(" + print_expr(e) + ")";
    return print_expr(e);
}

}  // namespace detail

inline std::string print_expr(const ExprPtr& e) {
    if (const auto* c = std::get_if<ConstE>(&e->v)) return format_number(c->c);
    if (const auto* p = std::get_if<PowerE>(&e->v)) {
        std::string s = "pow(";
        if (p->a != 0.0) s += "a=" + format_number(p->a) + ", ";
        s += "alpha=" + format_number(p->alpha);
        if (p->side != Side::both) s += std::string(", side=") + detail::side_name(p->side);
        if (p->sgn) s += ", signed=true";
        return s + ")";
    }
    if (const auto* c = std::get_if<ChirpE>(&e->v)) {
        std::string s = "chirp(";
        if (c->a != 0.0) s += "a=" + format_number(c->a) + ", ";
        s += "alpha=" + format_number(c->alpha) + ", beta=" + format_number(c->beta);
        if (c->side != Side::both) s += std::string(", side=") + detail::side_name(c->side);
        if (c->sgn) s += ", signed=true";
        s += std::string(", ") + (c->trig == Trig::sin ? "sin" : "cos");
        return s + ")";
    }
    if (const auto* st = std::get_if<StepE>(&e->v)) {
        std::string s = "step(";
        if (st->a != 0.0) s += "a=" + format_number(st->a) + ", ";
        return s + "cn=" + seq_print(st->coeff) + ")";
    }
    if (const auto* i = std::get_if<IndicatorE>(&e->v))
        return "indicator(" + format_number(i->lo) + "," + format_number(i->hi) + ")";
    if (const auto* s = std::get_if<SmoothE>(&e->v)) {
        switch (s->kind) {
            case SmoothE::Kind::poly: {
                std::string out = "poly(";
                for (size_t i = 0; i < s->coeffs.size(); ++i) {
                    if (i) out += ",";
                    out += format_number(s->coeffs[i]);
                }
                return out + ")";
            }
            case SmoothE::Kind::sin_k: return "sin(" + detail::print_lin(s->mul, s->off) + ")";
            case SmoothE::Kind::cos_k: return "cos(" + detail::print_lin(s->mul, s->off) + ")";
            case SmoothE::Kind::exp_k: return "exp(" + detail::print_lin(s->mul, s->off) + ")";
            case SmoothE::Kind::ext: return "<" + s->ext->name + ">";
        }
    }
    if (const auto* s = std::get_if<SumE>(&e->v)) {
        std::string out;
        for (size_t i = 0; i < s->terms.size(); ++i) {
            if (i) out += " + ";
            out += detail::print_factor(s->terms[i]);
        }
        return out;
    }
    if (const auto* p = std::get_if<ProductE>(&e->v))
        return detail::print_factor(p->smooth) + " * " + detail::print_factor(p->general);
    if (const auto* s = std::get_if<ScaleE>(&e->v))
        return format_number(s->k) + " * " + detail::print_factor(s->inner);
    if (const auto* p = std::get_if<PeriodicE>(&e->v))
        return "periodic(" + format_number(p->period) + "; " + print_expr(p->base) + ")";
    return {};
}

// ---------------------------------------------------------------------------
// Structural equality
// ---------------------------------------------------------------------------

inline bool equal(const ExprPtr& a, const ExprPtr& b) {
    if (a->v.index() != b->v.index()) return false;
    if (const auto* x = std::get_if<ConstE>(&a->v))
        return x->c == std::get<ConstE>(b->v).c;
    if (const auto* x = std::get_if<PowerE>(&a->v)) {
        const auto& y = std::get<PowerE>(b->v);
        return x->a == y.a && x->alpha == y.alpha && x->side == y.side && x->sgn == y.sgn;
    }
    if (const auto* x = std::get_if<ChirpE>(&a->v)) {
        const auto& y = std::get<ChirpE>(b->v);
        return x->a == y.a && x->alpha == y.alpha && x->beta == y.beta &&
               x->trig == y.trig && x->side == y.side && x->sgn == y.sgn;
    }
    if (const auto* x = std::get_if<StepE>(&a->v)) {
        const auto& y = std::get<StepE>(b->v);
        return x->a == y.a && seq_equal(x->coeff, y.coeff);
    }
    if (const auto* x = std::get_if<IndicatorE>(&a->v)) {
        const auto& y = std::get<IndicatorE>(b->v);
        return x->lo == y.lo && x->hi == y.hi;
    }
    if (const auto* x = std::get_if<SmoothE>(&a->v)) {
        const auto& y = std::get<SmoothE>(b->v);
        if (x->kind != y.kind) return false;
        if (x->kind == SmoothE::Kind::poly) return x->coeffs == y.coeffs;
        if (x->kind == SmoothE::Kind::ext) return x->ext == y.ext;
        return x->mul == y.mul && x->off == y.off;
    }
    if (const auto* x = std::get_if<SumE>(&a->v)) {
        const auto& y = std::get<SumE>(b->v);
        if (x->terms.size() != y.terms.size()) return false;
        for (size_t i = 0; i < x->terms.size(); ++i)
            if (!equal(x->terms[i], y.terms[i])) return false;
        return true;
    }
    if (const auto* x = std::get_if<ProductE>(&a->v)) {
        const auto& y = std::get<ProductE>(b->v);
        return equal(x->smooth, y.smooth) && equal(x->general, y.general);
    }
    if (const auto* x = std::get_if<ScaleE>(&a->v)) {
        const auto& y = std::get<ScaleE>(b->v);
        return x->k == y.k && equal(x->inner, y.inner);
    }
    if (const auto* x = std::get_if<PeriodicE>(&a->v)) {
        const auto& y = std::get<PeriodicE>(b->v);
        return x->period == y.period && equal(x->base, y.base);
    }
    return false;
}

}  // namespace distint
