#pragma once

#include <cctype>
#include <cstdlib>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "distint/expr.hpp"

namespace distint {

struct ParseDiagnostics {
    size_t position = 0;
    std::string message;
    std::vector<std::string> expected;
};

using ParseResult = std::variant<ExprPtr, ParseDiagnostics>;

namespace detail {

class Parser {
public:
    explicit Parser(std::string_view src) : src_(src) {}

    ParseResult run() {
        skip_ws();
        ExprPtr e = parse_expr();
        if (failed_) return diag_;
        skip_ws();
        if (pos_ != src_.size()) {
            fail("trailing input", {"end of input", "+", "*"});
            return diag_;
        }
        std::string err;
        if (!term_products_legal(e, err)) {
            fail_at(0, err, {});
            return diag_;
        }
        return e;
    }

private:
    std::string_view src_;
    size_t pos_ = 0;
    bool failed_ = false;
    ParseDiagnostics diag_;

    void fail(const std::string& msg, std::vector<std::string> expected) {
        fail_at(pos_, msg, std::move(expected));
    }
    void fail_at(size_t pos, const std::string& msg, std::vector<std::string> expected) {
        if (failed_) return;
        failed_ = true;
        diag_.position = pos <= src_.size() ? pos : src_.size();
        diag_.message = msg;
        diag_.expected = std::move(expected);
    }

    void skip_ws() {
        while (pos_ < src_.size() && std::isspace(static_cast<unsigned char>(src_[pos_]))) ++pos_;
    }
    bool eof() const { return pos_ >= src_.size(); }
    char peek() const { return eof() ? '\0' : src_[pos_]; }

    bool try_consume(char c) {
        skip_ws();
        if (!eof() && src_[pos_] == c) {
            ++pos_;
            return true;
        }
        return false;
    }
    bool expect(char c) {
        if (try_consume(c)) return true;
        fail(std::string("expected '") + c + "'", {std::string(1, c)});
        return false;
    }

    bool try_keyword(std::string_view kw) {
        skip_ws();
        if (src_.substr(pos_, kw.size()) == kw) {
            // keywords are followed by a non-identifier character
            size_t after = pos_ + kw.size();
            if (after < src_.size()) {
                char c = src_[after];
                if (std::isalnum(static_cast<unsigned char>(c)) || c == '_') return false;
            }
            pos_ += kw.size();
            return true;
        }
        return false;
    }

    std::string peek_ident() {
        skip_ws();
        size_t p = pos_;
        std::string id;
        while (p < src_.size() &&
               (std::isalpha(static_cast<unsigned char>(src_[p])) || src_[p] == '_'))
            id += src_[p++];
        return id;
    }

    bool parse_number(double& out) {
        skip_ws();
        const char* begin = src_.data() + pos_;
        char* end = nullptr;
        double v = std::strtod(begin, &end);
        if (end == begin) {
            fail("expected a number", {"number"});
            return false;
        }
        pos_ += static_cast<size_t>(end - begin);
        out = v;
        return true;
    }

    // expr := term (("+"|"-") term)*
    ExprPtr parse_expr() {
        std::vector<ExprPtr> terms;
        ExprPtr t = parse_term();
        if (failed_) return nullptr;
        terms.push_back(t);
        for (;;) {
            skip_ws();
            if (try_consume('+')) {
                t = parse_term();
                if (failed_) return nullptr;
                terms.push_back(t);
            } else if (!eof() && peek() == '-' && looks_like_term_sep()) {
                ++pos_;
                t = parse_term();
                if (failed_) return nullptr;
                terms.push_back(make_scale(-1.0, t));
            } else {
                break;
            }
        }
        return make_sum(std::move(terms));
    }

    bool looks_like_term_sep() const {
        // '-' between terms (a leading '-' is consumed by the number literal)
        return true;
    }

    // term := factor ("*" factor)*
    ExprPtr parse_term() {
        std::vector<ExprPtr> factors;
        ExprPtr f = parse_factor();
        if (failed_) return nullptr;
        factors.push_back(f);
        while (try_consume('*')) {
            f = parse_factor();
            if (failed_) return nullptr;
            factors.push_back(f);
        }
        return combine_factors(std::move(factors));
    }

    ExprPtr combine_factors(std::vector<ExprPtr> factors) {
        if (factors.size() == 1) return factors[0];
        double scale = 1.0;
        std::vector<ExprPtr> smooth, general;
        for (auto& f : factors) {
            if (const auto* c = std::get_if<ConstE>(&f->v))
                scale *= c->c;
            else if (const auto* sc = std::get_if<ScaleE>(&f->v)) {
                scale *= sc->k;
                (is_smooth(sc->inner) ? smooth : general).push_back(sc->inner);
            } else
                (is_smooth(f) ? smooth : general).push_back(f);
        }
        ExprPtr out;
        if (general.empty()) {
            if (smooth.empty()) return make_const(scale);
            out = smooth.back();
            smooth.pop_back();
            while (!smooth.empty()) {
                out = make_product(smooth.back(), out);
                smooth.pop_back();
            }
        } else {
            ExprPtr g = general.back();
            general.pop_back();
            while (!general.empty()) {
                // legality of non-smooth pairings is checked after the parse
                g = make_expr(ProductE{general.back(), g});
                general.pop_back();
            }
            out = g;
            for (auto& s : smooth) out = make_product(s, out);
        }
        return make_scale(scale, out);
    }

    // factor := leaf | number | "(" expr ")"
    ExprPtr parse_factor() {
        skip_ws();
        if (try_consume('(')) {
            ExprPtr e = parse_expr();
            if (failed_) return nullptr;
            if (!expect(')')) return nullptr;
            return e;
        }
        std::string id = peek_ident();
        if (id == "chirp") return parse_chirp();
        if (id == "pow") return parse_pow();
        if (id == "step") return parse_step();
        if (id == "indicator") return parse_indicator();
        if (id == "sin") return parse_trig(SmoothE::Kind::sin_k);
        if (id == "cos") return parse_trig(SmoothE::Kind::cos_k);
        if (id == "exp") return parse_trig(SmoothE::Kind::exp_k);
        if (id == "poly") return parse_poly();
        if (id == "periodic") return parse_periodic();
        if (!id.empty()) {
            fail("unknown function '" + id + "'",
                 {"chirp", "pow", "step", "indicator", "sin", "cos", "exp", "poly",
                  "periodic", "number", "("});
            return nullptr;
        }
        double v;
        if (!parse_number(v)) {
            diag_.expected = {"chirp", "pow", "step", "indicator", "sin", "cos",
                              "exp", "poly", "periodic", "number", "("};
            return nullptr;
        }
        return make_const(v);
    }

    void consume_ident() {
        skip_ws();
        while (!eof() && (std::isalpha(static_cast<unsigned char>(peek())) || peek() == '_'))
            ++pos_;
    }

    struct Args {
        double a = 0.0, alpha = 0.0, beta = 1.0;
        bool has_alpha = false, has_beta = false;
        Side side = Side::both;
        bool sgn = false;
        bool trig_set = false;
        Trig trig = Trig::sin;
    };

    bool parse_args(Args& args, bool allow_trig) {
        for (;;) {
            skip_ws();
            std::string key = peek_ident();
            if (allow_trig && (key == "sin" || key == "cos")) {
                consume_ident();
                args.trig = (key == "sin") ? Trig::sin : Trig::cos;
                args.trig_set = true;
            } else if (key == "a" || key == "alpha" || key == "beta") {
                consume_ident();
                if (!expect('=')) return false;
                double v;
                if (!parse_number(v)) return false;
                if (key == "a") args.a = v;
                if (key == "alpha") {
                    args.alpha = v;
                    args.has_alpha = true;
                }
                if (key == "beta") {
                    args.beta = v;
                    args.has_beta = true;
                }
            } else if (key == "side") {
                consume_ident();
                if (!expect('=')) return false;
                std::string v = peek_ident();
                consume_ident();
                if (v == "both")
                    args.side = Side::both;
                else if (v == "right")
                    args.side = Side::right;
                else if (v == "left")
                    args.side = Side::left;
                else {
                    fail("bad side value '" + v + "'", {"both", "right", "left"});
                    return false;
                }
            } else if (key == "signed") {
                consume_ident();
                if (!expect('=')) return false;
                std::string v = peek_ident();
                consume_ident();
                if (v == "true")
                    args.sgn = true;
                else if (v == "false")
                    args.sgn = false;
                else {
                    fail("bad signed value '" + v + "'", {"true", "false"});
                    return false;
                }
            } else {
                fail("unknown argument '" + key + "'",
                     {"a", "alpha", "beta", "side", "signed"});
                return false;
            }
            if (!try_consume(',')) break;
        }
        return true;
    }

    ExprPtr parse_chirp() {
        consume_ident();
        if (!expect('(')) return nullptr;
        Args args;
        size_t arg_pos = pos_;
        if (!parse_args(args, /*allow_trig=*/true)) return nullptr;
        if (!expect(')')) return nullptr;
        if (!args.trig_set) {
            fail_at(arg_pos, "chirp needs a trailing sin|cos kind", {"sin", "cos"});
            return nullptr;
        }
        if (!(args.beta > 0)) {
            fail_at(arg_pos, "chirp requires beta > 0", {});
            return nullptr;
        }
        return make_chirp(args.a, args.alpha, args.beta, args.trig, args.side, args.sgn);
    }

    ExprPtr parse_pow() {
        consume_ident();
        if (!expect('(')) return nullptr;
        Args args;
        if (!parse_args(args, /*allow_trig=*/false)) return nullptr;
        if (!expect(')')) return nullptr;
        return make_power(args.a, args.alpha, args.side, args.sgn);
    }

    ExprPtr parse_indicator() {
        consume_ident();
        if (!expect('(')) return nullptr;
        size_t arg_pos = pos_;
        double lo, hi;
        if (!parse_number(lo)) return nullptr;
        if (!expect(',')) return nullptr;
        if (!parse_number(hi)) return nullptr;
        if (!expect(')')) return nullptr;
        if (!(lo < hi)) {
            fail_at(arg_pos, "indicator requires lo < hi", {});
            return nullptr;
        }
        return make_indicator(lo, hi);
    }

    ExprPtr parse_poly() {
        consume_ident();
        if (!expect('(')) return nullptr;
        std::vector<double> coeffs;
        do {
            double v;
            if (!parse_number(v)) return nullptr;
            coeffs.push_back(v);
        } while (try_consume(','));
        if (!expect(')')) return nullptr;
        return make_poly(std::move(coeffs));
    }

    // lin := [num "*"] "x" [("+"|"-") num]
    ExprPtr parse_trig(SmoothE::Kind kind) {
        consume_ident();
        if (!expect('(')) return nullptr;
        double mul = 1.0, off = 0.0;
        skip_ws();
        if (peek() != 'x') {
            if (!parse_number(mul)) return nullptr;
            if (!expect('*')) return nullptr;
        }
        skip_ws();
        if (peek() != 'x') {
            fail("expected 'x' in linear argument", {"x"});
            return nullptr;
        }
        ++pos_;
        skip_ws();
        if (peek() == '+' || peek() == '-') {
            if (!parse_number(off)) return nullptr;
        }
        if (!expect(')')) return nullptr;
        return make_smooth_trig(kind, mul, off);
    }

    ExprPtr parse_periodic() {
        consume_ident();
        if (!expect('(')) return nullptr;
        size_t arg_pos = pos_;
        double period;
        if (!parse_number(period)) return nullptr;
        if (!expect(';')) return nullptr;
        ExprPtr base = parse_expr();
        if (failed_) return nullptr;
        if (!expect(')')) return nullptr;
        if (!(period > 0)) {
            fail_at(arg_pos, "periodic requires period > 0", {});
            return nullptr;
        }
        return make_periodic(period, base);
    }

    ExprPtr parse_step() {
        consume_ident();
        if (!expect('(')) return nullptr;
        double a = 0.0;
        skip_ws();
        if (peek_ident() == "a") {
            size_t save = pos_;
            consume_ident();
            skip_ws();
            if (peek() == '=') {
                ++pos_;
                if (!parse_number(a)) return nullptr;
                if (!expect(',')) return nullptr;
            } else {
                pos_ = save;
            }
        }
        skip_ws();
        if (peek_ident() == "cn") {
            consume_ident();
            if (!expect('=')) return nullptr;
        }
        SeqPtr coeff = parse_seq_expr();
        if (failed_) return nullptr;
        if (!expect(')')) return nullptr;
        return make_step(a, coeff);
    }

    // ---- sequence formula sub-language over n ----
    SeqPtr parse_seq_expr() {
        SeqPtr lhs = parse_seq_term();
        if (failed_) return nullptr;
        for (;;) {
            skip_ws();
            if (try_consume('+')) {
                SeqPtr rhs = parse_seq_term();
                if (failed_) return nullptr;
                lhs = SeqNode::binary(SeqNode::Op::add, lhs, rhs);
            } else if (peek() == '-') {
                ++pos_;
                SeqPtr rhs = parse_seq_term();
                if (failed_) return nullptr;
                lhs = SeqNode::binary(SeqNode::Op::sub, lhs, rhs);
            } else {
                return lhs;
            }
        }
    }

    SeqPtr parse_seq_term() {
        SeqPtr lhs = parse_seq_factor();
        if (failed_) return nullptr;
        for (;;) {
            skip_ws();
            if (try_consume('*')) {
                SeqPtr rhs = parse_seq_factor();
                if (failed_) return nullptr;
                lhs = SeqNode::binary(SeqNode::Op::mul, lhs, rhs);
            } else if (try_consume('/')) {
                SeqPtr rhs = parse_seq_factor();
                if (failed_) return nullptr;
                lhs = SeqNode::binary(SeqNode::Op::div, lhs, rhs);
            } else {
                return lhs;
            }
        }
    }

    SeqPtr parse_seq_factor() {
        SeqPtr base = parse_seq_atom();
        if (failed_) return nullptr;
        skip_ws();
        if (try_consume('^')) {
            SeqPtr e = parse_seq_atom();
            if (failed_) return nullptr;
            return SeqNode::binary(SeqNode::Op::pow, base, e);
        }
        return base;
    }

    SeqPtr parse_seq_atom() {
        skip_ws();
        if (try_consume('(')) {
            SeqPtr e = parse_seq_expr();
            if (failed_) return nullptr;
            if (!expect(')')) return nullptr;
            return e;
        }
        if (peek() == 'n') {
            ++pos_;
            return SeqNode::var();
        }
        double v;
        if (!parse_number(v)) {
            diag_.expected = {"number", "n", "("};
            return nullptr;
        }
        return SeqNode::number(v);
    }

    // Each additive term may contain at most one hard leaf; bounded factors
    // (indicators, positive powers, smooth nodes) are free.
    bool term_products_legal(const ExprPtr& e, std::string& err) {
        if (const auto* s = std::get_if<SumE>(&e->v)) {
            for (const auto& t : s->terms)
                if (!term_products_legal(t, err)) return false;
            return true;
        }
        if (const auto* s = std::get_if<ScaleE>(&e->v))
            return term_products_legal(s->inner, err);
        int hard = count_hard(e);
        if (hard > 1) {
            err = "two non-smooth factors in one product term";
            return false;
        }
        return true;
    }

    int count_hard(const ExprPtr& e) {
        if (const auto* p = std::get_if<ProductE>(&e->v))
            return count_hard(p->smooth) + count_hard(p->general);
        if (const auto* s = std::get_if<ScaleE>(&e->v)) return count_hard(s->inner);
        if (const auto* s = std::get_if<SumE>(&e->v)) {
            int m = 0;
            for (const auto& t : s->terms) m = std::max(m, count_hard(t));
            return m;
        }
        return is_hard_leaf(e) ? 1 : 0;
    }
};

}  // namespace detail

/// Parse an integrand in the external grammar. Returns the AST or diagnostics
/// with the failing offset and the expected-token set.
inline ParseResult parse(std::string_view text) {
    return detail::Parser(text).run();
}

/// Convenience for tests and internal fixtures: throws on parse failure.
inline ExprPtr parse_or_throw(std::string_view text) {
    ParseResult r = parse(text);
    if (auto* d = std::get_if<ParseDiagnostics>(&r))
        throw std::invalid_argument("parse error at " + std::to_string(d->position) +
                                    ": " + d->message);
    return std::get<ExprPtr>(r);
}

}  // namespace distint
