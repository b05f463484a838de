#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <vector>

#include "distint/config.hpp"
#include "distint/linalg.hpp"
#include "distint/quadrature.hpp"

namespace distint {

enum class CesaroStatus { Converged, Diverged, Inconclusive, EvDisagreement };

struct CesaroValue {
    double value = 0.0;
    int order_k = 0;
    CesaroStatus status = CesaroStatus::Inconclusive;
    double diagnostics = 0.0;  // tail oscillation measure (window max - min)
    std::int64_t terms_used = 0;
};

inline const char* to_string(CesaroStatus s) {
    switch (s) {
        case CesaroStatus::Converged: return "Converged";
        case CesaroStatus::Diverged: return "Diverged";
        case CesaroStatus::Inconclusive: return "Inconclusive";
        case CesaroStatus::EvDisagreement: return "EvDisagreement";
    }
    return "?";
}

// ---------------------------------------------------------------------------
// (C,k) series summation with true Cesaro binomial weights
// ---------------------------------------------------------------------------

/// (C,k) mean of the partial sums of a_1..a_N. The k-fold iterated partial
/// sums divided by binom(n+k, k) realize the binomial weights
/// sum_j binom(n-j+k-1, k-1) s_j.
inline CesaroValue cesaro_sum(const std::function<double(long)>& a, int k, long N,
                              const Config& cfg = default_config()) {
    CesaroValue out;
    out.order_k = k;
    out.terms_used = N;
    if (N < 1) return out;

    std::vector<double> s(static_cast<size_t>(N));
    double acc = 0.0;
    for (long n = 1; n <= N; ++n) {
        acc += a(n);
        s[static_cast<size_t>(n - 1)] = acc;
    }
    for (int pass = 0; pass < k; ++pass)
        for (size_t i = 1; i < s.size(); ++i) s[i] += s[i - 1];

    auto mean_at = [&](size_t i) {
        // binom(n+k, k) with n = i+1
        double denom = 1.0;
        for (int j = 1; j <= k; ++j)
            denom *= static_cast<double>(i + 1 + j) / static_cast<double>(j);
        return s[i] / denom;
    };

    const size_t w0 = static_cast<size_t>(std::floor(0.9 * static_cast<double>(N)));
    const size_t first = w0 > 0 ? w0 - 1 : 0;
    double mn = HUGE_VAL, mx = -HUGE_VAL;
    bool inc = true, dec = true;
    double prev = 0.0;
    for (size_t i = first; i < s.size(); ++i) {
        const double m = mean_at(i);
        mn = std::min(mn, m);
        mx = std::max(mx, m);
        if (i > first) {
            inc = inc && m >= prev;
            dec = dec && m <= prev;
        }
        prev = m;
    }
    const double m_last = mean_at(s.size() - 1);
    out.value = m_last;
    const double scale = std::max(1.0, std::fabs(m_last));
    out.diagnostics = mx - mn;

    if (out.diagnostics <= cfg.cesaro_tol * scale) {
        out.status = CesaroStatus::Converged;
        // the finite-N mean carries an O(log n / n) trend; remove it by a fit
        // over log-spaced samples (a narrow window would make 1/n and
        // ln(n)/n collinear)
        std::vector<std::vector<double>> rows;
        std::vector<double> rhs;
        const size_t samples = 48;
        size_t prev_idx = static_cast<size_t>(-1);
        for (size_t i = 0; i < samples; ++i) {
            const double frac =
                std::pow(10.0, -1.5 * (1.0 - static_cast<double>(i) / (samples - 1)));
            size_t idx = static_cast<size_t>(static_cast<double>(s.size() - 1) * frac);
            if (idx == prev_idx || idx >= s.size()) continue;
            prev_idx = idx;
            const double nn = static_cast<double>(idx + 1);
            rows.push_back({1.0, 1.0 / nn, std::log(nn) / nn});
            rhs.push_back(mean_at(idx));
        }
        std::vector<double> c = detail::least_squares(rows, rhs);
        out.value = c[0];
    } else if ((inc || dec) &&
               (std::fabs(m_last) > cfg.divergence_bound ||
                out.diagnostics > 100.0 * cfg.cesaro_tol * scale)) {
        out.status = CesaroStatus::Diverged;
    } else {
        out.status = CesaroStatus::Inconclusive;
    }
    return out;
}

inline CesaroValue cesaro_sum(const std::vector<double>& terms, int k,
                              const Config& cfg = default_config()) {
    return cesaro_sum([&terms](long n) { return terms[static_cast<size_t>(n - 1)]; }, k,
                      static_cast<long>(terms.size()), cfg);
}

/// Escalates the order until the mean sequence settles.
inline CesaroValue cesaro_sum_auto(const std::function<double(long)>& a, long N,
                                   const Config& cfg = default_config(),
                                   int k_from = 0) {
    CesaroValue last;
    for (int k = k_from; k <= cfg.k_max; ++k) {
        last = cesaro_sum(a, k, N, cfg);
        if (last.status != CesaroStatus::Inconclusive) return last;
    }
    return last;
}

// ---------------------------------------------------------------------------
// Cesaro limits at infinity: iterated averaging A[F](x) = (1/x) int F
// ---------------------------------------------------------------------------

namespace detail {

/// int_tau^x ln^m(x/t) dt in closed form.
inline double avg_kernel_int(int m, double tau, double x) {
    double fact = 1.0;
    for (int i = 2; i <= m; ++i) fact *= i;
    const double L = std::log(x / tau);
    double sum = 0.0, pw = 1.0, f = fact;
    // tau * sum_{i<=m} (m!/i!) ln^i(x/tau)
    for (int i = 0; i <= m; ++i) {
        sum += f * pw;
        pw *= L;
        f /= (i + 1.0);
    }
    return fact * x - tau * sum;
}

struct LimitSamples {
    std::vector<double> x;
    std::vector<double> value;
};

/// Fit the averaged samples against the deterministic tail family
/// {1, 1/x, ln x/x, ln^2 x/x} and judge convergence by the decay-weighted
/// residual (residuals are expected to shrink like 1/x, so each is rescaled
/// by x_i / x_max before the comparison).
inline CesaroValue assess_limit_samples(const LimitSamples& s, int k,
                                        const Config& cfg) {
    CesaroValue out;
    out.order_k = k;
    out.terms_used = static_cast<std::int64_t>(s.x.size());

    double mn = HUGE_VAL, mx = -HUGE_VAL;
    bool inc = true, dec = true;
    for (size_t i = 0; i < s.value.size(); ++i) {
        mn = std::min(mn, s.value[i]);
        mx = std::max(mx, s.value[i]);
        if (i) {
            inc = inc && s.value[i] >= s.value[i - 1];
            dec = dec && s.value[i] <= s.value[i - 1];
        }
    }

    // averaging order k leaves a deterministic tail 1/x, plus ln^j(x)/x terms
    // introduced by each averaging pass; residuals shrink like 1/x, so both
    // the fit and its assessment are weighted by x/x_max. The log columns are
    // centered at the geometric mean, keeping the fit well conditioned over
    // a narrow sample span.
    const size_t ncol = 2 + static_cast<size_t>(std::clamp(k, 0, 2));
    const double x_max = s.x.back();
    const double log_mid = 0.5 * (std::log(s.x.front()) + std::log(x_max));
    std::vector<std::vector<double>> rows;
    std::vector<double> rhs;
    for (size_t i = 0; i < s.x.size(); ++i) {
        const double x = s.x[i];
        const double w = x / x_max;
        std::vector<double> row{w, w / x};
        const double L = std::log(x) - log_mid;
        if (ncol > 2) row.push_back(w * L / x);
        if (ncol > 3) row.push_back(w * L * L / x);
        rows.push_back(std::move(row));
        rhs.push_back(w * s.value[i]);
    }
    std::vector<double> c = least_squares(rows, rhs);
    const double c0 = c[0];
    double wresid = 0.0;
    for (size_t i = 0; i < s.x.size(); ++i) {
        double model = 0.0;
        for (size_t j = 0; j < rows[i].size(); ++j) model += c[j] * rows[i][j];
        wresid = std::max(wresid, std::fabs(rhs[i] - model));
    }

    out.value = c0;
    out.diagnostics = wresid;
    const double scale = std::max(1.0, std::fabs(c0));

    if (wresid <= cfg.cesaro_tol * scale) {
        out.status = CesaroStatus::Converged;
        return out;
    }
    const bool monotone_drift = (inc || dec) && (mx - mn) > 10.0 * cfg.cesaro_tol * scale;
    if (monotone_drift &&
        (std::fabs(s.value.back()) >= std::fabs(s.value.front()) ||
         std::fabs(c0) > cfg.divergence_bound)) {
        out.status = CesaroStatus::Diverged;
        out.value = s.value.back();
        return out;
    }
    out.status = CesaroStatus::Inconclusive;
    return out;
}

}  // namespace detail

/// k-fold averaging of a callable F on [x0, infinity), evaluated near x = X
/// and stabilized over the last decade. The k-fold average collapses to a
/// single mass-normalized integral int F(t) ln^(k-1)(x/t) dt / int ln^(k-1),
/// which reproduces constants exactly at every order.
inline CesaroValue cesaro_limit_at_infinity(const std::function<double(double)>& F,
                                            double x0, int k, double X,
                                            const Config& cfg = default_config()) {
    detail::LimitSamples samples;
    const int m = std::max(4, cfg.limit_samples);
    const double span = 1.5;  // decades below X covered by the samples
    for (int i = 0; i < m; ++i) {
        const double x =
            X * std::pow(10.0, span * (-1.0 + static_cast<double>(i) / (m - 1)));
        samples.x.push_back(x);
        if (k == 0) {
            samples.value.push_back(F(x));
            continue;
        }
        quad::Budget budget{cfg.quad_budget};
        auto integrand = [&](double t) {
            return k == 1 ? F(t) : F(t) * std::pow(std::log(x / t), k - 1);
        };
        const double mass = detail::avg_kernel_int(k - 1, x0, x);
        QuadResult q = quad::adaptive(integrand, x0, x, cfg.cesaro_tol * 1e-4 * mass,
                                      1e-12, budget);
        samples.value.push_back(q.value / mass);
    }
    return detail::assess_limit_samples(samples, k, cfg);
}

/// Escalating-order limit at infinity.
inline CesaroValue cesaro_limit_at_infinity_auto(
    const std::function<double(double)>& F, double x0, double X,
    const Config& cfg = default_config(), int k_from = 0) {
    CesaroValue last;
    for (int k = k_from; k <= cfg.k_max; ++k) {
        last = cesaro_limit_at_infinity(F, x0, k, X, cfg);
        if (last.status == CesaroStatus::Converged) return last;
        if (last.status == CesaroStatus::Diverged && k >= 2) return last;
    }
    return last;
}

// ---------------------------------------------------------------------------
// Local Cesaro limits at a finite endpoint (Hake-type limits)
// ---------------------------------------------------------------------------

/// Local Cesaro limit of F(c) as c -> b from the left. Iterated primitives
/// F^(-n) are evaluated on a geometric mesh via running moment integrals of F
/// in the distance variable s = b - c (the Cauchy repeated-integration
/// kernel), a polynomial of degree < n is carried by the fit, and the
/// normalized s^n coefficient gives the limit. The mesh descends lazily and
/// stops as soon as successive window fits stabilize; the order escalates
/// from n_request (or 0 when negative) up to n_max.
inline CesaroValue local_cesaro_limit(const std::function<double(double)>& F, double a,
                                      double b, int n_request = -1,
                                      const Config& cfg = default_config()) {
    CesaroValue out;
    const double width = b - a;
    const double s0 = width * cfg.mesh_start_fraction;

    std::vector<double> mesh_s{s0};
    std::vector<double> f_vals{F(b - s0)};
    std::vector<std::vector<double>> moments;  // N_m(s_j) = int_{s_j}^{s0} tau^m F(b-tau)
    quad::Budget budget{cfg.quad_budget};

    auto extend_mesh = [&](size_t j_target) {
        while (mesh_s.size() <= j_target) {
            const double s = mesh_s.back() * cfg.mesh_ratio;
            mesh_s.push_back(s);
            f_vals.push_back(F(b - s));
        }
    };
    auto ensure_moment = [&](int m, size_t j_target) {
        while (static_cast<int>(moments.size()) <= m) moments.push_back({0.0});
        auto& N = moments[static_cast<size_t>(m)];
        while (N.size() <= j_target) {
            const size_t j = N.size();
            auto g = [&](double tau) { return std::pow(tau, m) * F(b - tau); };
            const double tol =
                1e-10 * std::pow(mesh_s[j], m) * (mesh_s[j - 1] - mesh_s[j]) + 1e-14;
            QuadResult q = quad::adaptive(g, mesh_s[j], mesh_s[j - 1], tol, 1e-10, budget);
            N.push_back(N.back() + q.value);
        }
    };

    const int n_lo = n_request >= 0 ? n_request : 0;
    const int n_hi = n_request >= 0 ? n_request : cfg.n_max;
    const int W = 30, step = 6;

    CesaroValue first_attempt;
    bool have_first = false;
    const std::int64_t per_order_budget = cfg.quad_budget / (n_hi - n_lo + 2);
    for (int n = n_lo; n <= n_hi; ++n) {
        const int max_j = (n == 0) ? cfg.mesh_points + 60 : cfg.mesh_points;
        const std::int64_t order_cap = budget.used + per_order_budget;
        std::vector<double> history;
        double prev_spread = HUGE_VAL;
        int decaying = 0;
        double candidate_value = 0.0, candidate_spread = 0.0;
        bool have_candidate = false;
        for (int end = W; end <= max_j; end += step) {
            extend_mesh(static_cast<size_t>(end - 1));
            if (n > 0)
                for (int m = 0; m < n; ++m) ensure_moment(m, static_cast<size_t>(end - 1));

            std::vector<double> P(static_cast<size_t>(end));
            if (n == 0) {
                for (int j = 0; j < end; ++j) P[static_cast<size_t>(j)] = f_vals[static_cast<size_t>(j)];
            } else {
                double fact = 1.0;
                for (int i = 2; i < n; ++i) fact *= i;
                for (int j = 0; j < end; ++j) {
                    double sum = 0.0, binom = 1.0, spow = 1.0;
                    for (int i = 0; i <= n - 1; ++i) {
                        sum += binom * spow *
                               moments[static_cast<size_t>(n - 1 - i)][static_cast<size_t>(j)];
                        binom *= static_cast<double>(n - 1 - i) / static_cast<double>(i + 1);
                        spow *= -mesh_s[static_cast<size_t>(j)];
                    }
                    P[static_cast<size_t>(j)] = sum / fact;
                }
            }

            // fit over the trailing window
            const int beg = end - W;
            const double s_ref = mesh_s[static_cast<size_t>(beg)];
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
                    const double t = mesh_s[static_cast<size_t>(i)] / s_ref;
                    for (int c = 0; c <= n; ++c) {
                        row[static_cast<size_t>(c)] = p;
                        p *= t;
                    }
                    rows.push_back(std::move(row));
                    rhs.push_back(P[static_cast<size_t>(i)]);
                }
                std::vector<double> c = detail::least_squares(rows, rhs);
                double fact = 1.0;
                for (int i = 2; i <= n; ++i) fact *= i;
                est = ((n % 2) ? -1.0 : 1.0) * fact * c[static_cast<size_t>(n)] /
                      std::pow(s_ref, n);
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
            // order 0 is quadrature-free, so insist on full precision there;
            // quadrature-backed orders settle at the looser local tolerance
            // (the window top pollutes the s^n coefficient at O(s_top))
            const double accept = (n == 0) ? 0.2 * cfg.tol : cfg.local_limit_tol;
            if (spread <= accept * scale) {
                out.value = est;
                out.order_k = n;
                out.status = CesaroStatus::Converged;
                out.diagnostics = spread;
                out.terms_used = end;
                return out;
            }
            if (n == 0 && spread <= cfg.cesaro_tol * scale && decaying >= 2) {
                candidate_value = est;
                candidate_spread = spread;
                have_candidate = true;
            }
            if (budget.used >= order_cap || budget.exhausted()) break;
        }
        // a decayed-but-not-machine-tight order-zero limit still counts
        if (n == 0 && have_candidate) {
            out.value = candidate_value;
            out.order_k = 0;
            out.status = CesaroStatus::Converged;
            out.diagnostics = candidate_spread;
            out.terms_used = static_cast<std::int64_t>(mesh_s.size());
            return out;
        }
        if (!have_first && !history.empty()) {
            first_attempt.value = history.back();
            first_attempt.order_k = n;
            first_attempt.diagnostics = prev_spread;
            have_first = true;
        }
    }

    // no order settled: distinguish divergence from an honest shrug by the
    // behavior of the raw samples
    bool inc = true, dec = true, one_sign = true;
    for (size_t j = 1; j < f_vals.size(); ++j) {
        inc = inc && f_vals[j] >= f_vals[j - 1];
        dec = dec && f_vals[j] <= f_vals[j - 1];
        one_sign = one_sign && (f_vals[j] > 0) == (f_vals[0] > 0);
    }
    const double grow =
        std::fabs(f_vals.back()) / std::max(1e-300, std::fabs(f_vals.front()));
    out.order_k = n_hi;
    out.terms_used = static_cast<std::int64_t>(mesh_s.size());
    if ((inc || dec) && one_sign && grow > 10.0) {
        out.status = CesaroStatus::Diverged;
        out.value = f_vals.back();
    } else {
        out.status = CesaroStatus::Inconclusive;
        out.value = have_first ? first_attempt.value : 0.0;
        out.diagnostics = have_first ? first_attempt.diagnostics : 0.0;
    }
    return out;
}

// ---------------------------------------------------------------------------
// Principal-value and e.v. evaluations of two-sided pairings
// ---------------------------------------------------------------------------

enum class EvalMode { pv, ev };

/// g is a primitive of the pairing; pv takes the (C,k) limit of
/// g(x) - g(-x), e.v. requires limits of g(a x) - g(-x) to agree for every
/// ratio in the sample list.
inline CesaroValue pv_ev_evaluate(const std::function<double(double)>& g, EvalMode mode,
                                  int k, std::vector<double> ratios,
                                  const Config& cfg = default_config()) {
    if (mode == EvalMode::pv) {
        auto D = [&g](double x) { return g(x) - g(-x); };
        return cesaro_limit_at_infinity_auto(D, 1.0, cfg.limit_x_max, cfg, k);
    }
    if (ratios.empty()) ratios = {0.5, 1.0, 2.0};
    std::vector<CesaroValue> vals;
    for (double a : ratios) {
        auto D = [&g, a](double x) { return g(a * x) - g(-x); };
        vals.push_back(cesaro_limit_at_infinity_auto(D, 1.0, cfg.limit_x_max, cfg, k));
    }
    CesaroValue out = vals.front();
    for (const auto& v : vals) {
        if (v.status == CesaroStatus::Diverged) return v;
        if (v.status != CesaroStatus::Converged) out = v;
    }
    if (out.status != CesaroStatus::Converged) return out;
    double mn = HUGE_VAL, mx = -HUGE_VAL, mean = 0.0;
    for (const auto& v : vals) {
        mn = std::min(mn, v.value);
        mx = std::max(mx, v.value);
        mean += v.value / static_cast<double>(vals.size());
        out.order_k = std::max(out.order_k, v.order_k);
    }
    const double scale = std::max(1.0, std::fabs(mean));
    if (mx - mn > 50.0 * cfg.cesaro_tol * scale) {
        out.status = CesaroStatus::EvDisagreement;
        out.diagnostics = mx - mn;
        return out;
    }
    out.value = mean;
    out.diagnostics = mx - mn;
    return out;
}

}  // namespace distint
