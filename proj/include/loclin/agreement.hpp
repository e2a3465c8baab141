#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

namespace loclin {

/// Chance-corrected agreement between targets and predictions:
/// r = 1 − δ/μ with δ the mean squared error and μ the mean squared
/// cross-pair difference. r_lower subtracts a margin of error on δ.
struct AgreementScore {
    double delta = 0.0;
    double mu = 0.0;
    double r = 0.0;
    double moe_delta = 0.0;
    double r_lower = 0.0;
    double sigma = 0.0;       // sample std of per-point squared residuals
    double t_critical = 0.0;  // two-sided critical value at df = n-1
    std::size_t n = 0;
    bool degenerate = false;  // mu == 0: no cross-pair variation at all
};

namespace detail {

inline void check_pair(const std::vector<double>& y, const std::vector<double>& yhat) {
    if (y.size() != yhat.size()) throw std::invalid_argument("y/yhat length mismatch");
    if (y.empty()) throw std::invalid_argument("empty sample");
}

/// Regularized incomplete beta I_x(a,b), continued fraction (modified
/// Lentz). Relative accuracy ~1e-14 for the (a, b) ranges used here.
inline double incomplete_beta(double a, double b, double x) {
    if (x <= 0.0) return 0.0;
    if (x >= 1.0) return 1.0;

    auto contfrac = [](double a_, double b_, double x_) {
        constexpr double fpmin = 1e-300;
        constexpr double eps = 3e-16;
        const double qab = a_ + b_;
        const double qap = a_ + 1.0;
        const double qam = a_ - 1.0;
        double c = 1.0;
        double d = 1.0 - qab * x_ / qap;
        if (std::abs(d) < fpmin) d = fpmin;
        d = 1.0 / d;
        double h = d;
        for (int m = 1; m <= 10000; ++m) {
            const int m2 = 2 * m;
            double aa = m * (b_ - m) * x_ / ((qam + m2) * (a_ + m2));
            d = 1.0 + aa * d;
            if (std::abs(d) < fpmin) d = fpmin;
            c = 1.0 + aa / c;
            if (std::abs(c) < fpmin) c = fpmin;
            d = 1.0 / d;
            h *= d * c;
            aa = -(a_ + m) * (qab + m) * x_ / ((a_ + m2) * (qap + m2));
            d = 1.0 + aa * d;
            if (std::abs(d) < fpmin) d = fpmin;
            c = 1.0 + aa / c;
            if (std::abs(c) < fpmin) c = fpmin;
            d = 1.0 / d;
            const double del = d * c;
            h *= del;
            if (std::abs(del - 1.0) < eps) return h;
        }
        throw std::runtime_error("incomplete beta continued fraction did not converge");
    };

    const double ln_front = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) +
                            a * std::log(x) + b * std::log1p(-x);
    const double front = std::exp(ln_front);
    if (x < (a + 1.0) / (a + b + 2.0)) return front * contfrac(a, b, x) / a;
    return 1.0 - front * contfrac(b, a, 1.0 - x) / b;
}

}  // namespace detail

/// δ = mean squared error; μ = (1/n²) ΣᵢΣⱼ (ŷⱼ − yᵢ)², evaluated through the
/// algebraically identical O(n) form var(ŷ) + var(y) + (mean ŷ − mean y)²
/// with population variances.
inline std::pair<double, double> delta_mu(const std::vector<double>& y,
                                          const std::vector<double>& yhat) {
    detail::check_pair(y, yhat);
    const double n = static_cast<double>(y.size());
    double delta = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) {
        const double d = yhat[i] - y[i];
        delta += d * d;
    }
    delta /= n;

    double my = 0.0, myh = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) {
        my += y[i];
        myh += yhat[i];
    }
    my /= n;
    myh /= n;
    double vy = 0.0, vyh = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) {
        vy += (y[i] - my) * (y[i] - my);
        vyh += (yhat[i] - myh) * (yhat[i] - myh);
    }
    const double mu = vy / n + vyh / n + (myh - my) * (myh - my);
    return {delta, mu};
}

/// r = 1 − δ/μ; degenerate samples (μ = 0) score 0.
inline double universal_r(const std::vector<double>& y, const std::vector<double>& yhat) {
    auto [delta, mu] = delta_mu(y, yhat);
    if (mu == 0.0) return 0.0;
    return 1.0 - delta / mu;
}

/// Two-sided critical value: P(|T_df| ≤ t) = confidence, by bisection on
/// the incomplete-beta form of the t CDF, to absolute accuracy 1e-8.
inline double t_quantile(std::size_t df, double confidence) {
    if (df < 1) throw std::invalid_argument("t_quantile: df must be >= 1");
    if (!(confidence > 0.0 && confidence < 1.0))
        throw std::invalid_argument("t_quantile: confidence must lie in (0,1)");

    const double a = static_cast<double>(df);
    // P(|T| <= t) = 1 - I_{df/(df+t^2)}(df/2, 1/2)
    auto two_sided = [a](double t) {
        return 1.0 - detail::incomplete_beta(a / 2.0, 0.5, a / (a + t * t));
    };

    double lo = 0.0;
    double hi = 1.0;
    while (two_sided(hi) < confidence) {
        hi *= 2.0;
        if (hi > 1e12) throw std::runtime_error("t_quantile: bracket expansion failed");
    }
    while (hi - lo > 1e-9) {
        const double mid = 0.5 * (lo + hi);
        if (two_sided(mid) < confidence)
            lo = mid;
        else
            hi = mid;
    }
    return 0.5 * (lo + hi);
}

/// Full agreement score with the lower confidence bound
/// r_lower = 1 − (δ + t·σ/√n)/μ, σ the sample std (n−1) of squared residuals.
inline AgreementScore r_lower_bound(const std::vector<double>& y,
                                    const std::vector<double>& yhat, double confidence) {
    detail::check_pair(y, yhat);
    if (y.size() < 2) throw std::invalid_argument("r_lower_bound: need at least 2 samples");

    AgreementScore s;
    s.n = y.size();
    auto [delta, mu] = delta_mu(y, yhat);
    s.delta = delta;
    s.mu = mu;

    const double n = static_cast<double>(s.n);
    double var = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) {
        const double sq = (yhat[i] - y[i]) * (yhat[i] - y[i]);
        var += (sq - delta) * (sq - delta);
    }
    s.sigma = std::sqrt(var / (n - 1.0));
    s.t_critical = t_quantile(s.n - 1, confidence);
    s.moe_delta = s.t_critical * s.sigma / std::sqrt(n);

    if (mu == 0.0) {
        s.degenerate = true;
        s.r = 0.0;
        s.r_lower = 0.0;
        return s;
    }
    s.r = 1.0 - delta / mu;
    s.r_lower = 1.0 - (delta + s.moe_delta) / mu;
    return s;
}

}  // namespace loclin
