#pragma once

// Independent reference implementations used to freeze expected values.
// Everything here is deliberately naive (scalar, double precision, O(n^2)
// where that keeps it obviously correct) and shares no code with the library.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <vector>

namespace oracle {

// ---- bilinear interpolation: direct 4-texel weighted sum -----------------
// plane is row-major (h, w); (a, b) in [-1,1] map to pixel centers at
// half-integer positions, clamp-to-edge.
inline double bilinear(const std::vector<double>& plane, int h, int w, double a, double b) {
    double fx = (a + 1.0) * 0.5 * w - 0.5;
    double fy = (b + 1.0) * 0.5 * h - 0.5;
    double x0 = std::floor(fx), y0 = std::floor(fy);
    double wx = fx - x0, wy = fy - y0;
    auto texel = [&](double yy, double xx) {
        int xi = static_cast<int>(xx), yi = static_cast<int>(yy);
        xi = xi < 0 ? 0 : (xi > w - 1 ? w - 1 : xi);
        yi = yi < 0 ? 0 : (yi > h - 1 ? h - 1 : yi);
        return plane[static_cast<size_t>(yi) * w + xi];
    };
    return (1 - wy) * ((1 - wx) * texel(y0, x0) + wx * texel(y0, x0 + 1)) +
           wy * ((1 - wx) * texel(y0 + 1, x0) + wx * texel(y0 + 1, x0 + 1));
}

// ---- ray accumulation (the sum/product form, evaluated literally) --------
struct CompositeRef {
    std::array<double, 3> rgb{0, 0, 0};
    double opacity = 0;
};

inline CompositeRef composite(const std::vector<std::array<double, 3>>& c,
                              const std::vector<double>& d, const std::vector<double>& delta) {
    CompositeRef out;
    size_t n = d.size();
    for (size_t i = 0; i < n; ++i) {
        double sigma = 1.0 / (1.0 + std::exp(-d[i]));
        double a = 1.0 - std::exp(-sigma * delta[i]);
        double prod = 1.0;
        for (size_t j = 0; j < i; ++j) {
            double sj = 1.0 / (1.0 + std::exp(-d[j]));
            double aj = 1.0 - std::exp(-sj * delta[j]);
            prod *= 1.0 - aj;
        }
        for (int k = 0; k < 3; ++k) out.rgb[k] += c[i][k] * a * prod;
        out.opacity += a * prod;
    }
    return out;
}

// ---- forward noising / noise prediction / DDIM step (scalar) -------------
inline double add_noise(double alpha_bar, double t0, double eps) {
    return std::sqrt(alpha_bar) * t0 + std::sqrt(1.0 - alpha_bar) * eps;
}

inline double predict_eps(double tt, double that, double alpha_bar) {
    return (tt - std::sqrt(alpha_bar) * that) / std::sqrt(1.0 - alpha_bar);
}

inline double ddim_step(double that, double eps_hat, double alpha_bar_prev) {
    return std::sqrt(alpha_bar_prev) * that + std::sqrt(1.0 - alpha_bar_prev) * eps_hat;
}

// ---- two-pass mean / population std ---------------------------------------
struct MeanStd {
    double mean, stdev;
};

inline MeanStd two_pass_stats(const std::vector<double>& xs) {
    double m = 0;
    for (double x : xs) m += x;
    m /= static_cast<double>(xs.size());
    double v = 0;
    for (double x : xs) v += (x - m) * (x - m);
    v /= static_cast<double>(xs.size());
    return {m, std::sqrt(v)};
}

// ---- central finite differences -------------------------------------------
inline double central_diff(const std::function<double(double)>& f, double x, double h) {
    return (f(x + h) - f(x - h)) / (2.0 * h);
}

// ---- incomplete gamma / chi-square tail ------------------------------------
inline double gamma_q(double a, double x) {
    if (x <= 0) return 1.0;
    if (x < a + 1.0) {
        // series for P(a,x), return 1 - P
        double sum = 1.0 / a, del = sum, ap = a;
        for (int i = 0; i < 500; ++i) {
            ap += 1;
            del *= x / ap;
            sum += del;
            if (std::fabs(del) < std::fabs(sum) * 1e-14) break;
        }
        return 1.0 - sum * std::exp(-x + a * std::log(x) - std::lgamma(a));
    }
    // continued fraction for Q(a,x)
    double b = x + 1.0 - a, c = 1e300, d = 1.0 / b, h = d;
    for (int i = 1; i <= 500; ++i) {
        double an = -static_cast<double>(i) * (i - a);
        b += 2.0;
        d = an * d + b;
        if (std::fabs(d) < 1e-300) d = 1e-300;
        c = b + an / c;
        if (std::fabs(c) < 1e-300) c = 1e-300;
        d = 1.0 / d;
        double del = d * c;
        h *= del;
        if (std::fabs(del - 1.0) < 1e-14) break;
    }
    return std::exp(-x + a * std::log(x) - std::lgamma(a)) * h;
}

// chi-square survival function P(X >= x) with k dof
inline double chi2_sf(double x, double k) { return gamma_q(k / 2.0, x / 2.0); }

// ---- Kolmogorov-Smirnov uniformity test ------------------------------------
// sorted samples in [0,1); returns the asymptotic p-value.
inline double ks_uniform_pvalue(std::vector<double> xs) {
    std::sort(xs.begin(), xs.end());
    size_t n = xs.size();
    double dmax = 0;
    for (size_t i = 0; i < n; ++i) {
        double cdf = xs[i];
        double d1 = std::fabs((i + 1.0) / n - cdf);
        double d2 = std::fabs(cdf - static_cast<double>(i) / n);
        dmax = std::max(dmax, std::max(d1, d2));
    }
    double en = std::sqrt(static_cast<double>(n));
    double lambda = (en + 0.12 + 0.11 / en) * dmax;
    double sum = 0;
    for (int j = 1; j <= 100; ++j)
        sum += 2.0 * ((j % 2 == 1) ? 1.0 : -1.0) * std::exp(-2.0 * j * j * lambda * lambda);
    return std::min(std::max(sum, 0.0), 1.0);
}

}  // namespace oracle
