#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <exception>
#include <functional>
#include <limits>
#include <span>
#include <thread>
#include <vector>

#include "twinbeam/core.hpp"

namespace twinbeam {

/// Neumaier-compensated running sum. Order-dependent only at the level of
/// the compensation term, so sequential reductions in index order are
/// reproducible regardless of how the inputs were produced.
class CompensatedSum {
public:
    void add(double x) {
        const double t = sum_ + x;
        if (std::abs(sum_) >= std::abs(x)) {
            carry_ += (sum_ - t) + x;
        } else {
            carry_ += (x - t) + sum_;
        }
        sum_ = t;
    }
    double value() const { return sum_ + carry_; }

private:
    double sum_ = 0.0;
    double carry_ = 0.0;
};

inline double compensated_sum(std::span<const double> xs) {
    CompensatedSum acc;
    for (double x : xs) acc.add(x);
    return acc.value();
}

struct LinearFit {
    double slope = 0.0;
    double intercept = 0.0;
    double slope_se = 0.0;
    double intercept_se = 0.0;
    double r_squared = 0.0;

    double operator()(double x) const { return intercept + slope * x; }
};

/// Ordinary least squares y = a + b x. Throws on fewer than two distinct x.
inline LinearFit fit_line(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size() || x.size() < 2) {
        throw DomainError("fit_line: need at least two (x, y) pairs of equal length");
    }
    const auto n = static_cast<double>(x.size());
    const double mx = compensated_sum(x) / n;
    const double my = compensated_sum(y) / n;
    CompensatedSum sxx, sxy, syy;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double dx = x[i] - mx;
        const double dy = y[i] - my;
        sxx.add(dx * dx);
        sxy.add(dx * dy);
        syy.add(dy * dy);
    }
    if (!(sxx.value() > 0.0)) throw DomainError("fit_line: singular fit (all x identical)");

    LinearFit fit;
    fit.slope = sxy.value() / sxx.value();
    fit.intercept = my - fit.slope * mx;
    CompensatedSum sse;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double r = y[i] - fit(x[i]);
        sse.add(r * r);
    }
    fit.r_squared = syy.value() > 0.0 ? 1.0 - sse.value() / syy.value() : 1.0;
    if (x.size() > 2) {
        const double s2 = sse.value() / (n - 2.0);
        fit.slope_se = std::sqrt(s2 / sxx.value());
        fit.intercept_se = std::sqrt(s2 * (1.0 / n + mx * mx / sxx.value()));
    }
    return fit;
}

/// Bisection on a bracketing interval. Runs until the bracket stops shrinking
/// in floating point or its width falls below `x_tol`.
template <class F>
double bisect(F&& f, double lo, double hi, double x_tol = 0.0) {
    double flo = f(lo);
    double fhi = f(hi);
    if (flo == 0.0) return lo;
    if (fhi == 0.0) return hi;
    if ((flo < 0.0) == (fhi < 0.0)) throw DomainError("bisect: interval does not bracket a root");
    for (int iter = 0; iter < 200; ++iter) {
        const double mid = 0.5 * (lo + hi);
        if (mid <= std::min(lo, hi) || mid >= std::max(lo, hi)) break;
        if (std::abs(hi - lo) <= x_tol) break;
        const double fm = f(mid);
        if (fm == 0.0) return mid;
        if ((fm < 0.0) == (flo < 0.0)) {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    return 0.5 * (lo + hi);
}

inline unsigned resolve_threads(unsigned requested) {
    if (requested != 0) return requested;
    const unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1u : hw;
}

/// Runs `body(begin, end)` over contiguous chunks of [0, n). Chunk boundaries
/// depend only on `n` and the thread count; callers that write results by
/// index get output independent of scheduling.
template <class Body>
void parallel_for(std::size_t n, unsigned threads, Body&& body) {
    threads = std::max(1u, std::min<unsigned>(resolve_threads(threads), static_cast<unsigned>(std::max<std::size_t>(n, 1))));
    if (threads == 1 || n < 2) {
        body(std::size_t{0}, n);
        return;
    }
    std::vector<std::jthread> pool;
    std::vector<std::exception_ptr> errors(threads);
    const std::size_t chunk = (n + threads - 1) / threads;
    for (unsigned t = 0; t < threads; ++t) {
        const std::size_t begin = std::min(n, t * chunk);
        const std::size_t end = std::min(n, begin + chunk);
        pool.emplace_back([&, t, begin, end] {
            try {
                body(begin, end);
            } catch (...) {
                errors[t] = std::current_exception();
            }
        });
    }
    pool.clear();
    for (auto& e : errors) {
        if (e) std::rethrow_exception(e);
    }
}

/// Uniform grid of `n` points on [lo, hi], endpoints included.
inline std::vector<double> linspace(double lo, double hi, std::size_t n) {
    std::vector<double> out(n);
    if (n == 1) {
        out[0] = lo;
        return out;
    }
    const double step = (hi - lo) / static_cast<double>(n - 1);
    for (std::size_t i = 0; i < n; ++i) out[i] = lo + step * static_cast<double>(i);
    out.back() = hi;
    return out;
}

}  // namespace twinbeam
