#pragma once

#include <complex>
#include <cstddef>
#include <memory>
#include <mutex>
#include <span>
#include <vector>

#include <fftw3.h>

#include "twinbeam/core.hpp"

namespace twinbeam {

/// Owns a pair of FFTW plans for length-n complex transforms. Plans are built
/// unaligned with FFTW_ESTIMATE, so execution is deterministic and safe to
/// call concurrently on caller-owned buffers.
///
/// Conventions (envelope field A(t) e^{-i omega_0 t}):
///   to_spectrum: S_k = sum_n A_n exp(+2 pi i k n / N)
///   to_time:     A_n = (1/N) sum_k S_k exp(-2 pi i k n / N)
class FftPlan {
public:
    explicit FftPlan(std::size_t n) : n_(n) {
        if (n == 0) throw DomainError("FftPlan: length must be > 0");
        std::vector<std::complex<double>> scratch(n);
        auto* buf = reinterpret_cast<fftw_complex*>(scratch.data());
        const int len = static_cast<int>(n);
        std::lock_guard lock(planner_mutex());
        to_spectrum_.reset(fftw_plan_dft_1d(len, buf, buf, FFTW_BACKWARD, FFTW_ESTIMATE | FFTW_UNALIGNED));
        to_time_.reset(fftw_plan_dft_1d(len, buf, buf, FFTW_FORWARD, FFTW_ESTIMATE | FFTW_UNALIGNED));
        if (!to_spectrum_ || !to_time_) throw DomainError("FftPlan: FFTW planning failed");
    }

    std::size_t size() const { return n_; }

    void to_spectrum(std::span<std::complex<double>> data) const {
        check(data);
        auto* p = reinterpret_cast<fftw_complex*>(data.data());
        fftw_execute_dft(to_spectrum_.get(), p, p);
    }

    void to_time(std::span<std::complex<double>> data) const {
        check(data);
        auto* p = reinterpret_cast<fftw_complex*>(data.data());
        fftw_execute_dft(to_time_.get(), p, p);
        const double scale = 1.0 / static_cast<double>(n_);
        for (auto& x : data) x *= scale;
    }

private:
    struct PlanDeleter {
        void operator()(fftw_plan_s* p) const {
            std::lock_guard lock(planner_mutex());
            fftw_destroy_plan(p);
        }
    };

    static std::mutex& planner_mutex() {
        static std::mutex m;
        return m;
    }

    void check(std::span<std::complex<double>> data) const {
        if (data.size() != n_) throw DomainError("FftPlan: buffer length mismatch");
    }

    std::size_t n_;
    std::unique_ptr<fftw_plan_s, PlanDeleter> to_spectrum_;
    std::unique_ptr<fftw_plan_s, PlanDeleter> to_time_;
};

}  // namespace twinbeam
