#include "smallgain/kernels.hpp"

#include <immintrin.h>

#include <cmath>
#include <limits>

#define SMALLGAIN_AVX2 __attribute__((target("avx2")))

namespace smallgain::kernels {

// Defined in dispatch.cpp; a null table means "not usable here".
const Table* avx2_table_impl() noexcept;

namespace {

constexpr std::size_t kLanes = 4;

SMALLGAIN_AVX2 void scale(double a, const double* x, double* out, std::size_t n) {
    const __m256d va = _mm256_set1_pd(a);
    std::size_t i = 0;
    for (; i + kLanes <= n; i += kLanes) {
        _mm256_storeu_pd(out + i, _mm256_mul_pd(va, _mm256_loadu_pd(x + i)));
    }
    for (; i < n; ++i) out[i] = a * x[i];
}

SMALLGAIN_AVX2 void maximum(const double* a, const double* b, double* out, std::size_t n) {
    std::size_t i = 0;
    for (; i + kLanes <= n; i += kLanes) {
        // _mm256_max_pd(a, b) returns b unless a > b, same as the scalar select
        _mm256_storeu_pd(out + i, _mm256_max_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i)));
    }
    for (; i < n; ++i) out[i] = a[i] > b[i] ? a[i] : b[i];
}

SMALLGAIN_AVX2 void saturate(double c, const double* x, double* out, std::size_t n) {
    const __m256d one = _mm256_set1_pd(1.0);
    const __m256d vc = _mm256_set1_pd(c);
    std::size_t i = 0;
    for (; i + kLanes <= n; i += kLanes) {
        const __m256d v = _mm256_loadu_pd(x + i);
        const __m256d high = _mm256_div_pd(vc, _mm256_add_pd(one, _mm256_div_pd(one, v)));
        const __m256d low = _mm256_div_pd(_mm256_mul_pd(vc, v), _mm256_add_pd(one, v));
        const __m256d is_high = _mm256_cmp_pd(v, one, _CMP_GT_OQ);
        _mm256_storeu_pd(out + i, _mm256_blendv_pd(low, high, is_high));
    }
    for (; i < n; ++i) {
        const double v = x[i];
        out[i] = v > 1.0 ? c / (1.0 + 1.0 / v) : (c * v) / (1.0 + v);
    }
}

SMALLGAIN_AVX2 void relative_margin(const double* s, const double* g, double* out, std::size_t n) {
    std::size_t i = 0;
    for (; i + kLanes <= n; i += kLanes) {
        const __m256d vs = _mm256_loadu_pd(s + i);
        const __m256d vg = _mm256_loadu_pd(g + i);
        _mm256_storeu_pd(out + i, _mm256_div_pd(_mm256_sub_pd(vs, vg), vs));
    }
    for (; i < n; ++i) out[i] = (s[i] - g[i]) / s[i];
}

SMALLGAIN_AVX2 void axpy(double a, const double* x, const double* y, double* out, std::size_t n) {
    const __m256d va = _mm256_set1_pd(a);
    std::size_t i = 0;
    for (; i + kLanes <= n; i += kLanes) {
        const __m256d prod = _mm256_mul_pd(va, _mm256_loadu_pd(x + i));
        _mm256_storeu_pd(out + i, _mm256_add_pd(_mm256_loadu_pd(y + i), prod));
    }
    for (; i < n; ++i) out[i] = y[i] + a * x[i];
}

SMALLGAIN_AVX2 void rk4_combine(double h, const double* x, const double* k1, const double* k2,
                                const double* k3, const double* k4, double* out, std::size_t n) {
    const double w = h / 6.0;
    const __m256d vw = _mm256_set1_pd(w);
    const __m256d two = _mm256_set1_pd(2.0);
    std::size_t i = 0;
    for (; i + kLanes <= n; i += kLanes) {
        __m256d sum = _mm256_add_pd(_mm256_loadu_pd(k1 + i), _mm256_mul_pd(two, _mm256_loadu_pd(k2 + i)));
        sum = _mm256_add_pd(sum, _mm256_mul_pd(two, _mm256_loadu_pd(k3 + i)));
        sum = _mm256_add_pd(sum, _mm256_loadu_pd(k4 + i));
        _mm256_storeu_pd(out + i, _mm256_add_pd(_mm256_loadu_pd(x + i), _mm256_mul_pd(vw, sum)));
    }
    for (; i < n; ++i) {
        const double sum = ((k1[i] + 2.0 * k2[i]) + 2.0 * k3[i]) + k4[i];
        out[i] = x[i] + w * sum;
    }
}

// Reductions: lane-wise then horizontal. max/min are order independent for
// non-NaN input, so the result matches the sequential scalar loop.
SMALLGAIN_AVX2 double max_value(const double* x, std::size_t n) {
    double m = -std::numeric_limits<double>::infinity();
    std::size_t i = 0;
    if (n >= kLanes) {
        __m256d acc = _mm256_set1_pd(m);
        for (; i + kLanes <= n; i += kLanes) acc = _mm256_max_pd(_mm256_loadu_pd(x + i), acc);
        alignas(32) double lanes[kLanes];
        _mm256_store_pd(lanes, acc);
        for (double v : lanes) m = v > m ? v : m;
    }
    for (; i < n; ++i) m = x[i] > m ? x[i] : m;
    return m;
}

SMALLGAIN_AVX2 double min_value(const double* x, std::size_t n) {
    double m = std::numeric_limits<double>::infinity();
    std::size_t i = 0;
    if (n >= kLanes) {
        __m256d acc = _mm256_set1_pd(m);
        for (; i + kLanes <= n; i += kLanes) acc = _mm256_min_pd(_mm256_loadu_pd(x + i), acc);
        alignas(32) double lanes[kLanes];
        _mm256_store_pd(lanes, acc);
        for (double v : lanes) m = v < m ? v : m;
    }
    for (; i < n; ++i) m = x[i] < m ? x[i] : m;
    return m;
}

SMALLGAIN_AVX2 double max_abs(const double* x, std::size_t n) {
    double m = 0.0;
    std::size_t i = 0;
    if (n >= kLanes) {
        const __m256d sign = _mm256_set1_pd(-0.0);
        __m256d acc = _mm256_setzero_pd();
        for (; i + kLanes <= n; i += kLanes) {
            acc = _mm256_max_pd(_mm256_andnot_pd(sign, _mm256_loadu_pd(x + i)), acc);
        }
        alignas(32) double lanes[kLanes];
        _mm256_store_pd(lanes, acc);
        for (double v : lanes) m = v > m ? v : m;
    }
    for (; i < n; ++i) {
        const double a = std::fabs(x[i]);
        m = a > m ? a : m;
    }
    return m;
}

constexpr Table kAvx2{
    Isa::avx2,   scale,       maximum,   saturate,  relative_margin,
    axpy,        rk4_combine, max_value, min_value, max_abs,
};

}  // namespace

const Table* avx2_table_impl() noexcept {
    __builtin_cpu_init();
    return __builtin_cpu_supports("avx2") ? &kAvx2 : nullptr;
}

}  // namespace smallgain::kernels
