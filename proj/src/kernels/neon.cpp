#include "smallgain/kernels.hpp"

#include <arm_neon.h>

#include <cmath>
#include <limits>

namespace smallgain::kernels {

const Table* neon_table_impl() noexcept;

namespace {

constexpr std::size_t kLanes = 2;

// vmaxq_f64 propagates NaN and so differs from the scalar select; use
// compare + bit-select to keep the exact same semantics.
inline float64x2_t select_greater(float64x2_t a, float64x2_t b) {
    return vbslq_f64(vcgtq_f64(a, b), a, b);
}

inline float64x2_t select_less(float64x2_t a, float64x2_t b) {
    return vbslq_f64(vcltq_f64(a, b), a, b);
}

void scale(double a, const double* x, double* out, std::size_t n) {
    const float64x2_t va = vdupq_n_f64(a);
    std::size_t i = 0;
    for (; i + kLanes <= n; i += kLanes) vst1q_f64(out + i, vmulq_f64(va, vld1q_f64(x + i)));
    for (; i < n; ++i) out[i] = a * x[i];
}

void maximum(const double* a, const double* b, double* out, std::size_t n) {
    std::size_t i = 0;
    for (; i + kLanes <= n; i += kLanes) {
        vst1q_f64(out + i, select_greater(vld1q_f64(a + i), vld1q_f64(b + i)));
    }
    for (; i < n; ++i) out[i] = a[i] > b[i] ? a[i] : b[i];
}

void saturate(double c, const double* x, double* out, std::size_t n) {
    const float64x2_t one = vdupq_n_f64(1.0);
    const float64x2_t vc = vdupq_n_f64(c);
    std::size_t i = 0;
    for (; i + kLanes <= n; i += kLanes) {
        const float64x2_t v = vld1q_f64(x + i);
        const float64x2_t high = vdivq_f64(vc, vaddq_f64(one, vdivq_f64(one, v)));
        const float64x2_t low = vdivq_f64(vmulq_f64(vc, v), vaddq_f64(one, v));
        vst1q_f64(out + i, vbslq_f64(vcgtq_f64(v, one), high, low));
    }
    for (; i < n; ++i) {
        const double v = x[i];
        out[i] = v > 1.0 ? c / (1.0 + 1.0 / v) : (c * v) / (1.0 + v);
    }
}

void relative_margin(const double* s, const double* g, double* out, std::size_t n) {
    std::size_t i = 0;
    for (; i + kLanes <= n; i += kLanes) {
        const float64x2_t vs = vld1q_f64(s + i);
        vst1q_f64(out + i, vdivq_f64(vsubq_f64(vs, vld1q_f64(g + i)), vs));
    }
    for (; i < n; ++i) out[i] = (s[i] - g[i]) / s[i];
}

void axpy(double a, const double* x, const double* y, double* out, std::size_t n) {
    const float64x2_t va = vdupq_n_f64(a);
    std::size_t i = 0;
    for (; i + kLanes <= n; i += kLanes) {
        vst1q_f64(out + i, vaddq_f64(vld1q_f64(y + i), vmulq_f64(va, vld1q_f64(x + i))));
    }
    for (; i < n; ++i) out[i] = y[i] + a * x[i];
}

void rk4_combine(double h, const double* x, const double* k1, const double* k2, const double* k3,
                 const double* k4, double* out, std::size_t n) {
    const double w = h / 6.0;
    const float64x2_t vw = vdupq_n_f64(w);
    const float64x2_t two = vdupq_n_f64(2.0);
    std::size_t i = 0;
    for (; i + kLanes <= n; i += kLanes) {
        float64x2_t sum = vaddq_f64(vld1q_f64(k1 + i), vmulq_f64(two, vld1q_f64(k2 + i)));
        sum = vaddq_f64(sum, vmulq_f64(two, vld1q_f64(k3 + i)));
        sum = vaddq_f64(sum, vld1q_f64(k4 + i));
        vst1q_f64(out + i, vaddq_f64(vld1q_f64(x + i), vmulq_f64(vw, sum)));
    }
    for (; i < n; ++i) {
        const double sum = ((k1[i] + 2.0 * k2[i]) + 2.0 * k3[i]) + k4[i];
        out[i] = x[i] + w * sum;
    }
}

double max_value(const double* x, std::size_t n) {
    double m = -std::numeric_limits<double>::infinity();
    std::size_t i = 0;
    if (n >= kLanes) {
        float64x2_t acc = vdupq_n_f64(m);
        for (; i + kLanes <= n; i += kLanes) acc = select_greater(vld1q_f64(x + i), acc);
        const double lanes[2] = {vgetq_lane_f64(acc, 0), vgetq_lane_f64(acc, 1)};
        for (double v : lanes) m = v > m ? v : m;
    }
    for (; i < n; ++i) m = x[i] > m ? x[i] : m;
    return m;
}

double min_value(const double* x, std::size_t n) {
    double m = std::numeric_limits<double>::infinity();
    std::size_t i = 0;
    if (n >= kLanes) {
        float64x2_t acc = vdupq_n_f64(m);
        for (; i + kLanes <= n; i += kLanes) acc = select_less(vld1q_f64(x + i), acc);
        const double lanes[2] = {vgetq_lane_f64(acc, 0), vgetq_lane_f64(acc, 1)};
        for (double v : lanes) m = v < m ? v : m;
    }
    for (; i < n; ++i) m = x[i] < m ? x[i] : m;
    return m;
}

double max_abs(const double* x, std::size_t n) {
    double m = 0.0;
    std::size_t i = 0;
    if (n >= kLanes) {
        float64x2_t acc = vdupq_n_f64(0.0);
        for (; i + kLanes <= n; i += kLanes) acc = select_greater(vabsq_f64(vld1q_f64(x + i)), acc);
        const double lanes[2] = {vgetq_lane_f64(acc, 0), vgetq_lane_f64(acc, 1)};
        for (double v : lanes) m = v > m ? v : m;
    }
    for (; i < n; ++i) {
        const double a = std::fabs(x[i]);
        m = a > m ? a : m;
    }
    return m;
}

constexpr Table kNeon{
    Isa::neon,   scale,       maximum,   saturate,  relative_margin,
    axpy,        rk4_combine, max_value, min_value, max_abs,
};

}  // namespace

const Table* neon_table_impl() noexcept { return &kNeon; }

}  // namespace smallgain::kernels
