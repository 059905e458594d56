#include "smallgain/kernels.hpp"

#include <cmath>
#include <limits>

namespace smallgain::kernels {
namespace {

void scale(double a, const double* x, double* out, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) out[i] = a * x[i];
}

void maximum(const double* a, const double* b, double* out, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) out[i] = a[i] > b[i] ? a[i] : b[i];
}

void saturate(double c, const double* x, double* out, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) {
        const double v = x[i];
        out[i] = v > 1.0 ? c / (1.0 + 1.0 / v) : (c * v) / (1.0 + v);
    }
}

void relative_margin(const double* s, const double* g, double* out, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) out[i] = (s[i] - g[i]) / s[i];
}

void axpy(double a, const double* x, const double* y, double* out, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) out[i] = y[i] + a * x[i];
}

void rk4_combine(double h, const double* x, const double* k1, const double* k2, const double* k3,
                 const double* k4, double* out, std::size_t n) {
    const double w = h / 6.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double sum = ((k1[i] + 2.0 * k2[i]) + 2.0 * k3[i]) + k4[i];
        out[i] = x[i] + w * sum;
    }
}

double max_value(const double* x, std::size_t n) {
    double m = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < n; ++i) m = x[i] > m ? x[i] : m;
    return m;
}

double min_value(const double* x, std::size_t n) {
    double m = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < n; ++i) m = x[i] < m ? x[i] : m;
    return m;
}

double max_abs(const double* x, std::size_t n) {
    double m = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double a = std::fabs(x[i]);
        m = a > m ? a : m;
    }
    return m;
}

constexpr Table kScalar{
    Isa::scalar, scale,       maximum,   saturate,  relative_margin,
    axpy,        rk4_combine, max_value, min_value, max_abs,
};

}  // namespace

const Table& scalar_table() noexcept { return kScalar; }

}  // namespace smallgain::kernels
