#pragma once

// Data-parallel inner loops used by grid verification, the RK4 stepper and
// trajectory norms. Every variant is bit-identical to the scalar reference:
// only IEEE add/mul/div/compare are used and contraction is disabled.

#include <cstddef>
#include <span>
#include <string_view>

namespace smallgain::kernels {

enum class Isa { scalar, avx2, neon };

std::string_view isa_name(Isa isa) noexcept;

struct Table {
    Isa isa;

    // out[i] = a * x[i]
    void (*scale)(double a, const double* x, double* out, std::size_t n);
    // out[i] = a[i] > b[i] ? a[i] : b[i]
    void (*maximum)(const double* a, const double* b, double* out, std::size_t n);
    // out[i] = c*x/(1+x) for x <= 1, c/(1+1/x) otherwise
    void (*saturate)(double c, const double* x, double* out, std::size_t n);
    // out[i] = (s[i] - g[i]) / s[i]
    void (*relative_margin)(const double* s, const double* g, double* out, std::size_t n);
    // out[i] = y[i] + a * x[i]
    void (*axpy)(double a, const double* x, const double* y, double* out, std::size_t n);
    // out[i] = x[i] + (h/6) * (((k1 + 2*k2) + 2*k3) + k4)
    void (*rk4_combine)(double h, const double* x, const double* k1, const double* k2,
                        const double* k3, const double* k4, double* out, std::size_t n);
    // max over x, -inf for n == 0
    double (*max_value)(const double* x, std::size_t n);
    // min over x, +inf for n == 0
    double (*min_value)(const double* x, std::size_t n);
    // max |x[i]|, 0 for n == 0
    double (*max_abs)(const double* x, std::size_t n);
};

const Table& scalar_table() noexcept;

// nullptr when the variant was not compiled in or the CPU lacks support.
const Table* avx2_table() noexcept;
const Table* neon_table() noexcept;

// Chosen once on first use. SMALLGAIN_SIMD=scalar|avx2|neon|auto overrides.
const Table& active() noexcept;

// Every table usable on this machine, scalar first.
std::span<const Table* const> available() noexcept;

}  // namespace smallgain::kernels
