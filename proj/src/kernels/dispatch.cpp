#include "smallgain/kernels.hpp"

#include <cstdlib>
#include <string_view>
#include <vector>

namespace smallgain::kernels {

#if defined(__x86_64__) && !defined(SMALLGAIN_NO_SIMD)
const Table* avx2_table_impl() noexcept;
#define SMALLGAIN_HAVE_AVX2_TU 1
#endif
#if defined(__aarch64__) && !defined(SMALLGAIN_NO_SIMD)
const Table* neon_table_impl() noexcept;
#define SMALLGAIN_HAVE_NEON_TU 1
#endif

std::string_view isa_name(Isa isa) noexcept {
    switch (isa) {
        case Isa::scalar: return "scalar";
        case Isa::avx2: return "avx2";
        case Isa::neon: return "neon";
    }
    return "unknown";
}

const Table* avx2_table() noexcept {
#ifdef SMALLGAIN_HAVE_AVX2_TU
    static const Table* table = avx2_table_impl();
    return table;
#else
    return nullptr;
#endif
}

const Table* neon_table() noexcept {
#ifdef SMALLGAIN_HAVE_NEON_TU
    return neon_table_impl();
#else
    return nullptr;
#endif
}

namespace {

const Table& choose() noexcept {
    const char* env = std::getenv("SMALLGAIN_SIMD");
    const std::string_view want = env ? env : "auto";
    if (want == "scalar") return scalar_table();
    if (want == "avx2" || want == "auto") {
        if (const Table* t = avx2_table()) return *t;
    }
    if (want == "neon" || want == "auto") {
        if (const Table* t = neon_table()) return *t;
    }
    return scalar_table();
}

}  // namespace

const Table& active() noexcept {
    static const Table& table = choose();
    return table;
}

std::span<const Table* const> available() noexcept {
    static const std::vector<const Table*> tables = [] {
        std::vector<const Table*> out{&scalar_table()};
        if (const Table* t = avx2_table()) out.push_back(t);
        if (const Table* t = neon_table()) out.push_back(t);
        return out;
    }();
    return tables;
}

}  // namespace smallgain::kernels
