#pragma once

// Shared generators and independent oracles for the test suite.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <numeric>
#include <random>
#include <set>
#include <vector>

#include "smallgain/gain_algebra.hpp"
#include "smallgain/gain_graph.hpp"

namespace testing {

using Rng = std::mt19937_64;

inline double uniform(Rng& rng, double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); }
inline int uniform_int(Rng& rng, int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); }

inline std::vector<double> log_points(double lo, double hi, std::size_t n) {
    std::vector<double> out;
    const double a = std::log10(lo);
    const double b = std::log10(hi);
    for (std::size_t i = 0; i < n; ++i) {
        out.push_back(std::pow(10.0, a + (b - a) * static_cast<double>(i) / static_cast<double>(n - 1)));
    }
    return out;
}

inline bool close_rel(double a, double b, double tol) {
    return std::fabs(a - b) <= tol * std::max(std::fabs(a), std::fabs(b)) || a == b;
}

// Random class-K tree with bounded depth and tame parameters.
inline smallgain::KFunction random_gain(Rng& rng, int depth = 3) {
    using smallgain::KFunction;
    int pick = uniform_int(rng, 0, depth > 0 ? 5 : 3);
    switch (pick) {
        case 0: return KFunction::identity();
        case 1: return KFunction::linear(uniform(rng, 0.1, 3.0));
        case 2: return KFunction::power(uniform(rng, 0.3, 3.0));
        case 3: return KFunction::saturating(uniform(rng, 0.1, 3.0), uniform(rng, 0.3, 3.0));
        case 4: return compose(random_gain(rng, depth - 1), random_gain(rng, depth - 1));
        default: return pointwise_max(random_gain(rng, depth - 1), random_gain(rng, depth - 1));
    }
}

// Every simple cycle by brute force: for each node subset containing its
// minimum as start, try every ordering of the rest.
inline std::set<std::vector<int>> brute_force_cycles(int k, const std::function<bool(int, int)>& edge) {
    std::set<std::vector<int>> out;
    for (std::uint32_t mask = 1; mask < (1u << k); ++mask) {
        std::vector<int> nodes;
        for (int v = 0; v < k; ++v) {
            if (mask & (1u << v)) nodes.push_back(v + 1);
        }
        if (nodes.size() < 2) continue;
        std::vector<int> rest(nodes.begin() + 1, nodes.end());
        do {
            std::vector<int> cyc{nodes.front()};
            cyc.insert(cyc.end(), rest.begin(), rest.end());
            bool ok = true;
            for (std::size_t i = 0; i < cyc.size() && ok; ++i) ok = edge(cyc[i], cyc[(i + 1) % cyc.size()]);
            if (ok) out.insert(cyc);
        } while (std::next_permutation(rest.begin(), rest.end()));
    }
    return out;
}

// Least fixed point of b_i = max{ a_ij b_j, c_i } for nonnegative a with
// all cycle products below one, by plain iteration.
inline std::vector<double> max_linear_fixed_point(const std::vector<std::vector<double>>& a,
                                                  const std::vector<double>& c) {
    const std::size_t k = c.size();
    std::vector<double> b = c;
    for (std::size_t iter = 0; iter < 10000; ++iter) {
        bool changed = false;
        for (std::size_t i = 0; i < k; ++i) {
            double v = c[i];
            for (std::size_t j = 0; j < k; ++j) v = std::max(v, a[i][j] * b[j]);
            if (v > b[i]) {
                b[i] = v;
                changed = true;
            }
        }
        if (!changed) break;
    }
    return b;
}

// Independent reference for the three-subsystem ring: RK4 on step h with
// delayed values by linear interpolation on the stored grid.
inline std::vector<double> ring_reference(double delta, double T, double h) {
    const long d = std::lround(delta / h);
    const long n = std::lround(T / h);
    std::vector<std::array<double, 3>> x(static_cast<std::size_t>(d + n + 1), {1.0, 1.0, 1.0});
    auto past = [&](long idx, double frac) {
        // state at (idx + frac) * h, idx relative to t = 0
        auto a = x[static_cast<std::size_t>(idx + d)];
        if (frac == 0.0) return a;
        auto b = x[static_cast<std::size_t>(idx + 1 + d)];
        std::array<double, 3> r;
        for (int c = 0; c < 3; ++c) r[c] = a[c] + frac * (b[c] - a[c]);
        return r;
    };
    auto f = [](const std::array<double, 3>& cur, const std::array<double, 3>& del) {
        std::array<double, 3> r;
        double w = del[1];
        r[0] = -3.0 * cur[0] + w * w / (1.0 + w * w);
        r[1] = -1.5 * cur[1] + del[2] * del[2] * del[2];
        r[2] = -2.0 * cur[2] + del[0] * del[0];
        return r;
    };
    for (long s = 0; s < n; ++s) {
        auto cur = x[static_cast<std::size_t>(s + d)];
        auto k1 = f(cur, past(s - d, 0.0));
        std::array<double, 3> y;
        for (int c = 0; c < 3; ++c) y[c] = cur[c] + 0.5 * h * k1[c];
        auto k2 = f(y, past(s - d, 0.5));
        for (int c = 0; c < 3; ++c) y[c] = cur[c] + 0.5 * h * k2[c];
        auto k3 = f(y, past(s - d, 0.5));
        for (int c = 0; c < 3; ++c) y[c] = cur[c] + h * k3[c];
        auto k4 = f(y, past(s - d + 1, 0.0));
        std::array<double, 3> nx;
        for (int c = 0; c < 3; ++c) nx[c] = cur[c] + h / 6.0 * (k1[c] + 2.0 * k2[c] + 2.0 * k3[c] + k4[c]);
        x[static_cast<std::size_t>(s + 1 + d)] = nx;
    }
    auto last = x.back();
    return {last[0], last[1], last[2]};
}


}  // namespace testing
