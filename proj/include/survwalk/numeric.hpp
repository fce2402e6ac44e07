#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

namespace survwalk {

// Overflow guard shared by every exponentiation in the toolkit.
inline constexpr double kExpClamp = 30.0;
// Underflow guard shared by every logarithm.
inline constexpr double kLogFloor = 1e-12;

template <typename T>
T guarded_exp(T x) {
    return std::exp(std::min(x, static_cast<T>(kExpClamp)));
}

template <typename T>
T guarded_log(T x) {
    return std::log(std::max(x, static_cast<T>(kLogFloor)));
}

template <typename T>
T stable_sigmoid(T x) {
    if (x >= 0) return T(1) / (T(1) + std::exp(-x));
    const T e = std::exp(x);
    return e / (T(1) + e);
}

// log(1 + exp(x)), large-x safe
template <typename T>
T stable_softplus(T x) {
    return x > 0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

// log(sum_i exp(v_i)), max-shifted
template <typename T>
T logsumexp(const T* v, size_t n) {
    T m = v[0];
    for (size_t i = 1; i < n; ++i) m = std::max(m, v[i]);
    T s = 0;
    for (size_t i = 0; i < n; ++i) s += std::exp(v[i] - m);
    return m + std::log(s);
}

template <typename T>
T logsumexp(const std::vector<T>& v) {
    return logsumexp(v.data(), v.size());
}

// out[k] = log(sum_{j<=k} exp(v_j)) via the stable pairwise recurrence
template <typename T>
std::vector<T> cumulative_logsumexp(const std::vector<T>& v) {
    std::vector<T> out(v.size());
    if (v.empty()) return out;
    out[0] = v[0];
    for (size_t k = 1; k < v.size(); ++k) {
        const T a = out[k - 1];
        const T b = v[k];
        const T hi = std::max(a, b);
        const T lo = std::min(a, b);
        out[k] = hi + std::log1p(std::exp(lo - hi));
    }
    return out;
}

}  // namespace survwalk
