#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "survwalk/error.hpp"
#include "survwalk/tensor.hpp"

namespace survwalk {

// Adam with bias correction; decay rates and epsilon are the optimizer's
// published defaults.
template <typename T>
struct AdamState {
    std::vector<Tensor<T>> m;
    std::vector<Tensor<T>> v;
    uint64_t step = 0;
    T beta1 = T(0.9);
    T beta2 = T(0.999);
    T epsilon = T(1e-8);

    static AdamState like(const std::vector<const Tensor<T>*>& params) {
        AdamState s;
        for (const Tensor<T>* p : params) {
            s.m.push_back(Tensor<T>::zeros(p->shape));
            s.v.push_back(Tensor<T>::zeros(p->shape));
        }
        return s;
    }
};

template <typename T>
void adam_step(AdamState<T>& state, const std::vector<Tensor<T>*>& params,
               const std::vector<const Tensor<T>*>& grads, T lr) {
    if (params.size() != grads.size() || params.size() != state.m.size()) {
        fail_invalid("adam_step: parameter, gradient, and moment counts disagree");
    }
    state.step += 1;
    const T c1 = T(1) - std::pow(state.beta1, T(state.step));
    const T c2 = T(1) - std::pow(state.beta2, T(state.step));
    for (size_t p = 0; p < params.size(); ++p) {
        Tensor<T>& w = *params[p];
        const Tensor<T>& g = *grads[p];
        Tensor<T>& m = state.m[p];
        Tensor<T>& v = state.v[p];
        if (!w.same_shape(g) || !w.same_shape(m)) {
            fail_invalid("adam_step: shape mismatch between parameter " +
                         Tensor<T>::shape_string(w.shape) + " and gradient " +
                         Tensor<T>::shape_string(g.shape));
        }
        for (size_t i = 0; i < w.numel(); ++i) {
            m.data[i] = state.beta1 * m.data[i] + (T(1) - state.beta1) * g.data[i];
            v.data[i] = state.beta2 * v.data[i] + (T(1) - state.beta2) * g.data[i] * g.data[i];
            const T mhat = m.data[i] / c1;
            const T vhat = v.data[i] / c2;
            w.data[i] -= lr * mhat / (std::sqrt(vhat) + state.epsilon);
        }
    }
}

}  // namespace survwalk
