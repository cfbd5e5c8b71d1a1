#pragma once

#include "tensor.hpp"

namespace solewear {

// Adam with bias correction. One state per parameter tensor.
template <typename T>
struct AdamState {
    Tensor<T> m;
    Tensor<T> v;
    long long step = 0;
    T beta1 = T(0.9);
    T beta2 = T(0.999);
    T eps = T(1e-8);

    explicit AdamState(const Shape& shape = {1}) : m(shape), v(shape) {}
};

template <typename T>
void adam_step(Tensor<T>& param, const Tensor<T>& grad, AdamState<T>& st, T lr) {
    require_shape(grad, param.shape, "adam");
    require_shape(st.m, param.shape, "adam");
    if (!grad.all_finite())
        throw NumericError("adam: non-finite gradient for parameter of shape " +
                           shape_str(param.shape));
    st.step += 1;
    const T b1 = st.beta1, b2 = st.beta2;
    const T bc1 = T(1) - std::pow(b1, static_cast<T>(st.step));
    const T bc2 = T(1) - std::pow(b2, static_cast<T>(st.step));
    for (std::size_t i = 0; i < param.data.size(); ++i) {
        T g = grad[i];
        st.m[i] = b1 * st.m[i] + (T(1) - b1) * g;
        st.v[i] = b2 * st.v[i] + (T(1) - b2) * g * g;
        T mhat = st.m[i] / bc1;
        T vhat = st.v[i] / bc2;
        param[i] -= lr * mhat / (std::sqrt(vhat) + st.eps);
    }
}

} // namespace solewear
