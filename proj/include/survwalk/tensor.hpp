#pragma once

#include <cstddef>
#include <initializer_list>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "survwalk/error.hpp"

namespace survwalk {

// Dense row-major tensor. Immutable by convention once handed to a Graph;
// plain value semantics everywhere else.
template <typename T>
struct Tensor {
    std::vector<size_t> shape;
    std::vector<T> data;

    Tensor() = default;

    Tensor(std::vector<size_t> shape_, std::vector<T> data_)
        : shape(std::move(shape_)), data(std::move(data_)) {
        if (numel_of(shape) != data.size()) {
            fail_invalid("tensor shape " + shape_string(shape) + " does not match data length " +
                         std::to_string(data.size()));
        }
    }

    static Tensor zeros(std::vector<size_t> shape_) {
        Tensor t;
        t.data.assign(numel_of(shape_), T(0));
        t.shape = std::move(shape_);
        return t;
    }

    static Tensor full(std::vector<size_t> shape_, T value) {
        Tensor t;
        t.data.assign(numel_of(shape_), value);
        t.shape = std::move(shape_);
        return t;
    }

    static Tensor scalar(T value) { return Tensor({1}, {value}); }

    static Tensor vector(std::vector<T> values) {
        const size_t n = values.size();
        return Tensor({n}, std::move(values));
    }

    size_t numel() const { return data.size(); }
    size_t rank() const { return shape.size(); }

    size_t rows() const { return shape.empty() ? 1 : shape[0]; }
    size_t cols() const { return shape.size() < 2 ? 1 : shape[1]; }

    T& at(size_t i, size_t j) { return data[i * cols() + j]; }
    const T& at(size_t i, size_t j) const { return data[i * cols() + j]; }

    bool same_shape(const Tensor& other) const { return shape == other.shape; }

    template <typename U>
    Tensor<U> cast() const {
        Tensor<U> out;
        out.shape = shape;
        out.data.reserve(data.size());
        for (const T& x : data) out.data.push_back(static_cast<U>(x));
        return out;
    }

    static size_t numel_of(const std::vector<size_t>& shape_) {
        size_t n = 1;
        for (size_t d : shape_) {
            if (d == 0) fail_invalid("tensor dimensions must be positive");
            n *= d;
        }
        return n;
    }

    static std::string shape_string(const std::vector<size_t>& shape_) {
        std::ostringstream os;
        os << "[";
        for (size_t i = 0; i < shape_.size(); ++i) os << (i ? "x" : "") << shape_[i];
        os << "]";
        return os.str();
    }
};

using TensorD = Tensor<double>;
using TensorF = Tensor<float>;

}  // namespace survwalk
