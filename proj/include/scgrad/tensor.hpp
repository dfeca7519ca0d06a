#pragma once

// Minimal dense tensor kernel: scalars, vectors and row-major matrices of
// 64-bit reals. Tensors are immutable values in practice — every operation
// returns a fresh tensor and never touches its arguments.

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace scgrad {

class Shape {
public:
    Shape() = default;  // rank 0, a scalar

    Shape(std::initializer_list<std::int64_t> dims) : dims_(dims) { validate(); }

    explicit Shape(std::vector<std::int64_t> dims) : dims_(std::move(dims)) { validate(); }

    int rank() const { return static_cast<int>(dims_.size()); }

    std::int64_t numel() const {
        std::int64_t n = 1;
        for (auto d : dims_) n *= d;
        return n;
    }

    bool is_scalar() const { return dims_.empty(); }
    bool is_vector() const { return dims_.size() == 1; }
    bool is_matrix() const { return dims_.size() == 2; }

    std::int64_t rows() const { return dims_.at(0); }
    std::int64_t cols() const { return dims_.at(1); }
    std::int64_t length() const { return dims_.at(0); }

    const std::vector<std::int64_t>& dims() const { return dims_; }

    bool operator==(const Shape& other) const = default;

    std::string to_string() const {
        std::string s = "[";
        for (std::size_t i = 0; i < dims_.size(); ++i) {
            if (i) s += ",";
            s += std::to_string(dims_[i]);
        }
        return s + "]";
    }

private:
    void validate() const {
        if (dims_.size() > 2) {
            throw std::invalid_argument("Shape: rank " + std::to_string(dims_.size()) + " exceeds 2");
        }
        for (auto d : dims_) {
            if (d < 1) throw std::invalid_argument("Shape: dimension " + std::to_string(d) + " < 1");
        }
    }

    std::vector<std::int64_t> dims_;
};

struct Tensor {
    Shape shape;
    std::vector<double> data;

    Tensor() : data(1, 0.0) {}  // scalar zero

    Tensor(Shape s, std::vector<double> values) : shape(std::move(s)), data(std::move(values)) {
        if (static_cast<std::int64_t>(data.size()) != shape.numel()) {
            throw std::invalid_argument("Tensor: data length " + std::to_string(data.size()) +
                                        " does not match shape " + shape.to_string());
        }
    }

    static Tensor scalar(double v) { return Tensor(Shape{}, {v}); }

    static Tensor vector(std::vector<double> values) {
        auto n = static_cast<std::int64_t>(values.size());
        return Tensor(Shape{n}, std::move(values));
    }

    static Tensor matrix(std::int64_t rows, std::int64_t cols, std::vector<double> values) {
        return Tensor(Shape{rows, cols}, std::move(values));
    }

    static Tensor filled(const Shape& s, double v) {
        return Tensor(s, std::vector<double>(static_cast<std::size_t>(s.numel()), v));
    }

    static Tensor zeros(const Shape& s) { return filled(s, 0.0); }
    static Tensor ones(const Shape& s) { return filled(s, 1.0); }

    double value() const {
        if (!shape.is_scalar()) {
            throw std::invalid_argument("Tensor::value: not a scalar, shape " + shape.to_string());
        }
        return data[0];
    }

    double at(std::int64_t i) const { return data[static_cast<std::size_t>(i)]; }

    double at(std::int64_t i, std::int64_t j) const {
        return data[static_cast<std::size_t>(i * shape.cols() + j)];
    }

    bool all_finite() const {
        for (double v : data) {
            if (!std::isfinite(v)) return false;
        }
        return true;
    }

    bool operator==(const Tensor& other) const = default;
};

namespace detail {

inline void require_same_shape(const Tensor& a, const Tensor& b, std::string_view op) {
    if (a.shape != b.shape) {
        throw std::invalid_argument(std::string(op) + ": shape mismatch " + a.shape.to_string() +
                                    " vs " + b.shape.to_string());
    }
}

template <class F>
Tensor map(const Tensor& x, F f) {
    Tensor out = x;
    for (double& v : out.data) v = f(v);
    return out;
}

// Binary ops require equal shapes, except that a rank-0 operand pairs with
// anything (a scalar is a value, not a broadcast).
template <class F>
Tensor zip(const Tensor& a, const Tensor& b, std::string_view op, F f) {
    if (a.shape.is_scalar() && !b.shape.is_scalar()) {
        Tensor out = b;
        for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] = f(a.data[0], b.data[i]);
        return out;
    }
    if (b.shape.is_scalar() && !a.shape.is_scalar()) {
        Tensor out = a;
        for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] = f(a.data[i], b.data[0]);
        return out;
    }
    require_same_shape(a, b, op);
    Tensor out = a;
    for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] = f(a.data[i], b.data[i]);
    return out;
}

}  // namespace detail

// log(1 + exp x) in the overflow-safe form max(x,0) + log1p(exp(-|x|)).
inline Tensor softplus(const Tensor& x) {
    return detail::map(x, [](double v) { return std::max(v, 0.0) + std::log1p(std::exp(-std::abs(v))); });
}

inline double sigmoid_scalar(double v) {
    if (v >= 0.0) return 1.0 / (1.0 + std::exp(-v));
    const double e = std::exp(v);
    return e / (1.0 + e);
}

inline Tensor sigmoid(const Tensor& x) {
    return detail::map(x, sigmoid_scalar);
}

inline Tensor exp(const Tensor& x) {
    return detail::map(x, [](double v) { return std::exp(v); });
}

inline Tensor log(const Tensor& x) {
    for (double v : x.data) {
        if (v <= 0.0) throw std::domain_error("log: nonpositive entry " + std::to_string(v));
    }
    return detail::map(x, [](double v) { return std::log(v); });
}

inline Tensor neg(const Tensor& x) {
    return detail::map(x, [](double v) { return -v; });
}

inline Tensor square(const Tensor& x) {
    return detail::map(x, [](double v) { return v * v; });
}

inline Tensor add(const Tensor& a, const Tensor& b) {
    return detail::zip(a, b, "add", [](double x, double y) { return x + y; });
}

inline Tensor sub(const Tensor& a, const Tensor& b) {
    return detail::zip(a, b, "sub", [](double x, double y) { return x - y; });
}

inline Tensor mul(const Tensor& a, const Tensor& b) {
    return detail::zip(a, b, "mul", [](double x, double y) { return x * y; });
}

inline Tensor scale(const Tensor& x, double c) {
    return detail::map(x, [c](double v) { return c * v; });
}

inline Tensor matvec(const Tensor& w, const Tensor& x) {
    if (!w.shape.is_matrix() || !x.shape.is_vector()) {
        throw std::invalid_argument("matvec: expected matrix and vector, got " + w.shape.to_string() +
                                    " and " + x.shape.to_string());
    }
    if (w.shape.cols() != x.shape.length()) {
        throw std::invalid_argument("matvec: " + w.shape.to_string() + " does not accept vector " +
                                    x.shape.to_string());
    }
    const auto rows = w.shape.rows();
    const auto cols = w.shape.cols();
    std::vector<double> out(static_cast<std::size_t>(rows), 0.0);
    for (std::int64_t i = 0; i < rows; ++i) {
        double acc = 0.0;
        for (std::int64_t j = 0; j < cols; ++j) acc += w.at(i, j) * x.at(j);
        out[static_cast<std::size_t>(i)] = acc;
    }
    return Tensor(Shape{rows}, std::move(out));
}

// y of length rows(w) pulled back through w: returns w^T y.
inline Tensor matvec_transpose(const Tensor& w, const Tensor& y) {
    if (!w.shape.is_matrix() || !y.shape.is_vector() || w.shape.rows() != y.shape.length()) {
        throw std::invalid_argument("matvec_transpose: incompatible shapes " + w.shape.to_string() +
                                    " and " + y.shape.to_string());
    }
    const auto rows = w.shape.rows();
    const auto cols = w.shape.cols();
    std::vector<double> out(static_cast<std::size_t>(cols), 0.0);
    for (std::int64_t i = 0; i < rows; ++i) {
        for (std::int64_t j = 0; j < cols; ++j) out[static_cast<std::size_t>(j)] += w.at(i, j) * y.at(i);
    }
    return Tensor(Shape{cols}, std::move(out));
}

inline Tensor outer(const Tensor& a, const Tensor& b) {
    if (!a.shape.is_vector() || !b.shape.is_vector()) {
        throw std::invalid_argument("outer: expected two vectors");
    }
    const auto rows = a.shape.length();
    const auto cols = b.shape.length();
    std::vector<double> out;
    out.reserve(static_cast<std::size_t>(rows * cols));
    for (std::int64_t i = 0; i < rows; ++i) {
        for (std::int64_t j = 0; j < cols; ++j) out.push_back(a.at(i) * b.at(j));
    }
    return Tensor(Shape{rows, cols}, std::move(out));
}

inline Tensor sum_all(const Tensor& x) {
    double acc = 0.0;
    for (double v : x.data) acc += v;
    return Tensor::scalar(acc);
}

// Name-dispatched elementwise entry point for {exp, log, neg, add, sub, mul, square}.
inline Tensor elementwise(std::string_view op, std::span<const Tensor> args) {
    auto arity = [&](std::size_t n) {
        if (args.size() != n) {
            throw std::invalid_argument("elementwise " + std::string(op) + ": expected " +
                                        std::to_string(n) + " arguments, got " + std::to_string(args.size()));
        }
    };
    if (op == "exp") { arity(1); return exp(args[0]); }
    if (op == "log") { arity(1); return log(args[0]); }
    if (op == "neg") { arity(1); return neg(args[0]); }
    if (op == "square") { arity(1); return square(args[0]); }
    if (op == "add") { arity(2); return add(args[0], args[1]); }
    if (op == "sub") { arity(2); return sub(args[0], args[1]); }
    if (op == "mul") { arity(2); return mul(args[0], args[1]); }
    throw std::invalid_argument("elementwise: unknown op '" + std::string(op) + "'");
}

}  // namespace scgrad
