#pragma once

// Dense NN primitives with hand-written backward passes: affine layers,
// ReLU, sigmoid, binary cross-entropy, and Adam.  Everything is templated on
// the scalar type; double is the reference precision for gradient checks.

#include <nodepred/matrix.hpp>

#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace nodepred {

// A named parameter array with its gradient buffer.
template <class T>
struct Param {
    std::string name;
    Mat<T> value;
    Mat<T> grad;

    Param() = default;
    Param(std::string name_, std::size_t rows, std::size_t cols)
        : name(std::move(name_)), value(rows, cols), grad(rows, cols) {}
};

// --- affine -----------------------------------------------------------------------

// out = x * w + b, with the 1-row bias broadcast over rows.
template <class T>
void affine_forward(const Mat<T>& x, const Mat<T>& w, const Mat<T>& b, Mat<T>& out) {
    if (b.rows() != 1 || b.cols() != w.cols())
        throw std::invalid_argument("affine_forward: bias must be 1 x out_dim");
    matmul(x, w, out);
    const T* bias = b.row(0);
    for (std::size_t r = 0; r < out.rows(); ++r) {
        T* row = out.row(r);
        for (std::size_t c = 0; c < out.cols(); ++c) row[c] += bias[c];
    }
}

// Accumulates dw += x^T dout and db += column sums of dout; when dx is
// non-null it is overwritten with dout * w^T.
template <class T>
void affine_backward(const Mat<T>& x, const Mat<T>& w, const Mat<T>& dout, Mat<T>* dx,
                     Mat<T>& dw, Mat<T>& db) {
    if (dout.rows() != x.rows() || dout.cols() != w.cols())
        throw std::invalid_argument("affine_backward: dout shape mismatch");
    matmul_tn_add(x, dout, dw);
    T* bias_grad = db.row(0);
    for (std::size_t r = 0; r < dout.rows(); ++r) {
        const T* row = dout.row(r);
        for (std::size_t c = 0; c < dout.cols(); ++c) bias_grad[c] += row[c];
    }
    if (dx) matmul_nt(dout, w, *dx);
}

// --- activations ------------------------------------------------------------------

template <class T>
void relu_inplace(Mat<T>& m) {
    T* d = m.data();
    for (std::size_t i = 0, n = m.size(); i < n; ++i)
        if (d[i] < T(0)) d[i] = T(0);
}

template <class T>
Mat<T> relu(const Mat<T>& m) {
    Mat<T> out = m;
    relu_inplace(out);
    return out;
}

// Rewrites grad from dL/dy to dL/dx given the pre-activation input; the
// derivative at exactly 0 is 0.
template <class T>
void relu_backward(const Mat<T>& pre, Mat<T>& grad) {
    if (!pre.same_shape(grad)) throw std::invalid_argument("relu_backward: shape mismatch");
    const T* x = pre.data();
    T* g = grad.data();
    for (std::size_t i = 0, n = grad.size(); i < n; ++i)
        if (x[i] <= T(0)) g[i] = T(0);
}

// Numerically stable logistic function.
template <class T>
T sigmoid(T x) {
    if (x >= T(0)) {
        const T e = std::exp(-x);
        return T(1) / (T(1) + e);
    }
    const T e = std::exp(x);
    return e / (T(1) + e);
}

template <class T>
void sigmoid_inplace(std::vector<T>& v) {
    for (T& x : v) x = sigmoid(x);
}

// --- loss --------------------------------------------------------------------------

inline constexpr double kBceClamp = 1e-7;

// Mean binary cross-entropy with probabilities clamped to [eps, 1-eps].
template <class T>
T bce_loss(std::span<const T> p, std::span<const T> y) {
    if (p.size() != y.size()) throw std::invalid_argument("bce_loss: length mismatch");
    if (p.empty()) throw std::invalid_argument("bce_loss: empty input");
    const T eps = static_cast<T>(kBceClamp);
    T sum = T(0);
    for (std::size_t i = 0; i < p.size(); ++i) {
        const T pi = std::clamp(p[i], eps, T(1) - eps);
        sum += -(y[i] * std::log(pi) + (T(1) - y[i]) * std::log(T(1) - pi));
    }
    return sum / static_cast<T>(p.size());
}

// Gradient of mean BCE w.r.t. the sigmoid *pre-activations*: (p - y) / n.
// Fusing the sigmoid and the loss keeps the backward exact and stable.
template <class T>
std::vector<T> bce_sigmoid_backward(std::span<const T> p, std::span<const T> y) {
    if (p.size() != y.size())
        throw std::invalid_argument("bce_sigmoid_backward: length mismatch");
    std::vector<T> grad(p.size());
    const T inv_n = T(1) / static_cast<T>(p.size());
    for (std::size_t i = 0; i < p.size(); ++i) grad[i] = (p[i] - y[i]) * inv_n;
    return grad;
}

// --- optimizer -----------------------------------------------------------------------

struct AdamConfig {
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

// Raised when a gradient turns non-finite; the step is aborted before any
// parameter is touched.
class NonFiniteGradientError : public std::runtime_error {
public:
    explicit NonFiniteGradientError(const std::string& param_name)
        : std::runtime_error("non-finite gradient in parameter '" + param_name + "'") {}
};

// Standard bias-corrected Adam over a fixed list of parameters.  The
// parameter list must keep its order and shapes across steps.
template <class T>
class Adam {
public:
    Adam(const std::vector<Param<T>*>& params, AdamConfig config) : config_(config) {
        moments_.reserve(params.size());
        for (const Param<T>* p : params)
            moments_.push_back({Mat<T>(p->value.rows(), p->value.cols()),
                                Mat<T>(p->value.rows(), p->value.cols())});
    }

    const AdamConfig& config() const { return config_; }
    long step_count() const { return step_; }

    void step(const std::vector<Param<T>*>& params) {
        if (params.size() != moments_.size())
            throw std::invalid_argument("Adam::step: parameter list changed size");
        for (const Param<T>* p : params)
            if (!p->grad.all_finite()) throw NonFiniteGradientError(p->name);

        ++step_;
        const T lr = static_cast<T>(config_.learning_rate);
        const T b1 = static_cast<T>(config_.beta1);
        const T b2 = static_cast<T>(config_.beta2);
        const T eps = static_cast<T>(config_.epsilon);
        const T corr1 = T(1) - std::pow(b1, static_cast<T>(step_));
        const T corr2 = T(1) - std::pow(b2, static_cast<T>(step_));

        for (std::size_t k = 0; k < params.size(); ++k) {
            Param<T>& p = *params[k];
            auto& [m, v] = moments_[k];
            if (!p.value.same_shape(m))
                throw std::invalid_argument("Adam::step: parameter shape changed");
            T* value = p.value.data();
            const T* grad = p.grad.data();
            T* md = m.data();
            T* vd = v.data();
            for (std::size_t i = 0, n = p.value.size(); i < n; ++i) {
                md[i] = b1 * md[i] + (T(1) - b1) * grad[i];
                vd[i] = b2 * vd[i] + (T(1) - b2) * grad[i] * grad[i];
                const T m_hat = md[i] / corr1;
                const T v_hat = vd[i] / corr2;
                value[i] -= lr * m_hat / (std::sqrt(v_hat) + eps);
            }
        }
    }

private:
    AdamConfig config_;
    std::vector<std::pair<Mat<T>, Mat<T>>> moments_;
    long step_ = 0;
};

}  // namespace nodepred
