#pragma once

// Dense row-major matrix over float or double, plus the handful of BLAS-like
// kernels the model needs.  Dense products are delegated to Eigen (mapped
// over our storage, no copies); everything else is written out directly.
//
// Determinism contract: for a fixed scalar type, fixed inputs, and a fixed
// build, every kernel here produces bitwise-identical output regardless of
// the configured thread count.  Parallel loops only ever split work by output
// row, and each row is accumulated by exactly one thread in a fixed order.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace nodepred {

// --- thread configuration ---------------------------------------------------

// Global worker count for row-parallel loops.  1 (the default) is the strictly
// sequential reference path.
inline int& thread_count_slot() {
    static int count = 1;
    return count;
}

inline void set_thread_count(int n) {
    const int hw = static_cast<int>(std::thread::hardware_concurrency());
    thread_count_slot() = std::clamp(n, 1, std::max(1, hw));
}

inline int thread_count() { return thread_count_slot(); }

// Run fn(begin, end) over [0, n) split into contiguous row blocks, one per
// worker.  fn must write only to rows in its own block.
template <class Fn>
void parallel_rows(std::size_t n, Fn&& fn) {
    const int workers = thread_count();
    if (workers <= 1 || n < 2048) {
        fn(std::size_t{0}, n);
        return;
    }
    const std::size_t blocks = std::min<std::size_t>(workers, n);
    const std::size_t chunk = (n + blocks - 1) / blocks;
    std::vector<std::thread> pool;
    pool.reserve(blocks);
    for (std::size_t b = 0; b < blocks; ++b) {
        const std::size_t begin = b * chunk;
        const std::size_t end = std::min(n, begin + chunk);
        if (begin >= end) break;
        pool.emplace_back([&fn, begin, end] { fn(begin, end); });
    }
    for (auto& t : pool) t.join();
}

// --- matrix type --------------------------------------------------------------

template <class T>
class Mat {
    static_assert(std::is_floating_point_v<T>, "Mat requires float or double");

public:
    Mat() = default;
    Mat(std::size_t rows, std::size_t cols, T fill = T(0))
        : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

    static Mat zeros(std::size_t rows, std::size_t cols) { return Mat(rows, cols); }

    static Mat from_rows(std::initializer_list<std::initializer_list<T>> rows) {
        Mat m(rows.size(), rows.size() ? rows.begin()->size() : 0);
        std::size_t r = 0;
        for (const auto& row : rows) {
            if (row.size() != m.cols_)
                throw std::invalid_argument("Mat::from_rows: ragged rows");
            std::copy(row.begin(), row.end(), m.row(r));
            ++r;
        }
        return m;
    }

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    std::size_t size() const { return data_.size(); }
    bool empty() const { return data_.empty(); }

    T* data() { return data_.data(); }
    const T* data() const { return data_.data(); }
    T* row(std::size_t r) { return data_.data() + r * cols_; }
    const T* row(std::size_t r) const { return data_.data() + r * cols_; }

    T& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
    const T& operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

    bool same_shape(const Mat& o) const { return rows_ == o.rows_ && cols_ == o.cols_; }

    void fill(T v) { std::fill(data_.begin(), data_.end(), v); }

    void resize(std::size_t rows, std::size_t cols) {
        rows_ = rows;
        cols_ = cols;
        data_.assign(rows * cols, T(0));
    }

    // Ensure shape without preserving contents (cheap when already right).
    void reshape_for(std::size_t rows, std::size_t cols) {
        if (rows_ == rows && cols_ == cols) return;
        resize(rows, cols);
    }

    bool all_finite() const {
        for (T v : data_)
            if (!std::isfinite(v)) return false;
        return true;
    }

    friend bool operator==(const Mat& a, const Mat& b) {
        return a.rows_ == b.rows_ && a.cols_ == b.cols_ && a.data_ == b.data_;
    }

private:
    std::size_t rows_ = 0, cols_ = 0;
    std::vector<T> data_;
};

namespace detail {

template <class T>
using EigenMapC =
    Eigen::Map<const Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;
template <class T>
using EigenMap =
    Eigen::Map<Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;

template <class T>
EigenMapC<T> map_of(const Mat<T>& m) {
    return EigenMapC<T>(m.data(), static_cast<Eigen::Index>(m.rows()),
                        static_cast<Eigen::Index>(m.cols()));
}

template <class T>
EigenMap<T> map_of(Mat<T>& m) {
    return EigenMap<T>(m.data(), static_cast<Eigen::Index>(m.rows()),
                       static_cast<Eigen::Index>(m.cols()));
}

inline void require(bool ok, const std::string& what) {
    if (!ok) throw std::invalid_argument(what);
}

}  // namespace detail

// --- dense products -----------------------------------------------------------

// out = a * b
template <class T>
void matmul(const Mat<T>& a, const Mat<T>& b, Mat<T>& out) {
    detail::require(a.cols() == b.rows(), "matmul: inner dimensions differ");
    out.reshape_for(a.rows(), b.cols());
    detail::map_of(out).noalias() = detail::map_of(a) * detail::map_of(b);
}

// out = a^T * b
template <class T>
void matmul_tn(const Mat<T>& a, const Mat<T>& b, Mat<T>& out) {
    detail::require(a.rows() == b.rows(), "matmul_tn: row counts differ");
    out.reshape_for(a.cols(), b.cols());
    detail::map_of(out).noalias() = detail::map_of(a).transpose() * detail::map_of(b);
}

// out = a * b^T
template <class T>
void matmul_nt(const Mat<T>& a, const Mat<T>& b, Mat<T>& out) {
    detail::require(a.cols() == b.cols(), "matmul_nt: column counts differ");
    out.reshape_for(a.rows(), b.rows());
    detail::map_of(out).noalias() = detail::map_of(a) * detail::map_of(b).transpose();
}

// out += a * b
template <class T>
void matmul_add(const Mat<T>& a, const Mat<T>& b, Mat<T>& out) {
    detail::require(a.cols() == b.rows(), "matmul_add: inner dimensions differ");
    detail::require(out.rows() == a.rows() && out.cols() == b.cols(),
                    "matmul_add: output shape mismatch");
    detail::map_of(out).noalias() += detail::map_of(a) * detail::map_of(b);
}

// out += a^T * b
template <class T>
void matmul_tn_add(const Mat<T>& a, const Mat<T>& b, Mat<T>& out) {
    detail::require(a.rows() == b.rows(), "matmul_tn_add: row counts differ");
    detail::require(out.rows() == a.cols() && out.cols() == b.cols(),
                    "matmul_tn_add: output shape mismatch");
    detail::map_of(out).noalias() += detail::map_of(a).transpose() * detail::map_of(b);
}

// --- elementwise helpers --------------------------------------------------------

template <class T>
void add_inplace(Mat<T>& into, const Mat<T>& other) {
    detail::require(into.same_shape(other), "add_inplace: shape mismatch");
    T* d = into.data();
    const T* s = other.data();
    for (std::size_t i = 0, n = into.size(); i < n; ++i) d[i] += s[i];
}

template <class T>
void scale_inplace(Mat<T>& m, T factor) {
    T* d = m.data();
    for (std::size_t i = 0, n = m.size(); i < n; ++i) d[i] *= factor;
}

// Normalize each row to unit Euclidean length; all-zero rows pass through.
// Returns the original row norms (needed by the backward pass).
template <class T>
std::vector<T> normalize_rows(Mat<T>& m) {
    std::vector<T> norms(m.rows());
    parallel_rows(m.rows(), [&](std::size_t begin, std::size_t end) {
        for (std::size_t r = begin; r < end; ++r) {
            T* row = m.row(r);
            T sq = T(0);
            for (std::size_t c = 0; c < m.cols(); ++c) sq += row[c] * row[c];
            const T norm = std::sqrt(sq);
            norms[r] = norm;
            if (norm > T(0)) {
                const T inv = T(1) / norm;
                for (std::size_t c = 0; c < m.cols(); ++c) row[c] *= inv;
            }
        }
    });
    return norms;
}

// Backward of row normalization.  `normalized` holds the forward output y,
// `norms` the forward row norms; grad is rewritten in place from dL/dy to
// dL/dx using dx = (g - (g.y) y) / |x|.  Zero rows pass gradients through.
template <class T>
void normalize_rows_backward(const Mat<T>& normalized, const std::vector<T>& norms,
                             Mat<T>& grad) {
    detail::require(normalized.same_shape(grad), "normalize_rows_backward: shape mismatch");
    detail::require(norms.size() == grad.rows(), "normalize_rows_backward: norm count mismatch");
    parallel_rows(grad.rows(), [&](std::size_t begin, std::size_t end) {
        for (std::size_t r = begin; r < end; ++r) {
            if (norms[r] <= T(0)) continue;
            const T* y = normalized.row(r);
            T* g = grad.row(r);
            T dot = T(0);
            for (std::size_t c = 0; c < grad.cols(); ++c) dot += g[c] * y[c];
            const T inv = T(1) / norms[r];
            for (std::size_t c = 0; c < grad.cols(); ++c) g[c] = (g[c] - dot * y[c]) * inv;
        }
    });
}

}  // namespace nodepred
