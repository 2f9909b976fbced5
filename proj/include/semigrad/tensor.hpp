#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace semigrad {

// Dense row-major tensor of 64-bit floats. Immutable from the caller's
// point of view once handed off; mutation happens only on the owning side.
struct Tensor {
    std::vector<std::size_t> shape;
    std::vector<double> data;

    Tensor() = default;

    Tensor(std::vector<std::size_t> shape_, std::vector<double> data_)
        : shape(std::move(shape_)), data(std::move(data_)) {
        if (numel_of(shape) != data.size())
            throw std::invalid_argument("tensor: shape/data size mismatch");
    }

    static std::size_t numel_of(const std::vector<std::size_t>& s) {
        std::size_t n = 1;
        for (std::size_t d : s) {
            if (d == 0) throw std::invalid_argument("tensor: zero dimension");
            n *= d;
        }
        return n;
    }

    static Tensor zeros(std::vector<std::size_t> shape) {
        std::size_t n = numel_of(shape);
        return Tensor(std::move(shape), std::vector<double>(n, 0.0));
    }

    static Tensor full(std::vector<std::size_t> shape, double v) {
        std::size_t n = numel_of(shape);
        return Tensor(std::move(shape), std::vector<double>(n, v));
    }

    static Tensor identity(std::size_t n) {
        Tensor t = zeros({n, n});
        for (std::size_t i = 0; i < n; ++i) t.data[i * n + i] = 1.0;
        return t;
    }

    std::size_t numel() const { return data.size(); }
    std::size_t ndim() const { return shape.size(); }

    std::size_t rows() const { require_2d(); return shape[0]; }
    std::size_t cols() const { require_2d(); return shape[1]; }

    double& operator()(std::size_t i, std::size_t j) {
        return data[i * shape[1] + j];
    }
    double operator()(std::size_t i, std::size_t j) const {
        return data[i * shape[1] + j];
    }

    std::size_t bytes() const { return data.size() * sizeof(double); }

    bool same_shape(const Tensor& o) const { return shape == o.shape; }

    std::string shape_str() const {
        std::ostringstream os;
        os << '[';
        for (std::size_t i = 0; i < shape.size(); ++i) {
            if (i) os << 'x';
            os << shape[i];
        }
        os << ']';
        return os.str();
    }

    bool all_finite() const {
        for (double v : data)
            if (!std::isfinite(v)) return false;
        return true;
    }

private:
    void require_2d() const {
        if (shape.size() != 2)
            throw std::invalid_argument("tensor: expected 2-d, got " + shape_str());
    }
};

inline void check_same_shape(const Tensor& a, const Tensor& b, const char* op) {
    if (!a.same_shape(b))
        throw std::invalid_argument(std::string(op) + ": shape mismatch " +
                                    a.shape_str() + " vs " + b.shape_str());
}

// C = A (m x k) * B (k x n). Summation over k runs in increasing index
// order for every output element, so results are bit-reproducible.
inline Tensor matmul(const Tensor& a, const Tensor& b) {
    const std::size_t m = a.rows(), k = a.cols();
    if (b.rows() != k)
        throw std::invalid_argument("matmul: inner dims disagree " +
                                    a.shape_str() + " vs " + b.shape_str());
    const std::size_t n = b.cols();
    Tensor c = Tensor::zeros({m, n});
    const double* ap = a.data.data();
    const double* bp = b.data.data();
    double* cp = c.data.data();
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t kk = 0; kk < k; ++kk) {
            const double aik = ap[i * k + kk];
            const double* brow = bp + kk * n;
            double* crow = cp + i * n;
            for (std::size_t j = 0; j < n; ++j) crow[j] += aik * brow[j];
        }
    }
    return c;
}

inline Tensor transpose(const Tensor& a) {
    const std::size_t m = a.rows(), n = a.cols();
    Tensor t = Tensor::zeros({n, m});
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) t(j, i) = a(i, j);
    return t;
}

// C = A (m x k) * B^T where B is (n x k). Both routes below keep the same
// increasing-k summation order per output element and FP multiplication
// commutes bitwise, so they produce identical results; pick the one that
// transposes the smaller operand.
inline Tensor matmul_transB(const Tensor& a, const Tensor& b) {
    if (b.cols() != a.cols())
        throw std::invalid_argument("matmul_transB: inner dims disagree " +
                                    a.shape_str() + " vs " + b.shape_str());
    if (a.numel() <= b.numel()) return transpose(matmul(b, transpose(a)));
    return matmul(a, transpose(b));
}

// C = A^T * B where A is (k x m), B is (k x n). k increases monotonically.
inline Tensor matmul_transA(const Tensor& a, const Tensor& b) {
    const std::size_t k = a.rows(), m = a.cols();
    if (b.rows() != k)
        throw std::invalid_argument("matmul_transA: inner dims disagree " +
                                    a.shape_str() + " vs " + b.shape_str());
    const std::size_t n = b.cols();
    Tensor c = Tensor::zeros({m, n});
    for (std::size_t kk = 0; kk < k; ++kk) {
        const double* arow = a.data.data() + kk * m;
        const double* brow = b.data.data() + kk * n;
        for (std::size_t i = 0; i < m; ++i) {
            const double aki = arow[i];
            double* crow = c.data.data() + i * n;
            for (std::size_t j = 0; j < n; ++j) crow[j] += aki * brow[j];
        }
    }
    return c;
}

inline Tensor add(const Tensor& a, const Tensor& b) {
    check_same_shape(a, b, "add");
    Tensor c = a;
    for (std::size_t i = 0; i < c.data.size(); ++i) c.data[i] += b.data[i];
    return c;
}

inline Tensor sub(const Tensor& a, const Tensor& b) {
    check_same_shape(a, b, "sub");
    Tensor c = a;
    for (std::size_t i = 0; i < c.data.size(); ++i) c.data[i] -= b.data[i];
    return c;
}

inline Tensor hadamard(const Tensor& a, const Tensor& b) {
    check_same_shape(a, b, "hadamard");
    Tensor c = a;
    for (std::size_t i = 0; i < c.data.size(); ++i) c.data[i] *= b.data[i];
    return c;
}

inline Tensor scale(const Tensor& a, double s) {
    Tensor c = a;
    for (double& v : c.data) v *= s;
    return c;
}

inline Tensor add_scalar(const Tensor& a, double s) {
    Tensor c = a;
    for (double& v : c.data) v += s;
    return c;
}

// sign(0) := 0
inline Tensor sign(const Tensor& a) {
    Tensor c = a;
    for (double& v : c.data) v = (v > 0.0) ? 1.0 : (v < 0.0 ? -1.0 : 0.0);
    return c;
}

inline Tensor clamp(const Tensor& a, double lo, double hi) {
    Tensor c = a;
    for (double& v : c.data) v = std::min(std::max(v, lo), hi);
    return c;
}

inline double linf_norm(const Tensor& a) {
    double m = 0.0;
    for (double v : a.data) m = std::max(m, std::abs(v));
    return m;
}

inline bool bitwise_equal(const Tensor& a, const Tensor& b) {
    if (!a.same_shape(b)) return false;
    for (std::size_t i = 0; i < a.data.size(); ++i) {
        if (std::memcmp(&a.data[i], &b.data[i], sizeof(double)) != 0) return false;
    }
    return true;
}

inline void ensure_finite(const Tensor& t, const char* where) {
    if (!t.all_finite())
        throw std::runtime_error(std::string(where) + ": non-finite value in tensor " +
                                 t.shape_str());
}

// Seeded splitmix64 generator. Identical seed gives an identical stream on
// every platform.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next_u64() {
        std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ULL);
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }

    // [0, 1) with 53 bits of precision
    double next_double() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) {
        return lo + (hi - lo) * next_double();
    }

    // Box-Muller; one spare value cached
    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u1 = next_double();
        double u2 = next_double();
        while (u1 <= 0.0) u1 = next_double();
        double r = std::sqrt(-2.0 * std::log(u1));
        constexpr double two_pi = 6.283185307179586476925286766559;
        double theta = two_pi * u2;
        spare_ = r * std::sin(theta);
        has_spare_ = true;
        return r * std::cos(theta);
    }

    Tensor uniform_tensor(std::vector<std::size_t> shape, double lo, double hi) {
        Tensor t = Tensor::zeros(std::move(shape));
        for (double& v : t.data) v = uniform(lo, hi);
        return t;
    }

    Tensor normal_tensor(std::vector<std::size_t> shape, double mean, double stddev) {
        Tensor t = Tensor::zeros(std::move(shape));
        for (double& v : t.data) v = mean + stddev * normal();
        return t;
    }

private:
    std::uint64_t state_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

}  // namespace semigrad
