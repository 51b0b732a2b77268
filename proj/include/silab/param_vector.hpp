#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace silab {

// Norm threshold below which scale-invariant gradients are undefined.
inline constexpr double kOriginGuard = 1e-12;

// Raised when a gradient (or direction) is requested too close to the origin,
// where scale-invariant losses are non-smooth.
class OriginError : public std::domain_error {
public:
    explicit OriginError(double norm)
        : std::domain_error("parameter norm " + std::to_string(norm) +
                            " below origin guard " + std::to_string(kOriginGuard)) {}
};

// Flat vector of trainable weights. All arithmetic is length-checked.
class ParamVector {
public:
    ParamVector() = default;
    explicit ParamVector(std::size_t dim, double fill = 0.0) : v_(dim, fill) {}
    explicit ParamVector(std::vector<double> values) : v_(std::move(values)) {}

    static ParamVector zeros(std::size_t dim) { return ParamVector(dim, 0.0); }

    std::size_t size() const { return v_.size(); }
    bool empty() const { return v_.empty(); }

    double operator[](std::size_t i) const { return v_[i]; }
    double& operator[](std::size_t i) { return v_[i]; }

    std::span<const double> data() const { return v_; }
    std::span<double> data() { return v_; }
    const std::vector<double>& values() const { return v_; }

    ParamVector& operator+=(const ParamVector& o) {
        check_dim(o);
        for (std::size_t i = 0; i < v_.size(); ++i) v_[i] += o.v_[i];
        return *this;
    }
    ParamVector& operator-=(const ParamVector& o) {
        check_dim(o);
        for (std::size_t i = 0; i < v_.size(); ++i) v_[i] -= o.v_[i];
        return *this;
    }
    ParamVector& operator*=(double a) {
        for (auto& x : v_) x *= a;
        return *this;
    }

    // *this += a * x
    ParamVector& axpy(double a, const ParamVector& x) {
        check_dim(x);
        for (std::size_t i = 0; i < v_.size(); ++i) v_[i] += a * x.v_[i];
        return *this;
    }

    double dot(const ParamVector& o) const {
        check_dim(o);
        double s = 0.0;
        for (std::size_t i = 0; i < v_.size(); ++i) s += v_[i] * o.v_[i];
        return s;
    }

    double squared_norm() const {
        double s = 0.0;
        for (double x : v_) s += x * x;
        return s;
    }
    double norm() const { return std::sqrt(squared_norm()); }

    bool operator==(const ParamVector& o) const { return v_ == o.v_; }

private:
    void check_dim(const ParamVector& o) const {
        if (v_.size() != o.v_.size())
            throw std::invalid_argument("ParamVector dimension mismatch: " +
                                        std::to_string(v_.size()) + " vs " +
                                        std::to_string(o.v_.size()));
    }

    std::vector<double> v_;
};

inline ParamVector operator+(ParamVector a, const ParamVector& b) { return a += b; }
inline ParamVector operator-(ParamVector a, const ParamVector& b) { return a -= b; }
inline ParamVector operator*(double s, ParamVector a) { return a *= s; }
inline ParamVector operator*(ParamVector a, double s) { return a *= s; }

// Unit vector w / ||w||; throws OriginError near the origin.
inline ParamVector direction(const ParamVector& w) {
    const double n = w.norm();
    if (n < kOriginGuard) throw OriginError(n);
    return (1.0 / n) * w;
}

inline double distance(const ParamVector& a, const ParamVector& b) {
    return (a - b).norm();
}

}  // namespace silab
