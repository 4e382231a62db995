#pragma once

#include <cmath>
#include <cstdint>
#include <numeric>
#include <string>

#include "singflow/error.hpp"

namespace singflow {

// Exact rational number with 64-bit numerator/denominator, kept normalized
// (denominator > 0, gcd == 1). Exponents of generalized power series are
// stored as Rationals so they survive snapping and exact arithmetic.
class Rational {
public:
    constexpr Rational() = default;
    constexpr Rational(std::int64_t n) : num_(n) {}
    Rational(std::int64_t n, std::int64_t d) : num_(n), den_(d) { normalize(); }

    std::int64_t num() const { return num_; }
    std::int64_t den() const { return den_; }
    double value() const { return static_cast<double>(num_) / static_cast<double>(den_); }
    bool is_zero() const { return num_ == 0; }

    friend Rational operator+(const Rational& a, const Rational& b) {
        return Rational(a.num_ * b.den_ + b.num_ * a.den_, a.den_ * b.den_);
    }
    friend Rational operator-(const Rational& a, const Rational& b) {
        return Rational(a.num_ * b.den_ - b.num_ * a.den_, a.den_ * b.den_);
    }
    friend Rational operator*(const Rational& a, const Rational& b) {
        return Rational(a.num_ * b.num_, a.den_ * b.den_);
    }
    friend Rational operator/(const Rational& a, const Rational& b) {
        if (b.num_ == 0) throw Error("Rational: division by zero");
        return Rational(a.num_ * b.den_, a.den_ * b.num_);
    }
    Rational operator-() const { Rational r; r.num_ = -num_; r.den_ = den_; return r; }

    friend bool operator==(const Rational& a, const Rational& b) {
        return a.num_ == b.num_ && a.den_ == b.den_;
    }
    friend bool operator!=(const Rational& a, const Rational& b) { return !(a == b); }
    friend bool operator<(const Rational& a, const Rational& b) {
        return a.num_ * b.den_ < b.num_ * a.den_;
    }
    friend bool operator>(const Rational& a, const Rational& b) { return b < a; }
    friend bool operator<=(const Rational& a, const Rational& b) { return !(b < a); }
    friend bool operator>=(const Rational& a, const Rational& b) { return !(a < b); }

    std::string str() const {
        if (den_ == 1) return std::to_string(num_);
        return std::to_string(num_) + "/" + std::to_string(den_);
    }

    // Best rational approximation of x with denominator <= max_den, via the
    // continued-fraction expansion (convergents plus the clamped final term).
    static Rational snap(double x, std::int64_t max_den) {
        if (max_den < 1) throw Error("Rational::snap: max_den must be >= 1");
        if (!std::isfinite(x)) throw Error("Rational::snap: non-finite input");
        const double sign = x < 0 ? -1.0 : 1.0;
        double y = std::abs(x);
        std::int64_t p0 = 0, q0 = 1;  // previous convergent
        std::int64_t p1 = 1, q1 = 0;  // current convergent
        for (int iter = 0; iter < 64; ++iter) {
            const double fa = std::floor(y);
            if (fa > 1e17) break;
            const std::int64_t a = static_cast<std::int64_t>(fa);
            std::int64_t p2 = a * p1 + p0;
            std::int64_t q2 = a * q1 + q0;
            if (q2 > max_den) {
                // Clamp the last partial quotient to stay under the cap and
                // keep the better of the two candidates.
                const std::int64_t k = (max_den - q0) / (q1 == 0 ? 1 : q1);
                const std::int64_t pc = k * p1 + p0;
                const std::int64_t qc = k * q1 + q0;
                Rational best(sign < 0 ? -p1 : p1, q1 == 0 ? 1 : q1);
                if (qc >= 1) {
                    Rational cand(sign < 0 ? -pc : pc, qc);
                    if (std::abs(cand.value() - x) < std::abs(best.value() - x)) best = cand;
                }
                return best;
            }
            p0 = p1; q0 = q1; p1 = p2; q1 = q2;
            const double frac = y - fa;
            if (frac < 1e-12) break;
            y = 1.0 / frac;
        }
        return Rational(sign < 0 ? -p1 : p1, q1 == 0 ? 1 : q1);
    }

private:
    void normalize() {
        if (den_ == 0) throw Error("Rational: zero denominator");
        if (den_ < 0) { num_ = -num_; den_ = -den_; }
        const std::int64_t g = std::gcd(num_ < 0 ? -num_ : num_, den_);
        if (g > 1) { num_ /= g; den_ /= g; }
        if (num_ == 0) den_ = 1;
    }

    std::int64_t num_ = 0;
    std::int64_t den_ = 1;
};

inline std::int64_t lcm64(std::int64_t a, std::int64_t b) { return std::lcm(a, b); }

}  // namespace singflow
