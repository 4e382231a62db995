#pragma once

#include <Eigen/Dense>
#include <array>
#include <string>
#include <vector>

#include "singflow/error.hpp"

namespace singflow {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

// Polynomial in three variables with double coefficients. Derivatives are
// exact (power-rule on integer exponents), so gradient evaluations carry no
// finite-difference error.
class PolyFunction {
public:
    struct Monomial {
        std::array<int, 3> powers{0, 0, 0};
        double coeff = 0.0;
    };

    PolyFunction() = default;
    explicit PolyFunction(double constant);
    static PolyFunction monomial(int px, int py, int pz, double coeff);
    static PolyFunction variable(int axis);  // x, y or z

    const std::vector<Monomial>& monomials() const { return mono_; }
    bool is_zero() const { return mono_.empty(); }
    int degree() const;

    double operator()(const Vec3& p) const;
    // Magnitude scale of the evaluation at p: sum of |term| values. Used to
    // make convergence thresholds relative when coordinates are tiny.
    double term_scale(const Vec3& p) const;

    PolyFunction partial(int axis) const;
    Vec3 gradient(const Vec3& p) const;

    // p(A y): substitute the linear change of variables x = A y.
    PolyFunction compose_linear(const Mat3& A) const;

    std::string str() const;

    friend PolyFunction operator+(const PolyFunction& a, const PolyFunction& b);
    friend PolyFunction operator-(const PolyFunction& a, const PolyFunction& b);
    friend PolyFunction operator*(const PolyFunction& a, const PolyFunction& b);
    friend PolyFunction operator*(double s, const PolyFunction& a);
    PolyFunction operator-() const { return -1.0 * *this; }

private:
    static PolyFunction from_monomials(std::vector<Monomial> mono);
    std::vector<Monomial> mono_;
};

}  // namespace singflow
