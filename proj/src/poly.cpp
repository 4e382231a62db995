#include "singflow/poly.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace singflow {

namespace {

double ipow(double x, int n) {
    double r = 1.0;
    for (int i = 0; i < n; ++i) r *= x;
    return r;
}

bool powers_less(const std::array<int, 3>& a, const std::array<int, 3>& b) {
    return a < b;
}

}  // namespace

PolyFunction::PolyFunction(double constant) {
    if (constant != 0.0) mono_.push_back({{0, 0, 0}, constant});
}

PolyFunction PolyFunction::monomial(int px, int py, int pz, double coeff) {
    if (px < 0 || py < 0 || pz < 0)
        throw PreconditionError("PolyFunction: negative exponent");
    PolyFunction p;
    if (coeff != 0.0) p.mono_.push_back({{px, py, pz}, coeff});
    return p;
}

PolyFunction PolyFunction::variable(int axis) {
    if (axis < 0 || axis > 2) throw PreconditionError("PolyFunction::variable: axis out of range");
    std::array<int, 3> pw{0, 0, 0};
    pw[axis] = 1;
    PolyFunction p;
    p.mono_.push_back({pw, 1.0});
    return p;
}

int PolyFunction::degree() const {
    int d = 0;
    for (const auto& m : mono_) d = std::max(d, m.powers[0] + m.powers[1] + m.powers[2]);
    return d;
}

double PolyFunction::operator()(const Vec3& p) const {
    double sum = 0.0;
    for (const auto& m : mono_)
        sum += m.coeff * ipow(p.x(), m.powers[0]) * ipow(p.y(), m.powers[1]) * ipow(p.z(), m.powers[2]);
    return sum;
}

double PolyFunction::term_scale(const Vec3& p) const {
    double sum = 0.0;
    for (const auto& m : mono_)
        sum += std::abs(m.coeff * ipow(p.x(), m.powers[0]) * ipow(p.y(), m.powers[1]) * ipow(p.z(), m.powers[2]));
    return sum;
}

PolyFunction PolyFunction::partial(int axis) const {
    if (axis < 0 || axis > 2) throw PreconditionError("PolyFunction::partial: axis out of range");
    std::vector<Monomial> out;
    for (const auto& m : mono_) {
        if (m.powers[axis] == 0) continue;
        Monomial d = m;
        d.coeff *= m.powers[axis];
        d.powers[axis] -= 1;
        out.push_back(d);
    }
    return from_monomials(std::move(out));
}

Vec3 PolyFunction::gradient(const Vec3& p) const {
    Vec3 g = Vec3::Zero();
    for (const auto& m : mono_) {
        const double px = ipow(p.x(), m.powers[0]);
        const double py = ipow(p.y(), m.powers[1]);
        const double pz = ipow(p.z(), m.powers[2]);
        if (m.powers[0] > 0)
            g.x() += m.coeff * m.powers[0] * ipow(p.x(), m.powers[0] - 1) * py * pz;
        if (m.powers[1] > 0)
            g.y() += m.coeff * m.powers[1] * px * ipow(p.y(), m.powers[1] - 1) * pz;
        if (m.powers[2] > 0)
            g.z() += m.coeff * m.powers[2] * px * py * ipow(p.z(), m.powers[2] - 1);
    }
    return g;
}

PolyFunction PolyFunction::compose_linear(const Mat3& A) const {
    // Substitute x_i = sum_j A(i,j) y_j and expand each monomial by repeated
    // multiplication with the linear forms.
    std::array<PolyFunction, 3> lin;
    for (int i = 0; i < 3; ++i) {
        PolyFunction li;
        for (int j = 0; j < 3; ++j) {
            if (A(i, j) != 0.0) li = li + A(i, j) * variable(j);
        }
        lin[i] = li;
    }
    PolyFunction result;
    for (const auto& m : mono_) {
        PolyFunction term(m.coeff);
        for (int axis = 0; axis < 3; ++axis)
            for (int k = 0; k < m.powers[axis]; ++k) term = term * lin[axis];
        result = result + term;
    }
    return result;
}

std::string PolyFunction::str() const {
    if (mono_.empty()) return "0";
    static const char* names[3] = {"x", "y", "z"};
    std::ostringstream os;
    bool first = true;
    for (const auto& m : mono_) {
        if (!first) os << (m.coeff >= 0 ? " + " : " - ");
        else if (m.coeff < 0) os << "-";
        const double c = std::abs(m.coeff);
        bool printed = false;
        if (c != 1.0 || (m.powers[0] == 0 && m.powers[1] == 0 && m.powers[2] == 0)) {
            os << c;
            printed = true;
        }
        for (int axis = 0; axis < 3; ++axis) {
            if (m.powers[axis] == 0) continue;
            if (printed) os << "*";
            os << names[axis];
            if (m.powers[axis] > 1) os << "^" << m.powers[axis];
            printed = true;
        }
        first = false;
    }
    return os.str();
}

PolyFunction PolyFunction::from_monomials(std::vector<Monomial> mono) {
    std::sort(mono.begin(), mono.end(),
              [](const Monomial& a, const Monomial& b) { return powers_less(a.powers, b.powers); });
    PolyFunction p;
    for (const auto& m : mono) {
        if (!p.mono_.empty() && p.mono_.back().powers == m.powers) {
            p.mono_.back().coeff += m.coeff;
            if (p.mono_.back().coeff == 0.0) p.mono_.pop_back();
        } else if (m.coeff != 0.0) {
            p.mono_.push_back(m);
        }
    }
    return p;
}

PolyFunction operator+(const PolyFunction& a, const PolyFunction& b) {
    std::vector<PolyFunction::Monomial> mono = a.mono_;
    mono.insert(mono.end(), b.mono_.begin(), b.mono_.end());
    return PolyFunction::from_monomials(std::move(mono));
}

PolyFunction operator-(const PolyFunction& a, const PolyFunction& b) {
    return a + (-1.0 * b);
}

PolyFunction operator*(const PolyFunction& a, const PolyFunction& b) {
    std::vector<PolyFunction::Monomial> mono;
    mono.reserve(a.mono_.size() * b.mono_.size());
    for (const auto& ma : a.mono_) {
        for (const auto& mb : b.mono_) {
            PolyFunction::Monomial m;
            for (int i = 0; i < 3; ++i) m.powers[i] = ma.powers[i] + mb.powers[i];
            m.coeff = ma.coeff * mb.coeff;
            mono.push_back(m);
        }
    }
    return PolyFunction::from_monomials(std::move(mono));
}

PolyFunction operator*(double s, const PolyFunction& a) {
    std::vector<PolyFunction::Monomial> mono = a.mono_;
    for (auto& m : mono) m.coeff *= s;
    return PolyFunction::from_monomials(std::move(mono));
}

}  // namespace singflow
