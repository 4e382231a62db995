#pragma once

#include <string>
#include <utility>
#include <vector>

#include "singflow/rational.hpp"

namespace singflow {

// Q-generalized power series: finitely many stored terms a_k * T^{alpha_k}
// with strictly increasing rational exponents and nonzero coefficients.
// The empty term list is the zero series.
class GenSeries {
public:
    struct Term {
        Rational exponent;
        double coeff = 0.0;
    };

    GenSeries() = default;
    static GenSeries term(const Rational& exponent, double coeff);

    const std::vector<Term>& terms() const { return terms_; }
    bool is_zero() const { return terms_.empty(); }
    std::size_t size() const { return terms_.size(); }

    // First stored term; throws on the zero series.
    Term leading() const;

    // Sum of a_k t^{alpha_k}. t must be positive (rational powers of
    // non-positive t are undefined); the zero series evaluates to 0 anywhere.
    double evaluate(double t) const;

    GenSeries scaled(double factor) const;
    std::string str() const;

    // Terms whose coefficients cancel below coeff_tol are dropped.
    friend GenSeries add(const GenSeries& a, const GenSeries& b, double coeff_tol);
    // Distributed product; exponents add exactly, terms above max_exponent
    // are truncated away.
    friend GenSeries mul(const GenSeries& a, const GenSeries& b, double max_exponent);

private:
    static GenSeries from_terms(std::vector<Term> terms, double coeff_tol);
    std::vector<Term> terms_;
};

GenSeries add(const GenSeries& a, const GenSeries& b, double coeff_tol = 1e-12);
GenSeries mul(const GenSeries& a, const GenSeries& b, double max_exponent = 20.0);
inline GenSeries operator+(const GenSeries& a, const GenSeries& b) { return add(a, b); }
inline GenSeries operator*(const GenSeries& a, const GenSeries& b) { return mul(a, b); }

struct SeriesFit {
    GenSeries series;
    double rel_residual = 0.0;
    // False when the residual stopped decreasing before reaching tolerance.
    bool converged = true;
};

// Recovers a generalized power series from noiseless-or-nearly samples
// (t_i, v_i), t_i > 0 sorted increasing and spanning at least three decades.
// Leading exponents are detected from log-log slopes, snapped to rationals
// with denominator <= den_cap, and all coefficients are re-solved globally
// by least squares after each accepted exponent.
SeriesFit fit_series(const std::vector<std::pair<double, double>>& samples,
                     int max_terms, std::int64_t den_cap, double rel_tol = 1e-6);

// Leading exponent of y ~ c * t^a from positive samples: log-log slope over
// the smallest usable decade, snapped to denominator <= den_cap.
struct ExponentFit {
    Rational snapped;
    double raw = 0.0;
    bool valid = false;  // false when the field is below the noise floor
};
ExponentFit fit_leading_exponent(const std::vector<double>& t,
                                 const std::vector<double>& y,
                                 std::int64_t den_cap,
                                 double noise_floor = 1e-300);

}  // namespace singflow
