#include "singflow/series.hpp"

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>
#include <complex>
#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <sstream>

namespace singflow {

GenSeries GenSeries::term(const Rational& exponent, double coeff) {
    GenSeries s;
    if (coeff != 0.0) s.terms_.push_back({exponent, coeff});
    return s;
}

GenSeries::Term GenSeries::leading() const {
    if (terms_.empty()) throw Error("GenSeries::leading: no leading term (zero series)");
    return terms_.front();
}

double GenSeries::evaluate(double t) const {
    if (terms_.empty()) return 0.0;
    if (!(t > 0.0)) throw std::domain_error("GenSeries::evaluate: t must be positive");
    double sum = 0.0;
    for (const auto& tm : terms_) sum += tm.coeff * std::pow(t, tm.exponent.value());
    return sum;
}

GenSeries GenSeries::scaled(double factor) const {
    GenSeries s;
    if (factor == 0.0) return s;
    s.terms_ = terms_;
    for (auto& tm : s.terms_) tm.coeff *= factor;
    return s;
}

std::string GenSeries::str() const {
    if (terms_.empty()) return "0";
    std::ostringstream os;
    bool first = true;
    for (const auto& tm : terms_) {
        if (!first) os << (tm.coeff >= 0 ? " + " : " - ");
        else if (tm.coeff < 0) os << "-";
        os << std::abs(tm.coeff);
        if (!tm.exponent.is_zero()) os << "*T^(" << tm.exponent.str() << ")";
        first = false;
    }
    return os.str();
}

GenSeries GenSeries::from_terms(std::vector<Term> terms, double coeff_tol) {
    std::sort(terms.begin(), terms.end(),
              [](const Term& a, const Term& b) { return a.exponent < b.exponent; });
    GenSeries s;
    for (const auto& tm : terms) {
        if (!s.terms_.empty() && s.terms_.back().exponent == tm.exponent) {
            s.terms_.back().coeff += tm.coeff;
            if (std::abs(s.terms_.back().coeff) < coeff_tol) s.terms_.pop_back();
        } else if (std::abs(tm.coeff) >= coeff_tol) {
            s.terms_.push_back(tm);
        }
    }
    return s;
}

GenSeries add(const GenSeries& a, const GenSeries& b, double coeff_tol) {
    std::vector<GenSeries::Term> terms = a.terms_;
    terms.insert(terms.end(), b.terms_.begin(), b.terms_.end());
    return GenSeries::from_terms(std::move(terms), coeff_tol);
}

GenSeries mul(const GenSeries& a, const GenSeries& b, double max_exponent) {
    std::vector<GenSeries::Term> terms;
    terms.reserve(a.terms_.size() * b.terms_.size());
    for (const auto& ta : a.terms_) {
        for (const auto& tb : b.terms_) {
            Rational e = ta.exponent + tb.exponent;
            if (e.value() > max_exponent) continue;
            terms.push_back({e, ta.coeff * tb.coeff});
        }
    }
    return GenSeries::from_terms(std::move(terms), 1e-300);
}

namespace {

// Least-squares slope of log|y| against log t over the given index range,
// using only points that stand clear of the local noise floor.
bool loglog_slope(const std::vector<double>& t, const std::vector<double>& y,
                  std::size_t lo, std::size_t hi, double* slope) {
    double ymax = 0.0;
    for (std::size_t i = lo; i < hi; ++i) ymax = std::max(ymax, std::abs(y[i]));
    if (ymax <= 0.0) return false;
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    int n = 0;
    for (std::size_t i = lo; i < hi; ++i) {
        const double ay = std::abs(y[i]);
        if (ay < 1e-3 * ymax) continue;  // skip near-zeros of oscillatory residuals
        const double lx = std::log(t[i]);
        const double ly = std::log(ay);
        sx += lx; sy += ly; sxx += lx * lx; sxy += lx * ly;
        ++n;
    }
    if (n < 3) return false;
    const double det = n * sxx - sx * sx;
    if (std::abs(det) < 1e-12) return false;
    *slope = (n * sxy - sx * sy) / det;
    return true;
}

// Shared cache of row-weighted, column-normalized Vandermonde columns
// t_i^{e} / W_i for one sample grid. Row weights W_i are the decade envelope
// of |v|, so the fit is relative per decade: a wrong leading exponent then
// fails visibly at small t instead of hiding under the large-t values.
struct ColumnCache {
    const std::vector<double>& t;
    const std::vector<double>& w;
    std::map<std::pair<std::int64_t, std::int64_t>, std::pair<Eigen::VectorXd, double>> cols;

    ColumnCache(const std::vector<double>& t_, const std::vector<double>& w_)
        : t(t_), w(w_) {}

    const std::pair<Eigen::VectorXd, double>& get(const Rational& e) {
        auto it = cols.find({e.num(), e.den()});
        if (it != cols.end()) return it->second;
        Eigen::VectorXd col(t.size());
        const double ev = e.value();
        for (std::size_t i = 0; i < t.size(); ++i) col[i] = std::pow(t[i], ev) / w[i];
        const double norm = col.norm();
        if (norm > 0) col /= norm;
        return cols.emplace(std::make_pair(e.num(), e.den()),
                            std::make_pair(std::move(col), norm)).first->second;
    }
};

// Weighted least squares over the cached columns; returns the max envelope-
// relative residual.
double solve_coefficients(ColumnCache& cache, const Eigen::VectorXd& rhs,
                          const std::vector<Rational>& exps, double /*scale*/,
                          std::vector<double>* coeffs) {
    const int n = static_cast<int>(rhs.size());
    const int k = static_cast<int>(exps.size());
    Eigen::MatrixXd V(n, k);
    std::vector<double> colnorm(k);
    for (int j = 0; j < k; ++j) {
        const auto& [col, norm] = cache.get(exps[j]);
        V.col(j) = col;
        colnorm[j] = norm;
    }
    Eigen::VectorXd c = V.colPivHouseholderQr().solve(rhs);
    Eigen::VectorXd res = rhs - V * c;
    coeffs->resize(k);
    for (int j = 0; j < k; ++j)
        (*coeffs)[j] = colnorm[j] > 0 ? c(j) / colnorm[j] : 0.0;
    return res.cwiseAbs().maxCoeff();
}

// Dictionary of rational exponents (denominator <= den_cap) within a band
// around each log-log slope estimate of the residual.
std::vector<Rational> exponent_dictionary(const std::vector<double>& t,
                                          const std::vector<double>& resid,
                                          const std::vector<Rational>& taken,
                                          std::int64_t den_cap) {
    std::vector<double> estimates;
    const double t0 = t.front();
    const std::vector<double> edges = {10.0 * t0, 100.0 * t0, t.back() * 1.0001};
    for (double edge : edges) {
        std::size_t hi = 0;
        while (hi < t.size() && t[hi] <= edge) ++hi;
        double slope;
        if (loglog_slope(t, resid, 0, hi, &slope)) estimates.push_back(slope);
        std::size_t lo = t.size();
        while (lo > 0 && t[lo - 1] * 1.0001 >= t.back() / (edge / t0)) --lo;
        if (loglog_slope(t, resid, lo, t.size(), &slope)) estimates.push_back(slope);
    }
    // Later terms often hide just above the ones already taken, where the
    // residual slope estimates no longer see them.
    for (const Rational& e : taken) estimates.push_back(e.value() + 0.5);
    std::set<std::pair<std::int64_t, std::int64_t>> seen;
    for (const Rational& e : taken) seen.insert({e.num(), e.den()});
    std::vector<Rational> dict;
    for (double s : estimates) {
        for (std::int64_t q = 1; q <= den_cap; ++q) {
            const std::int64_t pl = static_cast<std::int64_t>(std::ceil((s - 1.5) * q));
            const std::int64_t ph = static_cast<std::int64_t>(std::floor((s + 1.5) * q));
            for (std::int64_t p = std::max<std::int64_t>(0, pl); p <= ph; ++p) {
                const Rational cand(p, q);
                if (seen.insert({cand.num(), cand.den()}).second) dict.push_back(cand);
            }
        }
    }
    return dict;
}


// Matrix pencil (Prony) exponent recovery on a geometric grid. On t_i = t0 *
// rho^i a sum of powers sum c_k t^{e_k} is a sum of geometric sequences with
// ratios rho^{e_k}, so the ratios are generalized eigenvalues of a shifted
// Hankel pencil. Recovers clustered exponents jointly, which sequential
// peeling cannot.
std::vector<double> pencil_exponents(const std::vector<double>& y, double log_rho) {
    const int n = static_cast<int>(y.size());
    const int L = n / 2;
    const int rows = n - L;
    if (L < 1 || rows < 2) return {};
    Eigen::MatrixXd Y(rows, L + 1);
    for (int i = 0; i < rows; ++i)
        for (int j = 0; j <= L; ++j) Y(i, j) = y[i + j];
    const Eigen::MatrixXd Y1 = Y.leftCols(L);
    const Eigen::MatrixXd Y2 = Y.rightCols(L);
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(Y1, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const auto& sv = svd.singularValues();
    if (sv.size() == 0 || sv(0) <= 0) return {};
    int k = 0;
    while (k < sv.size() && sv(k) > 1e-12 * sv(0)) ++k;
    if (k == 0) return {};
    const Eigen::MatrixXd Uk = svd.matrixU().leftCols(k);
    const Eigen::MatrixXd Vk = svd.matrixV().leftCols(k);
    const Eigen::VectorXd Sk = sv.head(k);
    const Eigen::MatrixXd A = Sk.cwiseInverse().asDiagonal() * (Uk.transpose() * Y2 * Vk);
    Eigen::EigenSolver<Eigen::MatrixXd> es(A);
    std::vector<double> out;
    for (int i = 0; i < k; ++i) {
        const std::complex<double> z = es.eigenvalues()(i);
        if (z.real() <= 0 || std::abs(z.imag()) > 1e-8 * std::abs(z)) continue;
        out.push_back(std::log(z.real()) / log_rho);
    }
    return out;
}

}  // namespace

SeriesFit fit_series(const std::vector<std::pair<double, double>>& samples,
                     int max_terms, std::int64_t den_cap, double rel_tol) {
    if (samples.size() < 8)
        throw PreconditionError("fit_series: need at least 8 samples");
    std::vector<double> t, v;
    t.reserve(samples.size());
    v.reserve(samples.size());
    for (const auto& [ti, vi] : samples) {
        if (!(ti > 0.0) || !std::isfinite(vi))
            throw PreconditionError("fit_series: samples must have t > 0 and finite values");
        if (!t.empty() && ti <= t.back())
            throw PreconditionError("fit_series: samples must be sorted by increasing t");
        t.push_back(ti);
        v.push_back(vi);
    }
    if (t.back() / t.front() < 0.999e3)
        throw PreconditionError("fit_series: t range must span at least three decades");

    SeriesFit out;
    double scale = 0.0;
    for (double x : v) scale = std::max(scale, std::abs(x));
    if (scale < 1e-14) return out;  // zero series

    // Beam search over exponent sets: each round extends surviving sets by
    // one dictionary exponent and re-solves all coefficients globally. Wrong
    // exponent sets can out-fit true prefixes mid-search (one misplaced power
    // absorbs two real terms), so each surviving set keeps a quota of its own
    // children instead of competing in a single residual-ranked pool.
    struct Node {
        std::vector<Rational> exps;
        std::vector<double> coeffs;
        double res = 1.0;
        std::vector<double> resid;
    };
    // Decade envelope of |v|, floored against machine noise, as row weights.
    std::vector<double> w(t.size());
    for (std::size_t i = 0; i < t.size(); ++i) {
        double env = 0.0;
        for (std::size_t j = 0; j < t.size(); ++j)
            if (t[j] >= 0.1 * t[i] && t[j] <= 10.0 * t[i]) env = std::max(env, std::abs(v[j]));
        w[i] = std::max(env, 1e-12 * scale);
    }
    ColumnCache cache(t, w);
    Eigen::VectorXd rhs(t.size());
    for (std::size_t i = 0; i < t.size(); ++i) rhs[i] = v[i] / w[i];

    // Primary path on geometric grids: matrix pencil over a top window of the
    // residual, snap to rationals, weighted least squares, then peel and
    // repeat for terms too weak to register in the first pass.
    double log_rho = 0.0;
    bool geometric = t.size() >= 8;
    if (geometric) {
        log_rho = std::log(t[1] / t[0]);
        for (std::size_t i = 0; i + 1 < t.size(); ++i)
            if (std::abs(std::log(t[i + 1] / t[i]) - log_rho) > 1e-9 * std::abs(log_rho))
                geometric = false;
    }
    if (geometric && log_rho > 0) {
        std::set<std::pair<std::int64_t, std::int64_t>> seen;
        std::vector<Rational> exps;
        std::vector<double> coeffs;
        std::vector<double> resid = v;
        double res = 1.0;
        const int win = std::min<int>(t.size(),
                                      int(std::ceil(2.0 * std::log(10.0) / log_rho)) + 1);
        for (int pass = 0; pass < 4 && res > 1e-13; ++pass) {
            double rmax = 0.0;
            for (double x : resid) rmax = std::max(rmax, std::abs(x));
            if (rmax < 1e-13 * scale) break;
            const std::vector<double> yw(resid.end() - win, resid.end());
            bool added = false;
            for (double e : pencil_exponents(yw, log_rho)) {
                if (e < -0.25 || e > 60.0) continue;
                const Rational r = Rational::snap(e, den_cap);
                if (std::abs(r.value() - e) > 0.02) continue;
                if (seen.insert({r.num(), r.den()}).second) {
                    exps.push_back(r);
                    added = true;
                }
            }
            if (!added || exps.size() > std::size_t(2 * max_terms + 4)) break;
            std::sort(exps.begin(), exps.end());
            res = solve_coefficients(cache, rhs, exps, scale, &coeffs);
            for (std::size_t i = 0; i < t.size(); ++i) {
                double m = 0.0;
                for (std::size_t j = 0; j < exps.size(); ++j)
                    m += coeffs[j] * std::pow(t[i], exps[j].value());
                resid[i] = v[i] - m;
            }
        }
        // Prune: drop the term whose removal hurts least while the fit stays
        // essentially exact, then negligible contributions.
        while (exps.size() > 1) {
            std::size_t drop = exps.size();
            double best_r = res;
            std::vector<double> best_c;
            for (std::size_t j = 0; j < exps.size(); ++j) {
                std::vector<Rational> trial = exps;
                trial.erase(trial.begin() + j);
                std::vector<double> c;
                const double r = solve_coefficients(cache, rhs, trial, scale, &c);
                if (r < std::max(1e-12, 2.0 * res) && r < best_r * 10.0 &&
                    (drop == exps.size() || r < best_r)) {
                    drop = j;
                    best_r = r;
                    best_c = c;
                }
            }
            if (drop == exps.size()) break;
            exps.erase(exps.begin() + drop);
            coeffs = best_c;
            res = best_r;
        }
        if (res < rel_tol && exps.size() <= std::size_t(max_terms)) {
            GenSeries series;
            for (std::size_t j = 0; j < exps.size(); ++j) {
                const double contrib = std::abs(coeffs[j]) * std::pow(t.back(), exps[j].value());
                if (contrib >= 1e-9 * scale)
                    series = add(series, GenSeries::term(exps[j], coeffs[j]), 1e-300);
            }
            out.series = series;
            out.rel_residual = res;
            out.converged = true;
            return out;
        }
    }

    Node root;
    root.resid = v;
    std::vector<Node> beam{root};
    std::vector<Node> explored;
    double best_overall = 1.0;

    for (int iter = 0; iter < max_terms; ++iter) {
        struct Cand {
            std::size_t parent;
            Rational e;
            double res;
            std::vector<double> coeffs;
        };
        std::vector<Cand> all_children;
        for (std::size_t pi = 0; pi < beam.size(); ++pi) {
            const auto dict = exponent_dictionary(t, beam[pi].resid, beam[pi].exps, den_cap);
            std::vector<Cand> children;
            for (const Rational& e : dict) {
                std::vector<Rational> trial = beam[pi].exps;
                trial.push_back(e);
                std::vector<double> c;
                const double r = solve_coefficients(cache, rhs, trial, scale, &c);
                children.push_back({pi, e, r, std::move(c)});
            }
            std::sort(children.begin(), children.end(),
                      [](const Cand& a, const Cand& b) { return a.res < b.res; });
            // A few children per parent, kept apart in exponent value; the
            // root fans out wider because the leading exponent anchors
            // everything downstream.
            const std::size_t quota = beam[pi].exps.empty() ? 6 : 3;
            std::vector<const Cand*> kept;
            for (const Cand& cd : children) {
                if (kept.size() >= quota) break;
                bool crowded = false;
                for (const Cand* kc : kept)
                    if (std::abs(kc->e.value() - cd.e.value()) < 0.02) crowded = true;
                if (!crowded) kept.push_back(&cd);
            }
            for (const Cand* kc : kept) all_children.push_back(*kc);
        }
        if (all_children.empty()) break;
        std::sort(all_children.begin(), all_children.end(),
                  [](const Cand& a, const Cand& b) { return a.res < b.res; });
        const double round_best = all_children.front().res;
        if (round_best >= 0.98 * best_overall) break;  // residual no longer decreasing
        best_overall = round_best;

        std::vector<char> parent_served(beam.size(), 0);
        std::vector<Node> next;
        auto materialize = [&](const Cand& cd) {
            Node node;
            node.exps = beam[cd.parent].exps;
            node.exps.push_back(cd.e);
            node.coeffs = cd.coeffs;
            node.res = cd.res;
            node.resid.resize(t.size());
            for (std::size_t i = 0; i < t.size(); ++i) {
                double m = 0.0;
                for (std::size_t j = 0; j < node.exps.size(); ++j)
                    m += node.coeffs[j] * std::pow(t[i], node.exps[j].value());
                node.resid[i] = v[i] - m;
            }
            explored.push_back(node);
            next.push_back(std::move(node));
        };
        // Every parent keeps its best child; remaining slots go by residual.
        for (const Cand& cd : all_children) {
            if (!parent_served[cd.parent]) {
                parent_served[cd.parent] = 1;
                materialize(cd);
            }
        }
        for (const Cand& cd : all_children) {
            if (next.size() >= 32) break;
            bool have = false;
            for (const Node& n : next)
                if (n.exps.size() == beam[cd.parent].exps.size() + 1 &&
                    std::equal(n.exps.begin(), n.exps.end() - 1, beam[cd.parent].exps.begin()) &&
                    n.exps.back() == cd.e)
                    have = true;
            if (!have) materialize(cd);
        }
        beam = std::move(next);
        if (round_best < 1e-12) break;  // exact fit reached
    }

    if (explored.empty()) {
        out.rel_residual = 1.0;
        out.converged = false;
        return out;
    }

    // Final pick: minimal residual, but a set with fewer terms wins when it
    // is within two orders of magnitude of that minimum (Occam).
    const Node* best = &explored.front();
    for (const Node& n : explored)
        if (n.res < best->res) best = &n;
    const Node* pick = best;
    for (const Node& n : explored) {
        if (n.res > 100.0 * best->res) continue;
        if (n.exps.size() < pick->exps.size() ||
            (n.exps.size() == pick->exps.size() && n.res < pick->res))
            pick = &n;
    }

    // Local refinement: swap each exponent for nearby rationals while that
    // strictly shrinks the residual.
    std::vector<Rational> exps = pick->exps;
    std::vector<double> coeffs = pick->coeffs;
    double res = pick->res;
    for (int sweep = 0; sweep < 10; ++sweep) {
        bool changed = false;
        for (std::size_t j = 0; j < exps.size(); ++j) {
            const double center = exps[j].value();
            for (std::int64_t q = 1; q <= den_cap; ++q) {
                const std::int64_t pl = static_cast<std::int64_t>(std::ceil((center - 0.2) * q));
                const std::int64_t ph = static_cast<std::int64_t>(std::floor((center + 0.2) * q));
                for (std::int64_t p = std::max<std::int64_t>(0, pl); p <= ph; ++p) {
                    const Rational cand(p, q);
                    if (cand == exps[j]) continue;
                    bool dup = false;
                    for (std::size_t k = 0; k < exps.size(); ++k)
                        if (k != j && exps[k] == cand) dup = true;
                    if (dup) continue;
                    std::vector<Rational> trial = exps;
                    trial[j] = cand;
                    std::vector<double> c;
                    const double r = solve_coefficients(cache, rhs, trial, scale, &c);
                    if (r < 0.5 * res) {
                        exps = trial;
                        coeffs = c;
                        res = r;
                        changed = true;
                    }
                }
            }
        }
        if (!changed) break;
    }

    // Drop terms whose contribution over the sampled range is negligible.
    GenSeries series;
    for (std::size_t j = 0; j < exps.size(); ++j) {
        const double contrib = std::abs(coeffs[j]) * std::pow(t.back(), exps[j].value());
        if (contrib >= 1e-9 * scale)
            series = add(series, GenSeries::term(exps[j], coeffs[j]), 1e-300);
    }
    out.series = series;
    out.rel_residual = res;
    out.converged = res < rel_tol;
    return out;
}

ExponentFit fit_leading_exponent(const std::vector<double>& t,
                                 const std::vector<double>& y,
                                 std::int64_t den_cap, double noise_floor) {
    ExponentFit fit;
    double ymax = 0.0;
    for (double x : y) ymax = std::max(ymax, std::abs(x));
    if (ymax <= noise_floor) return fit;
    // Use the smallest decade whose values stand above the noise floor.
    std::vector<double> tt, yy;
    for (std::size_t i = 0; i < t.size(); ++i) {
        if (std::abs(y[i]) > std::max(noise_floor, 1e-13 * ymax)) {
            tt.push_back(t[i]);
            yy.push_back(y[i]);
        }
    }
    if (tt.size() < 3) return fit;
    std::size_t hi = 0;
    while (hi < tt.size() && tt[hi] <= 10.0 * tt.front()) ++hi;
    if (hi < 3) hi = std::min<std::size_t>(3, tt.size());
    double slope;
    if (!loglog_slope(tt, yy, 0, hi, &slope)) return fit;
    fit.raw = slope;
    fit.snapped = Rational::snap(slope, den_cap);
    fit.valid = true;
    return fit;
}

}  // namespace singflow
