#include "singflow/blowup.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "singflow/ode.hpp"
#include "singflow/parallel.hpp"

namespace singflow {

namespace {

constexpr double kTwoPi = 6.283185307179586476925286766559;

double angle_of(const Vec3& p) {
    double a = std::atan2(p.y(), p.x());
    if (a < 0) a += kTwoPi;
    return a;
}

// Geometric level grid, descending from hi to lo.
std::vector<double> level_grid(double hi, double lo, int per_decade) {
    const int n = std::max(2, int(std::ceil(per_decade * std::log10(hi / lo))) + 1);
    std::vector<double> out(n);
    for (int i = 0; i < n; ++i) out[i] = hi * std::pow(lo / hi, i / double(n - 1));
    return out;
}

// Parabolic refinement of an extremum of values sampled on a closed uniform
// polyline: returns the refined extremal value at index j.
double refine_extremum(const std::vector<double>& v, std::size_t j) {
    const std::size_t n = v.size();
    const double vm = v[(j + n - 1) % n], v0 = v[j], vp = v[(j + 1) % n];
    const double denom = vm - 2 * v0 + vp;
    if (std::abs(denom) < 1e-14 * std::max({std::abs(vm), std::abs(v0), std::abs(vp)}))
        return v0;
    const double delta = 0.5 * (vm - vp) / denom;
    if (std::abs(delta) > 1.0) return v0;
    return v0 - 0.25 * (vm - vp) * delta;
}

double max_pairwise_angle(const std::vector<Vec3>& dirs) {
    double worst = 0.0;
    for (std::size_t i = 0; i < dirs.size(); ++i)
        for (std::size_t j = i + 1; j < dirs.size(); ++j) {
            const double c = std::clamp(dirs[i].dot(dirs[j]), -1.0, 1.0);
            worst = std::max(worst, std::acos(c));
        }
    return worst;
}

struct SliceScan {
    std::vector<double> z;        // ascending
    std::vector<std::vector<Vec3>> curves;
};

SliceScan scan_heights(const Surface& s, int n_points) {
    const auto levels = level_grid(0.9 * s.epsilon0, 0.9 * s.epsilon0 * std::pow(10.0, -3.2), 12);
    SliceScan scan;
    Vec3 hint = move_to_level(s, SliceKind::Height, s.seed, levels.front());
    for (double z : levels) {
        auto curve = slice_curve(s, SliceKind::Height, z, n_points, &hint);
        hint = curve.front();
        scan.z.push_back(z);
        scan.curves.push_back(std::move(curve));
    }
    std::reverse(scan.z.begin(), scan.z.end());
    std::reverse(scan.curves.begin(), scan.curves.end());
    return scan;
}

Rational fitted_leading_exponent(const std::vector<double>& z,
                                 const std::vector<double>& h) {
    std::vector<std::pair<double, double>> samples;
    for (std::size_t i = 0; i < z.size(); ++i) samples.push_back({z[i], h[i]});
    const auto fit = fit_series(samples, 4, 16, 1e-4);
    if (fit.series.is_zero())
        throw PreconditionError("coordinates not adapted");
    return fit.series.leading().exponent;
}

// Branch trace in the original height variable: x1(z), x2(z) series, or the
// axis branch when the slice minimum collapses to the z-axis.
struct BranchZ {
    bool axis = false;
    GenSeries x1, x2;
};

BranchZ trace_branch(const Surface& s) {
    const SliceScan scan = scan_heights(s, 256);
    const std::size_t nl = scan.z.size();
    std::vector<Vec3> pts(nl);
    // walk top-down for angular continuity, so iterate descending z
    Vec3 prev = Vec3::Zero();
    bool have_prev = false;
    double min_ratio = 1.0;
    for (std::size_t k = nl; k-- > 0;) {
        const auto& curve = scan.curves[k];
        std::vector<double> rad(curve.size());
        double vmin = 1e300, vmax = 0.0;
        for (std::size_t j = 0; j < curve.size(); ++j) {
            rad[j] = std::hypot(curve[j].x(), curve[j].y());
            vmin = std::min(vmin, rad[j]);
            vmax = std::max(vmax, rad[j]);
        }
        min_ratio = std::min(min_ratio, vmax > 0 ? vmin / vmax : 0.0);
        // candidate indices within relative tie tolerance of the minimum
        std::vector<std::size_t> cands;
        for (std::size_t j = 0; j < curve.size(); ++j)
            if (rad[j] <= vmin * (1.0 + 1e-9)) cands.push_back(j);
        std::size_t pick = cands.front();
        if (cands.size() > 1) {
            if (!have_prev) {
                // tie-break on the top slice: smallest angle
                double best = 1e300;
                for (std::size_t j : cands) {
                    const double a = angle_of(curve[j]);
                    if (a < best) {
                        best = a;
                        pick = j;
                    }
                }
            } else {
                double best = -1e300;
                const Vec3 dir = Vec3(prev.x(), prev.y(), 0).normalized();
                for (std::size_t j : cands) {
                    const double sc = Vec3(curve[j].x(), curve[j].y(), 0).normalized().dot(dir);
                    if (sc > best) {
                        best = sc;
                        pick = j;
                    }
                }
            }
            pts[k] = curve[pick];
        } else {
            // parabolic refinement of the unique minimum along the polyline
            const std::size_t n = curve.size();
            const double vm = rad[(pick + n - 1) % n], v0 = rad[pick], vp = rad[(pick + 1) % n];
            const double denom = vm - 2 * v0 + vp;
            Vec3 q = curve[pick];
            if (denom > 1e-14 * vmax) {
                const double delta = std::clamp(0.5 * (vm - vp) / denom, -1.0, 1.0);
                const Vec3 nb = delta >= 0 ? curve[(pick + 1) % n] : curve[(pick + n - 1) % n];
                q = curve[pick] + std::abs(delta) * (nb - curve[pick]);
                q = snap_to_slice(s, SliceKind::Height, scan.z[k], q);
            }
            pts[k] = q;
        }
        prev = pts[k];
        have_prev = true;
    }
    BranchZ br;
    if (min_ratio < 1e-8) {  // the z-axis itself lies on S0
        br.axis = true;
        return br;
    }
    std::vector<std::pair<double, double>> sx, sy;
    for (std::size_t k = 0; k < nl; ++k) {
        sx.push_back({scan.z[k], pts[k].x()});
        sy.push_back({scan.z[k], pts[k].y()});
    }
    // terms below the tracing accuracy (polyline + parabolic refinement,
    // ~1e-5 relative) are artifacts of the argmin sampling, not the branch
    const double z_top = scan.z.back();
    double scale = 0.0;
    for (const Vec3& p : pts) scale = std::max(scale, std::hypot(p.x(), p.y()));
    auto prune = [&](const GenSeries& g) {
        GenSeries out;
        for (const auto& tm : g.terms())
            if (std::abs(tm.coeff) * std::pow(z_top, tm.exponent.value()) >= 1e-4 * scale)
                out = add(out, GenSeries::term(tm.exponent, tm.coeff), 1e-300);
        return out;
    };
    br.x1 = prune(fit_series(sx, 6, 16, 1e-4).series);
    br.x2 = prune(fit_series(sy, 6, 16, 1e-4).series);
    return br;
}

std::int64_t branch_lcm(const BranchZ& br) {
    std::int64_t l = 1;
    for (const auto& g : {br.x1, br.x2})
        for (const auto& tm : g.terms()) l = lcm64(l, tm.exponent.den());
    return l;
}

GenSeries to_ramified(const GenSeries& g, int N) {
    GenSeries out;
    for (const auto& tm : g.terms())
        out = add(out, GenSeries::term(tm.exponent * Rational(N), tm.coeff), 1e-300);
    return out;
}

double hausdorff(const std::vector<Vec3>& a, const std::vector<Vec3>& b) {
    auto one_sided = [](const std::vector<Vec3>& p, const std::vector<Vec3>& q) {
        double worst = 0.0;
        for (const Vec3& x : p) {
            double best = 1e300;
            for (const Vec3& y : q) best = std::min(best, (x - y).norm());
            worst = std::max(worst, best);
        }
        return worst;
    };
    return std::max(one_sided(a, b), one_sided(b, a));
}

// Descent of the retraction field grad(-slice^2)|_S from p down to the slice
// level `target`.
Vec3 retraction_descend(const Surface& s, SliceKind kind, const PolyFunction& f_ret,
                        Vec3 p, double target) {
    using RK = AdaptiveRK<3>;
    RK::Options opt;
    opt.rel_tol = 1e-10;
    opt.abs_tol = 1e-14;
    const Metric eucl;
    auto rhs = [&](double, const RK::State& y) -> RK::State {
        const Vec3 q = project_to_surface(s, Vec3(y));
        return restricted_gradient(s, eucl, f_ret, q);
    };
    double t = 0.0;
    double h = 0.0;
    for (long step = 0; step < 100000; ++step) {
        const double cur = slice_value(kind, p);
        if (cur <= target * (1.0 + 1e-12)) break;
        const Vec3 v = restricted_gradient(s, eucl, f_ret, p);
        const double rate = -slice_gradient(kind, p).dot(v);
        if (!(rate > 1e-300))
            throw NumericalError("build_chart: retraction descent stalled");
        const double cap = 0.9 * (cur - target) / rate;
        if (h <= 0 || h > cap) h = cap;
        RK::State y = p;
        opt.max_step = cap;
        if (!RK::step(rhs, t, y, h, opt))
            throw NumericalError("build_chart: retraction step underflow");
        p = project_to_surface(s, Vec3(y));
    }
    return snap_to_slice(s, kind, target, p);
}

PolyFunction poly_pow(const PolyFunction& p, int n) {
    PolyFunction out(1.0);
    for (int i = 0; i < n; ++i) out = out * p;
    return out;
}

// The ramified branch series as a polynomial in w, when its exponents are
// integral (the ramification cap can leave fractional exponents behind).
bool theta_poly(const GenSeries& g, PolyFunction& out) {
    out = PolyFunction();
    for (const auto& tm : g.terms()) {
        if (tm.exponent.den() != 1) return false;
        const auto k = tm.exponent.num();
        if (k < 0 || k > 200) return false;
        out = out + PolyFunction::monomial(0, 0, int(k), tm.coeff);
    }
    return true;
}

// Opened surface: F(beta(y1, y2, w)) as a polynomial in (y1, y2, w) with the
// common power of w divided out. Slices of its zero set at height w are the
// blow-up traces of the original slices, of size O(1) all the way down, so
// the retraction descent there cannot collapse labels the way it does in
// ambient coordinates when the surface hugs a curved branch. Returns false
// when the blow-up data is not integral.
bool opened_surface(const Surface& s, const OpeningBlowup& b, Surface& out) {
    if (b.variant != ConeKind::CTC) return false;
    const Rational eN = b.e * Rational(b.N);
    if (eN.den() != 1 || eN.num() <= 0 || eN.num() > 200) return false;
    PolyFunction th[2];
    if (!theta_poly(b.theta[0], th[0]) || !theta_poly(b.theta[1], th[1])) return false;

    const PolyFunction scale = PolyFunction::monomial(0, 0, int(eN.num()), 1.0);
    const PolyFunction X = scale * PolyFunction::variable(0) + th[0];
    const PolyFunction Y = scale * PolyFunction::variable(1) + th[1];
    const PolyFunction Z = PolyFunction::monomial(0, 0, b.N, 1.0);
    PolyFunction comp;
    for (const auto& mono : s.equation.monomials())
        comp = comp + mono.coeff * poly_pow(X, mono.powers[0]) *
                   poly_pow(Y, mono.powers[1]) * poly_pow(Z, mono.powers[2]);
    if (comp.is_zero()) return false;

    // Divide out the smallest w power carried by a significant coefficient;
    // dust below it comes from the fitted theta truncation, not the surface.
    double cmax = 0.0;
    for (const auto& mono : comp.monomials()) cmax = std::max(cmax, std::abs(mono.coeff));
    int kmin = 1 << 20;
    for (const auto& mono : comp.monomials())
        if (std::abs(mono.coeff) >= 1e-7 * cmax) kmin = std::min(kmin, mono.powers[2]);
    PolyFunction divided;
    for (const auto& mono : comp.monomials()) {
        if (mono.powers[2] < kmin) continue;
        divided = divided + PolyFunction::monomial(mono.powers[0], mono.powers[1],
                                                   mono.powers[2] - kmin, mono.coeff);
    }
    if (divided.is_zero()) return false;
    out.equation = divided;
    return true;
}

// Catmull-Rom basis on four control values.
template <typename T>
T catmull_rom(const T& p0, const T& p1, const T& p2, const T& p3, double u) {
    return 0.5 * ((2.0 * p1) + (p2 - p0) * u + (2.0 * p0 - 5.0 * p1 + 4.0 * p2 - p3) * (u * u) +
                  (3.0 * p1 - p0 - 3.0 * p2 + p3) * (u * u * u));
}

}  // namespace

TangentConeReport classify_tangent_cone(const Surface& s, double ctc_threshold) {
    const std::array<double, 3> scales = {1e-2, 1e-3, 1e-4};
    std::array<double, 3> spread{};
    std::array<Vec3, 3> mean_dir;
    Vec3 hint = project_to_surface(s, s.seed);
    for (int k = 0; k < 3; ++k) {
        const double level = s.epsilon0 * scales[k];
        hint = move_to_level(s, SliceKind::Radial, hint, level);
        const auto curve = slice_curve(s, SliceKind::Radial, level, 128, &hint);
        std::vector<Vec3> dirs;
        dirs.reserve(curve.size());
        for (const Vec3& p : curve) dirs.push_back(p / p.norm());
        spread[k] = max_pairwise_angle(dirs);
        Vec3 mean = Vec3::Zero();
        for (const Vec3& d : dirs) mean += d;
        mean_dir[k] = mean.normalized();
    }
    TangentConeReport rep;
    rep.secant_spread = spread[2];
    if (spread[2] < ctc_threshold && spread[2] <= spread[0] * (1.0 + 1e-9)) {
        rep.kind = ConeKind::CTC;
        // The mean secant at the smallest scale still carries an O(scale^q)
        // bias when the branch curves away from its limit direction (for a
        // sheared branch x ~ z^2 the bias is linear in the scale). The decade
        // ladder exposes q, so extrapolate the limit when the drift between
        // scales is clearly above noise and clearly geometric.
        Vec3 d = mean_dir[2];
        const double e01 = (mean_dir[0] - mean_dir[1]).norm();
        const double e12 = (mean_dir[1] - mean_dir[2]).norm();
        if (e12 > 1e-9 && e01 > 2.0 * e12) {
            const double ratio = e01 / e12;  // = 10^q
            d = (mean_dir[2] - (mean_dir[1] - mean_dir[2]) / (ratio - 1.0)).normalized();
        }
        rep.direction = d;
    }
    return rep;
}

Mat3 adapted_rotation(const Vec3& direction) {
    Vec3 d = direction.normalized();
    for (int axis = 0; axis < 3; ++axis) {
        for (int sign = -1; sign <= 1; sign += 2) {
            Vec3 e = Vec3::Zero();
            e[axis] = sign;
            if ((d - e).norm() < 1e-6) d = e;
        }
    }
    int least = 0;
    for (int axis = 1; axis < 3; ++axis)
        if (std::abs(d[axis]) < std::abs(d[least])) least = axis;
    Vec3 e = Vec3::Zero();
    e[least] = 1.0;
    const Vec3 v1 = (e - e.dot(d) * d).normalized();
    const Vec3 v2 = d.cross(v1);
    Mat3 R;
    R.row(0) = v1;
    R.row(1) = v2;
    R.row(2) = d;
    return R;
}

Surface rotate_surface(const Surface& s, const Mat3& R) {
    Surface out;
    out.equation = s.equation.compose_linear(R.transpose());
    out.seed = R * s.seed;
    out.epsilon0 = s.epsilon0;
    return out;
}

Rational estimate_nu(const Surface& s) {
    const SliceScan scan = scan_heights(s, 192);
    std::vector<double> h(scan.z.size());
    for (std::size_t k = 0; k < scan.z.size(); ++k) {
        std::vector<double> rad(scan.curves[k].size());
        std::size_t jmax = 0;
        for (std::size_t j = 0; j < rad.size(); ++j) {
            rad[j] = std::hypot(scan.curves[k][j].x(), scan.curves[k][j].y());
            if (rad[j] > rad[jmax]) jmax = j;
        }
        h[k] = refine_extremum(rad, jmax);
    }
    const Rational nu = fitted_leading_exponent(scan.z, h);
    if (!(nu.value() > 1.0)) throw PreconditionError("coordinates not adapted");
    return nu;
}

Rational estimate_e(const Surface& s) {
    const SliceScan scan = scan_heights(s, 192);
    // diameter of the x-projection of the slab {height <= z}, origin included
    std::vector<Eigen::Vector2d> cloud{Eigen::Vector2d::Zero()};
    std::vector<double> diam(scan.z.size());
    double best = 0.0;
    for (std::size_t k = 0; k < scan.z.size(); ++k) {
        std::vector<Eigen::Vector2d> fresh;
        for (const Vec3& p : scan.curves[k]) fresh.push_back({p.x(), p.y()});
        for (const auto& q : fresh)
            for (const auto& r : cloud) best = std::max(best, (q - r).norm());
        for (std::size_t i = 0; i < fresh.size(); ++i)
            for (std::size_t j = i + 1; j < fresh.size(); ++j)
                best = std::max(best, (fresh[i] - fresh[j]).norm());
        cloud.insert(cloud.end(), fresh.begin(), fresh.end());
        diam[k] = best;
    }
    const Rational e = fitted_leading_exponent(scan.z, diam);
    if (!(e.value() > 1.0)) throw PreconditionError("coordinates not adapted");
    return e;
}

std::array<GenSeries, 3> find_branch(const Surface& s) {
    const BranchZ br = trace_branch(s);
    if (br.axis) return {GenSeries(), GenSeries(), GenSeries::term(Rational(1), 1.0)};
    const int N = int(std::min<std::int64_t>(branch_lcm(br), 16));
    return {to_ramified(br.x1, N), to_ramified(br.x2, N),
            GenSeries::term(Rational(N), 1.0)};
}

Vec3 OpeningBlowup::forward(const Vec3& y, double w) const {
    if (variant == ConeKind::OTC) return w * y;
    const double scale = std::pow(w, (e * Rational(N)).value());
    auto comp = [&](const GenSeries& g) { return g.is_zero() ? 0.0 : g.evaluate(w); };
    return Vec3(scale * y.x() + comp(theta[0]), scale * y.y() + comp(theta[1]),
                std::pow(w, N));
}

std::pair<Vec3, double> OpeningBlowup::inverse(const Vec3& p) const {
    if (variant == ConeKind::OTC) {
        const double w = p.norm();
        if (!(w > 0)) throw PreconditionError("OpeningBlowup::inverse: point at the origin");
        return {p / w, w};
    }
    if (!(p.z() > 0)) throw PreconditionError("OpeningBlowup::inverse: requires z > 0");
    const double w = std::pow(p.z(), 1.0 / N);
    const double scale = std::pow(w, (e * Rational(N)).value());
    auto comp = [&](const GenSeries& g) { return g.is_zero() ? 0.0 : g.evaluate(w); };
    return {Vec3((p.x() - comp(theta[0])) / scale, (p.y() - comp(theta[1])) / scale, 0.0), w};
}

OpeningBlowup make_opening(const Surface& s) {
    const TangentConeReport rep = classify_tangent_cone(s);
    OpeningBlowup b;
    b.epsilon0 = s.epsilon0;
    if (rep.kind == ConeKind::OTC) return b;

    b.variant = ConeKind::CTC;
    b.nu = estimate_nu(s);
    const BranchZ br = trace_branch(s);

    // opening exponent: leading growth of the slice spread around the branch
    const SliceScan scan = scan_heights(s, 192);
    std::vector<double> spread(scan.z.size());
    for (std::size_t k = 0; k < scan.z.size(); ++k) {
        const double z = scan.z[k];
        const Eigen::Vector2d th(br.axis ? 0.0 : br.x1.evaluate(z),
                                 br.axis ? 0.0 : br.x2.evaluate(z));
        std::vector<double> d(scan.curves[k].size());
        std::size_t jmax = 0;
        for (std::size_t j = 0; j < d.size(); ++j) {
            d[j] = (Eigen::Vector2d(scan.curves[k][j].x(), scan.curves[k][j].y()) - th).norm();
            if (d[j] > d[jmax]) jmax = j;
        }
        spread[k] = refine_extremum(d, jmax);
    }
    b.e = fitted_leading_exponent(scan.z, spread);
    if (b.e.value() + 1e-12 < b.nu.value())
        throw NumericalError("make_opening: opening exponent below nu");

    std::int64_t l = br.axis ? 1 : lcm64(branch_lcm(br), b.e.den());
    b.N = int(std::min<std::int64_t>(l, 16));
    if (br.axis) {
        b.theta = {GenSeries(), GenSeries(), GenSeries::term(Rational(b.N), 1.0)};
        b.m = b.N;
    } else {
        b.theta = {to_ramified(br.x1, b.N), to_ramified(br.x2, b.N),
                   GenSeries::term(Rational(b.N), 1.0)};
        double lead = 1e300;
        for (int j = 0; j < 2; ++j)
            if (!b.theta[j].is_zero())
                lead = std::min(lead, b.theta[j].leading().exponent.value());
        b.m = lead < 1e300 ? int(std::llround(lead)) - 1 : b.N;
    }
    if (b.m < b.N) throw NumericalError("make_opening: branch order below ramification index");
    return b;
}

AccumulationResult accumulation_set(const Surface& s, const OpeningBlowup& b,
                                    int n_levels) {
    if (n_levels < 1) throw PreconditionError("accumulation_set: n_levels must be >= 1");
    const SliceKind kind = b.slice_kind();
    const double top = 1e-2 * s.epsilon0;
    AccumulationResult out;
    if (n_levels == 1) out.levels = {top};
    else {
        for (int k = 0; k < n_levels; ++k)
            out.levels.push_back(top * std::pow(1e-3, k / double(n_levels - 1)));
    }
    Vec3 hint = move_to_level(s, kind, s.seed, out.levels.front());
    for (double level : out.levels) {
        const auto curve = slice_curve(s, kind, level, 128, &hint);
        hint = curve.front();
        std::vector<Vec3> trace;
        trace.reserve(curve.size());
        for (const Vec3& p : curve) trace.push_back(b.inverse(p).first);
        out.traces.push_back(std::move(trace));
    }
    for (std::size_t k = 0; k + 1 < out.traces.size(); ++k)
        out.hausdorff.push_back(hausdorff(out.traces[k], out.traces[k + 1]));
    if (out.hausdorff.size() >= 2 &&
        out.hausdorff.back() > 2.0 * out.hausdorff.front() + 1e-9)
        throw NumericalError("blow-up does not open the surface");
    return out;
}

CylinderChart build_chart(const Surface& s, const OpeningBlowup& b, double epsilon,
                          int n_phi, int n_r, double r_min) {
    if (n_phi < 16 || n_r < 8)
        throw PreconditionError("build_chart: grid too coarse (need n_phi >= 16, n_r >= 8)");
    if (!(r_min > 0) || !(epsilon > r_min) || epsilon > s.epsilon0)
        throw PreconditionError("build_chart: need 0 < r_min < epsilon <= epsilon0");
    CylinderChart chart;
    chart.epsilon = epsilon;
    chart.kind = b.slice_kind();
    for (int j = 0; j < n_phi; ++j) chart.phi_grid.push_back(kTwoPi * j / n_phi);
    for (int i = 0; i < n_r; ++i)
        chart.r_grid.push_back(epsilon * std::pow(r_min / epsilon, i / double(n_r - 1)));

    PolyFunction slice2 = PolyFunction::monomial(0, 0, 2, -1.0);
    if (chart.kind == SliceKind::Radial)
        slice2 = slice2 + PolyFunction::monomial(2, 0, 0, -1.0) +
                 PolyFunction::monomial(0, 2, 0, -1.0);

    chart.points.resize(n_r);
    // bottom row in the coordinates the descent ran in, for collision checks
    std::vector<Vec3> bottom_trace;

    Surface shat;
    if (opened_surface(s, b, shat)) {
        // CTC: descend on the opened surface, where slices keep size O(1),
        // then map the grid forward and re-snap onto the exact surface (the
        // fitted theta puts the opened zero set ~1e-5 off the true one).
        const Vec3 p_top = move_to_level(s, chart.kind, project_to_surface(s, s.seed),
                                         epsilon);
        const auto [y_top, w_top] = b.inverse(p_top);
        shat.seed = project_to_surface(
            shat, Vec3(y_top.x(), y_top.y(), std::max(w_top, 1e-300)));
        shat.epsilon0 = 10.0 * (shat.seed.norm() + 1.0);

        std::vector<std::vector<Vec3>> hat(n_r);
        hat[0] = slice_curve(shat, SliceKind::Height, w_top, n_phi, &shat.seed);
        for (int i = 1; i < n_r; ++i) {
            hat[i].resize(n_phi);
            const double target = std::pow(chart.r_grid[i], 1.0 / b.N);
            const auto& above = hat[i - 1];
            auto& row = hat[i];
            parallel_for(n_phi, [&](std::size_t j) {
                row[j] = retraction_descend(shat, SliceKind::Height, slice2, above[j],
                                            target);
            });
        }
        for (int i = 0; i < n_r; ++i) {
            chart.points[i].resize(n_phi);
            auto& row = chart.points[i];
            parallel_for(n_phi, [&](std::size_t j) {
                const Vec3& q = hat[i][j];
                const Vec3 amb = b.forward(Vec3(q.x(), q.y(), 0.0), q.z());
                row[j] = snap_to_slice(s, chart.kind, chart.r_grid[i],
                                       project_to_surface(s, amb));
            });
        }
        bottom_trace = hat.back();
    } else {
        chart.points[0] = slice_curve(s, chart.kind, epsilon, n_phi);
        for (int i = 1; i < n_r; ++i) {
            chart.points[i].resize(n_phi);
            const double target = chart.r_grid[i];
            const auto& above = chart.points[i - 1];
            auto& row = chart.points[i];
            parallel_for(n_phi, [&](std::size_t j) {
                row[j] = retraction_descend(s, chart.kind, slice2, above[j], target);
            });
        }
        bottom_trace = chart.points.back();
    }

    // omega flags: angle cells whose labels bunch up at the bottom level
    const auto& bottom = bottom_trace;
    std::vector<double> gap(n_phi);
    double perimeter = 0.0;
    for (int j = 0; j < n_phi; ++j) {
        gap[j] = (bottom[(j + 1) % n_phi] - bottom[j]).norm();
        perimeter += gap[j];
    }
    int collisions = 0;
    for (int j = 0; j < n_phi; ++j) {
        const double rel = gap[j] * n_phi / perimeter;
        if (rel < 1e-3) ++collisions;
        if (rel < 0.1) {
            const double a = chart.phi_grid[j];
            const double bphi = a + kTwoPi / n_phi;
            if (!chart.omega_flags.empty() &&
                std::abs(chart.omega_flags.back().second - a) < 1e-12)
                chart.omega_flags.back().second = bphi;
            else
                chart.omega_flags.push_back({a, bphi});
        }
    }
    if (collisions > n_phi / 10) throw NumericalError("chart degenerate");
    return chart;
}

Vec3 CylinderChart::at(double phi, double r) const {
    const int n_phi = int(phi_grid.size());
    const int n_r = int(r_grid.size());
    const double du = std::log(r_grid[1] / r_grid[0]);  // negative, uniform
    double fi = std::log(std::clamp(r, r_grid.back(), r_grid.front()) / r_grid[0]) / du;
    fi = std::clamp(fi, 0.0, double(n_r - 1));
    const int i1 = std::clamp(int(std::floor(fi)), 0, n_r - 2);
    const double ur = fi - i1;
    double fj = phi / kTwoPi * n_phi;
    fj -= std::floor(fj / n_phi) * n_phi;
    const int j1 = int(std::floor(fj)) % n_phi;
    const double up = fj - std::floor(fj);

    auto rowpt = [&](int i, int j) -> Vec3 {
        const int jj = ((j % n_phi) + n_phi) % n_phi;
        // quadratic extrapolation for the ghost rows: clamping would flatten
        // the radial derivative and cost ~r (d log r)^2 near the boundary
        if (i < 0) return 3.0 * points[0][jj] - 3.0 * points[1][jj] + points[2][jj];
        if (i > n_r - 1)
            return 3.0 * points[n_r - 1][jj] - 3.0 * points[n_r - 2][jj] +
                   points[n_r - 3][jj];
        return points[i][jj];
    };
    Vec3 col[4];
    for (int a = 0; a < 4; ++a) {
        const int i = i1 - 1 + a;
        col[a] = catmull_rom<Vec3>(rowpt(i, j1 - 1), rowpt(i, j1), rowpt(i, j1 + 1),
                                   rowpt(i, j1 + 2), up);
    }
    return catmull_rom<Vec3>(col[0], col[1], col[2], col[3], ur);
}

double CylinderChart::locate_phi(const Vec3& p) const {
    const double r = slice_value(kind, p);
    const int n_phi = int(phi_grid.size());
    int jbest = 0;
    double dbest = 1e300;
    for (int j = 0; j < n_phi; ++j) {
        const double d = (at(phi_grid[j], r) - p).squaredNorm();
        if (d < dbest) {
            dbest = d;
            jbest = j;
        }
    }
    // golden-section refinement within the neighboring cells
    double lo = phi_grid[jbest] - kTwoPi / n_phi;
    double hi = phi_grid[jbest] + kTwoPi / n_phi;
    const double gr = 0.61803398874989484820;
    double a = hi - gr * (hi - lo), c = lo + gr * (hi - lo);
    double fa = (at(a, r) - p).squaredNorm(), fc = (at(c, r) - p).squaredNorm();
    for (int it = 0; it < 60; ++it) {
        if (fa < fc) {
            hi = c;
            c = a;
            fc = fa;
            a = hi - gr * (hi - lo);
            fa = (at(a, r) - p).squaredNorm();
        } else {
            lo = a;
            a = c;
            fa = fc;
            c = lo + gr * (hi - lo);
            fc = (at(c, r) - p).squaredNorm();
        }
    }
    double phi = 0.5 * (lo + hi);
    phi -= std::floor(phi / kTwoPi) * kTwoPi;
    return phi;
}

}  // namespace singflow
