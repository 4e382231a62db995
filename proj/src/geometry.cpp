#include "singflow/geometry.hpp"

#include <cmath>
#include <sstream>

namespace singflow {

namespace {

double residual_scale(const PolyFunction& F, const Vec3& p) {
    return std::max(1e-300, F.term_scale(p));
}

}  // namespace

Metric::Metric() {
    for (int i = 0; i < 3; ++i) g_[3 * i + i] = PolyFunction(1.0);
}

Metric Metric::euclidean() { return Metric(); }

Metric Metric::from_entries(const std::array<PolyFunction, 9>& entries) {
    Metric m;
    m.g_ = entries;
    m.euclidean_ = false;
    for (int i = 0; i < 3; ++i) {
        for (int j = i + 1; j < 3; ++j) {
            const PolyFunction diff = entries[3 * i + j] - entries[3 * j + i];
            if (!diff.is_zero())
                throw PreconditionError("Metric: coefficient matrix not symmetric");
        }
    }
    return m;
}

Mat3 Metric::at(const Vec3& p) const {
    Mat3 G;
    if (euclidean_) return Mat3::Identity();
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) G(i, j) = g_[3 * i + j](p);
    Eigen::LLT<Mat3> llt(G);
    if (llt.info() != Eigen::Success)
        throw NumericalError("Metric: not positive definite at evaluated point");
    return G;
}

Metric Metric::compose_linear(const Mat3& A) const {
    std::array<PolyFunction, 9> comp;
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) comp[3 * i + j] = g_[3 * i + j].compose_linear(A);
    std::array<PolyFunction, 9> out;
    for (int i = 0; i < 3; ++i) {
        for (int j = 0; j < 3; ++j) {
            PolyFunction e;
            for (int k = 0; k < 3; ++k)
                for (int l = 0; l < 3; ++l)
                    if (A(k, i) != 0.0 && A(l, j) != 0.0)
                        e = e + (A(k, i) * A(l, j)) * comp[3 * k + l];
            out[3 * i + j] = e;
        }
    }
    // Rotations leave the Euclidean metric unchanged.
    if (euclidean_ && (A.transpose() * A - Mat3::Identity()).norm() < 1e-14)
        return Metric();
    Metric m;
    m.g_ = out;
    m.euclidean_ = false;
    return m;
}

Vec3 project_to_surface(const Surface& s, const Vec3& p, double tol) {
    Vec3 q = p;
    double Fq = s.equation(q);
    for (int iter = 0; iter < 50; ++iter) {
        // Relative residual: term_scale keeps the criterion meaningful when
        // the surface terms are many orders of magnitude below 1.
        const Vec3 grad = s.equation.gradient(q);
        const double g2 = grad.squaredNorm();
        if (g2 <= 1e-280)
            throw PreconditionError("project_to_surface: gradient of F vanishes at iterate");
        const double scale = residual_scale(s.equation, q);
        if (std::abs(Fq) <= tol * scale) return q;
        Vec3 step = -(Fq / g2) * grad;
        double lambda = 1.0;
        for (int damp = 0; damp < 40; ++damp) {
            const Vec3 cand = q + lambda * step;
            const double Fc = s.equation(cand);
            if (std::abs(Fc) < std::abs(Fq)) {
                q = cand;
                Fq = Fc;
                break;
            }
            lambda *= 0.5;
            if (damp == 39) {
                std::ostringstream os;
                os << "project_to_surface: no descent, residual " << Fq;
                throw NumericalError(os.str());
            }
        }
    }
    std::ostringstream os;
    os << "project_to_surface: no convergence in 50 steps, residual " << Fq;
    throw NumericalError(os.str());
}

Vec3 restricted_gradient(const Surface& s, const Metric& m, const PolyFunction& f,
                         const Vec3& p) {
    if (p.norm() < 1e-300)
        throw PreconditionError("restricted_gradient: point at the singular origin");
    const double scale = residual_scale(s.equation, p);
    if (std::abs(s.equation(p)) > 1e-9 * std::max(1.0, scale))
        throw PreconditionError("restricted_gradient: point not on the surface");
    const Vec3 gradF = s.equation.gradient(p);
    if (gradF.squaredNorm() <= 1e-280)
        throw PreconditionError("restricted_gradient: gradient of F vanishes");
    const Vec3 gradf = f.gradient(p);
    Vec3 u, n;
    if (m.is_euclidean()) {
        u = gradf;
        n = gradF;
    } else {
        const Mat3 G = m.at(p);
        Eigen::LDLT<Mat3> ldlt(G);
        u = ldlt.solve(gradf);
        n = ldlt.solve(gradF);
    }
    const double denom = gradF.dot(n);
    if (denom <= 0.0)
        throw NumericalError("restricted_gradient: degenerate normal direction");
    return u - (gradF.dot(u) / denom) * n;
}

double slice_value(SliceKind kind, const Vec3& p) {
    return kind == SliceKind::Radial ? p.norm() : p.z();
}

Vec3 slice_gradient(SliceKind kind, const Vec3& p) {
    if (kind == SliceKind::Radial) {
        const double r = p.norm();
        if (r < 1e-300) throw PreconditionError("slice_gradient: radial slice at origin");
        return p / r;
    }
    return Vec3(0, 0, 1);
}

namespace {

// One Gauss-Newton correction onto {F = 0, slice = level}, moving only in the
// span of the two constraint normals. Constraints are row-normalized so the
// 2x2 system stays conditioned when coordinates are tiny.
bool correct_to_slice(const Surface& s, SliceKind kind, double level, Vec3& q,
                      int max_iter = 30) {
    for (int iter = 0; iter < max_iter; ++iter) {
        const Vec3 gF = s.equation.gradient(q);
        const double nF = gF.norm();
        if (nF <= 1e-280) return false;
        const Vec3 n1 = gF / nF;
        const Vec3 n2 = slice_gradient(kind, q);
        const double d1 = s.equation(q) / nF;
        const double d2 = slice_value(kind, q) - level;
        const double fs = residual_scale(s.equation, q);
        const bool okF = std::abs(s.equation(q)) <= 1e-12 * fs;
        const bool okS = std::abs(d2) <= 1e-13 * std::max(level, 1e-300);
        if (okF && okS) return true;
        const double a = n1.dot(n2);
        const double det = 1.0 - a * a;
        if (det < 1e-6) return false;  // slice tangent to the surface
        const double c1 = (d1 - a * d2) / det;
        const double c2 = (d2 - a * d1) / det;
        q -= c1 * n1 + c2 * n2;
    }
    return false;
}

}  // namespace

Vec3 snap_to_slice(const Surface& s, SliceKind kind, double level, const Vec3& guess) {
    Vec3 q = guess;
    if (!correct_to_slice(s, kind, level, q))
        throw NumericalError("snap_to_slice: correction did not converge");
    return q;
}

Vec3 move_to_level(const Surface& s, SliceKind kind, const Vec3& from, double level) {
    if (!(level > 0)) throw PreconditionError("move_to_level: level must be positive");
    Vec3 q = project_to_surface(s, from);
    double cur = slice_value(kind, q);
    if (!(cur > 0)) throw PreconditionError("move_to_level: start has non-positive slice value");
    for (int iter = 0; iter < 400; ++iter) {
        if (std::abs(cur - level) <= 1e-13 * level) return q;
        const double next = level < cur ? std::max(level, cur / 1.5)
                                        : std::min(level, cur * 1.5);
        Vec3 cand = q;
        if (kind == SliceKind::Radial) cand *= next / cur;
        else cand.z() = next;
        cand = project_to_surface(s, cand);
        if (!correct_to_slice(s, kind, next, cand))
            throw NumericalError("move_to_level: slice correction failed");
        q = cand;
        cur = slice_value(kind, q);
    }
    throw NumericalError("move_to_level: level not reached");
}

std::vector<Vec3> slice_curve(const Surface& s, SliceKind kind, double level,
                              int n_points, const Vec3* hint) {
    if (n_points < 64) throw PreconditionError("slice_curve: n_points must be >= 64");
    if (!(level > 0) || level > s.epsilon0)
        throw PreconditionError("slice_curve: level must satisfy 0 < level <= epsilon0");

    Vec3 p0 = hint ? project_to_surface(s, *hint) : move_to_level(s, kind, s.seed, level);
    if (!correct_to_slice(s, kind, level, p0))
        throw NumericalError("slice_curve: could not land start point on the slice");

    auto tangent = [&](const Vec3& q) -> Vec3 {
        const Vec3 t = s.equation.gradient(q).cross(slice_gradient(kind, q));
        const double n = t.norm();
        if (n <= 1e-280) throw NumericalError("slice_curve: degenerate tangent");
        return t / n;
    };

    std::vector<Vec3> pts{p0};
    std::vector<double> arclen{0.0};
    Vec3 tan_prev = tangent(p0);
    const Vec3 tan0 = tan_prev;

    // Step size found by trial: shrink until the corrector converges and the
    // turning per step stays small, grow back when the curve is flat.
    double ds = level;
    double total_turn = 0.0;
    const long max_steps = 10L * n_points;
    bool closed = false;
    for (long step = 0; step < max_steps && !closed; ++step) {
        const Vec3 q = pts.back();
        bool advanced = false;
        for (int attempt = 0; attempt < 200; ++attempt) {
            Vec3 cand = q + ds * tan_prev;
            if (!correct_to_slice(s, kind, level, cand) || (cand - q).norm() > 3.0 * ds) {
                ds *= 0.5;
                continue;
            }
            Vec3 tan_new;
            try {
                tan_new = tangent(cand);
            } catch (const NumericalError&) {
                ds *= 0.5;
                continue;
            }
            const double turn = std::acos(std::clamp(tan_prev.dot(tan_new), -1.0, 1.0));
            if (turn > 0.10) {
                ds *= 0.5;
                continue;
            }
            arclen.push_back(arclen.back() + (cand - q).norm());
            pts.push_back(cand);
            total_turn += turn;
            tan_prev = tan_new;
            if (turn < 0.02) ds *= 1.3;
            advanced = true;
            break;
        }
        if (!advanced) throw NumericalError("slice_curve: continuation step failed");
        if (pts.size() > 8 && total_turn > 5.5) {
            const double gap = (pts.back() - p0).norm();
            if (gap < 1.5 * ds && tan_prev.dot(tan0) > 0.8) {
                arclen.push_back(arclen.back() + gap);
                pts.push_back(p0);
                closed = true;
            }
        }
    }
    if (!closed) throw NumericalError("slice not a closed curve");

    // Uniform arclength resampling of the closed trace, start point first.
    const double L = arclen.back();
    std::vector<Vec3> out;
    out.reserve(n_points);
    std::size_t seg = 0;
    for (int i = 0; i < n_points; ++i) {
        const double target = L * i / n_points;
        while (seg + 1 < arclen.size() && arclen[seg + 1] < target) ++seg;
        const double denom = arclen[seg + 1] - arclen[seg];
        const double w = denom > 0 ? (target - arclen[seg]) / denom : 0.0;
        Vec3 q = (1.0 - w) * pts[seg] + w * pts[seg + 1];
        if (!correct_to_slice(s, kind, level, q))
            throw NumericalError("slice_curve: resample correction failed");
        out.push_back(q);
    }
    return out;
}

void validate_surface(const Surface& s, int n_samples) {
    if (std::abs(s.equation(Vec3::Zero())) > 1e-12)
        throw PreconditionError("validate_surface: F(origin) != 0");
    if (!(s.epsilon0 > 0)) throw PreconditionError("validate_surface: epsilon0 must be positive");
    const int n_levels = 10;
    const int per_level = std::max(1, n_samples / n_levels);
    const double lo = 2e-4;
    Vec3 hint = project_to_surface(s, s.seed);
    for (int k = 0; k < n_levels; ++k) {
        const double level = s.epsilon0 * 0.9 * std::pow(lo / (s.epsilon0 * 0.9),
                                                         k / double(n_levels - 1));
        hint = move_to_level(s, SliceKind::Radial, hint, level);
        const auto curve = slice_curve(s, SliceKind::Radial, level,
                                       std::max(64, per_level), &hint);
        for (const Vec3& p : curve) {
            if (s.equation.gradient(p).norm() <= 1e-20)
                throw PreconditionError(
                    "validate_surface: gradient of F vanishes away from the origin");
        }
    }
}

}  // namespace singflow
