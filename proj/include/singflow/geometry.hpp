#pragma once

#include <array>
#include <vector>

#include "singflow/poly.hpp"

namespace singflow {

// Riemannian metric on R^3 with polynomial coefficients, stored as the full
// symmetric 3x3 matrix of entry functions.
class Metric {
public:
    Metric();  // Euclidean
    static Metric euclidean();
    static Metric from_entries(const std::array<PolyFunction, 9>& entries);

    const PolyFunction& entry(int i, int j) const { return g_[3 * i + j]; }
    bool is_euclidean() const { return euclidean_; }

    // Evaluates g at p; throws NumericalError when the matrix is not positive
    // definite there (Cholesky failure).
    Mat3 at(const Vec3& p) const;

    // Metric after the substitution x = A y: g'(y) = A^T g(A y) A.
    Metric compose_linear(const Mat3& A) const;

private:
    std::array<PolyFunction, 9> g_;
    bool euclidean_ = true;
};

// Implicit surface X = F^{-1}(0) with isolated singularity at the origin.
// The working component S0 is the one containing the seed point; membership
// elsewhere is decided by slice connectivity from the seed.
struct Surface {
    PolyFunction equation;
    Vec3 seed = Vec3::Zero();
    double epsilon0 = 0.5;
};

// Checks F(0) = 0 and that the gradient of F does not vanish on a sample of
// S0 points with 1e-4 < |p| < epsilon0. Throws PreconditionError on failure.
void validate_surface(const Surface& s, int n_samples = 1000);

// Damped Newton along grad F. Throws NumericalError after 50 steps without
// convergence (message carries the last residual), PreconditionError when
// grad F vanishes at the iterate.
Vec3 project_to_surface(const Surface& s, const Vec3& p, double tol = 1e-12);

// g-gradient of f at p projected g-orthogonally onto ker dF(p).
// Requires p on the surface (relative residual), p away from the origin.
Vec3 restricted_gradient(const Surface& s, const Metric& m, const PolyFunction& f,
                         const Vec3& p);

// Slicing convention: OTC surfaces are sliced by |p|, CTC surfaces (in
// adapted coordinates) by the height z.
enum class SliceKind { Radial, Height };

double slice_value(SliceKind kind, const Vec3& p);
Vec3 slice_gradient(SliceKind kind, const Vec3& p);

// Gauss-Newton landing on {F = 0, slice = level} from a nearby guess.
// Throws NumericalError when the correction does not converge.
Vec3 snap_to_slice(const Surface& s, SliceKind kind, double level, const Vec3& guess);

// Walks from `from` along S0 to a point with slice value = level, stepping
// the level geometrically and re-projecting. Used to seed slice tracing at
// levels far from the seed point.
Vec3 move_to_level(const Surface& s, SliceKind kind, const Vec3& from, double level);

// Closed polyline sampling S0 \cap {slice = level}, traced by
// predictor-corrector continuation from the seed's slice component and
// resampled to n_points uniform arclength steps. `hint` (optional) is a
// nearby on-surface point used to start the trace.
std::vector<Vec3> slice_curve(const Surface& s, SliceKind kind, double level,
                              int n_points, const Vec3* hint = nullptr);

}  // namespace singflow
