#include "singflow/classify.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "singflow/error.hpp"

namespace singflow {
namespace {

constexpr double kTwoPi = 6.283185307179586476925286766559;

bool in_interval(double phi, const std::pair<double, double>& iv) {
    const double a = iv.first, b = iv.second;
    if (a <= b) return phi >= a && phi <= b;
    return phi >= a || phi <= b;  // wraps through 2*pi
}

bool flagged(double phi, const std::vector<std::pair<double, double>>& flags) {
    for (const auto& iv : flags)
        if (in_interval(phi, iv)) return true;
    return false;
}

// Mode of the snapped exponents over the valid, unflagged angles.
struct Consensus {
    Rational exponent;
    int votes = 0;
    int valid = 0;
};

Consensus consensus_exponent(const std::vector<ExponentFit>& fits,
                             const std::vector<double>& phi_grid,
                             const std::vector<std::pair<double, double>>& flags) {
    std::map<Rational, int> counts;
    int valid = 0;
    for (std::size_t j = 0; j < fits.size(); ++j) {
        if (!fits[j].valid || flagged(phi_grid[j], flags)) continue;
        ++valid;
        ++counts[fits[j].snapped];
    }
    Consensus c;
    c.valid = valid;
    for (const auto& [exp, n] : counts) {
        if (n > c.votes) {
            c.votes = n;
            c.exponent = exp;
        }
    }
    return c;
}

struct ProfileStats {
    std::vector<double> values;
    double amp = 0.0, vmax = 0.0, vmin = 0.0, mean = 0.0;
};

// Leading angular profile: bottom-level field divided by r^exponent.
ProfileStats profile_at_bottom(const std::vector<std::vector<double>>& grid,
                               const std::vector<double>& r_grid, const Rational& a) {
    ProfileStats st;
    const double r = r_grid.back();
    const double scale = std::pow(r, a.value());
    const auto& row = grid.back();
    st.values.resize(row.size());
    st.vmax = -1e300;
    st.vmin = 1e300;
    for (std::size_t j = 0; j < row.size(); ++j) {
        st.values[j] = row[j] / scale;
        st.vmax = std::max(st.vmax, st.values[j]);
        st.vmin = std::min(st.vmin, st.values[j]);
        st.amp = std::max(st.amp, std::abs(st.values[j]));
        st.mean += st.values[j];
    }
    st.mean /= double(row.size());
    return st;
}

}  // namespace

AsymptoticExpansion asymptotic_expansion(const CylinderChart& chart,
                                         const PolyFunction& f, int max_strips,
                                         double constancy) {
    const std::size_t n_r = chart.r_grid.size();
    const std::size_t n_phi = chart.phi_grid.size();
    if (max_strips < 1) throw PreconditionError("asymptotic_expansion: max_strips < 1");

    double fmax = 0.0, ref = 0.0;
    std::vector<std::vector<double>> F(n_r, std::vector<double>(n_phi, 0.0));
    for (std::size_t k = 0; k < n_r; ++k)
        for (std::size_t j = 0; j < n_phi; ++j) {
            F[k][j] = f(chart.points[k][j]);
            fmax = std::max(fmax, std::abs(F[k][j]));
            if (k == 0) {
                // magnitude envelope of f at this scale; term_scale would be
                // zero for a function vanishing identically on the chart
                const double rn = chart.points[k][j].norm();
                double env = 0.0;
                for (const auto& mono : f.monomials()) {
                    const int deg = mono.powers[0] + mono.powers[1] + mono.powers[2];
                    env += std::abs(mono.coeff) * std::pow(rn, deg);
                }
                ref = std::max(ref, env);
            }
        }
    if (fmax < 1e-12 * std::max(ref, 1e-300))
        throw PreconditionError("asymptotic_expansion: function vanishes on the component");

    // per-angle series in r, then exponents clustered across angles
    std::map<Rational, std::vector<double>> columns;
    std::map<Rational, int> counts;
    std::vector<std::pair<double, double>> samples(n_r);
    for (std::size_t j = 0; j < n_phi; ++j) {
        for (std::size_t k = 0; k < n_r; ++k) {
            const std::size_t rev = n_r - 1 - k;
            samples[k] = {chart.r_grid[rev], F[rev][j]};
        }
        const SeriesFit fit = fit_series(samples, max_strips, 16, 1e-3);
        for (const auto& term : fit.series.terms()) {
            auto it = columns.find(term.exponent);
            if (it == columns.end())
                it = columns.emplace(term.exponent, std::vector<double>(n_phi, 0.0)).first;
            it->second[j] = term.coeff;
            ++counts[term.exponent];
        }
    }

    AsymptoticExpansion out;
    for (const auto& [alpha, profile] : columns) {
        if (counts[alpha] * 4 < static_cast<int>(n_phi)) continue;  // sporadic: noise
        if (static_cast<int>(out.strips.size()) >= max_strips) break;
        ExpansionStrip strip;
        strip.alpha = alpha;
        strip.profile = profile;
        double vmax = -1e300, vmin = 1e300, amp = 0.0, mean = 0.0;
        for (double v : profile) {
            vmax = std::max(vmax, v);
            vmin = std::min(vmin, v);
            amp = std::max(amp, std::abs(v));
            mean += v;
        }
        strip.mean = mean / double(n_phi);
        strip.constant = (vmax - vmin) <= constancy * std::max(amp, 1e-300);
        out.strips.push_back(std::move(strip));
    }
    if (out.strips.empty())
        throw NumericalError("asymptotic_expansion: no consistent strip found");

    for (const auto& strip : out.strips) {
        if (!strip.constant) {
            out.pure = false;
            break;
        }
        out.pure_series = add(out.pure_series, GenSeries::term(strip.alpha, strip.mean));
    }
    return out;
}

OscillationReport oscillation_test(const CylinderTrajectory& tr, double hysteresis) {
    OscillationReport rep;
    if (tr.samples.size() < 2) return rep;
    int dir = 0;
    double extreme = tr.samples.front().phi_unwound;
    for (const auto& s : tr.samples) {
        const double phi = s.phi_unwound;
        if (dir == 0) {
            if (phi > extreme + hysteresis) dir = 1;
            if (phi < extreme - hysteresis) dir = -1;
            extreme = dir == 0 ? extreme : phi;
            continue;
        }
        if (dir == 1) {
            if (phi > extreme) extreme = phi;
            if (phi < extreme - hysteresis) {
                ++rep.reversals;
                dir = -1;
                extreme = phi;
            }
        } else {
            if (phi < extreme) extreme = phi;
            if (phi > extreme + hysteresis) {
                ++rep.reversals;
                dir = 1;
                extreme = phi;
            }
        }
    }
    rep.oscillating = rep.reversals >= 4;
    return rep;
}

SpiralingReport detect_spiraling(const CylinderSystem& sys, double min_turns) {
    SpiralingReport rep;
    const double r0 = sys.r_grid.front() * 0.8;
    const double r_stop = sys.r_grid.back() * 3.0;
    if (!(r_stop < r0)) return rep;

    double best_turns = 1e300;
    double sign = 0.0;
    bool all_good = true;
    for (int q = 0; q < 4 && all_good; ++q) {
        double phi = kTwoPi * q / 4.0;
        for (int shift = 0; shift < 8 && flagged(phi, sys.omega_flags); ++shift)
            phi += kTwoPi / 32.0;
        const CylinderTrajectory tr = chart_integrate(sys, phi, r0, r_stop, 1e6);
        if (tr.stop_reason != StopReason::ReachedRmin) {
            all_good = false;
            break;
        }
        const double dphi = tr.samples.back().phi_unwound - tr.samples.front().phi_unwound;
        const double turns = std::abs(dphi) / kTwoPi;
        if (oscillation_test(tr).reversals > 1) {
            all_good = false;
            break;
        }
        if (sign == 0.0) sign = dphi > 0 ? 1.0 : -1.0;
        if (dphi * sign <= 0) {
            all_good = false;
            break;
        }
        best_turns = std::min(best_turns, turns);
        if (q == 0) {
            const double dlog = std::log(tr.samples.front().r / tr.samples.back().r);
            rep.winding_slope = std::abs(dphi) / dlog;
        }
    }
    if (all_good && best_turns < 1e300) {
        rep.min_turns = best_turns;
        rep.spiraling = best_turns > min_turns;
    }
    return rep;
}

Classification classify_system(const CylinderSystem& sys, double spiral_min_turns) {
    Classification out;
    const Consensus ar = consensus_exponent(sys.rdot_exponents, sys.phi_grid,
                                            sys.omega_flags);
    const Consensus ap = consensus_exponent(sys.phidot_exponents, sys.phi_grid,
                                            sys.omega_flags);
    if (ar.valid == 0) {
        out.evidence = "radial field below noise everywhere";
        return out;
    }
    double rdot_max = 0.0, phidot_max = 0.0;
    for (const auto& row : sys.rdot)
        for (double v : row) rdot_max = std::max(rdot_max, std::abs(v));
    for (const auto& row : sys.phidot)
        for (double v : row) phidot_max = std::max(phidot_max, std::abs(v));
    // an angular field within the chart noise floor of the radial one carries
    // no trustworthy exponent
    const bool phi_silent = ap.valid == 0 || phidot_max < 1e-3 * rdot_max;
    const ProfileStats R = profile_at_bottom(sys.rdot, sys.r_grid, ar.exponent);
    const ProfileStats P =
        phi_silent ? ProfileStats{} : profile_at_bottom(sys.phidot, sys.r_grid, ap.exponent);

    const double margin = 1e-3 * std::max(R.amp, 1e-300);
    const bool r_negative = R.vmax < -margin;
    const bool r_positive = R.vmin > margin;
    const std::string exps = "a_r = " + ar.exponent.str() +
                             (phi_silent ? ", a_phi below noise" :
                                           ", a_phi = " + ap.exponent.str());

    if (r_negative || r_positive) {
        // dicritical normal form: rdot = r^mu H(phi) with H sign-definite,
        // phidot = r^{mu - 1 + eta} G with eta > 0
        if (phi_silent) {
            out.kind = FlowClass::Dicritical;
            out.mu = ar.exponent;
            out.eta = Rational(1);
            out.evidence = exps + "; radial profile sign-definite; angular field "
                                  "below noise, eta reported as 1";
            return out;
        }
        const Rational eta = ap.exponent - ar.exponent + Rational(1);
        if (eta > Rational(0)) {
            out.kind = FlowClass::Dicritical;
            out.mu = ar.exponent;
            out.eta = eta;
            out.evidence = exps + "; radial profile sign-definite, eta = " + eta.str();
            return out;
        }
    }

    if (!phi_silent && ar.exponent >= ap.exponent + Rational(1)) {
        // non-monodromic normal form: radial field subordinate, angular
        // profile sign-changing with (near) zero mean
        const double pmargin = 1e-3 * std::max(P.amp, 1e-300);
        const bool sign_changing = P.vmax > pmargin && P.vmin < -pmargin;
        if (sign_changing && std::abs(P.mean) <= 0.05 * P.amp) {
            out.kind = FlowClass::NonMonodromic;
            out.mu = ap.exponent;
            out.evidence = exps + "; angular profile sign-changing, |mean|/amp = " +
                           std::to_string(std::abs(P.mean) / P.amp);
            return out;
        }
    }

    const SpiralingReport sp = detect_spiraling(sys, spiral_min_turns);
    if (sp.spiraling) {
        out.kind = FlowClass::Spiraling;
        out.mu = ar.exponent;
        out.winding_slope = sp.winding_slope;
        out.evidence = exps + "; " + std::to_string(sp.min_turns) +
                       " monotone turns of a common sign across probes";
        return out;
    }
    out.evidence = exps + "; no normal form matched (min turns " +
                   std::to_string(sp.min_turns) + ")";
    return out;
}

}  // namespace singflow
