#include "pcf/cone.hpp"

#include <cmath>

#include "pcf/errors.hpp"

namespace pcf {

void ConeProblem::validate() const {
    for (std::size_t i = 0; i < curves.size(); ++i) {
        const auto& c = curves[i];
        if (!(c.area > 0) || !std::isfinite(c.area))
            throw ValidationError("curves[" + std::to_string(i) + "].area: must be positive, got " +
                                  std::to_string(c.area));
    }
    if (kahler) {
        if (gamma_pairing) throw ValidationError("gamma_pairing: not used for a Kahler problem");
    } else {
        if (!gamma_pairing) throw ValidationError("gamma_pairing: required for a non-Kahler problem");
        if (!(*gamma_pairing > 0) || !std::isfinite(*gamma_pairing))
            throw ValidationError("gamma_pairing: must be positive");
    }
    if (c1_polarization && !kahler) throw ValidationError("c1_polarization: only for Kahler problems");
}

ClassPoint class_trajectory(const ConeProblem& p, double t) {
    if (!(t >= 0)) throw ValidationError("t: must be nonnegative");
    ClassPoint out;
    out.t = t;
    out.pairings.reserve(p.curves.size());
    for (const auto& c : p.curves) out.pairings.push_back(c.area - t * c.c1());
    // c1 pairs to zero with gamma_0
    out.gamma_pairing = p.gamma_pairing;
    return out;
}

namespace {

TauStar min_root(const ConeProblem& p, bool negative_only) {
    TauStar r;
    for (const auto& c : p.curves) {
        if (negative_only && c.self_int >= 0) continue;
        if (c.c1() <= 0) continue;
        double t = c.area / c.c1();
        if (t < r.value) {
            r.value = t;
            r.binding = c.name;
        }
    }
    return r;
}

}  // namespace

TauStar tau_star(const ConeProblem& p) {
    p.validate();
    if (p.kahler) throw ValidationError("kahler: use kahler_tau_star");
    TauStar r = min_root(p, true);
    r.gamma_ok = *p.gamma_pairing > 0;
    return r;
}

TauStar kahler_tau_star(const ConeProblem& p) {
    p.validate();
    if (!p.kahler) throw ValidationError("kahler: problem is not flagged Kahler");
    TauStar r = min_root(p, false);
    if (!r.finite() && p.c1_polarization && *p.c1_polarization > 0) r.incomplete = true;
    return r;
}

}  // namespace pcf
