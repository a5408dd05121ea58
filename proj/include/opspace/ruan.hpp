#pragma once

/**
 * ruan.hpp — randomized verification of the two matricial norm axioms that
 * every operator space must satisfy:
 *
 *   M1:  || diag(x, y) ||_{p+q} = max(||x||_p, ||y||_q)
 *   M2:  || alpha · x · beta ||  <= ||alpha|| · ||x|| · ||beta||
 *
 * for elements x, y at levels p, q and scalar matrices alpha, beta.
 * Residuals are measured between certified intervals (gap distance for M1,
 * one-sided excess for M2), so an honest interval oracle is never penalized
 * for width, while an oracle corrupted by a fixed factor breaks M1 on almost
 * every probe and is flagged.
 */

#include <algorithm>
#include <cstdint>

#include "opspace/space.hpp"

namespace opspace {

struct RuanReport {
    int probes_m1 = 0;
    int probes_m2 = 0;
    double max_m1_residual = 0.0; // largest interval gap between the two sides
    double max_m2_excess = 0.0;   // largest relative one-sided bound violation
    int max_level = 0;
    uint64_t seed = 0;
    bool ok = true;
};

/**
 * check_ruan — probe the axioms on random elements of x up to `max_level`.
 * `probes` counts total random checks (split between M1 and M2); `tol` is
 * the acceptance threshold on both residuals.
 */
inline RuanReport check_ruan(const OSpace& x, int max_level, int probes,
                             uint64_t seed, double tol = 1e-8,
                             const NormBudget& budget = {}) {
    if (max_level < 1) throw invalid_input("check_ruan: max_level must be >= 1");
    if (probes < 0) throw invalid_input("check_ruan: negative probe count");
    RuanReport rep;
    rep.max_level = max_level;
    rep.seed = seed;
    if (x.dim() == 0) { // every norm is exactly 0; nothing can fail
        rep.probes_m1 = rep.probes_m2 = probes / 2;
        return rep;
    }
    Rng rng(mix_seed(seed, 0x7bau));
    const int n_m1 = probes - probes / 2;

    for (int t = 0; t < n_m1; ++t) {
        const int p = 1 + static_cast<int>(rng.uniform() * max_level) % max_level;
        const int q = 1 + static_cast<int>(rng.uniform() * max_level) % max_level;
        LevelElement a = random_element(x, p, rng);
        LevelElement b = random_element(x, q, rng);
        Interval na = level_norm(x, a, budget);
        Interval nb = level_norm(x, b, budget);
        Interval nd = level_norm(x, direct_sum_element(a, b), budget);
        const double gap = interval_gap(nd, interval_max(na, nb));
        const double scale = std::max(1.0, interval_max(na, nb).hi);
        rep.max_m1_residual = std::max(rep.max_m1_residual, gap / scale);
        ++rep.probes_m1;
    }

    for (int t = n_m1; t < probes; ++t) {
        const int n = 1 + static_cast<int>(rng.uniform() * max_level) % max_level;
        LevelElement e = random_element(x, n, rng);
        CMat alpha = rng.gaussian(n, n);
        CMat beta = rng.gaussian(n, n);
        Interval ne = level_norm(x, e, budget);
        Interval ns = level_norm(x, sandwich_element(alpha, e, beta), budget);
        const double bound = spectral_norm(alpha) * spectral_norm(beta) * ne.hi;
        const double excess = std::max(0.0, ns.lo - bound);
        rep.max_m2_excess =
            std::max(rep.max_m2_excess, excess / std::max(1.0, bound));
        ++rep.probes_m2;
    }

    rep.ok = rep.max_m1_residual <= tol && rep.max_m2_excess <= tol;
    return rep;
}

} // namespace opspace
