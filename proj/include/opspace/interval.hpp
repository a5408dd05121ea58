#pragma once

/**
 * interval.hpp — certified enclosures for computed norms.
 *
 * Every norm the toolkit reports is an Interval [lo, hi] guaranteed to
 * contain the true value: lo comes from an explicit witness (a feasible
 * point, a dual certificate, a contractive test map), hi from a bound that
 * holds unconditionally (an exact realization, a triangle/factorization
 * estimate). `exact` means the value was computed by a closed-form or
 * direct-realization route and lo == hi up to solver tolerance; everything
 * search-based is `approximate`.
 */

#include <algorithm>
#include <cmath>

#include "opspace/common.hpp"

namespace opspace {

enum class Exactness { exact, approximate };

struct Interval {
    double lo = 0.0;
    double hi = 0.0;
    Exactness status = Exactness::approximate;

    static Interval exactly(double v) {
        const double w = std::max(v, 0.0);
        return {w, w, Exactness::exact};
    }

    static Interval approx(double lo, double hi) {
        lo = std::max(lo, 0.0);
        if (hi < lo) hi = lo; // guard against crossed rounding
        return {lo, hi, Exactness::approximate};
    }

    double width() const { return hi - lo; }
    double mid() const { return 0.5 * (lo + hi); }
    bool is_exact() const { return status == Exactness::exact; }

    bool contains(double v, double slack = 0.0) const {
        return v >= lo - slack && v <= hi + slack;
    }
};

/// Enclosure of max(a, b) — valid because max is monotone in both arguments.
inline Interval interval_max(const Interval& a, const Interval& b) {
    Interval r;
    r.lo = std::max(a.lo, b.lo);
    r.hi = std::max(a.hi, b.hi);
    r.status = (a.is_exact() && b.is_exact()) ? Exactness::exact : Exactness::approximate;
    return r;
}

/// Enclosure of a + b.
inline Interval interval_add(const Interval& a, const Interval& b) {
    Interval r;
    r.lo = a.lo + b.lo;
    r.hi = a.hi + b.hi;
    r.status = (a.is_exact() && b.is_exact()) ? Exactness::exact : Exactness::approximate;
    return r;
}

/// Enclosure of s·a for s >= 0.
inline Interval interval_scale(const Interval& a, double s) {
    if (s < 0) throw invalid_input("interval_scale: negative scale");
    Interval r{a.lo * s, a.hi * s, a.status};
    return r;
}

/// Enclosure of a·b for nonnegative intervals (norm products).
inline Interval interval_mul(const Interval& a, const Interval& b) {
    Interval r;
    r.lo = a.lo * b.lo;
    r.hi = a.hi * b.hi;
    r.status = (a.is_exact() && b.is_exact()) ? Exactness::exact : Exactness::approximate;
    return r;
}

///// Gap between two intervals: 0 when they overlap, else the distance.
inline double interval_gap(const Interval& a, const Interval& b) {
    return std::max({a.lo - b.hi, b.lo - a.hi, 0.0});
}

/// Enclosure of num/den for nonnegative num and strictly positive den.
inline Interval interval_div(const Interval& num, const Interval& den) {
    if (den.lo <= 0.0)
        throw invalid_input("interval_div: denominator interval must be strictly positive");
    Interval r;
    r.lo = num.lo / den.hi;
    r.hi = num.hi / den.lo;
    r.status =
        (num.is_exact() && den.is_exact()) ? Exactness::exact : Exactness::approximate;
    return r;
}

} // namespace opspace
