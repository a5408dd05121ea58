#pragma once

/**
 * trace_class.hpp — trace-class operator spaces T_n, the grid-contraction
 * construction, and the strong-generator witness search.
 *
 * T_n is M_n(C) carried by the operator-space structure of the dual of M_n:
 * a level-m grid of coefficient matrices is normed as the completely bounded
 * norm of the induced map M_n -> M_m. At level 1 this is exactly the trace
 * norm of the coefficient matrix, computed in closed form.
 *
 * The grid contraction sends the matrix-unit basis of T_n to the cells of a
 * unit-ball grid [x_ij] in M_n(X); its cb norm equals the grid norm, so it
 * is completely contractive, and evaluating its amplification at the
 * matrix-unit grid returns [x_ij] exactly in coordinates.
 *
 * The witness search drives the strong-generation mechanism: for an
 * injective complete contraction m that is not completely isometric, some
 * open-unit-ball grid over the codomain has no preimage of norm < 1, and
 * the grid contraction built from it cannot factor contractively through m.
 */

#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "opspace/category.hpp"

namespace opspace {

/// The trace-class operator space T_n: coordinates are matrix entries in
/// row-major order, level-1 norm is the trace norm, higher levels are normed
/// through the induced maps M_n -> M_m.
inline OSpace make_Tn(int n) {
    if (n < 1) throw invalid_input("make_Tn: n must be >= 1");
    OSpace base = dual(matrix_space(n));
    auto d = std::make_shared<detail::OSpaceData>();
    d->kind = SpaceKind::trace_class;
    d->dim = n * n;
    d->label = "T" + std::to_string(n);
    d->parts = {base};
    d->recipe = {{"kind", "trace_class"}, {"n", n}};
    d->meta = {{"n", n}};
    // |b_kl| <= ||b||_op <= ||b||_tr, attained on matrix units, so the
    // coordinate functionals are exactly contractive.
    d->kappa.assign(static_cast<size_t>(n) * n, 1.0);
    const int nn = n;
    d->norm_fn = [base, nn](const LevelElement& e, const NormBudget& bud) {
        if (e.level == 1) {
            CMat b(nn, nn);
            for (int k = 0; k < nn; ++k)
                for (int l = 0; l < nn; ++l) b(k, l) = e.at(0, 0, k * nn + l);
            return Interval::exactly(trace_norm(b));
        }
        return level_norm(base, e, bud);
    };
    return OSpace::from_data(std::move(d));
}

/// The grid in M_n(T_n) whose (i, j) cell is the matrix unit e_ij — the
/// coordinate expression of the identity map under M_n(T_n) ~ CB(M_n, M_n).
inline LevelElement trace_identity_grid(int n) {
    if (n < 1) throw invalid_input("trace_identity_grid: n must be >= 1");
    LevelElement t(n, n * n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) t.at(i, j, i * n + j) = 1.0;
    return t;
}

/**
 * grid_contraction — the map u: T_n -> X sending e_ij to the (i, j) cell of
 * a grid [x_ij] in M_n(X) with certified norm at most 1. Its cb norm equals
 * the grid norm, so the certified grid bound doubles as a cb bound, and
 * u_n(trace_identity_grid(n)) reproduces [x_ij] coordinate by coordinate.
 */
inline OSMap grid_contraction(const OSpace& x_space, const LevelElement& x,
                              const NormBudget& bud = {}) {
    if (x.dim != x_space.dim())
        throw shape_error("grid_contraction: grid dimension does not match the space");
    const int n = x.level;
    Interval nx = level_norm(x_space, x, bud);
    if (!(nx.hi <= 1.0 + 1e-12))
        throw invalid_input(
            "grid_contraction: grid norm upper bound exceeds 1 (got " +
            std::to_string(nx.hi) + ")");
    CMat coeff(x_space.dim(), n * n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            for (int s = 0; s < x_space.dim(); ++s)
                coeff(s, i * n + j) = x.at(i, j, s);
    return make_map(make_Tn(n), x_space, std::move(coeff), "grid contraction",
                    std::min(nx.hi, 1.0));
}

/**
 * generator_witness — search for a certificate that an injective map m is
 * not completely isometric: a normalized grid y in the closed unit ball of
 * M_n(cod) whose unique preimage under m_n either does not exist (y falls
 * outside the range) or has certified norm > 1. On success the returned map
 * u = grid_contraction(cod, y) cannot factor through m by any contraction.
 */
struct GeneratorWitness {
    bool found = false;
    int n = 0;            // grid level of the witness
    LevelElement y;       // normalized witness grid over the codomain
    Interval fiber_min;   // certified preimage norm (infinite when no preimage)
    OSMap u;              // grid contraction from T_n (valid when found)

    nlohmann::json to_json() const {
        nlohmann::json j{{"found", found}, {"n", n}};
        if (found) {
            j["y_coords"] = detail::cvector_json(y.coords);
            if (std::isfinite(fiber_min.lo))
                j["fiber_min_norm"] = {{"lo", fiber_min.lo}, {"hi", fiber_min.hi}};
            else
                j["fiber_min_norm"] = "inf";
        }
        return j;
    }
};

inline GeneratorWitness generator_witness(const OSMap& m, int level_cap = 2,
                                          int samples = 8,
                                          const NormBudget& bud = {}) {
    if (rank_of(m.coeff) < m.dom.dim())
        throw invalid_input("generator_witness: map is not injective");
    GeneratorWitness out;
    const int dc = m.cod.dim();
    const CMat lift = pinv(m.coeff); // dom.dim x cod.dim, exact on the range
    Rng rng(mix_seed(bud.seed, 0x9e4e12));

    auto try_grid = [&](LevelElement y) -> bool {
        const int n = y.level;
        Interval ny = level_norm(m.cod, y, bud);
        if (!(ny.hi > 1e-9)) return false;
        for (auto& c : y.coords) c /= ny.hi; // now certified ||y|| <= 1
        // unique candidate preimage, cell by cell
        LevelElement x0(n, m.dom.dim());
        double resid = 0, scale = 0;
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) {
                for (int s = 0; s < m.dom.dim(); ++s) {
                    cplx acc = 0;
                    for (int t = 0; t < dc; ++t) acc += lift(s, t) * y.at(i, j, t);
                    x0.at(i, j, s) = acc;
                }
                // residual of m(x0) against y on this cell
                for (int t = 0; t < dc; ++t) {
                    cplx acc = 0;
                    for (int s = 0; s < m.dom.dim(); ++s)
                        acc += m.coeff(t, s) * x0.at(i, j, s);
                    resid = std::max(resid, std::abs(acc - y.at(i, j, t)));
                    scale = std::max(scale, std::abs(y.at(i, j, t)));
                }
            }
        Interval fib;
        if (resid > 1e-8 * std::max(1.0, scale)) {
            // y is outside the range of m_n: no preimage at all
            const double inf = std::numeric_limits<double>::infinity();
            fib = Interval{inf, inf, Exactness::approximate};
        } else {
            fib = level_norm(m.dom, x0, bud);
            if (!(fib.lo > 1.0 + 1e-9)) return false;
        }
        out.found = true;
        out.n = n;
        out.y = y;
        out.fiber_min = fib;
        out.u = grid_contraction(m.cod, out.y, bud);
        return true;
    };

    for (int n = 1; n <= std::max(1, level_cap); ++n) {
        // structured start: the matrix-unit grid separates weakened matricial
        // norms from the concrete ones whenever the codomain is matrix-shaped
        if (n * n == dc && try_grid(trace_identity_grid(n))) return out;
        for (int t = 0; t < samples; ++t) {
            LevelElement y(n, dc);
            for (auto& c : y.coords) c = rng.cgauss();
            if (try_grid(std::move(y))) return out;
        }
    }
    return out;
}

} // namespace opspace
