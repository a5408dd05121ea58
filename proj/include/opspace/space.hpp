#pragma once

/**
 * space.hpp — the operator-space model.
 *
 * An OSpace is a finite-dimensional complex vector space X together with a
 * norm oracle for every matrix level: an element of M_n(X) is an n x n grid
 * of coordinate vectors, and the oracle returns a certified Interval for its
 * norm. Concrete spaces (spanned by explicit matrices, normed by the
 * operator norm of the block representation) answer exactly; constructed
 * spaces (products, quotients, duals, tensor products, ...) attach their own
 * oracles in the headers that build them and may answer with genuine
 * intervals.
 *
 * Shared data lives behind a shared_ptr and is immutable after construction,
 * so spaces are cheap values. Each space carries:
 *   - an optional concrete presentation (basis matrices + stacked frame),
 *   - per-coordinate functional bounds (kappa): kappa[s] bounds the
 *     completely bounded norm of the coordinate functional x -> x_s, used by
 *     map-norm certificates,
 *   - a serialization recipe describing how to rebuild the space.
 */

#include <functional>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "opspace/interval.hpp"
#include "opspace/matrix.hpp"
#include "opspace/rng.hpp"
#include "opspace/svd.hpp"

namespace opspace {

class OSpace;

enum class SpaceKind {
    concrete,
    product,
    coproduct,
    quotient,
    dual,
    tensor,
    min_quant,
    trace_class,
    subspace,
};

inline const char* to_string(SpaceKind k) {
    switch (k) {
        case SpaceKind::concrete: return "concrete";
        case SpaceKind::product: return "product";
        case SpaceKind::coproduct: return "coproduct";
        case SpaceKind::quotient: return "quotient";
        case SpaceKind::dual: return "dual";
        case SpaceKind::tensor: return "tensor";
        case SpaceKind::min_quant: return "min";
        case SpaceKind::trace_class: return "trace_class";
        case SpaceKind::subspace: return "subspace";
    }
    return "?";
}

/// Budgets for iterative norm searches. Exact oracles ignore them; interval
/// oracles must return results that depend only on (query, budget).
struct NormBudget {
    int restarts = 6;
    int iterations = 300;
    int level_cap = 4;
    int depth = 40;
    uint64_t seed = 1;
};

/// An element of M_n(X): an n x n grid of coordinate vectors, flattened as
/// coords[(i*level + j)*dim + s].
struct LevelElement {
    int level = 1;
    int dim = 0;
    std::vector<cplx> coords;

    LevelElement() = default;
    LevelElement(int lvl, int d)
        : level(lvl), dim(d), coords(static_cast<size_t>(lvl) * lvl * d, cplx{}) {}

    cplx& at(int i, int j, int s) {
        return coords[(static_cast<size_t>(i) * level + j) * dim + s];
    }
    const cplx& at(int i, int j, int s) const {
        return coords[(static_cast<size_t>(i) * level + j) * dim + s];
    }
};

/// Level-1 element from a coordinate vector.
inline LevelElement scalar_element(std::vector<cplx> c) {
    LevelElement e;
    e.level = 1;
    e.dim = static_cast<int>(c.size());
    e.coords = std::move(c);
    return e;
}

/// Block-diagonal join: diag(a, b) at level a.level + b.level.
inline LevelElement direct_sum_element(const LevelElement& a, const LevelElement& b) {
    if (a.dim != b.dim)
        throw shape_error("direct_sum_element: mismatched coordinate dimensions");
    LevelElement r(a.level + b.level, a.dim);
    for (int i = 0; i < a.level; ++i)
        for (int j = 0; j < a.level; ++j)
            for (int s = 0; s < a.dim; ++s) r.at(i, j, s) = a.at(i, j, s);
    for (int i = 0; i < b.level; ++i)
        for (int j = 0; j < b.level; ++j)
            for (int s = 0; s < b.dim; ++s)
                r.at(a.level + i, a.level + j, s) = b.at(i, j, s);
    return r;
}

/// Two-sided scalar compression alpha * e * beta (alpha: m x n, beta: n x m,
/// e at level n; the result lives at level m).
inline LevelElement sandwich_element(const CMat& alpha, const LevelElement& e,
                                     const CMat& beta) {
    if (alpha.cols() != e.level || beta.rows() != e.level || alpha.rows() != beta.cols())
        throw shape_error("sandwich_element: scalar matrices do not fit the level");
    LevelElement r(alpha.rows(), e.dim);
    for (int i = 0; i < r.level; ++i)
        for (int j = 0; j < r.level; ++j)
            for (int p = 0; p < e.level; ++p)
                for (int q = 0; q < e.level; ++q) {
                    const cplx w = alpha(i, p) * beta(q, j);
                    if (w == cplx{}) continue;
                    for (int s = 0; s < e.dim; ++s) r.at(i, j, s) += w * e.at(p, q, s);
                }
    return r;
}

namespace detail {

struct OSpaceData {
    SpaceKind kind = SpaceKind::concrete;
    int dim = 0;
    std::string label;

    // Concrete presentation (present when ambient > 0): basis matrices in
    // M_ambient, their stacked columns, and the Frobenius-dual frame.
    int ambient = 0;
    std::vector<CMat> basis;
    CMat stack;      // ambient^2 x dim, column s = vec(basis[s])
    CMat dual_stack; // ambient^2 x dim, biorthogonal frame
    bool ill_conditioned = false;

    std::vector<double> kappa; // cb bounds for coordinate functionals

    std::vector<OSpace> parts; // component spaces of constructed kinds
    std::vector<CMat> aux;     // kind-specific matrices (inclusions, kernels, ...)

    std::function<Interval(const LevelElement&, const NormBudget&)> norm_fn;
    nlohmann::json recipe;
    nlohmann::json meta; // kind-specific scalars (e.g. trace-class index)
};

inline nlohmann::json matrix_json(const CMat& m) {
    nlohmann::json rows = nlohmann::json::array();
    for (int i = 0; i < m.rows(); ++i) {
        nlohmann::json row = nlohmann::json::array();
        for (int j = 0; j < m.cols(); ++j)
            row.push_back({m(i, j).real(), m(i, j).imag()});
        rows.push_back(std::move(row));
    }
    return rows;
}

inline nlohmann::json cvector_json(const std::vector<cplx>& v) {
    nlohmann::json out = nlohmann::json::array();
    for (const cplx& z : v) out.push_back({z.real(), z.imag()});
    return out;
}

/// Block representation of a level element through a concrete presentation.
inline CMat concrete_rep(const std::vector<CMat>& basis, int ambient,
                         const LevelElement& e) {
    CMat m(e.level * ambient, e.level * ambient);
    for (int i = 0; i < e.level; ++i)
        for (int j = 0; j < e.level; ++j)
            for (int s = 0; s < e.dim; ++s) {
                const cplx c = e.at(i, j, s);
                if (c == cplx{}) continue;
                const CMat& b = basis[s];
                for (int r = 0; r < ambient; ++r)
                    for (int q = 0; q < ambient; ++q)
                        m(i * ambient + r, j * ambient + q) += c * b(r, q);
            }
    return m;
}

} // namespace detail

class OSpace {
  public:
    OSpace() = default;

    /// Attach prepared space data. This is the extension point used by the
    /// constructing headers (categorical operations, tensor products, ...).
    static OSpace from_data(std::shared_ptr<const detail::OSpaceData> d) {
        OSpace x;
        x.d_ = std::move(d);
        return x;
    }

    bool valid() const { return static_cast<bool>(d_); }
    SpaceKind kind() const { return data().kind; }
    int dim() const { return data().dim; }
    const std::string& label() const { return data().label; }
    bool has_concrete() const { return valid() && d_->ambient > 0; }
    const std::vector<double>& kappa() const { return data().kappa; }

    const detail::OSpaceData& data() const {
        if (!d_) throw invalid_input("OSpace: empty handle");
        return *d_;
    }
    std::shared_ptr<const detail::OSpaceData> share() const { return d_; }

  private:
    std::shared_ptr<const detail::OSpaceData> d_;
};

/// Certified norm of a level element. The effective seed mixes the budget
/// seed with a digest of the query, so answers are pure functions of
/// (space, element, budget) regardless of call order.
inline Interval level_norm(const OSpace& x, const LevelElement& e,
                           const NormBudget& budget = {}) {
    const detail::OSpaceData& d = x.data();
    if (e.level < 1) throw invalid_input("level_norm: level must be >= 1");
    if (e.dim != d.dim) throw shape_error("level_norm: element dimension mismatch");
    if (e.coords.size() != static_cast<size_t>(e.level) * e.level * e.dim)
        throw shape_error("level_norm: coordinate payload has the wrong size");
    if (d.dim == 0) return Interval::exactly(0.0);
    NormBudget eb = budget;
    eb.seed = mix_seed(budget.seed,
                       hash_doubles(e.coords, mix_seed(0x6e6f726d, uint64_t(e.level))));
    return d.norm_fn(e, eb);
}

/// Concrete block representation of an element (requires a presentation).
inline CMat element_rep(const OSpace& x, const LevelElement& e) {
    const detail::OSpaceData& d = x.data();
    if (d.ambient <= 0)
        throw unsupported_input("element_rep: space has no concrete presentation");
    if (e.dim != d.dim) throw shape_error("element_rep: element dimension mismatch");
    return detail::concrete_rep(d.basis, d.ambient, e);
}

/// Level-1 coordinate basis element e_s.
inline LevelElement basis_element(const OSpace& x, int s) {
    if (s < 0 || s >= x.dim()) throw invalid_input("basis_element: index out of range");
    LevelElement e(1, x.dim());
    e.at(0, 0, s) = 1.0;
    return e;
}

/// The zero operator space: dimension 0, every norm exactly 0.
inline OSpace zero_space() {
    auto d = std::make_shared<detail::OSpaceData>();
    d->kind = SpaceKind::concrete;
    d->dim = 0;
    d->ambient = 1;
    d->label = "0";
    d->norm_fn = [](const LevelElement&, const NormBudget&) {
        return Interval::exactly(0.0);
    };
    d->recipe = {{"kind", "zero"}};
    return OSpace::from_data(std::move(d));
}

namespace detail {

/// Fill the concrete-presentation fields of `d` from basis matrices:
/// stack, dual frame, coordinate-functional bounds, conditioning flag.
/// Throws invalid_input if the matrices are linearly dependent.
inline void attach_presentation(OSpaceData& d, std::vector<CMat> basis,
                                const std::string& who) {
    const int dim = static_cast<int>(basis.size());
    const int amb = basis[0].rows();
    CMat stack(amb * amb, dim);
    for (int s = 0; s < dim; ++s) {
        CMat v = vec(basis[s]);
        for (int i = 0; i < amb * amb; ++i) stack(i, s) = v(i, 0);
    }
    SVD sv = svd(stack);
    if (sv.sigma.back() <= 1e-12 * sv.sigma.front())
        throw invalid_input(who + ": dependent basis (smallest stacked singular value " +
                            std::to_string(sv.sigma.back()) + ")");
    const double gram_cond =
        (sv.sigma.front() / sv.sigma.back()) * (sv.sigma.front() / sv.sigma.back());
    if (gram_cond > 1e8) {
        d.ill_conditioned = true;
        log_note(who + ": presentation Gram condition " + std::to_string(gram_cond) +
                 " exceeds 1e8; certified answers may be wide");
    }
    CMat gram = adjoint(stack) * stack;
    CMat dual = stack * pinv(gram);
    d.kappa.resize(dim);
    for (int s = 0; s < dim; ++s) {
        CMat col(amb * amb, 1);
        for (int i = 0; i < amb * amb; ++i) col(i, 0) = dual(i, s);
        d.kappa[s] = trace_norm(unvec(col, amb, amb));
    }
    d.dim = dim;
    d.ambient = amb;
    d.basis = std::move(basis);
    d.stack = std::move(stack);
    d.dual_stack = std::move(dual);
    d.norm_fn = [bs = d.basis, amb](const LevelElement& e, const NormBudget&) {
        return Interval::exactly(spectral_norm(concrete_rep(bs, amb, e)));
    };
}

} // namespace detail

/**
 * make_concrete — span of explicit square matrices with the inherited
 * operator-space structure: the norm of a level-n element is the operator
 * norm of its n x n block representation. The basis must be nonempty,
 * square, of one shape, and linearly independent.
 */
inline OSpace make_concrete(std::vector<CMat> basis, std::string label = "concrete") {
    if (basis.empty()) throw invalid_input("make_concrete: empty basis");
    const int amb = basis[0].rows();
    if (amb == 0 || basis[0].cols() != amb)
        throw invalid_input("make_concrete: basis matrices must be square and nonempty");
    for (const CMat& b : basis)
        if (b.rows() != amb || b.cols() != amb)
            throw invalid_input("make_concrete: basis matrices must share one shape");
    auto d = std::make_shared<detail::OSpaceData>();
    d->kind = SpaceKind::concrete;
    d->label = std::move(label);
    detail::attach_presentation(*d, std::move(basis), "make_concrete");
    nlohmann::json bs = nlohmann::json::array();
    for (const CMat& b : d->basis) bs.push_back(detail::matrix_json(b));
    d->recipe = {{"kind", "concrete"}, {"basis", std::move(bs)}};
    return OSpace::from_data(std::move(d));
}

/**
 * subspace — the span of the given coordinate vectors inside x, with the
 * induced matricial norms (the inclusion is a complete isometry). An empty
 * generating set yields the zero space; dependent generators are rejected.
 */
inline OSpace subspace(const OSpace& x, const std::vector<std::vector<cplx>>& vectors,
                       std::string label = "") {
    const detail::OSpaceData& xd = x.data();
    if (vectors.empty()) return zero_space();
    const int dx = xd.dim;
    const int k = static_cast<int>(vectors.size());
    for (const auto& v : vectors)
        if (static_cast<int>(v.size()) != dx)
            throw invalid_input("subspace: generator has wrong coordinate dimension");
    CMat incl(dx, k);
    for (int t = 0; t < k; ++t)
        for (int s = 0; s < dx; ++s) incl(s, t) = vectors[t][s];
    {
        SVD sv = svd(incl);
        if (sv.sigma.empty() || sv.sigma.back() <= 1e-12 * sv.sigma.front())
            throw invalid_input("subspace: dependent generators (smallest singular value " +
                                std::to_string(sv.sigma.empty() ? 0.0 : sv.sigma.back()) +
                                ")");
    }

    auto d = std::make_shared<detail::OSpaceData>();
    d->kind = SpaceKind::subspace;
    d->label = label.empty() ? ("sub(" + xd.label + ")") : std::move(label);
    d->parts = {x};
    d->aux = {incl};
    nlohmann::json vs = nlohmann::json::array();
    for (const auto& v : vectors) vs.push_back(detail::cvector_json(v));
    d->recipe = {{"kind", "subspace"}, {"base", xd.recipe}, {"vectors", std::move(vs)}};

    if (xd.ambient > 0) {
        // Concrete parent: the subspace is itself concrete in the same ambient.
        std::vector<CMat> sub_basis(k);
        for (int t = 0; t < k; ++t) {
            CMat b(xd.ambient, xd.ambient);
            for (int s = 0; s < dx; ++s)
                if (vectors[t][s] != cplx{}) b += vectors[t][s] * xd.basis[s];
            sub_basis[t] = std::move(b);
        }
        detail::attach_presentation(*d, std::move(sub_basis), "subspace");
    } else {
        // Abstract parent: push coordinates through the inclusion and defer.
        d->dim = k;
        d->norm_fn = [x, incl](const LevelElement& e, const NormBudget& b) {
            LevelElement lifted(e.level, x.dim());
            for (int i = 0; i < e.level; ++i)
                for (int j = 0; j < e.level; ++j)
                    for (int t = 0; t < e.dim; ++t) {
                        const cplx c = e.at(i, j, t);
                        if (c == cplx{}) continue;
                        for (int s = 0; s < x.dim(); ++s)
                            lifted.at(i, j, s) += c * incl(s, t);
                    }
            return level_norm(x, lifted, b);
        };
        // Coordinate functionals factor through the pseudo-inverse of the
        // inclusion; bound by the triangle inequality.
        CMat pin = pinv(incl); // k x dx
        d->kappa.resize(k, 0.0);
        for (int t = 0; t < k; ++t) {
            double acc = 0;
            for (int s = 0; s < dx; ++s) acc += std::abs(pin(t, s)) * xd.kappa[s];
            d->kappa[t] = acc;
        }
    }
    return OSpace::from_data(std::move(d));
}

/// Random dense level element with independent standard complex Gaussian
/// coordinates (test probe helper).
inline LevelElement random_element(const OSpace& x, int level, Rng& rng) {
    LevelElement e(level, x.dim());
    for (auto& c : e.coords) c = rng.cgauss();
    return e;
}

} // namespace opspace
