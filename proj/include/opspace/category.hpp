#pragma once

/**
 * category.hpp — categorical constructions on operator spaces, each bundled
 * with its structure maps, plus randomized verification of the universal
 * properties.
 *
 * Norm semantics:
 *   product    — max of the component norms at every level (exact when the
 *                components answer exactly); carries a block-diagonal
 *                concrete presentation when all parts have one.
 *   coproduct  — the l1 operator-space sum: exact sum formula at level 1;
 *                at higher levels the triangle bound above and certified
 *                pairings with completely contractive families below.
 *   equaliser  — the kernel subspace of f - g with its inclusion.
 *   quotient   — fiber-minimum norms over the kernel at every level,
 *                certified by the affine spectral minimizer.
 *   coequaliser— quotient of the codomain by the image of f - g.
 *   dual       — M_n(X*) = CB(X, M_n) through the cb-norm machinery.
 *   min        — smallest operator-space structure with the same level-1
 *                norms: scalar matrices of functional values below, the
 *                parent norm above.
 */

#include <numeric>

#include "opspace/maps.hpp"

namespace opspace {

/// Full matrix space M_n with its matrix-unit basis (row-major coordinate
/// order E_11, E_12, ..., E_nn).
inline OSpace matrix_space(int n) {
    if (n < 1) throw invalid_input("matrix_space: n must be >= 1");
    std::vector<CMat> units;
    units.reserve(n * n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) units.push_back(CMat::unit(n, n, i, j));
    return make_concrete(std::move(units), "M" + std::to_string(n));
}

// ---------------------------------------------------------------------------
// Product
// ---------------------------------------------------------------------------

struct Product {
    OSpace space;
    std::vector<OSpace> parts;
    std::vector<OSMap> projections; // complete contractions
    std::vector<OSMap> inclusions;  // complete isometries
};

inline Product product(const std::vector<OSpace>& parts) {
    Product out;
    out.parts = parts;
    if (parts.empty()) {
        out.space = zero_space();
        return out;
    }
    int dim = 0;
    bool all_concrete = true;
    bool any_invalid = false;
    for (const OSpace& p : parts) {
        if (!p.valid()) any_invalid = true;
        else {
            dim += p.dim();
            if (!p.has_concrete()) all_concrete = false;
        }
    }
    if (any_invalid) throw invalid_input("product: empty space handle");

    auto d = std::make_shared<detail::OSpaceData>();
    d->kind = SpaceKind::product;
    d->dim = dim;
    d->parts = parts;
    {
        std::string lab = "prod(";
        for (size_t i = 0; i < parts.size(); ++i)
            lab += (i ? "," : "") + parts[i].label();
        d->label = lab + ")";
    }
    nlohmann::json pr = nlohmann::json::array();
    for (const OSpace& p : parts) pr.push_back(p.data().recipe);
    d->recipe = {{"kind", "product"}, {"parts", std::move(pr)}};

    std::vector<int> offset(parts.size() + 1, 0);
    for (size_t i = 0; i < parts.size(); ++i)
        offset[i + 1] = offset[i] + parts[i].dim();

    if (all_concrete && dim > 0) {
        // Block-diagonal presentation: the representation of a level-n
        // element is permutation-similar to the direct sum of the component
        // representations, so its operator norm is exactly the max.
        int amb = 0;
        std::vector<int> aoff(parts.size() + 1, 0);
        for (size_t i = 0; i < parts.size(); ++i) {
            if (parts[i].dim() > 0) amb += parts[i].data().ambient;
            aoff[i + 1] = amb;
        }
        std::vector<CMat> basis;
        basis.reserve(dim);
        for (size_t i = 0; i < parts.size(); ++i) {
            const detail::OSpaceData& pd = parts[i].data();
            for (int s = 0; s < pd.dim; ++s) {
                CMat b(amb, amb);
                for (int r = 0; r < pd.ambient; ++r)
                    for (int c = 0; c < pd.ambient; ++c)
                        b(aoff[i] + r, aoff[i] + c) = pd.basis[s](r, c);
                basis.push_back(std::move(b));
            }
        }
        detail::attach_presentation(*d, std::move(basis), "product");
    } else {
        // Generic max oracle over the parts.
        std::vector<OSpace> ps = parts;
        d->norm_fn = [ps, offset](const LevelElement& e, const NormBudget& b) {
            Interval acc = Interval::exactly(0.0);
            for (size_t i = 0; i < ps.size(); ++i) {
                if (ps[i].dim() == 0) continue;
                LevelElement part(e.level, ps[i].dim());
                for (int r = 0; r < e.level; ++r)
                    for (int c = 0; c < e.level; ++c)
                        for (int s = 0; s < ps[i].dim(); ++s)
                            part.at(r, c, s) = e.at(r, c, offset[i] + s);
                acc = interval_max(acc, level_norm(ps[i], part, b));
            }
            return acc;
        };
        d->kappa.resize(dim);
        for (size_t i = 0; i < parts.size(); ++i)
            for (int s = 0; s < parts[i].dim(); ++s)
                d->kappa[offset[i] + s] = parts[i].kappa()[s];
    }
    out.space = OSpace::from_data(std::move(d));

    for (size_t i = 0; i < parts.size(); ++i) {
        CMat prj(parts[i].dim(), dim), inc(dim, parts[i].dim());
        for (int s = 0; s < parts[i].dim(); ++s) {
            prj(s, offset[i] + s) = 1.0;
            inc(offset[i] + s, s) = 1.0;
        }
        out.projections.push_back(make_map(out.space, parts[i], std::move(prj),
                                           "pi_" + std::to_string(i), 1.0));
        out.inclusions.push_back(make_map(parts[i], out.space, std::move(inc),
                                          "iota_" + std::to_string(i), 1.0));
    }
    return out;
}

/// Mediating map <f_i>: T -> prod X_i for a cone of maps with common domain.
/// Completely contractive families induce a completely contractive map.
inline OSMap product_map(const Product& p, const std::vector<OSMap>& cone) {
    if (cone.size() != p.parts.size())
        throw invalid_input("product_map: cone size mismatch");
    if (cone.empty()) throw invalid_input("product_map: empty cone");
    const OSpace& t = cone[0].dom;
    CMat m(p.space.dim(), t.dim());
    int row = 0;
    std::optional<double> hint = 0.0;
    for (size_t i = 0; i < cone.size(); ++i) {
        if (cone[i].dom.share() != t.share())
            throw invalid_input("product_map: cone legs have different domains");
        if (cone[i].cod.share() != p.parts[i].share())
            throw invalid_input("product_map: leg codomain is not the matching part");
        for (int s = 0; s < cone[i].cod.dim(); ++s, ++row)
            for (int c = 0; c < t.dim(); ++c) m(row, c) = cone[i].coeff(s, c);
        if (hint && cone[i].cb_upper)
            hint = std::max(*hint, *cone[i].cb_upper);
        else
            hint.reset();
    }
    return make_map(t, p.space, std::move(m), "<cone>", hint);
}

// ---------------------------------------------------------------------------
// Coproduct
// ---------------------------------------------------------------------------

struct Coproduct {
    OSpace space;
    std::vector<OSpace> parts;
    std::vector<OSMap> inclusions;  // complete isometries
    std::vector<OSMap> projections; // complete contractions
};

inline Coproduct coproduct(const std::vector<OSpace>& parts) {
    Coproduct out;
    out.parts = parts;
    if (parts.empty()) {
        out.space = zero_space();
        return out;
    }
    int dim = 0;
    bool all_concrete = true;
    for (const OSpace& p : parts) {
        if (!p.valid()) throw invalid_input("coproduct: empty space handle");
        dim += p.dim();
        if (!p.has_concrete()) all_concrete = false;
    }
    std::vector<int> offset(parts.size() + 1, 0);
    for (size_t i = 0; i < parts.size(); ++i)
        offset[i + 1] = offset[i] + parts[i].dim();

    auto d = std::make_shared<detail::OSpaceData>();
    d->kind = SpaceKind::coproduct;
    d->dim = dim;
    d->parts = parts;
    {
        std::string lab = "coprod(";
        for (size_t i = 0; i < parts.size(); ++i)
            lab += (i ? "," : "") + parts[i].label();
        d->label = lab + ")";
    }
    nlohmann::json pr = nlohmann::json::array();
    for (const OSpace& p : parts) pr.push_back(p.data().recipe);
    d->recipe = {{"kind", "coproduct"}, {"parts", std::move(pr)}};
    d->kappa.resize(dim);
    for (size_t i = 0; i < parts.size(); ++i)
        for (int s = 0; s < parts[i].dim(); ++s)
            d->kappa[offset[i] + s] = parts[i].kappa()[s];

    std::vector<OSpace> ps = parts;
    d->norm_fn = [ps, offset, all_concrete](const LevelElement& e,
                                            const NormBudget& bud) {
        // split into component elements
        std::vector<LevelElement> comp;
        comp.reserve(ps.size());
        for (size_t i = 0; i < ps.size(); ++i) {
            LevelElement part(e.level, ps[i].dim());
            for (int r = 0; r < e.level; ++r)
                for (int c = 0; c < e.level; ++c)
                    for (int s = 0; s < ps[i].dim(); ++s)
                        part.at(r, c, s) = e.at(r, c, offset[i] + s);
            comp.push_back(std::move(part));
        }
        std::vector<Interval> ni(ps.size());
        for (size_t i = 0; i < ps.size(); ++i)
            ni[i] = ps[i].dim() ? level_norm(ps[i], comp[i], bud)
                                : Interval::exactly(0.0);
        Interval sum = Interval::exactly(0.0);
        for (const Interval& v : ni) sum = interval_add(sum, v);
        if (e.level == 1) return sum; // l1 formula, exact at level 1
        double lo = 0.0;
        for (const Interval& v : ni) lo = std::max(lo, v.lo);
        if (all_concrete) {
            // Pair with completely contractive families: embed each part's
            // representation isometrically into a common M_K and sum.
            int kdim = 1;
            for (const OSpace& p : ps)
                if (p.dim() > 0) kdim = std::max(kdim, p.data().ambient);
            Rng rng(mix_seed(bud.seed, 0xc0b70d));
            const int samples = std::max(1, bud.restarts);
            for (int t = 0; t < samples; ++t) {
                CMat acc(e.level * kdim, e.level * kdim);
                for (size_t i = 0; i < ps.size(); ++i) {
                    if (ps[i].dim() == 0) continue;
                    const detail::OSpaceData& pd = ps[i].data();
                    CMat v = rng.unitary(kdim);
                    CMat iso(kdim, pd.ambient);
                    for (int r = 0; r < kdim; ++r)
                        for (int c = 0; c < pd.ambient; ++c) iso(r, c) = v(r, c);
                    CMat rep = detail::concrete_rep(pd.basis, pd.ambient, comp[i]);
                    // conjugate each block by the isometry
                    CMat big = kron(CMat::identity(e.level), iso) * rep *
                               kron(CMat::identity(e.level), adjoint(iso));
                    acc += big;
                }
                lo = std::max(lo, spectral_norm(acc));
            }
        }
        lo = std::min(lo, sum.hi);
        return Interval::approx(lo, sum.hi);
    };
    out.space = OSpace::from_data(std::move(d));

    for (size_t i = 0; i < parts.size(); ++i) {
        CMat inc(dim, parts[i].dim()), prj(parts[i].dim(), dim);
        for (int s = 0; s < parts[i].dim(); ++s) {
            inc(offset[i] + s, s) = 1.0;
            prj(s, offset[i] + s) = 1.0;
        }
        out.inclusions.push_back(make_map(parts[i], out.space, std::move(inc),
                                          "iota_" + std::to_string(i), 1.0));
        out.projections.push_back(make_map(out.space, parts[i], std::move(prj),
                                           "pi_" + std::to_string(i), 1.0));
    }
    return out;
}

/// Mediating map [f_i]: coprod X_i -> T for a cocone with common codomain.
/// For the l1 coproduct, cb([f_i]) = max_i cb(f_i).
inline OSMap coproduct_map(const Coproduct& cp, const std::vector<OSMap>& cocone) {
    if (cocone.size() != cp.parts.size())
        throw invalid_input("coproduct_map: cocone size mismatch");
    if (cocone.empty()) throw invalid_input("coproduct_map: empty cocone");
    const OSpace& t = cocone[0].cod;
    CMat m(t.dim(), cp.space.dim());
    int col = 0;
    std::optional<double> hint = 0.0;
    for (size_t i = 0; i < cocone.size(); ++i) {
        if (cocone[i].cod.share() != t.share())
            throw invalid_input("coproduct_map: cocone legs have different codomains");
        if (cocone[i].dom.share() != cp.parts[i].share())
            throw invalid_input("coproduct_map: leg domain is not the matching part");
        for (int s = 0; s < cocone[i].dom.dim(); ++s, ++col)
            for (int r = 0; r < t.dim(); ++r) m(r, col) = cocone[i].coeff(r, s);
        if (hint && cocone[i].cb_upper)
            hint = std::max(*hint, *cocone[i].cb_upper);
        else
            hint.reset();
    }
    return make_map(cp.space, t, std::move(m), "[cocone]", hint);
}

// ---------------------------------------------------------------------------
// Equaliser
// ---------------------------------------------------------------------------

struct Equaliser {
    OSpace space;   // subspace of the common domain where f = g
    OSMap inclusion; // complete isometry into the domain
    OSMap f, g;
};

inline Equaliser equaliser(const OSMap& f, const OSMap& g) {
    if (f.dom.share() != g.dom.share() || f.cod.share() != g.cod.share())
        throw invalid_input("equaliser: maps must share both endpoints");
    CMat diff = f.coeff - g.coeff;
    CMat ker = null_space(diff); // dom.dim x k, orthonormal columns
    Equaliser out;
    out.f = f;
    out.g = g;
    if (ker.empty() || ker.cols() == 0) {
        out.space = zero_space();
        out.inclusion =
            make_map(out.space, f.dom, CMat(f.dom.dim(), 0), "equaliser incl", 1.0);
        return out;
    }
    std::vector<std::vector<cplx>> gens(ker.cols());
    for (int t = 0; t < ker.cols(); ++t) {
        gens[t].resize(f.dom.dim());
        for (int s = 0; s < f.dom.dim(); ++s) gens[t][s] = ker(s, t);
    }
    out.space = subspace(f.dom, gens, "eq(" + f.label + "," + g.label + ")");
    out.inclusion = make_map(out.space, f.dom, ker, "equaliser incl", 1.0);
    return out;
}

// ---------------------------------------------------------------------------
// Quotient
// ---------------------------------------------------------------------------

struct Quotient {
    OSpace space;
    OSMap projection; // complete quotient map (a complete contraction)
};

/**
 * quotient — X / span(kernel vectors), with the fiber-minimum matricial
 * norms. Needs a concrete presentation of X (directly, or through an
 * already-built quotient, which is collapsed by the third isomorphism).
 */
inline Quotient quotient(const OSpace& x, const std::vector<std::vector<cplx>>& kernel) {
    const detail::OSpaceData& xd = x.data();
    for (const auto& v : kernel)
        if (static_cast<int>(v.size()) != xd.dim)
            throw invalid_input("quotient: kernel vector has wrong dimension");

    // Resolve a concrete base space and the kernel expressed in its
    // coordinates, collapsing chains of quotients.
    OSpace base = x;
    CMat to_base = CMat::identity(xd.dim); // base.dim x x.dim section-side map
    std::vector<CMat> extra_kernel;        // kernel of x itself inside base
    if (!x.has_concrete()) {
        if (x.kind() == SpaceKind::quotient && x.data().parts.size() >= 1 &&
            x.data().aux.size() >= 2) {
            base = x.data().parts[0];
            const CMat& kmat = x.data().aux[0]; // base.dim x k1
            const CMat& sec = x.data().aux[1];  // base.dim x x.dim
            to_base = sec;
            for (int t = 0; t < kmat.cols(); ++t) {
                CMat col(kmat.rows(), 1);
                for (int r = 0; r < kmat.rows(); ++r) col(r, 0) = kmat(r, t);
                extra_kernel.push_back(std::move(col));
            }
        } else {
            throw unsupported_input(
                "quotient: base space has no concrete presentation to certify "
                "fiber minima");
        }
    }
    const detail::OSpaceData& bd = base.data();
    const int db = bd.dim;

    // Combined kernel in base coordinates.
    std::vector<CMat> cols = extra_kernel;
    for (const auto& v : kernel) {
        CMat col(db, 1);
        for (int r = 0; r < db; ++r) {
            cplx acc = 0;
            for (int s = 0; s < xd.dim; ++s) acc += to_base(r, s) * v[s];
            col(r, 0) = acc;
        }
        cols.push_back(std::move(col));
    }
    CMat kall(db, static_cast<int>(cols.size()));
    for (size_t t = 0; t < cols.size(); ++t)
        for (int r = 0; r < db; ++r) kall(r, static_cast<int>(t)) = cols[t](r, 0);
    CMat kbasis = kall.cols() ? orth(kall) : CMat(db, 0); // orthonormal span
    const int kdim = kbasis.cols();
    const int qdim = db - kdim;

    Quotient out;
    if (qdim == 0) {
        out.space = zero_space();
        out.projection = make_map(x, out.space, CMat(0, xd.dim), "quot proj", 1.0);
        return out;
    }

    CMat section = kdim ? orth_complement(kbasis) : CMat::identity(db);
    // section: db x qdim, orthonormal columns spanning the coordinate
    // complement of the kernel. Quotient coordinates of a base vector:
    // t = section^* (v) after removing the kernel component; since the
    // columns of [kbasis section] are orthonormal, t = section^* v.
    auto d = std::make_shared<detail::OSpaceData>();
    d->kind = SpaceKind::quotient;
    d->dim = qdim;
    d->label = xd.label + "/N";
    d->parts = {base, x};
    d->aux = {kbasis, section};
    {
        nlohmann::json kv = nlohmann::json::array();
        for (const auto& v : kernel) kv.push_back(detail::cvector_json(v));
        d->recipe = {{"kind", "quotient"}, {"base", xd.recipe}, {"kernel", std::move(kv)}};
    }
    // kappa: quotient coordinate functionals pull back to base functionals
    // vanishing on the kernel; the dual pairing norm is unchanged.
    d->kappa.resize(qdim);
    for (int s = 0; s < qdim; ++s) {
        CMat g(bd.ambient, bd.ambient);
        for (int c = 0; c < db; ++c) {
            const cplx w = std::conj(section(c, s));
            if (w == cplx{}) continue;
            CMat col(bd.ambient * bd.ambient, 1);
            for (int i = 0; i < bd.ambient * bd.ambient; ++i)
                col(i, 0) = bd.dual_stack(i, c);
            g += w * unvec(col, bd.ambient, bd.ambient);
        }
        d->kappa[s] = trace_norm(g);
    }
    {
        OSpace bspace = base;
        CMat sec = section, kb = kbasis;
        d->norm_fn = [bspace, sec, kb](const LevelElement& e, const NormBudget& bud) {
            const detail::OSpaceData& bdd = bspace.data();
            // representative in base coordinates, then ambient representation
            LevelElement x0(e.level, bdd.dim);
            for (int i = 0; i < e.level; ++i)
                for (int j = 0; j < e.level; ++j)
                    for (int r = 0; r < bdd.dim; ++r) {
                        cplx acc = 0;
                        for (int s = 0; s < e.dim; ++s)
                            acc += sec(r, s) * e.at(i, j, s);
                        x0.at(i, j, r) = acc;
                    }
            CMat target = detail::concrete_rep(bdd.basis, bdd.ambient, x0);
            std::vector<CMat> dirs;
            dirs.reserve(static_cast<size_t>(kb.cols()) * e.level * e.level);
            for (int t = 0; t < kb.cols(); ++t)
                for (int i = 0; i < e.level; ++i)
                    for (int j = 0; j < e.level; ++j) {
                        LevelElement dk(e.level, bdd.dim);
                        for (int r = 0; r < bdd.dim; ++r) dk.at(i, j, r) = kb(r, t);
                        dirs.push_back(
                            detail::concrete_rep(bdd.basis, bdd.ambient, dk));
                    }
            MinBudget mb{bud.restarts, bud.iterations, mix_seed(bud.seed, 0x9077)};
            AffineMinResult r = min_spectral_over_affine(target, dirs, mb);
            return r.value;
        };
    }
    out.space = OSpace::from_data(std::move(d));

    // projection X -> X/N in x-coordinates: quotient coords of the class of
    // a base representative.
    CMat proj(qdim, xd.dim);
    for (int s = 0; s < qdim; ++s)
        for (int c = 0; c < xd.dim; ++c) {
            cplx acc = 0;
            for (int r = 0; r < db; ++r)
                acc += std::conj(section(r, s)) * to_base(r, c);
            proj(s, c) = acc;
        }
    out.projection = make_map(x, out.space, std::move(proj), "quot proj", 1.0);
    return out;
}

// ---------------------------------------------------------------------------
// Coequaliser
// ---------------------------------------------------------------------------

struct Coequaliser {
    OSpace space;
    OSMap projection;
    OSMap f, g;
};

inline Coequaliser coequaliser(const OSMap& f, const OSMap& g) {
    if (f.dom.share() != g.dom.share() || f.cod.share() != g.cod.share())
        throw invalid_input("coequaliser: maps must share both endpoints");
    CMat diff = f.coeff - g.coeff; // cod.dim x dom.dim
    CMat img = orth(diff);         // orthonormal basis of the image
    std::vector<std::vector<cplx>> gens(img.cols());
    for (int t = 0; t < img.cols(); ++t) {
        gens[t].resize(f.cod.dim());
        for (int s = 0; s < f.cod.dim(); ++s) gens[t][s] = img(s, t);
    }
    Quotient q = quotient(f.cod, gens);
    Coequaliser out;
    out.space = q.space;
    out.projection = q.projection;
    out.f = f;
    out.g = g;
    return out;
}

// ---------------------------------------------------------------------------
// Dual and minimal quantization
// ---------------------------------------------------------------------------

/**
 * dual — the operator-space dual X*: a level-n grid of functionals is normed
 * as the completely bounded norm of the induced map X -> M_n.
 */
inline OSpace dual(const OSpace& x) {
    const detail::OSpaceData& xd = x.data();
    if (xd.dim == 0) return zero_space();
    auto d = std::make_shared<detail::OSpaceData>();
    d->kind = SpaceKind::dual;
    d->dim = xd.dim;
    d->label = xd.label + "*";
    d->parts = {x};
    d->recipe = {{"kind", "dual"}, {"base", xd.recipe}};
    d->kappa.resize(xd.dim);
    for (int s = 0; s < xd.dim; ++s)
        d->kappa[s] = level_norm(x, basis_element(x, s)).hi;
    OSpace xs = x;
    d->norm_fn = [xs](const LevelElement& e, const NormBudget& bud) {
        OSpace mn = matrix_space(e.level);
        CMat coeff(e.level * e.level, xs.dim());
        for (int i = 0; i < e.level; ++i)
            for (int j = 0; j < e.level; ++j)
                for (int s = 0; s < xs.dim(); ++s)
                    coeff(i * e.level + j, s) = e.at(i, j, s);
        OSMap u = make_map(xs, mn, std::move(coeff), "functional grid");
        CbResult cb = cb_norm(u, bud);
        return cb.value;
    };
    return OSpace::from_data(std::move(d));
}

/**
 * min_quantization — min(X): same level-1 norms, smallest matricial norms.
 * Below: scalar matrices of values of certified-contractive functionals;
 * above: the norms of X itself.
 */
inline OSpace min_quantization(const OSpace& x) {
    const detail::OSpaceData& xd = x.data();
    if (xd.dim == 0) return zero_space();
    auto d = std::make_shared<detail::OSpaceData>();
    d->kind = SpaceKind::min_quant;
    d->dim = xd.dim;
    d->label = "min(" + xd.label + ")";
    d->parts = {x};
    d->recipe = {{"kind", "min"}, {"base", xd.recipe}};
    d->kappa = xd.kappa; // functionals keep their norms at level 1
    OSpace xs = x;
    d->norm_fn = [xs](const LevelElement& e, const NormBudget& bud) {
        LevelElement lifted = e;
        Interval nx = level_norm(xs, lifted, bud);
        if (e.level == 1) return nx;
        // lower bound: scalar matrices u_phi([x_ij]) = [phi(x_ij)] for
        // functionals phi certified contractive by their cb norm.
        OSpace scalars = matrix_space(1);
        Rng rng(mix_seed(bud.seed, 0x317f));
        double lo = 0.0;
        const int samples = std::max(1, bud.restarts) + xs.dim();
        for (int t = 0; t < samples; ++t) {
            std::vector<cplx> phi(xs.dim());
            if (t < xs.dim())
                phi[t] = 1.0; // coordinate functionals first
            else
                for (auto& c : phi) c = rng.cgauss();
            CMat coeff(1, xs.dim());
            for (int s = 0; s < xs.dim(); ++s) coeff(0, s) = phi[s];
            OSMap u = make_map(xs, scalars, std::move(coeff), "phi");
            double nf = 0.0;
            try {
                nf = cb_norm(u, bud).value.hi;
            } catch (const unsupported_input&) {
                continue;
            }
            if (!(nf > 1e-12)) continue;
            CMat vals(e.level, e.level);
            for (int i = 0; i < e.level; ++i)
                for (int j = 0; j < e.level; ++j) {
                    cplx acc = 0;
                    for (int s = 0; s < xs.dim(); ++s)
                        acc += phi[s] * e.at(i, j, s);
                    vals(i, j) = acc / nf;
                }
            lo = std::max(lo, spectral_norm(vals));
        }
        lo = std::min(lo, nx.hi);
        return Interval::approx(lo, nx.hi);
    };
    return OSpace::from_data(std::move(d));
}

// ---------------------------------------------------------------------------
// Universal-property verification
// ---------------------------------------------------------------------------

struct ConeReport {
    std::string kind;
    double residual_commute = 0.0;
    double residual_unique = 0.0;
    int trials = 0;
    uint64_t seed = 0;
    bool ok = true;
};

namespace detail {

inline double coeff_residual(const CMat& a, const CMat& b) { return max_abs(a - b); }

} // namespace detail

/// Product cones: random legs f_i: T -> X_i; the tupled map must commute
/// with the projections and be the unique such map.
inline ConeReport verify_universal(const Product& p, int trials, uint64_t seed) {
    ConeReport rep;
    rep.kind = "product";
    rep.trials = trials;
    rep.seed = seed;
    Rng rng(mix_seed(seed, 0x9009e1));
    const int dim = p.space.dim();
    for (int t = 0; t < trials; ++t) {
        const int dt = 1 + static_cast<int>(rng.uniform() * 3);
        // random legs
        CMat stacked(dim, dt);
        std::vector<CMat> legs;
        int row = 0;
        for (size_t i = 0; i < p.parts.size(); ++i) {
            CMat fi = rng.gaussian(p.parts[i].dim(), dt);
            for (int s = 0; s < fi.rows(); ++s, ++row)
                for (int c = 0; c < dt; ++c) stacked(row, c) = fi(s, c);
            legs.push_back(std::move(fi));
        }
        for (size_t i = 0; i < p.parts.size(); ++i)
            rep.residual_commute =
                std::max(rep.residual_commute,
                         detail::coeff_residual(p.projections[i].coeff * stacked,
                                                legs[i]));
        // uniqueness: solving the projection equations recovers the map
        CMat big(dim, dim);
        int r0 = 0;
        for (size_t i = 0; i < p.parts.size(); ++i)
            for (int s = 0; s < p.parts[i].dim(); ++s, ++r0)
                for (int c = 0; c < dim; ++c)
                    big(r0, c) = p.projections[i].coeff(s, c);
        CMat recovered = lsq_solve(big, stacked);
        rep.residual_unique = std::max(rep.residual_unique,
                                       detail::coeff_residual(recovered, stacked));
    }
    rep.ok = rep.residual_commute <= 1e-9 && rep.residual_unique <= 1e-9;
    return rep;
}

/// Coproduct cocones: random legs f_i: X_i -> T; the copaired map must
/// restrict to the legs along the inclusions and be unique.
inline ConeReport verify_universal(const Coproduct& cp, int trials, uint64_t seed) {
    ConeReport rep;
    rep.kind = "coproduct";
    rep.trials = trials;
    rep.seed = seed;
    Rng rng(mix_seed(seed, 0x9009e2));
    const int dim = cp.space.dim();
    for (int t = 0; t < trials; ++t) {
        const int dt = 1 + static_cast<int>(rng.uniform() * 3);
        CMat paired(dt, dim);
        std::vector<CMat> legs;
        int col = 0;
        for (size_t i = 0; i < cp.parts.size(); ++i) {
            CMat fi = rng.gaussian(dt, cp.parts[i].dim());
            for (int s = 0; s < fi.cols(); ++s, ++col)
                for (int r = 0; r < dt; ++r) paired(r, col) = fi(r, s);
            legs.push_back(std::move(fi));
        }
        for (size_t i = 0; i < cp.parts.size(); ++i)
            rep.residual_commute =
                std::max(rep.residual_commute,
                         detail::coeff_residual(paired * cp.inclusions[i].coeff,
                                                legs[i]));
        // uniqueness: the inclusions jointly span, so the equations
        // m * iota_i = f_i determine m exactly.
        CMat all_inc(dim, dim);
        int c0 = 0;
        for (size_t i = 0; i < cp.parts.size(); ++i)
            for (int s = 0; s < cp.parts[i].dim(); ++s, ++c0)
                for (int r = 0; r < dim; ++r)
                    all_inc(r, c0) = cp.inclusions[i].coeff(r, s);
        // solve m * all_inc = paired  <=>  all_inc^T m^T = paired^T
        CMat mt = lsq_solve(transpose(all_inc), transpose(paired));
        rep.residual_unique = std::max(
            rep.residual_unique, detail::coeff_residual(transpose(mt), paired));
    }
    rep.ok = rep.residual_commute <= 1e-9 && rep.residual_unique <= 1e-9;
    return rep;
}

/// Equaliser cones: maps h: T -> dom with f h = g h factor uniquely through
/// the inclusion.
inline ConeReport verify_universal(const Equaliser& eq, int trials, uint64_t seed) {
    ConeReport rep;
    rep.kind = "equaliser";
    rep.trials = trials;
    rep.seed = seed;
    Rng rng(mix_seed(seed, 0x9009e3));
    CMat diff = eq.f.coeff - eq.g.coeff;
    CMat ker = eq.inclusion.coeff; // dom.dim x k
    for (int t = 0; t < trials; ++t) {
        const int dt = 1 + static_cast<int>(rng.uniform() * 3);
        CMat h0 = rng.gaussian(eq.f.dom.dim(), dt);
        CMat h = ker.cols() ? CMat(ker * (adjoint(ker) * h0))
                            : CMat(eq.f.dom.dim(), dt); // project into E
        rep.residual_commute = std::max(
            rep.residual_commute, max_abs(diff * h)); // f h = g h by construction
        if (ker.cols() == 0) continue;
        CMat m = lsq_solve(ker, h);
        rep.residual_unique = std::max(rep.residual_unique,
                                       detail::coeff_residual(ker * m, h));
    }
    rep.ok = rep.residual_commute <= 1e-9 && rep.residual_unique <= 1e-9;
    return rep;
}

/// Quotient cocones: maps h: X -> T vanishing on the kernel factor uniquely
/// through the projection.
inline ConeReport verify_universal(const Quotient& q, int trials, uint64_t seed) {
    ConeReport rep;
    rep.kind = "quotient";
    rep.trials = trials;
    rep.seed = seed;
    Rng rng(mix_seed(seed, 0x9009e4));
    const OSpace& x = q.projection.dom;
    CMat proj = q.projection.coeff; // qdim x x.dim
    for (int t = 0; t < trials; ++t) {
        const int dt = 1 + static_cast<int>(rng.uniform() * 3);
        CMat h0 = rng.gaussian(dt, x.dim());
        // kill the kernel: subtract the component along ker(proj)
        CMat kerx = null_space(proj);
        CMat h = kerx.cols() ? CMat(h0 - (h0 * kerx) * adjoint(kerx)) : h0;
        if (kerx.cols())
            rep.residual_commute =
                std::max(rep.residual_commute, max_abs(h * kerx));
        // mediating map via the section: m = h on representatives
        CMat mt = lsq_solve(transpose(proj), transpose(h));
        CMat m = transpose(mt);
        rep.residual_unique = std::max(rep.residual_unique,
                                       detail::coeff_residual(m * proj, h));
    }
    rep.ok = rep.residual_commute <= 1e-9 && rep.residual_unique <= 1e-9;
    return rep;
}

inline ConeReport verify_universal(const Coequaliser& ce, int trials, uint64_t seed) {
    Quotient q{ce.space, ce.projection};
    ConeReport rep = verify_universal(q, trials, seed);
    rep.kind = "coequaliser";
    // additionally: the projection coequalizes f and g
    rep.residual_commute = std::max(
        rep.residual_commute,
        max_abs(ce.projection.coeff * ce.f.coeff -
                ce.projection.coeff * ce.g.coeff));
    rep.ok = rep.residual_commute <= 1e-9 && rep.residual_unique <= 1e-9;
    return rep;
}

} // namespace opspace
