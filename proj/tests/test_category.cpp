#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "opspace/category.hpp"
#include "opspace/ruan.hpp"
#include "oracles.hpp"

using namespace opspace;

namespace {

CMat unit(int n, int i, int j) { return CMat::unit(n, n, i, j); }

// row span: 1x2 "row" operators inside M2
OSpace row2() { return make_concrete({unit(2, 0, 0), unit(2, 0, 1)}, "R2"); }
// column span: 2x1 "column" operators inside M2
OSpace col2() { return make_concrete({unit(2, 0, 0), unit(2, 1, 0)}, "C2"); }

OSpace random_concrete(int dim, int amb, uint64_t seed, const std::string& label) {
    Rng rng(seed);
    while (true) {
        std::vector<CMat> basis;
        for (int s = 0; s < dim; ++s) basis.push_back(rng.gaussian(amb, amb));
        try {
            return make_concrete(std::move(basis), label);
        } catch (const invalid_input&) {
            continue; // dependent draw; retry
        }
    }
}

/// Abstract wrapper that answers with the wrapped space's norms but hides
/// the concrete presentation.
OSpace hide_presentation(const OSpace& inner) {
    auto d = std::make_shared<detail::OSpaceData>();
    d->kind = SpaceKind::concrete;
    d->dim = inner.dim();
    d->label = inner.label() + "-abstract";
    d->kappa = inner.kappa();
    OSpace cap = inner;
    d->norm_fn = [cap](const LevelElement& e, const NormBudget& b) {
        return level_norm(cap, e, b);
    };
    return OSpace::from_data(std::move(d));
}

NormBudget quick_budget(uint64_t seed = 1) {
    NormBudget b;
    b.restarts = 8;
    b.iterations = 60;
    b.seed = seed;
    return b;
}

LevelElement slice(const LevelElement& e, int offset, int dim) {
    LevelElement part(e.level, dim);
    for (int i = 0; i < e.level; ++i)
        for (int j = 0; j < e.level; ++j)
            for (int s = 0; s < dim; ++s) part.at(i, j, s) = e.at(i, j, offset + s);
    return part;
}

} // namespace

TEST_CASE("product of concrete spaces: norm is exactly the max of the parts") {
    OSpace x = row2();
    OSpace y = col2();
    OSpace z = random_concrete(2, 2, 91, "Z");
    Product p = product({x, y, z});
    REQUIRE(p.space.dim() == 6);
    CHECK(p.space.has_concrete());
    Rng rng(402);
    for (int level = 1; level <= 3; ++level) {
        for (int t = 0; t < 8; ++t) {
            LevelElement e = random_element(p.space, level, rng);
            Interval full = level_norm(p.space, e);
            Interval nx = level_norm(x, slice(e, 0, 2));
            Interval ny = level_norm(y, slice(e, 2, 2));
            Interval nz = level_norm(z, slice(e, 4, 2));
            REQUIRE(full.is_exact());
            double expect = std::max({nx.hi, ny.hi, nz.hi});
            CHECK(std::abs(full.hi - expect) <= 1e-12 * std::max(1.0, expect));
        }
    }
    RuanReport ruan = check_ruan(p.space, 3, 80, 7101);
    CHECK(ruan.ok);
}

TEST_CASE("product with abstract parts keeps the exact max formula") {
    OSpace x = row2();
    OSpace hidden = hide_presentation(random_concrete(2, 2, 92, "W"));
    Product p = product({x, hidden});
    CHECK_FALSE(p.space.has_concrete());
    Rng rng(403);
    for (int level = 1; level <= 2; ++level) {
        for (int t = 0; t < 6; ++t) {
            LevelElement e = random_element(p.space, level, rng);
            Interval full = level_norm(p.space, e);
            Interval nx = level_norm(x, slice(e, 0, 2));
            Interval nh = level_norm(hidden, slice(e, 2, 2));
            REQUIRE(full.is_exact());
            CHECK(std::abs(full.hi - std::max(nx.hi, nh.hi)) <= 1e-12);
        }
    }
    // structure maps still certify through the declared bounds
    CHECK(is_complete_contraction(p.projections[1], 1e-6, quick_budget()).value ==
          VerdictValue::holds);
    CHECK(is_complete_isometry(p.inclusions[0], 1e-6, quick_budget()).value ==
          VerdictValue::holds);
}

TEST_CASE("product structure maps and universal property") {
    OSpace x = row2();
    OSpace y = random_concrete(3, 2, 93, "Y");
    Product p = product({x, y});
    for (size_t i = 0; i < 2; ++i) {
        CHECK(is_complete_contraction(p.projections[i], 1e-6, quick_budget()).value ==
              VerdictValue::holds);
        CHECK(is_complete_isometry(p.inclusions[i], 1e-6, quick_budget()).value ==
              VerdictValue::holds);
    }
    ConeReport rep = verify_universal(p, 25, 515);
    CHECK(rep.ok);
    CHECK(rep.residual_commute <= 1e-12);
    CHECK(rep.residual_unique <= 1e-9);
    CHECK(rep.trials == 25);

    // explicit mediating map for a cone of scaled-contractive legs
    OSpace t = random_concrete(2, 2, 94, "T");
    Rng rng(515);
    std::vector<OSMap> legs;
    for (int i = 0; i < 2; ++i) {
        OSpace cod = (i == 0) ? x : y;
        OSMap f = make_map(t, cod, rng.gaussian(cod.dim(), t.dim()), "leg");
        double scale = cb_norm(f, quick_budget()).value.hi;
        legs.push_back(make_map(t, cod, (1.0 / scale) * f.coeff, "leg/scale", 1.0));
    }
    OSMap m = product_map(p, legs);
    REQUIRE(m.cb_upper.has_value());
    CHECK(*m.cb_upper == 1.0);
    for (int i = 0; i < 2; ++i)
        CHECK(max_abs(p.projections[i].coeff * m.coeff - legs[i].coeff) == 0.0);
    CHECK(is_complete_contraction(m, 1e-6, quick_budget()).value ==
          VerdictValue::holds);
}

TEST_CASE("coproduct: exact l1 norm at level one") {
    OSpace x = row2();
    OSpace y = col2();
    OSpace z = random_concrete(2, 3, 95, "Z3");
    Coproduct cp = coproduct({x, y, z});
    REQUIRE(cp.space.dim() == 6);
    Rng rng(404);
    for (int t = 0; t < 12; ++t) {
        LevelElement e = random_element(cp.space, 1, rng);
        Interval full = level_norm(cp.space, e);
        double expect = level_norm(x, slice(e, 0, 2)).hi +
                        level_norm(y, slice(e, 2, 2)).hi +
                        level_norm(z, slice(e, 4, 2)).hi;
        REQUIRE(full.is_exact());
        CHECK(std::abs(full.hi - expect) <= 1e-12 * std::max(1.0, expect));
    }
}

TEST_CASE("coproduct: bracketed norms at higher levels, isometric inclusions") {
    OSpace x = row2();
    OSpace y = col2();
    Coproduct cp = coproduct({x, y});
    Rng rng(405);
    for (int t = 0; t < 6; ++t) {
        LevelElement e = random_element(cp.space, 2, rng);
        Interval full = level_norm(cp.space, e);
        double nx = level_norm(x, slice(e, 0, 2)).hi;
        double ny = level_norm(y, slice(e, 2, 2)).hi;
        CHECK(full.lo <= full.hi + 1e-12);
        CHECK(std::abs(full.hi - (nx + ny)) <= 1e-12);          // triangle side
        CHECK(full.lo >= std::max(nx, ny) - 1e-12);             // projection side
    }
    // a single-part element collapses the bracket: the inclusion is isometric
    for (int t = 0; t < 4; ++t) {
        LevelElement ex = random_element(x, 2, rng);
        LevelElement emb(2, 4);
        for (int i = 0; i < 2; ++i)
            for (int j = 0; j < 2; ++j)
                for (int s = 0; s < 2; ++s) emb.at(i, j, s) = ex.at(i, j, s);
        Interval full = level_norm(cp.space, emb);
        Interval part = level_norm(x, ex);
        CHECK(std::abs(full.hi - part.hi) <= 1e-12);
        CHECK(std::abs(full.lo - part.hi) <= 1e-12);
    }
    for (size_t i = 0; i < 2; ++i) {
        CHECK(is_complete_isometry(cp.inclusions[i], 1e-6, quick_budget()).value ==
              VerdictValue::holds);
        CHECK(is_complete_contraction(cp.projections[i], 1e-6, quick_budget()).value ==
              VerdictValue::holds);
    }
}

TEST_CASE("coproduct copairing: commutes exactly, cb bound is the leg max") {
    OSpace x = row2();
    OSpace y = col2();
    Coproduct cp = coproduct({x, y});
    OSpace t = random_concrete(2, 2, 96, "T");
    Rng rng(516);
    std::vector<OSMap> legs;
    for (int i = 0; i < 2; ++i) {
        OSpace dom = (i == 0) ? x : y;
        OSMap f = make_map(dom, t, rng.gaussian(t.dim(), dom.dim()), "leg");
        double scale = cb_norm(f, quick_budget()).value.hi;
        legs.push_back(make_map(dom, t, (1.0 / scale) * f.coeff, "leg/scale", 1.0));
    }
    OSMap m = coproduct_map(cp, legs);
    REQUIRE(m.cb_upper.has_value());
    CHECK(*m.cb_upper == 1.0);
    for (int i = 0; i < 2; ++i)
        CHECK(max_abs(m.coeff * cp.inclusions[i].coeff - legs[i].coeff) == 0.0);
    ConeReport rep = verify_universal(cp, 25, 517);
    CHECK(rep.ok);
    CHECK(rep.residual_commute <= 1e-12);
    CHECK(rep.residual_unique <= 1e-9);
}

TEST_CASE("equaliser: kernel subspace with exact factorization") {
    OSpace x = random_concrete(4, 3, 97, "X4");
    OSpace t = random_concrete(2, 2, 98, "T2");
    Rng rng(406);
    CMat a = rng.gaussian(2, 4);
    // g differs from f on a rank-2 perturbation supported on two columns
    CMat b = a;
    b(0, 0) += 1.0;
    b(1, 1) += 2.0;
    OSMap f = make_map(x, t, a, "f");
    OSMap g = make_map(x, t, b, "g");
    Equaliser eq = equaliser(f, g);
    CHECK(eq.space.dim() == 2);
    CHECK(max_abs(f.coeff * eq.inclusion.coeff - g.coeff * eq.inclusion.coeff) <=
          1e-13);
    CHECK(is_complete_isometry(eq.inclusion, 1e-6, quick_budget()).value ==
          VerdictValue::holds);
    ConeReport rep = verify_universal(eq, 30, 518);
    CHECK(rep.ok);
    CHECK(rep.residual_commute <= 1e-12);
    CHECK(rep.residual_unique <= 1e-12);

    // equal maps: the equaliser is everything; disjoint maps: it is zero
    CHECK(equaliser(f, f).space.dim() == 4);
    OSMap h = make_map(x, t, CMat(a + CMat::identity(2) * rng.gaussian(2, 4)), "h");
    Equaliser ez = equaliser(make_map(x, t, rng.unitary(2) * rng.gaussian(2, 4), "u"),
                             make_map(x, t, CMat(rng.gaussian(2, 4) * 3.0), "v"));
    CHECK(ez.space.dim() <= 2); // generic difference has full rank 2
    (void)h;
}

TEST_CASE("quotient: certified fiber minima match a dense grid at level one") {
    OSpace x = random_concrete(3, 2, 99, "X3");
    Rng rng(407);
    std::vector<cplx> k = {rng.cgauss(), rng.cgauss(), rng.cgauss()};
    Quotient q = quotient(x, {k});
    REQUIRE(q.space.dim() == 2);
    const detail::OSpaceData& qd = q.space.data();
    const CMat& kbasis = qd.aux[0];
    const CMat& section = qd.aux[1];
    CMat krep(2, 2);
    for (int s = 0; s < 3; ++s) krep += kbasis(s, 0) * x.data().basis[s];
    for (int t = 0; t < 6; ++t) {
        LevelElement e = random_element(q.space, 1, rng);
        CMat rep0(2, 2);
        for (int r = 0; r < 3; ++r) {
            cplx c = section(r, 0) * e.at(0, 0, 0) + section(r, 1) * e.at(0, 0, 1);
            rep0 += c * x.data().basis[r];
        }
        double grid = oracles::grid_min_complex(
            [&](cplx c) { return spectral_norm(rep0 + c * krep); }, 4.0, 1e-4);
        Interval nq = level_norm(q.space, e);
        CHECK(nq.lo <= grid + 1e-9);      // grid value is an upper estimate
        CHECK(std::abs(nq.hi - grid) <= 1e-3);
    }
    CHECK(is_complete_contraction(q.projection, 1e-6, quick_budget()).value ==
          VerdictValue::holds);
    CHECK(is_complete_quotient(q.projection, 1e-3, quick_budget()).value ==
          VerdictValue::holds);
}

TEST_CASE("quotient of a quotient agrees with quotienting once") {
    OSpace x = random_concrete(4, 2, 100, "X4b");
    Rng rng(408);
    std::vector<cplx> k1 = {rng.cgauss(), rng.cgauss(), rng.cgauss(), rng.cgauss()};
    Quotient q1 = quotient(x, {k1});
    REQUIRE(q1.space.dim() == 3);
    std::vector<cplx> k2 = {rng.cgauss(), rng.cgauss(), rng.cgauss()};
    Quotient q2 = quotient(q1.space, {k2});
    REQUIRE(q2.space.dim() == 2);

    // lift k2 through the section of q1 and quotient the base directly
    const CMat& sec1 = q1.space.data().aux[1];
    std::vector<cplx> k2x(4);
    for (int r = 0; r < 4; ++r) {
        cplx acc = 0;
        for (int s = 0; s < 3; ++s) acc += sec1(r, s) * k2[s];
        k2x[r] = acc;
    }
    Quotient qd = quotient(x, {k1, k2x});
    REQUIRE(qd.space.dim() == 2);

    // the composite projection kills both kernels
    CMat comp = q2.projection.coeff * q1.projection.coeff;
    CMat kv1(4, 1), kv2(4, 1);
    for (int r = 0; r < 4; ++r) {
        kv1(r, 0) = k1[r];
        kv2(r, 0) = k2x[r];
    }
    CHECK(max_abs(comp * kv1) <= 1e-12);
    CHECK(max_abs(comp * kv2) <= 1e-12);

    // classes of the same base element carry the same norm
    for (int t = 0; t < 4; ++t) {
        LevelElement ex = random_element(x, t < 2 ? 1 : 2, rng);
        LevelElement via(ex.level, 2), direct(ex.level, 2);
        for (int i = 0; i < ex.level; ++i)
            for (int j = 0; j < ex.level; ++j)
                for (int s = 0; s < 2; ++s) {
                    cplx acc_v = 0, acc_d = 0;
                    for (int c = 0; c < 4; ++c) {
                        acc_v += comp(s, c) * ex.at(i, j, c);
                        acc_d += qd.projection.coeff(s, c) * ex.at(i, j, c);
                    }
                    via.at(i, j, s) = acc_v;
                    direct.at(i, j, s) = acc_d;
                }
        Interval nv = level_norm(q2.space, via);
        Interval nd = level_norm(qd.space, direct);
        CHECK(nv.lo <= nd.hi + 1e-6); // both enclose the same true value
        CHECK(nd.lo <= nv.hi + 1e-6);
        CHECK(std::abs(nv.hi - nd.hi) <= 1e-4);
    }
}

TEST_CASE("coequaliser: kills the difference, universal residuals vanish") {
    OSpace t = random_concrete(2, 2, 101, "Tc");
    OSpace x = random_concrete(4, 2, 102, "Xc");
    Rng rng(409);
    CMat a = rng.gaussian(4, 2), b = rng.gaussian(4, 2);
    OSMap f = make_map(t, x, a, "f");
    OSMap g = make_map(t, x, b, "g");
    Coequaliser ce = coequaliser(f, g);
    CHECK(ce.space.dim() == 2); // generic rank of f - g is 2
    CHECK(max_abs(ce.projection.coeff * (f.coeff - g.coeff)) <= 1e-12);
    ConeReport rep = verify_universal(ce, 25, 519);
    CHECK(rep.ok);
    CHECK(rep.residual_commute <= 1e-12);
    CHECK(rep.residual_unique <= 1e-12);
    // coequalising a map with itself changes nothing
    Coequaliser same = coequaliser(f, f);
    CHECK(same.space.dim() == 4);
}

TEST_CASE("dual of the row space behaves as the column space") {
    OSpace r2 = row2();
    OSpace c2 = col2();
    OSpace d = dual(r2);
    REQUIRE(d.dim() == 2);
    CHECK(d.kappa()[0] == Catch::Approx(1.0).margin(1e-9));
    CHECK(d.kappa()[1] == Catch::Approx(1.0).margin(1e-9));
    Rng rng(410);
    for (int t = 0; t < 5; ++t) {
        LevelElement e = random_element(d, 1, rng);
        double expect = std::sqrt(std::norm(e.at(0, 0, 0)) + std::norm(e.at(0, 0, 1)));
        Interval nd = level_norm(d, e, quick_budget());
        CHECK(nd.lo <= expect + 1e-9);
        CHECK(nd.hi >= expect - 1e-9);
        CHECK(nd.lo >= expect * (1 - 1e-6) - 1e-9);
    }
    for (int t = 0; t < 3; ++t) {
        LevelElement e = random_element(d, 2, rng);
        Interval nd = level_norm(d, e, quick_budget());
        Interval nc = level_norm(c2, e); // exact: the true dual value
        CHECK(nd.lo <= nc.hi + 1e-9);
        CHECK(nd.hi >= nc.lo - 1e-9);
        CHECK(nd.lo >= nc.lo * (1 - 1e-3) - 1e-9);
    }
}

TEST_CASE("minimal quantization: level one kept, matrix levels shrink soundly") {
    OSpace m1 = matrix_space(1);
    OSpace mn1 = min_quantization(m1);
    Rng rng(411);
    for (int level = 1; level <= 3; ++level) {
        LevelElement e = random_element(mn1, level, rng);
        Interval a = level_norm(mn1, e, quick_budget());
        Interval b = level_norm(m1, e);
        REQUIRE(b.is_exact());
        CHECK(std::abs(a.hi - b.hi) <= 1e-12);
        CHECK(std::abs(a.lo - b.hi) <= 1e-9); // scalars: min changes nothing
    }

    OSpace m2 = matrix_space(2);
    OSpace mn2 = min_quantization(m2);
    for (int t = 0; t < 6; ++t) {
        LevelElement e = random_element(mn2, 1, rng);
        Interval a = level_norm(mn2, e, quick_budget());
        Interval b = level_norm(m2, e);
        REQUIRE(a.is_exact());
        CHECK(std::abs(a.hi - b.hi) <= 1e-12);
    }
    // the unit grid sum E_ij x E_ij: parent norm 2, minimal norm 1
    LevelElement grid(2, 4);
    grid.at(0, 0, 0) = 1; // E11 in cell (0,0)
    grid.at(0, 1, 1) = 1; // E12 in cell (0,1)
    grid.at(1, 0, 2) = 1; // E21 in cell (1,0)
    grid.at(1, 1, 3) = 1; // E22 in cell (1,1)
    Interval parent = level_norm(m2, grid);
    CHECK(parent.hi == Catch::Approx(2.0).margin(1e-12));
    Interval small = level_norm(mn2, grid, quick_budget());
    CHECK(small.lo == Catch::Approx(1.0).margin(1e-9)); // certified functionals reach 1
    CHECK(small.hi <= 2.0 + 1e-12);                     // never exceeds the parent
}

TEST_CASE("categorical constructions answer deterministically") {
    OSpace x = random_concrete(3, 2, 103, "Xd");
    Quotient q = quotient(x, {{1.0, cplx(0, 1), 0.5}});
    OSpace d = dual(row2());
    Coproduct cp = coproduct({row2(), col2()});
    Rng rng(412);
    LevelElement eq_ = random_element(q.space, 2, rng);
    LevelElement ed = random_element(d, 2, rng);
    LevelElement ec = random_element(cp.space, 2, rng);
    NormBudget b = quick_budget(9);
    Interval q1 = level_norm(q.space, eq_, b);
    Interval d1 = level_norm(d, ed, b);
    Interval c1 = level_norm(cp.space, ec, b);
    Interval q2 = level_norm(q.space, eq_, b);
    Interval d2 = level_norm(d, ed, b);
    Interval c2 = level_norm(cp.space, ec, b);
    CHECK(q1.lo == q2.lo);
    CHECK(q1.hi == q2.hi);
    CHECK(d1.lo == d2.lo);
    CHECK(d1.hi == d2.hi);
    CHECK(c1.lo == c2.lo);
    CHECK(c1.hi == c2.hi);
}

TEST_CASE("categorical constructions reject malformed input") {
    OSpace x = random_concrete(3, 2, 104, "Xe");
    OSpace hidden = hide_presentation(x);
    CHECK_THROWS_AS(quotient(hidden, {{1.0, 0.0, 0.0}}), unsupported_input);
    CHECK_THROWS_AS(quotient(x, {{1.0, 0.0}}), invalid_input);
    Product p = product({x});
    CHECK_THROWS_AS(product_map(p, {}), invalid_input);
    OSMap f = make_map(x, x, CMat::identity(3), "f");
    OSpace y = random_concrete(3, 2, 105, "Ye");
    OSMap g = make_map(y, y, CMat::identity(3), "g");
    CHECK_THROWS_AS(equaliser(f, g), invalid_input);
    CHECK(product({}).space.dim() == 0);
    CHECK(coproduct({}).space.dim() == 0);
    // quotient by the whole space collapses to zero
    Quotient full = quotient(
        x, {{1., 0., 0.}, {0., 1., 0.}, {0., 0., 1.}});
    CHECK(full.space.dim() == 0);
    CHECK(level_norm(full.space, LevelElement(1, 0)).hi == 0.0);
}
