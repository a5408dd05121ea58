#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "opspace/category.hpp"
#include "opspace/tensor.hpp"
#include "oracles.hpp"

using namespace opspace;

namespace {

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

NormBudget quick_budget(uint64_t seed = 1) {
    NormBudget b;
    b.restarts = 8;
    b.iterations = 60;
    b.seed = seed;
    return b;
}

LevelElement random_level(int level, int dim, Rng& rng) {
    LevelElement e(level, dim);
    for (auto& v : e.coords) v = rng.cgauss();
    return e;
}

double max_coord_dev(const LevelElement& a, const LevelElement& b) {
    REQUIRE(a.level == b.level);
    REQUIRE(a.dim == b.dim);
    double worst = 0;
    for (size_t k = 0; k < a.coords.size(); ++k)
        worst = std::max(worst, std::abs(a.coords[k] - b.coords[k]));
    return worst;
}

} // namespace

TEST_CASE("tensor elements multiply levels, dimensions, and coordinates") {
    LevelElement x(2, 3), y(3, 2);
    Rng rng(11);
    for (auto& v : x.coords) v = rng.cgauss();
    for (auto& v : y.coords) v = rng.cgauss();
    LevelElement e = tensor_element(x, y);
    REQUIRE(e.level == 6);
    REQUIRE(e.dim == 6);
    // spot-check the product formula on every coordinate
    for (int i = 0; i < 2; ++i)
        for (int k = 0; k < 3; ++k)
            for (int j = 0; j < 2; ++j)
                for (int l = 0; l < 3; ++l)
                    for (int s = 0; s < 3; ++s)
                        for (int t = 0; t < 2; ++t)
                            CHECK(e.at(i * 3 + k, j * 3 + l, s * 2 + t) ==
                                  x.at(i, j, s) * y.at(k, l, t));
}

TEST_CASE("elementary tensors: the norm interval pins the product of factor norms") {
    double worst_ratio = 1.0;
    for (int trial = 0; trial < 10; ++trial) {
        Rng rng(1000 + trial);
        const int dx = 2 + static_cast<int>(rng.u64() % 2);
        const int dy = 2 + static_cast<int>(rng.u64() % 2);
        OSpace x = random_concrete(dx, 2, 17 + trial, "X");
        OSpace y = random_concrete(dy, 2, 91 + trial, "Y");
        OSpace t = proj_tensor(x, y);
        const int p = 1 + static_cast<int>(rng.u64() % 2);
        const int q = 1 + static_cast<int>(rng.u64() % 2);
        LevelElement xe = random_level(p, dx, rng);
        LevelElement ye = random_level(q, dy, rng);
        const double prod = level_norm(x, xe, quick_budget()).hi *
                            level_norm(y, ye, quick_budget()).hi;
        Interval tv = level_norm(t, tensor_element(xe, ye), quick_budget(50 + trial));
        // the product value must lie inside the certified interval
        CHECK(tv.lo <= prod * (1 + 1e-9));
        CHECK(prod <= tv.hi * (1 + 1e-9));
        worst_ratio = std::max(worst_ratio, tv.hi / std::max(tv.lo, 1e-300));
    }
    CHECK(worst_ratio <= 1.05);
}

TEST_CASE("zero tensor element has exact zero norm") {
    OSpace x = random_concrete(2, 2, 7, "X");
    OSpace y = random_concrete(3, 2, 8, "Y");
    OSpace t = proj_tensor(x, y);
    LevelElement z(2, 6);
    Interval nv = level_norm(t, z, quick_budget());
    REQUIRE(nv.is_exact());
    CHECK(nv.hi == 0.0);
}

TEST_CASE("tensoring with the scalar unit preserves every matricial norm") {
    OSpace x = random_concrete(3, 3, 555, "X");
    OSpace one = matrix_space(1);
    OSpace t = proj_tensor(one, x);
    LevelElement u(1, 1);
    u.at(0, 0, 0) = 1.0;
    for (int level = 1; level <= 3; ++level) {
        Rng rng(600 + level);
        LevelElement xe = random_level(level, 3, rng);
        Interval nx = level_norm(x, xe, quick_budget());
        Interval nt = level_norm(t, tensor_element(u, xe), quick_budget());
        CHECK(std::abs(nt.hi - nx.hi) <= 1e-9 * std::max(1.0, nx.hi));
        CHECK(std::abs(nt.lo - nx.lo) <= 1e-9 * std::max(1.0, nx.lo));
    }
}

TEST_CASE("tensor norms are deterministic for a fixed budget") {
    OSpace x = random_concrete(2, 2, 21, "X");
    OSpace y = random_concrete(2, 2, 22, "Y");
    OSpace t = proj_tensor(x, y);
    Rng rng(23);
    LevelElement e = random_level(2, 4, rng);
    Interval a = level_norm(t, e, quick_budget(99));
    Interval b = level_norm(t, e, quick_budget(99));
    CHECK(a.lo == b.lo);
    CHECK(a.hi == b.hi);
}

TEST_CASE("factorization witnesses realize the element and certify the bound") {
    OSpace x = random_concrete(2, 2, 31, "X");
    OSpace y = random_concrete(2, 2, 32, "Y");
    OSpace t = proj_tensor(x, y);
    Rng rng(33);
    // a rank-two combination, not an elementary tensor
    LevelElement e = tensor_element(random_level(2, 2, rng), random_level(1, 2, rng));
    LevelElement e2 = tensor_element(random_level(2, 2, rng), random_level(1, 2, rng));
    for (size_t k = 0; k < e.coords.size(); ++k) e.coords[k] += e2.coords[k];

    Factorization f = tensor_factorization(t, e, quick_budget(34));
    REQUIRE(f.alpha.rows() == e.level);
    REQUIRE(f.beta.cols() == e.level);
    REQUIRE(f.x.dim == 2);
    REQUIRE(f.y.dim == 2);

    // reassemble alpha (x (x) y) beta independently and compare coordinates
    double scale = 0;
    for (const auto& v : e.coords) scale = std::max(scale, std::abs(v));
    LevelElement mid = tensor_element(f.x, f.y);
    double worst = 0;
    for (int s = 0; s < e.dim; ++s) {
        CMat m(mid.level, mid.level);
        for (int i = 0; i < mid.level; ++i)
            for (int j = 0; j < mid.level; ++j) m(i, j) = mid.at(i, j, s);
        CMat r = f.alpha * m * f.beta;
        for (int i = 0; i < e.level; ++i)
            for (int j = 0; j < e.level; ++j)
                worst = std::max(worst, std::abs(r(i, j) - e.at(i, j, s)));
    }
    CHECK(worst <= 1e-8 * std::max(1.0, scale));
    CHECK(f.residual <= 1e-8 * std::max(1.0, scale));

    // the realized value is an upper bound consistent with the norm query
    Interval nv = level_norm(t, e, quick_budget(34));
    CHECK(f.value >= nv.lo * (1 - 1e-9));
    CHECK(f.value <= nv.hi * (1 + 1e-9));
}

TEST_CASE("sums of elementary tensors keep certified, reasonably tight intervals") {
    for (int lev = 1; lev <= 2; ++lev) {
        for (int trial = 0; trial < 4; ++trial) {
            Rng rng(4000 + 31 * lev + trial);
            OSpace x = random_concrete(2, 2, 300 + trial, "X");
            OSpace y = random_concrete(2, 2, 400 + trial, "Y");
            OSpace t = proj_tensor(x, y);
            LevelElement x1 = random_level(lev, 2, rng), y1 = random_level(lev, 2, rng);
            LevelElement x2 = random_level(lev, 2, rng), y2 = random_level(lev, 2, rng);
            LevelElement v = tensor_element(x1, y1);
            LevelElement v2 = tensor_element(x2, y2);
            for (size_t k = 0; k < v.coords.size(); ++k) v.coords[k] += v2.coords[k];
            const double sum_products =
                level_norm(x, x1, quick_budget()).hi * level_norm(y, y1, quick_budget()).hi +
                level_norm(x, x2, quick_budget()).hi * level_norm(y, y2, quick_budget()).hi;
            Interval nv = level_norm(t, v, quick_budget(500 + trial));
            // triangle inequality ceiling, with a small search margin
            CHECK(nv.hi <= sum_products * 1.05);
            CHECK(nv.lo <= sum_products * (1 + 1e-9));
            // the two certified sides stay within a modest factor
            CHECK(nv.hi <= 1.8 * std::max(nv.lo, 1e-300));
        }
    }
}

TEST_CASE("joint norm: zero map and scalar multiplication are exact") {
    OSpace x = random_concrete(2, 2, 41, "X");
    OSpace y = random_concrete(2, 2, 42, "Y");
    BilinMap zero = make_bilinear(x, y, x, CMat(2, 4), "zero");
    Interval nz = jcb_norm(zero, quick_budget());
    REQUIRE(nz.is_exact());
    CHECK(nz.hi == 0.0);

    OSpace one = matrix_space(1);
    CMat mult(1, 1);
    mult(0, 0) = 1.0;
    BilinMap scal = make_bilinear(one, one, one, mult, "scalar mult");
    Interval ns = jcb_norm(scal, quick_budget());
    CHECK(std::abs(ns.lo - 1.0) <= 1e-12);
    CHECK(std::abs(ns.hi - 1.0) <= 1e-12);
}

TEST_CASE("bilinear functional products agree with the product of cb norms") {
    OSpace x = random_concrete(2, 2, 51, "X");
    OSpace y = random_concrete(2, 2, 52, "Y");
    OSpace one = matrix_space(1);
    Rng rng(53);
    CMat phi(1, 2), psi(1, 2);
    for (int s = 0; s < 2; ++s) {
        phi(0, s) = rng.cgauss();
        psi(0, s) = rng.cgauss();
    }
    OSMap fphi = make_map(x, one, phi, "phi");
    OSMap fpsi = make_map(y, one, psi, "psi");
    Interval cphi = cb_norm(fphi, quick_budget()).value;
    Interval cpsi = cb_norm(fpsi, quick_budget()).value;

    CMat coeff(1, 4);
    for (int s = 0; s < 2; ++s)
        for (int t = 0; t < 2; ++t) coeff(0, s * 2 + t) = phi(0, s) * psi(0, t);
    BilinMap u = make_bilinear(x, y, one, coeff, "phi*psi");
    Interval ju = jcb_norm(u, quick_budget(54));

    // both intervals enclose the same quantity, the product of the cb norms
    Interval prod = Interval::approx(cphi.lo * cpsi.lo, cphi.hi * cpsi.hi);
    CHECK(interval_gap(ju, prod) <= 1e-9 * std::max(1.0, prod.hi));
}

TEST_CASE("linearization acts identically and keeps the same norm enclosure") {
    OSpace x = random_concrete(2, 2, 61, "X");
    OSpace y = random_concrete(2, 2, 62, "Y");
    OSpace z = random_concrete(2, 2, 63, "Z");
    Rng rng(64);
    CMat coeff(2, 4);
    for (int r = 0; r < 2; ++r)
        for (int c = 0; c < 4; ++c) coeff(r, c) = rng.cgauss();
    BilinMap u = make_bilinear(x, y, z, coeff, "u");
    OSMap ubar = linearize(u);

    for (int trial = 0; trial < 4; ++trial) {
        LevelElement xe = random_level(1 + trial % 2, 2, rng);
        LevelElement ye = random_level(1 + (trial / 2) % 2, 2, rng);
        LevelElement direct = bilin_apply(u, xe, ye);
        LevelElement lifted = apply_map(ubar, tensor_element(xe, ye));
        CHECK(max_coord_dev(direct, lifted) == 0.0);
    }

    Interval ju = jcb_norm(u, quick_budget(65));
    Interval cu = cb_norm(ubar, quick_budget(65)).value;
    CHECK(interval_gap(ju, cu) <= 1e-9 * std::max(1.0, cu.hi));

    // the tensor domain must be built from the same factor spaces
    CHECK_THROWS_AS(linearize(u, proj_tensor(y, x)), invalid_input);
}

TEST_CASE("tensor of maps acts elementwise and composes functorially") {
    OSpace x1 = random_concrete(2, 2, 71, "X1");
    OSpace x2 = random_concrete(2, 2, 72, "X2");
    OSpace x3 = random_concrete(2, 2, 73, "X3");
    OSpace y1 = random_concrete(2, 2, 74, "Y1");
    OSpace y2 = random_concrete(2, 2, 75, "Y2");
    OSpace y3 = random_concrete(2, 2, 76, "Y3");
    Rng rng(77);
    auto rmap = [&](const OSpace& a, const OSpace& b, const char* name) {
        return make_map(a, b, rng.gaussian(b.dim(), a.dim()), name);
    };
    OSMap f1 = rmap(x1, x2, "f1"), f2 = rmap(x2, x3, "f2");
    OSMap g1 = rmap(y1, y2, "g1"), g2 = rmap(y2, y3, "g2");

    OSMap fg1 = tensor_map(f1, g1);
    for (int trial = 0; trial < 3; ++trial) {
        LevelElement xe = random_level(1 + trial % 2, 2, rng);
        LevelElement ye = random_level(1 + trial % 2, 2, rng);
        LevelElement through = apply_map(fg1, tensor_element(xe, ye));
        LevelElement split = tensor_element(apply_map(f1, xe), apply_map(g1, ye));
        CHECK(max_coord_dev(through, split) <= 1e-12);
    }

    // (f2 (x) g2) o (f1 (x) g1) = (f2 o f1) (x) (g2 o g1) on coefficients
    OSMap fg2 = tensor_map(f2, g2);
    CMat lhs = fg2.coeff * fg1.coeff;
    CMat rhs = kron(f2.coeff * f1.coeff, g2.coeff * g1.coeff);
    CHECK(max_abs(lhs - rhs) <= 1e-12 * std::max(1.0, max_abs(rhs)));

    // identity (x) identity is the identity
    OSMap idid = tensor_map(identity_map(x1), identity_map(y1));
    CHECK(max_abs(idid.coeff - CMat::identity(4)) == 0.0);
}

TEST_CASE("monoidal coherence: unitors, associator, and symmetry") {
    OSpace x = random_concrete(2, 2, 801, "X");
    OSpace y = random_concrete(2, 2, 802, "Y");
    OSpace z = random_concrete(2, 2, 803, "Z");
    StructureMaps sm = structure_maps(x, y, z);
    Rng rng(804);

    // coordinate identities at level one
    LevelElement xe = random_level(1, 2, rng), ye = random_level(1, 2, rng);
    LevelElement ze = random_level(1, 2, rng);
    LevelElement u(1, 1);
    u.at(0, 0, 0) = 1.0;
    CHECK(max_coord_dev(apply_map(sm.left_unitor, tensor_element(u, xe)), xe) == 0.0);
    CHECK(max_coord_dev(apply_map(sm.right_unitor, tensor_element(xe, u)), xe) == 0.0);
    CHECK(max_coord_dev(apply_map(sm.symmetry, tensor_element(xe, ye)),
                        tensor_element(ye, xe)) == 0.0);
    LevelElement assoc_in = tensor_element(tensor_element(xe, ye), ze);
    LevelElement assoc_out = tensor_element(xe, tensor_element(ye, ze));
    // the map itself is exact; the reference product differs by one rounding
    // of (x*y)*z versus x*(y*z)
    CHECK(max_coord_dev(apply_map(sm.associator, assoc_in), assoc_in) == 0.0);
    CHECK(max_coord_dev(assoc_in, assoc_out) <= 1e-14);

    // symmetry is an involution
    StructureMaps sm_rev = structure_maps(y, x, z);
    CHECK(max_abs(sm_rev.symmetry.coeff * sm.symmetry.coeff - CMat::identity(4)) == 0.0);

    // hexagon: with identity associators, moving X past Y (x) Z in one step
    // equals moving it past Y and then past Z
    StructureMaps sm_x_yz = structure_maps(x, sm.yz, z);
    StructureMaps sm_xz = structure_maps(x, z, y);
    CMat step1 = kron(sm.symmetry.coeff, CMat::identity(2));          // (X Y) Z -> (Y X) Z
    CMat step2 = kron(CMat::identity(2), sm_xz.symmetry.coeff);       // Y (X Z) -> Y (Z X)
    CHECK(max_abs(sm_x_yz.symmetry.coeff - step2 * step1) == 0.0);

    // symmetry preserves norms at higher levels
    LevelElement v = random_level(2, 4, rng);
    Interval nv = level_norm(sm.xy, v, quick_budget(805));
    Interval nw = level_norm(sm.yx, apply_map(sm.symmetry, v), quick_budget(806));
    CHECK(interval_gap(nv, nw) <= 1e-9 * std::max(1.0, nv.hi));

    // all four coherence maps are certified complete isometries
    CHECK(is_complete_isometry(sm.left_unitor, 1e-6, quick_budget(901)).value ==
          VerdictValue::holds);
    CHECK(is_complete_isometry(sm.right_unitor, 1e-6, quick_budget(902)).value ==
          VerdictValue::holds);
    CHECK(is_complete_isometry(sm.symmetry, 1e-6, quick_budget(903), 8).value ==
          VerdictValue::holds);
    NormBudget assoc_budget = quick_budget(904);
    assoc_budget.level_cap = 2;
    CHECK(is_complete_isometry(sm.associator, 1e-6, assoc_budget, 4).value ==
          VerdictValue::holds);
}

TEST_CASE("quotient factors: tensored open balls map into open balls") {
    OSpace x = random_concrete(3, 3, 555, "X");
    OSpace y = random_concrete(2, 2, 556, "Y");
    Rng krng(42);
    std::vector<cplx> kv(3);
    for (auto& v : kv) v = krng.cgauss();
    Quotient q = quotient(x, {kv});
    OSpace txy = proj_tensor(x, y);
    OSpace tqy = proj_tensor(q.space, y);
    OSMap qid = tensor_map(q.projection, identity_map(y), txy, tqy);
    double worst = 0;
    for (int trial = 0; trial < 3; ++trial) {
        Rng rng(7000 + trial);
        LevelElement v = random_level(2, 6, rng);
        Interval nv = level_norm(txy, v, quick_budget(100 + trial));
        for (auto& c : v.coords) c *= 0.9 / nv.hi; // certified inside the open ball
        LevelElement w = apply_map(qid, v);
        worst = std::max(worst, level_norm(tqy, w, quick_budget(200 + trial)).hi);
    }
    CHECK(worst < 0.999);
}

TEST_CASE("tensor spaces expose their construction recipe") {
    OSpace x = random_concrete(2, 2, 91, "A");
    OSpace y = random_concrete(3, 2, 92, "B");
    OSpace t = proj_tensor(x, y);
    CHECK(t.data().recipe.value("kind", "") == "tensor");
    CHECK(t.data().recipe.contains("left"));
    CHECK(t.data().recipe.contains("right"));
    CHECK(t.label() == "A(x)B");
    CHECK(t.dim() == 6);
    CHECK_FALSE(t.has_concrete());
}
