#pragma once

/**
 * svd.hpp — singular value decomposition by one-sided Jacobi rotations.
 *
 * The toolkit's norms (spectral, trace), kernels, pseudo-inverses and
 * orthonormal bases all come from this one routine. One-sided Jacobi
 * orthogonalizes the columns of A directly: each rotation diagonalizes the
 * 2x2 Gram block of a column pair, so the Gram matrix is never formed and
 * small singular values keep close to full relative accuracy — the kernel
 * tolerances downstream (1e-12) depend on that. Dimensions in this library
 * stay below ~10^2, where the quadratic sweep cost is irrelevant.
 *
 * Contract: svd(A) returns U (m x r), sigma (r, descending) and V (n x r)
 * with r = min(m, n) and A = U·diag(sigma)·V^*. U and V have orthonormal
 * columns; columns of U belonging to zero singular values are completed to
 * an orthonormal family.
 */

#include <cmath>
#include <numeric>
#include <vector>

#include "opspace/matrix.hpp"

namespace opspace {

struct SVD {
    CMat U;
    std::vector<double> sigma;
    CMat V;
};

namespace detail {

/// One-sided Jacobi on W (m x n, m >= n); accumulates right rotations into V.
inline void jacobi_sweeps(CMat& W, CMat& V) {
    const int n = W.cols();
    const int m = W.rows();
    if (n < 2) return;
    const double tol = 1e-15;
    const int max_sweeps = 60;
    for (int sweep = 0; sweep < max_sweeps; ++sweep) {
        bool rotated = false;
        // Columns this far below the largest are numerically zero. Rotating
        // them runs denormal arithmetic where the Gram data has almost no
        // mantissa left, which silently rescales the accumulated V.
        double col2max = 0.0;
        for (int j = 0; j < n; ++j) {
            double s2 = 0.0;
            for (int i = 0; i < m; ++i) s2 += std::norm(W(i, j));
            col2max = std::max(col2max, s2);
        }
        const double floor2 = col2max * 1e-150;
        for (int p = 0; p < n - 1; ++p) {
            for (int q = p + 1; q < n; ++q) {
                double a = 0, b = 0;
                cplx g = 0;
                for (int i = 0; i < m; ++i) {
                    a += std::norm(W(i, p));
                    b += std::norm(W(i, q));
                    g += std::conj(W(i, p)) * W(i, q);
                }
                if (a <= floor2 || b <= floor2) continue;
                const double gabs = std::abs(g);
                if (gabs <= tol * std::sqrt(a * b) || gabs == 0.0) continue;
                rotated = true;
                // Diagonalize [[a, |g|], [|g|, b]] by the classic rotation,
                // with the phase of g folded into the second column.
                cplx phase = g / gabs;
                const double pm = std::abs(phase);
                if (pm > 0.0 && std::abs(pm - 1.0) > 1e-14)
                    phase /= pm; // guard unit modulus when g is near denormal
                const double tau = (b - a) / (2.0 * gabs);
                const double t =
                    (tau >= 0 ? 1.0 : -1.0) / (std::abs(tau) + std::sqrt(1.0 + tau * tau));
                const double c = 1.0 / std::sqrt(1.0 + t * t);
                const double s = t * c;
                const cplx sp = s * std::conj(phase); // s·e^{-i·arg g}
                const cplx cp = c * std::conj(phase);
                for (int i = 0; i < m; ++i) {
                    const cplx u = W(i, p), v = W(i, q);
                    W(i, p) = c * u - sp * v;
                    W(i, q) = s * u + cp * v;
                }
                for (int i = 0; i < n; ++i) {
                    const cplx u = V(i, p), v = V(i, q);
                    V(i, p) = c * u - sp * v;
                    V(i, q) = s * u + cp * v;
                }
            }
        }
        if (!rotated) break;
    }
}

/// Extend the orthonormal columns U(:, 0..k-1) to fill column j.
inline void complete_column(CMat& U, int j) {
    const int m = U.rows();
    for (int cand = 0; cand < m; ++cand) {
        // Try e_cand, orthogonalized against everything before column j.
        std::vector<cplx> v(m, 0.0);
        v[cand] = 1.0;
        for (int pass = 0; pass < 2; ++pass)
            for (int c = 0; c < j; ++c) {
                cplx ip = 0;
                for (int i = 0; i < m; ++i) ip += std::conj(U(i, c)) * v[i];
                for (int i = 0; i < m; ++i) v[i] -= ip * U(i, c);
            }
        double nrm = 0;
        for (const auto& x : v) nrm += std::norm(x);
        nrm = std::sqrt(nrm);
        if (nrm > 0.5) {
            for (int i = 0; i < m; ++i) U(i, j) = v[i] / nrm;
            return;
        }
    }
}

} // namespace detail

inline SVD svd(const CMat& a) {
    const int m = a.rows(), n = a.cols();
    const int r = std::min(m, n);
    if (r == 0) return {CMat(m, 0), {}, CMat(n, 0)};
    if (m < n) {
        SVD s = svd(adjoint(a));
        return {std::move(s.V), std::move(s.sigma), std::move(s.U)};
    }
    CMat W = a;
    CMat V = CMat::identity(n);
    detail::jacobi_sweeps(W, V);

    std::vector<double> sig(n);
    for (int j = 0; j < n; ++j) {
        double s = 0;
        for (int i = 0; i < m; ++i) s += std::norm(W(i, j));
        sig[j] = std::sqrt(s);
    }
    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](int x, int y) { return sig[x] > sig[y]; });

    SVD out;
    out.U = CMat(m, n);
    out.V = CMat(n, n);
    out.sigma.resize(n);
    // Numerically-zero columns hold denormal junk: normalizing them would
    // not give a unit vector, so complete the frame instead.
    const double sig_floor = sig[order[0]] * 1e-75;
    for (int j = 0; j < n; ++j) {
        const int src = order[j];
        out.sigma[j] = sig[src];
        for (int i = 0; i < n; ++i) out.V(i, j) = V(i, src);
        if (sig[src] > sig_floor && sig[src] > 0) {
            for (int i = 0; i < m; ++i) out.U(i, j) = W(i, src) / sig[src];
        } else {
            detail::complete_column(out.U, j);
        }
    }
    return out;
}

// ====================================================================
// Norms
// ====================================================================

/// Largest singular value.
inline double spectral_norm(const CMat& a) {
    if (a.empty()) return 0.0;
    return svd(a).sigma.front();
}

/// Sum of singular values.
inline double trace_norm(const CMat& a) {
    if (a.empty()) return 0.0;
    const auto s = svd(a).sigma;
    return std::accumulate(s.begin(), s.end(), 0.0);
}

// ====================================================================
// Rank, kernels, orthonormal bases
// ====================================================================

inline int rank_of(const CMat& a, double rtol = 1e-12) {
    if (a.empty()) return 0;
    const auto s = svd(a).sigma;
    if (s.empty() || s[0] == 0.0) return 0;
    int r = 0;
    for (double v : s)
        if (v > rtol * s[0]) ++r;
    return r;
}

inline double smallest_singular_value(const CMat& a) {
    if (a.empty()) return 0.0;
    return svd(a).sigma.back();
}

/// Orthonormal basis of the kernel of A, as columns (n x k). Full V is
/// obtained by zero-padding wide matrices to square, which leaves A^*A alone.
inline CMat null_space(const CMat& a, double rtol = 1e-12) {
    const int m = a.rows(), n = a.cols();
    if (n == 0) return CMat(0, 0);
    CMat b = a;
    if (m < n) {
        b = CMat(n, n);
        for (int i = 0; i < m; ++i)
            for (int j = 0; j < n; ++j) b(i, j) = a(i, j);
    }
    SVD s = svd(b);
    const double cutoff = s.sigma.empty() ? 0.0 : rtol * s.sigma.front();
    std::vector<int> keep;
    for (int j = 0; j < static_cast<int>(s.sigma.size()); ++j)
        if (s.sigma[j] <= cutoff) keep.push_back(j);
    CMat k(n, static_cast<int>(keep.size()));
    for (int j = 0; j < k.cols(); ++j)
        for (int i = 0; i < n; ++i) k(i, j) = s.V(i, keep[j]);
    return k;
}

/// Orthonormal basis of the column space of A, as columns (m x rank).
inline CMat orth(const CMat& a, double rtol = 1e-12) {
    if (a.empty()) return CMat(a.rows(), 0);
    SVD s = svd(a);
    const double cutoff = s.sigma.empty() ? 0.0 : rtol * s.sigma.front();
    int r = 0;
    for (double v : s.sigma)
        if (v > cutoff && v > 0.0) ++r;
    CMat q(a.rows(), r);
    for (int j = 0; j < r; ++j)
        for (int i = 0; i < a.rows(); ++i) q(i, j) = s.U(i, j);
    return q;
}

/// Orthonormal basis of the orthogonal complement of the column space of A.
inline CMat orth_complement(const CMat& a, double rtol = 1e-12) {
    return null_space(adjoint(a), rtol);
}

// ====================================================================
// Hermitian eigendecomposition (two-sided Jacobi)
// ====================================================================

struct HermEig {
    std::vector<double> lambda; // descending
    CMat V;                     // unitary, H = V·diag(lambda)·V^*
};

/// Eigendecomposition of a Hermitian matrix by cyclic Jacobi rotations.
inline HermEig hermitian_eig(const CMat& h0) {
    const int n = h0.rows();
    if (h0.cols() != n) throw shape_error("hermitian_eig: matrix not square");
    CMat h = h0;
    CMat v = CMat::identity(n);
    const int max_sweeps = 60;
    for (int sweep = 0; sweep < max_sweeps; ++sweep) {
        double off = 0, diag = 0;
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j)
                (i == j ? diag : off) += std::norm(h(i, j));
        if (off <= 1e-30 * std::max(diag, 1e-300)) break;
        for (int p = 0; p < n - 1; ++p)
            for (int q = p + 1; q < n; ++q) {
                const cplx g = h(p, q);
                const double gabs = std::abs(g);
                if (gabs == 0.0) continue;
                const double a = h(p, p).real(), b = h(q, q).real();
                if (gabs <= 1e-15 * std::sqrt(std::abs(a * b)) && gabs <= 1e-300) continue;
                const cplx phase = g / gabs;
                const double tau = (b - a) / (2.0 * gabs);
                const double t =
                    (tau >= 0 ? 1.0 : -1.0) / (std::abs(tau) + std::sqrt(1.0 + tau * tau));
                const double c = 1.0 / std::sqrt(1.0 + t * t);
                const double s = t * c;
                const cplx sp = s * std::conj(phase);
                const cplx cp = c * std::conj(phase);
                // Columns: (p,q) <- (p,q)·J with J = [[c, s],[-s·e^{-if}, c·e^{-if}]]
                for (int i = 0; i < n; ++i) {
                    const cplx hp = h(i, p), hq = h(i, q);
                    h(i, p) = c * hp - sp * hq;
                    h(i, q) = s * hp + cp * hq;
                }
                // Rows: J^*·H
                for (int j = 0; j < n; ++j) {
                    const cplx hp = h(p, j), hq = h(q, j);
                    h(p, j) = c * hp - std::conj(sp) * hq;
                    h(q, j) = s * hp + std::conj(cp) * hq;
                }
                for (int i = 0; i < n; ++i) {
                    const cplx vp = v(i, p), vq = v(i, q);
                    v(i, p) = c * vp - sp * vq;
                    v(i, q) = s * vp + cp * vq;
                }
            }
    }
    std::vector<double> lam(n);
    for (int i = 0; i < n; ++i) lam[i] = h(i, i).real();
    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](int x, int y) { return lam[x] > lam[y]; });
    HermEig out;
    out.lambda.resize(n);
    out.V = CMat(n, n);
    for (int j = 0; j < n; ++j) {
        out.lambda[j] = lam[order[j]];
        for (int i = 0; i < n; ++i) out.V(i, j) = v(i, order[j]);
    }
    return out;
}

// ====================================================================
// Pseudo-inverse and least squares
// ====================================================================

inline CMat pinv(const CMat& a, double rtol = 1e-12) {
    if (a.empty()) return CMat(a.cols(), a.rows());
    SVD s = svd(a);
    const double cutoff = s.sigma.empty() ? 0.0 : rtol * s.sigma.front();
    CMat vs(s.V.rows(), s.V.cols());
    for (int j = 0; j < s.V.cols(); ++j) {
        const double inv = (s.sigma[j] > cutoff && s.sigma[j] > 0.0) ? 1.0 / s.sigma[j] : 0.0;
        for (int i = 0; i < s.V.rows(); ++i) vs(i, j) = s.V(i, j) * inv;
    }
    return vs * adjoint(s.U);
}

/// Minimum-norm least-squares solution X of A·X = B.
inline CMat lsq_solve(const CMat& a, const CMat& b, double rtol = 1e-12) {
    return pinv(a, rtol) * b;
}

} // namespace opspace
