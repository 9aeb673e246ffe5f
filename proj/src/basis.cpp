#include "mfci/basis.hpp"

#include <Eigen/Dense>
#include <cmath>

#include "mfci/errors.hpp"

namespace mfci {

namespace {

// quadrature inner product of two rows of length Nk
double dot_w(const FrequencyGrid& g, const double* a, const double* b) {
    double s = 0;
    for (int q = 0; q < g.Nk; ++q) s += g.weights[q] * a[q] * b[q];
    return s;
}

}  // namespace

double Basis::eval_psi(int n, double k) const {
    double s = 0;
    double p = std::exp(k - kc);  // phi_0
    for (int j = 0; j <= n; ++j) {
        s += coeff[std::size_t(n) * N + j] * p;
        p *= k;
    }
    return s;
}

Basis build_basis(int N, const FrequencyGrid& kgrid) {
    if (N < 1) throw config_error("basis size must be >= 1, got " + std::to_string(N));
    if (N > kgrid.Nk)
        throw config_error("basis size " + std::to_string(N) + " exceeds quadrature node count " +
                           std::to_string(kgrid.Nk));

    Basis b;
    b.N = N;
    // canonicalize node order so the build is independent of how the
    // quadrature nodes were enumerated
    b.kgrid = kgrid;
    {
        std::vector<int> ord(kgrid.Nk);
        for (int q = 0; q < kgrid.Nk; ++q) ord[q] = q;
        std::sort(ord.begin(), ord.end(),
                  [&](int a, int c) { return kgrid.nodes[a] < kgrid.nodes[c]; });
        for (int q = 0; q < kgrid.Nk; ++q) {
            b.kgrid.nodes[q] = kgrid.nodes[ord[q]];
            b.kgrid.weights[q] = kgrid.weights[ord[q]];
        }
    }
    b.kc = 0.5 * (kgrid.k_lo + kgrid.k_hi);
    const int Nk = kgrid.Nk;

    // raw monomial-exponential rows and their analytic derivatives
    std::vector<double> phi(std::size_t(N) * Nk), dphi(std::size_t(N) * Nk);
    for (int q = 0; q < Nk; ++q) {
        const double k = b.kgrid.nodes[q];
        double p = std::exp(k - b.kc);
        for (int m = 0; m < N; ++m) {
            phi[std::size_t(m) * Nk + q] = p;
            dphi[std::size_t(m) * Nk + q] = (m / k + 1.0) * p;
            p *= k;
        }
    }

    // conditioning guard: column-normalized Gram of the raw rows, checked on
    // leading principal blocks so the first offending basis function is named.
    // The production window [6.72,9.45] at N=6 sits near cond 3e14, so the
    // rejection line is drawn at the numerically-singular boundary.
    Eigen::MatrixXd G(N, N);
    for (int i = 0; i < N; ++i)
        for (int j = 0; j <= i; ++j) {
            const double g = dot_w(b.kgrid, &phi[std::size_t(i) * Nk], &phi[std::size_t(j) * Nk]);
            G(i, j) = g;
            G(j, i) = g;
        }
    Eigen::VectorXd d = G.diagonal().array().sqrt();
    for (int i = 0; i < N; ++i)
        if (!(d(i) > 0) || !std::isfinite(d(i)))
            throw ill_conditioned_error("basis function " + std::to_string(i + 1) + " is numerically dependent on its predecessors", i + 1);
    Eigen::MatrixXd Gn = d.cwiseInverse().asDiagonal() * G * d.cwiseInverse().asDiagonal();
    for (int m = 2; m <= N; ++m) {
        Eigen::JacobiSVD<Eigen::MatrixXd> svd(Gn.topLeftCorner(m, m));
        const double smin = svd.singularValues()(m - 1);
        const double smax = svd.singularValues()(0);
        if (!(smin > 0) || smax / smin > 1e15) throw ill_conditioned_error("basis Gram matrix numerically singular at function " + std::to_string(m), m);
    }

    // two-pass modified Gram-Schmidt with coefficient tracking
    b.psi = phi;
    b.coeff.assign(std::size_t(N) * N, 0.0);
    for (int m = 0; m < N; ++m) b.coeff[std::size_t(m) * N + m] = 1.0;
    for (int m = 0; m < N; ++m) {
        double* pm = &b.psi[std::size_t(m) * Nk];
        double* cm = &b.coeff[std::size_t(m) * N];
        for (int pass = 0; pass < 2; ++pass)
            for (int j = 0; j < m; ++j) {
                const double* pj = &b.psi[std::size_t(j) * Nk];
                const double* cj = &b.coeff[std::size_t(j) * N];
                const double r = dot_w(b.kgrid, pm, pj);
                for (int q = 0; q < Nk; ++q) pm[q] -= r * pj[q];
                for (int i = 0; i <= j; ++i) cm[i] -= r * cj[i];
            }
        const double nrm = std::sqrt(dot_w(b.kgrid, pm, pm));
        if (!(nrm > 1e-300)) throw ill_conditioned_error("basis function " + std::to_string(m + 1) + " vanishes after orthogonalization", m + 1);
        for (int q = 0; q < Nk; ++q) pm[q] /= nrm;
        for (int i = 0; i <= m; ++i) cm[i] /= nrm;
    }

    // dpsi rows through the same coefficients
    b.dpsi.assign(std::size_t(N) * Nk, 0.0);
    for (int n = 0; n < N; ++n)
        for (int j = 0; j <= n; ++j) {
            const double c = b.coeff[std::size_t(n) * N + j];
            if (c == 0) continue;
            for (int q = 0; q < Nk; ++q)
                b.dpsi[std::size_t(n) * Nk + q] += c * dphi[std::size_t(j) * Nk + q];
        }

    b.S = compute_S(b, kgrid);
    b.P = compute_P(b, kgrid);
    return b;
}

static void require_same_grid(const Basis& basis, const FrequencyGrid& kgrid) {
    if (!(basis.kgrid == kgrid))
        throw config_error("frequency grid does not match the one the basis was built on");
}

std::vector<double> compute_S(const Basis& basis, const FrequencyGrid& kgrid) {
    require_same_grid(basis, kgrid);
    const int N = basis.N;
    std::vector<double> S(std::size_t(N) * N);
    for (int l = 0; l < N; ++l)
        for (int n = 0; n < N; ++n) {
            double s = 0;
            for (int q = 0; q < kgrid.Nk; ++q)
                s += basis.kgrid.weights[q] * basis.dpsi_at(n, q) * basis.psi_at(l, q);
            S[std::size_t(l) * N + n] = s;
        }
    return S;
}

std::vector<double> compute_T(const Basis& basis, const FrequencyGrid& kgrid) {
    require_same_grid(basis, kgrid);
    const int N = basis.N;
    std::vector<double> T(std::size_t(N) * N);
    for (int l = 0; l < N; ++l)
        for (int n = 0; n < N; ++n) {
            double s = 0;
            for (int q = 0; q < kgrid.Nk; ++q)
                s += basis.kgrid.weights[q] * basis.kgrid.nodes[q] * basis.dpsi_at(n, q) * basis.psi_at(l, q);
            T[std::size_t(l) * N + n] = s;
        }
    return T;
}

std::vector<double> compute_P(const Basis& basis, const FrequencyGrid& kgrid) {
    require_same_grid(basis, kgrid);
    const int N = basis.N;
    std::vector<double> P(std::size_t(N) * N * N);
    for (int l = 0; l < N; ++l)
        for (int n = 0; n < N; ++n)
            for (int m = 0; m < N; ++m) {
                double s = 0;
                for (int q = 0; q < kgrid.Nk; ++q) {
                    const double k = basis.kgrid.nodes[q];
                    s += basis.kgrid.weights[q] * basis.psi_at(l, q) *
                         (k * k * basis.psi_at(n, q) * basis.dpsi_at(m, q) +
                          k * basis.psi_at(n, q) * basis.psi_at(m, q));
                }
                P[(std::size_t(l) * N + n) * N + m] = 2.0 * s;
            }
    return P;
}

}  // namespace mfci
