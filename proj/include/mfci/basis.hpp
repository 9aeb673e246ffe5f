#pragma once
#include <vector>

#include "mfci/grid.hpp"

namespace mfci {

// Orthonormal frequency basis built from phi_m(k) = k^(m-1) exp(k - kc),
// kc = (k_lo+k_hi)/2, orthonormalized by modified Gram-Schmidt (two passes)
// under the quadrature inner product of the given FrequencyGrid.
//
// Derivatives are carried analytically through the same coefficients,
// phi_m'(k) = ((m-1)/k + 1) phi_m(k), so the structural identities
// S_nn = 1 and S_ln = 0 for n < l hold to machine precision.
struct Basis {
    int N = 0;
    FrequencyGrid kgrid;
    double kc = 0;
    std::vector<double> psi;    // N x Nk, psi[n*Nk+q] = Psi_n(k_q)
    std::vector<double> dpsi;   // N x Nk, analytic Psi_n'(k_q)
    std::vector<double> coeff;  // N x N lower-triangular, Psi_n = sum_j coeff[n][j] phi_j
    std::vector<double> S;      // N x N, S[l*N+n] = int Psi_n' Psi_l dk
    std::vector<double> P;      // N x N x N, P[(l*N+n)*N+m]

    double psi_at(int n, int q) const { return psi[std::size_t(n) * kgrid.Nk + q]; }
    double dpsi_at(int n, int q) const { return dpsi[std::size_t(n) * kgrid.Nk + q]; }
    // evaluate Psi_n at an arbitrary wavenumber through the coefficients
    double eval_psi(int n, double k) const;
};

// Throws ill_conditioned_error (naming the first offending m, 1-based) when the
// column-normalized Gram matrix of {phi_1..phi_m} is numerically singular
// (condition number beyond 1e15).
Basis build_basis(int N, const FrequencyGrid& kgrid);

// S_ln = int Psi_n' Psi_l dk, by the module quadrature.
std::vector<double> compute_S(const Basis& basis, const FrequencyGrid& kgrid);

// P_lnm = 2 int (k^2 Psi_n Psi_m' + k Psi_n Psi_m) Psi_l dk.
std::vector<double> compute_P(const Basis& basis, const FrequencyGrid& kgrid);

// T_ln = int k Psi_n' Psi_l dk (needed for the incident-ratio field tensor).
std::vector<double> compute_T(const Basis& basis, const FrequencyGrid& kgrid);

}  // namespace mfci
