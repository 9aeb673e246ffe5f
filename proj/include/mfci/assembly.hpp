#pragma once

#include <array>
#include <vector>

#include "mfci/basis.hpp"
#include "mfci/forward.hpp"
#include "mfci/grid.hpp"

namespace mfci {

// Fourier boundary data on the measurement face z = -b. g0 holds the Dirichlet
// values of each coefficient field v_n on that face; g1 holds the z-derivative
// data there. On the remaining five faces the Dirichlet data is zero by
// convention, so only the measurement-face planes are stored.
struct BoundaryData {
    int N = 0;
    std::vector<ComplexPlane> g0;
    std::vector<ComplexPlane> g1;
};

// Spatial tensor coupling the coefficient fields through the incident wave.
// Every entry factors through the source geometry as
//   Q_ln(x) = rhohat(x) * (i*alpha_ln + beta_ln / rho(x)),
// so only two real N x N matrices and the per-node source geometry are kept.
struct QField {
    Grid3 grid;
    int N = 0;
    std::vector<double> rho;                    // |x - source| per node
    std::array<std::vector<double>, 3> rhohat;  // unit vector from the source per node
    std::vector<double> alpha;                  // row-major N x N, imaginary coefficient
    std::vector<double> beta;                   // row-major N x N, 1/rho coefficient

    std::array<cplx, 3> at(int l, int n, std::size_t node) const {
        const double a = alpha[std::size_t(l) * N + n], b = beta[std::size_t(l) * N + n];
        const cplx s(b / rho[node], a);
        return {rhohat[0][node] * s, rhohat[1][node] * s, rhohat[2][node] * s};
    }
};

// Log of u/u_i over k^2, with the phase continued along the k axis per pixel so
// that successive jumps stay within (-pi, pi]. Planes must be ordered by the
// quadrature nodes of kgrid.
std::vector<ComplexPlane> log_ratio_continuous(const std::vector<ComplexPlane>& u,
                                               const std::vector<ComplexPlane>& u_i,
                                               const FrequencyGrid& kgrid);

// z-derivative of the log ratio: (dzu/u - dzu_i/u_i) / k^2 with the incident
// part evaluated in closed form at each pixel of the plane.
std::vector<ComplexPlane> dz_log_ratio(const std::vector<ComplexPlane>& u,
                                       const std::vector<ComplexPlane>& dzu,
                                       const FrequencyGrid& kgrid, const SourceSpec& src);

// Projects the per-k planes onto the basis by quadrature: g0_n = int v Psi_n dk
// and g1_n = int dzv Psi_n dk, pixelwise on the measurement face.
BoundaryData boundary_coeffs(const std::vector<ComplexPlane>& v,
                             const std::vector<ComplexPlane>& dzv, const Basis& basis,
                             const FrequencyGrid& kgrid);

// Assembles the factorized Q tensor for the given source and grid.
QField compute_Q(const Basis& basis, const FrequencyGrid& kgrid, const SourceSpec& src,
                 const Grid3& grid);

}  // namespace mfci
