#pragma once
#include <vector>

#include "mfci/grid.hpp"

namespace mfci {

// 2D Fourier coefficients of a ComplexPlane, FFT mode layout (mode index m
// maps to spatial frequency 2*pi*fold(m)/(N*h), fold(m) = m or m-N).
// Forward/inverse transforms are unitary.
struct PlaneSpectrum {
    double R = 0;
    int Nx = 0, Ny = 0;
    double z = 0;
    double k = 0;                    // wavenumber the spectrum is used at, 0 if unset
    std::vector<double> rho1, rho2;  // per-mode spatial frequencies along x and y
    std::vector<cplx> c;             // Ny x Nx row-major, x-mode fastest

    cplx& at(int mx, int my) { return c[std::size_t(my) * Nx + mx]; }
    const cplx& at(int mx, int my) const { return c[std::size_t(my) * Nx + mx]; }
};

PlaneSpectrum plane_dft(const ComplexPlane& p);
ComplexPlane inverse_dft(const PlaneSpectrum& s);

// Shift a plane of the scattered field by `distance` toward the scatterer
// (+z), keeping only propagating modes rho^2 < k^2; each kept mode picks up
// exp(-i sqrt(k^2-rho^2) * distance), evanescent and out-of-band modes are
// dropped. distance = 0 is the identity on the propagating band.
ComplexPlane propagate_plane(const ComplexPlane& p, double k, double distance);

// Far-plane (z=-D) scattered data moved to the near plane Gamma (z=-b).
ComplexPlane propagate_to_near(const ComplexPlane& far, double k, double D, double b);

// Spectral z-derivative of a one-way (band-limited) plane: mode-wise
// multiplication by -i sqrt(k^2-rho^2), zero off the propagating band.
ComplexPlane dz_spectral(const ComplexPlane& near, double k);

}  // namespace mfci
