#pragma once
#include <array>
#include <complex>
#include <cstddef>
#include <vector>

#include "mfci/errors.hpp"

namespace mfci {

using cplx = std::complex<double>;

// Uniform isotropic grid on the box (-R,R)^2 x (-b,b).
// Node (ix,iy,iz) sits at (-R+ix*h, -R+iy*h, -b+iz*h); ix is the fastest
// index in flat storage, iz the slowest.
struct Grid3 {
    double R = 0, b = 0;
    int Nx = 0, Ny = 0, Nz = 0;
    double h = 0;

    Grid3() = default;
    Grid3(double R_, double b_, int nx, int ny, int nz);

    std::size_t size() const { return std::size_t(Nx) * Ny * Nz; }
    std::size_t idx(int ix, int iy, int iz) const {
        return (std::size_t(iz) * Ny + iy) * Nx + ix;
    }
    double x(int i) const { return -R + h * i; }
    double y(int j) const { return -R + h * j; }
    double z(int l) const { return -b + h * l; }

    bool operator==(const Grid3& o) const {
        return Nx == o.Nx && Ny == o.Ny && Nz == o.Nz && R == o.R && b == o.b;
    }
};

// Wavenumber interval [k_lo,k_hi] sampled at composite-Simpson nodes.
// Nk must be odd and >= 3; weights integrate cubics exactly.
struct FrequencyGrid {
    double k_lo = 0, k_hi = 0;
    int Nk = 0;
    std::vector<double> nodes, weights;

    FrequencyGrid() = default;
    FrequencyGrid(double k_lo_, double k_hi_, int nk);

    bool operator==(const FrequencyGrid& o) const {
        return k_lo == o.k_lo && k_hi == o.k_hi && Nk == o.Nk;
    }
};

struct ComplexVolume {
    Grid3 grid;
    std::vector<cplx> v;

    ComplexVolume() = default;
    explicit ComplexVolume(const Grid3& g) : grid(g), v(g.size()) {}

    cplx& at(int ix, int iy, int iz) { return v[grid.idx(ix, iy, iz)]; }
    const cplx& at(int ix, int iy, int iz) const { return v[grid.idx(ix, iy, iz)]; }
};

// Samples of a complex field on a fixed-z plane over (-R,R)^2,
// row-major with x fastest: value(ix,iy) = v[iy*Nx+ix].
struct ComplexPlane {
    double R = 0;
    int Nx = 0, Ny = 0;
    double z = 0;
    std::vector<cplx> v;

    ComplexPlane() = default;
    ComplexPlane(double R_, int nx, int ny, double z_)
        : R(R_), Nx(nx), Ny(ny), z(z_), v(std::size_t(nx) * ny) {}

    double hx() const { return 2 * R / (Nx - 1); }
    cplx& at(int ix, int iy) { return v[std::size_t(iy) * Nx + ix]; }
    const cplx& at(int ix, int iy) const { return v[std::size_t(iy) * Nx + ix]; }
};

// 7-point second difference at interior nodes, zero on the boundary shell.
ComplexVolume laplacian_fd(const ComplexVolume& f);

// Central differences per axis at interior nodes, zero on the boundary shell.
std::array<ComplexVolume, 3> gradient_fd(const ComplexVolume& f);

// Transposes of the two operators above under the unweighted node inner
// product (interior restriction then scatter). Used by gradient assembly.
ComplexVolume laplacian_fd_t(const ComplexVolume& a);
ComplexVolume gradient_fd_t(const ComplexVolume& ax, const ComplexVolume& ay,
                            const ComplexVolume& az);

// h^3 * sum over nodes of |f|^2 + |grad_h f|^2 + |lap_h f|^2.
double h2_norm_sq(const ComplexVolume& f);

// k = 2 pi f / 2 997 924 580 (lengths in 10 cm units).
double wavenumber_from_frequency(double f_hz);

// Real inner product of volumes viewed as vectors over (Re,Im) pairs.
double inner_real(const ComplexVolume& a, const ComplexVolume& b);

}  // namespace mfci
