#include "mfci/grid.hpp"

#include <cmath>

namespace mfci {

Grid3::Grid3(double R_, double b_, int nx, int ny, int nz)
    : R(R_), b(b_), Nx(nx), Ny(ny), Nz(nz) {
    if (nx < 3 || ny < 3 || nz < 3)
        throw dimension_error("Grid3: need at least 3 points per axis");
    if (R_ <= 0 || b_ <= 0)
        throw config_error("Grid3: extents must be positive");
    const double hx = 2 * R_ / (nx - 1);
    const double hy = 2 * R_ / (ny - 1);
    const double hz = 2 * b_ / (nz - 1);
    if (std::abs(hx - hy) > 1e-12 || std::abs(hx - hz) > 1e-12)
        throw config_error("Grid3: spacing must be uniform and isotropic");
    h = hx;
}

FrequencyGrid::FrequencyGrid(double k_lo_, double k_hi_, int nk)
    : k_lo(k_lo_), k_hi(k_hi_), Nk(nk) {
    if (!(0 < k_lo_ && k_lo_ < k_hi_))
        throw config_error("FrequencyGrid: need 0 < k_lo < k_hi");
    if (nk < 3 || nk % 2 == 0)
        throw config_error("FrequencyGrid: Simpson rule needs odd Nk >= 3");
    nodes.resize(nk);
    weights.assign(nk, 1.0);
    const double dk = (k_hi_ - k_lo_) / (nk - 1);
    for (int q = 0; q < nk; ++q) nodes[q] = k_lo_ + dk * q;
    for (int q = 1; q < nk - 1; ++q) weights[q] = (q % 2 == 1) ? 4.0 : 2.0;
    for (double& w : weights) w *= dk / 3.0;
}

ComplexVolume laplacian_fd(const ComplexVolume& f) {
    const Grid3& g = f.grid;
    ComplexVolume out(g);
    const double ih2 = 1.0 / (g.h * g.h);
    const cplx* p = f.v.data();
    cplx* o = out.v.data();
    const std::ptrdiff_t sx = 1, sy = g.Nx, sz = std::ptrdiff_t(g.Nx) * g.Ny;
    for (int iz = 1; iz < g.Nz - 1; ++iz)
        for (int iy = 1; iy < g.Ny - 1; ++iy) {
            std::size_t i = g.idx(1, iy, iz);
            for (int ix = 1; ix < g.Nx - 1; ++ix, ++i)
                o[i] = (p[i + sx] + p[i - sx] + p[i + sy] + p[i - sy] +
                        p[i + sz] + p[i - sz] - 6.0 * p[i]) * ih2;
        }
    return out;
}

std::array<ComplexVolume, 3> gradient_fd(const ComplexVolume& f) {
    const Grid3& g = f.grid;
    std::array<ComplexVolume, 3> out{ComplexVolume(g), ComplexVolume(g), ComplexVolume(g)};
    const double i2h = 1.0 / (2 * g.h);
    const cplx* p = f.v.data();
    cplx* ox = out[0].v.data();
    cplx* oy = out[1].v.data();
    cplx* oz = out[2].v.data();
    const std::ptrdiff_t sx = 1, sy = g.Nx, sz = std::ptrdiff_t(g.Nx) * g.Ny;
    for (int iz = 1; iz < g.Nz - 1; ++iz)
        for (int iy = 1; iy < g.Ny - 1; ++iy) {
            std::size_t i = g.idx(1, iy, iz);
            for (int ix = 1; ix < g.Nx - 1; ++ix, ++i) {
                ox[i] = (p[i + sx] - p[i - sx]) * i2h;
                oy[i] = (p[i + sy] - p[i - sy]) * i2h;
                oz[i] = (p[i + sz] - p[i - sz]) * i2h;
            }
        }
    return out;
}

ComplexVolume laplacian_fd_t(const ComplexVolume& a) {
    const Grid3& g = a.grid;
    ComplexVolume out(g);
    const double ih2 = 1.0 / (g.h * g.h);
    const cplx* p = a.v.data();
    cplx* o = out.v.data();
    const std::ptrdiff_t sx = 1, sy = g.Nx, sz = std::ptrdiff_t(g.Nx) * g.Ny;
    // scatter the interior stencil: out gets contributions from interior rows of a
    for (int iz = 1; iz < g.Nz - 1; ++iz)
        for (int iy = 1; iy < g.Ny - 1; ++iy) {
            std::size_t i = g.idx(1, iy, iz);
            for (int ix = 1; ix < g.Nx - 1; ++ix, ++i) {
                const cplx w = p[i] * ih2;
                o[i] -= 6.0 * w;
                o[i + sx] += w;
                o[i - sx] += w;
                o[i + sy] += w;
                o[i - sy] += w;
                o[i + sz] += w;
                o[i - sz] += w;
            }
        }
    return out;
}

ComplexVolume gradient_fd_t(const ComplexVolume& ax, const ComplexVolume& ay,
                            const ComplexVolume& az) {
    const Grid3& g = ax.grid;
    if (!(ay.grid == g) || !(az.grid == g))
        throw dimension_error("gradient_fd_t: component grids differ");
    ComplexVolume out(g);
    const double i2h = 1.0 / (2 * g.h);
    const cplx* px = ax.v.data();
    const cplx* py = ay.v.data();
    const cplx* pz = az.v.data();
    cplx* o = out.v.data();
    const std::ptrdiff_t sx = 1, sy = g.Nx, sz = std::ptrdiff_t(g.Nx) * g.Ny;
    for (int iz = 1; iz < g.Nz - 1; ++iz)
        for (int iy = 1; iy < g.Ny - 1; ++iy) {
            std::size_t i = g.idx(1, iy, iz);
            for (int ix = 1; ix < g.Nx - 1; ++ix, ++i) {
                o[i + sx] += px[i] * i2h;
                o[i - sx] -= px[i] * i2h;
                o[i + sy] += py[i] * i2h;
                o[i - sy] -= py[i] * i2h;
                o[i + sz] += pz[i] * i2h;
                o[i - sz] -= pz[i] * i2h;
            }
        }
    return out;
}

double h2_norm_sq(const ComplexVolume& f) {
    const Grid3& g = f.grid;
    double s = 0;
    for (const cplx& c : f.v) s += std::norm(c);
    const auto grad = gradient_fd(f);
    for (const auto& comp : grad)
        for (const cplx& c : comp.v) s += std::norm(c);
    const ComplexVolume lap = laplacian_fd(f);
    for (const cplx& c : lap.v) s += std::norm(c);
    return g.h * g.h * g.h * s;
}

double wavenumber_from_frequency(double f_hz) {
    if (f_hz <= 0) throw domain_error("wavenumber_from_frequency: frequency must be positive");
    return 2.0 * M_PI * f_hz / 2997924580.0;
}

double inner_real(const ComplexVolume& a, const ComplexVolume& b) {
    double s = 0;
    const std::size_t n = a.v.size();
    for (std::size_t i = 0; i < n; ++i)
        s += a.v[i].real() * b.v[i].real() + a.v[i].imag() * b.v[i].imag();
    return s;
}

}  // namespace mfci
