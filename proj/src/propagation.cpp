#include "mfci/propagation.hpp"

#include <fftw3.h>

#include <cmath>

#include "mfci/errors.hpp"

namespace mfci {

namespace {

constexpr double kPi = 3.14159265358979323846;

std::vector<double> mode_freqs(int n, double h) {
    std::vector<double> rho(n);
    for (int m = 0; m < n; ++m) {
        const int folded = (m <= n / 2) ? m : m - n;
        rho[m] = 2.0 * kPi * folded / (n * h);
    }
    return rho;
}

void dft_2d(const std::vector<cplx>& in, std::vector<cplx>& out, int nx, int ny, int sign) {
    out.resize(in.size());
    fftw_complex* buf = fftw_alloc_complex(in.size());
    for (std::size_t i = 0; i < in.size(); ++i) {
        buf[i][0] = in[i].real();
        buf[i][1] = in[i].imag();
    }
    fftw_plan plan = fftw_plan_dft_2d(ny, nx, buf, buf, sign, FFTW_ESTIMATE);
    fftw_execute(plan);
    fftw_destroy_plan(plan);
    const double scale = 1.0 / std::sqrt(double(nx) * ny);
    for (std::size_t i = 0; i < in.size(); ++i) out[i] = cplx(buf[i][0], buf[i][1]) * scale;
    fftw_free(buf);
}

// shared band-limited mode-wise multiply: out_mode = in_mode * f(kz) inside
// rho^2 < k^2, zero outside
template <class F>
ComplexPlane band_apply(const ComplexPlane& p, double k, F&& factor) {
    if (!(k > 0)) throw domain_error("band_apply: wavenumber must be positive");
    PlaneSpectrum s = plane_dft(p);
    s.k = k;
    for (int my = 0; my < s.Ny; ++my)
        for (int mx = 0; mx < s.Nx; ++mx) {
            const double r2 = s.rho1[mx] * s.rho1[mx] + s.rho2[my] * s.rho2[my];
            if (r2 < k * k)
                s.at(mx, my) *= factor(std::sqrt(k * k - r2));
            else
                s.at(mx, my) = 0;
        }
    return inverse_dft(s);
}

}  // namespace

PlaneSpectrum plane_dft(const ComplexPlane& p) {
    PlaneSpectrum s;
    s.R = p.R;
    s.Nx = p.Nx;
    s.Ny = p.Ny;
    s.z = p.z;
    s.rho1 = mode_freqs(p.Nx, 2 * p.R / (p.Nx - 1));
    s.rho2 = mode_freqs(p.Ny, 2 * p.R / (p.Ny - 1));
    dft_2d(p.v, s.c, p.Nx, p.Ny, FFTW_FORWARD);
    return s;
}

ComplexPlane inverse_dft(const PlaneSpectrum& s) {
    ComplexPlane p(s.R, s.Nx, s.Ny, s.z);
    dft_2d(s.c, p.v, s.Nx, s.Ny, FFTW_BACKWARD);
    return p;
}

ComplexPlane propagate_plane(const ComplexPlane& p, double k, double distance) {
    ComplexPlane out = band_apply(p, k, [distance](double kz) {
        return std::polar(1.0, -kz * distance);
    });
    out.z = p.z + distance;
    return out;
}

ComplexPlane propagate_to_near(const ComplexPlane& far, double k, double D, double b) {
    if (!(D > b)) throw geometry_error("propagate_to_near: far plane depth D must exceed b");
    return propagate_plane(far, k, D - b);
}

ComplexPlane dz_spectral(const ComplexPlane& near, double k) {
    return band_apply(near, k, [](double kz) { return cplx(0.0, -kz); });
}

}  // namespace mfci
