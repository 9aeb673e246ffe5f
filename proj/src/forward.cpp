#include "mfci/forward.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <utility>
#include <vector>

#include "mfci/errors.hpp"

namespace mfci {

namespace {

constexpr double kPi = 3.14159265358979323846;

cplx self_cell(double k, double h) {
    const double a = h * std::cbrt(3.0 / (4.0 * kPi));
    return (std::polar(1.0, k * a) * cplx(1.0, -k * a) - 1.0) / (k * k);
}

// padded-FFT linear convolution workspace for a fixed box shape
class ConvKernel {
  public:
    ConvKernel(double k, double h, const std::array<int, 3>& shape) : s_(shape) {
        for (int d = 0; d < 3; ++d) p_[d] = 2 * s_[d] - 1;
        n_ = std::size_t(p_[0]) * p_[1] * p_[2];
        buf_ = fftw_alloc_complex(n_);
        kf_ = fftw_alloc_complex(n_);
        fwd_ = fftw_plan_dft_3d(p_[2], p_[1], p_[0], buf_, buf_, FFTW_FORWARD, FFTW_ESTIMATE);
        bwd_ = fftw_plan_dft_3d(p_[2], p_[1], p_[0], buf_, buf_, FFTW_BACKWARD, FFTW_ESTIMATE);

        // kernel over all cell differences, h^3 midpoint weight
        for (int dz = -(s_[2] - 1); dz < s_[2]; ++dz)
            for (int dy = -(s_[1] - 1); dy < s_[1]; ++dy)
                for (int dx = -(s_[0] - 1); dx < s_[0]; ++dx) {
                    cplx g;
                    if (dx == 0 && dy == 0 && dz == 0) {
                        g = self_cell(k, h);
                    } else {
                        const double r = h * std::sqrt(double(dx) * dx + double(dy) * dy +
                                                       double(dz) * dz);
                        g = h * h * h * std::polar(1.0, k * r) / (4 * kPi * r);
                    }
                    const std::size_t i = pidx(dx + s_[0] - 1, dy + s_[1] - 1, dz + s_[2] - 1);
                    buf_[i][0] = g.real();
                    buf_[i][1] = g.imag();
                }
        fftw_execute(fwd_);
        for (std::size_t i = 0; i < n_; ++i) {
            kf_[i][0] = buf_[i][0];
            kf_[i][1] = buf_[i][1];
        }
    }
    ConvKernel(const ConvKernel&) = delete;
    ~ConvKernel() {
        fftw_destroy_plan(fwd_);
        fftw_destroy_plan(bwd_);
        fftw_free(buf_);
        fftw_free(kf_);
    }

    // y[i] = sum_j kernel[i-j] x[j] over the box
    void apply(const std::vector<cplx>& x, std::vector<cplx>& y) const {
        for (std::size_t i = 0; i < n_; ++i) buf_[i][0] = buf_[i][1] = 0;
        for (int iz = 0; iz < s_[2]; ++iz)
            for (int iy = 0; iy < s_[1]; ++iy)
                for (int ix = 0; ix < s_[0]; ++ix) {
                    const cplx v = x[bidx(ix, iy, iz)];
                    const std::size_t i = pidx(ix, iy, iz);
                    buf_[i][0] = v.real();
                    buf_[i][1] = v.imag();
                }
        fftw_execute(fwd_);
        for (std::size_t i = 0; i < n_; ++i) {
            const cplx a(buf_[i][0], buf_[i][1]), b(kf_[i][0], kf_[i][1]);
            const cplx c = a * b;
            buf_[i][0] = c.real();
            buf_[i][1] = c.imag();
        }
        fftw_execute(bwd_);
        const double scale = 1.0 / double(n_);
        y.resize(std::size_t(s_[0]) * s_[1] * s_[2]);
        for (int iz = 0; iz < s_[2]; ++iz)
            for (int iy = 0; iy < s_[1]; ++iy)
                for (int ix = 0; ix < s_[0]; ++ix) {
                    const std::size_t i = pidx(ix + s_[0] - 1, iy + s_[1] - 1, iz + s_[2] - 1);
                    y[bidx(ix, iy, iz)] = cplx(buf_[i][0], buf_[i][1]) * scale;
                }
    }

    std::size_t bidx(int ix, int iy, int iz) const {
        return (std::size_t(iz) * s_[1] + iy) * s_[0] + ix;
    }

  private:
    std::size_t pidx(int ix, int iy, int iz) const {
        return (std::size_t(iz) * p_[1] + iy) * p_[0] + ix;
    }
    std::array<int, 3> s_, p_;
    std::size_t n_ = 0;
    fftw_complex* buf_ = nullptr;
    fftw_complex* kf_ = nullptr;
    fftw_plan fwd_ = nullptr, bwd_ = nullptr;
};

double vnorm(const std::vector<cplx>& v) {
    double s = 0;
    for (const auto& c : v) s += std::norm(c);
    return std::sqrt(s);
}

// restarted GMRES with Givens rotations; A is a matvec functor
template <class MatVec>
std::pair<int, double> gmres(const MatVec& A, const std::vector<cplx>& b, std::vector<cplx>& x,
                             double tol, int restart, int max_outer) {
    const std::size_t n = b.size();
    const double bnorm = vnorm(b);
    x.assign(n, 0);
    if (bnorm == 0) return {0, 0.0};
    const int m = std::min<int>(restart, int(n));

    std::vector<std::vector<cplx>> V;
    std::vector<cplx> H(std::size_t(m + 1) * m, 0), g(m + 1), cs(m), sn(m), w(n), r(n);
    int total_it = 0;
    double res = bnorm;

    for (int outer = 0; outer < max_outer; ++outer) {
        A(x, r);
        for (std::size_t i = 0; i < n; ++i) r[i] = b[i] - r[i];
        res = vnorm(r);
        if (res <= tol * bnorm) return {total_it, res / bnorm};

        V.assign(1, r);
        for (auto& c : V[0]) c /= res;
        std::fill(g.begin(), g.end(), cplx(0));
        g[0] = res;
        int j = 0;
        for (; j < m; ++j) {
            A(V[j], w);
            for (int i = 0; i <= j; ++i) {
                cplx hij = 0;
                for (std::size_t q = 0; q < n; ++q) hij += std::conj(V[i][q]) * w[q];
                H[std::size_t(i) * m + j] = hij;
                for (std::size_t q = 0; q < n; ++q) w[q] -= hij * V[i][q];
            }
            const double hnext = vnorm(w);
            ++total_it;

            for (int i = 0; i < j; ++i) {
                const cplx a = H[std::size_t(i) * m + j], bb = H[std::size_t(i + 1) * m + j];
                H[std::size_t(i) * m + j] = cs[i] * a + sn[i] * bb;
                H[std::size_t(i + 1) * m + j] = -std::conj(sn[i]) * a + std::conj(cs[i]) * bb;
            }
            const cplx hjj = H[std::size_t(j) * m + j];
            const double d = std::sqrt(std::norm(hjj) + hnext * hnext);
            if (d == 0) break;
            cs[j] = std::conj(hjj) / d;
            sn[j] = hnext / d;
            H[std::size_t(j) * m + j] = d;
            const cplx gj = g[j];
            g[j] = cs[j] * gj;
            g[j + 1] = -std::conj(sn[j]) * gj;

            if (std::abs(g[j + 1]) <= tol * bnorm || hnext == 0 || j == m - 1) {
                ++j;
                break;
            }
            V.push_back(w);
            for (auto& c : V[j + 1]) c /= hnext;
        }

        // back substitution on the j x j triangular system
        std::vector<cplx> y(j);
        for (int i = j - 1; i >= 0; --i) {
            cplx s = g[i];
            for (int q = i + 1; q < j; ++q) s -= H[std::size_t(i) * m + q] * y[q];
            y[i] = s / H[std::size_t(i) * m + i];
        }
        for (int i = 0; i < j; ++i)
            for (std::size_t q = 0; q < n; ++q) x[q] += y[i] * V[i][q];
    }
    A(x, r);
    for (std::size_t i = 0; i < n; ++i) r[i] = b[i] - r[i];
    res = vnorm(r) / bnorm;
    if (res > tol)
        throw nonconvergence_error("forward solve stalled at relative residual " +
                                       std::to_string(res),
                                   res);
    return {total_it, res};
}

}  // namespace

void validate_medium(const MediumModel& m) {
    if (m.c.size() != m.grid.size())
        throw dimension_error("medium: coefficient array does not match the grid");
    for (const double c : m.c) {
        if (!std::isfinite(c) || c < 1.0 - 1e-12)
            throw domain_error("medium: c must satisfy c >= 1 everywhere");
    }
    const auto& g = m.grid;
    for (int iz = 0; iz < g.Nz; ++iz)
        for (int iy = 0; iy < g.Ny; ++iy)
            for (int ix = 0; ix < g.Nx; ++ix) {
                const bool boundary = ix == 0 || ix == g.Nx - 1 || iy == 0 || iy == g.Ny - 1 ||
                                      iz == 0 || iz == g.Nz - 1;
                if (boundary && m.c[g.idx(ix, iy, iz)] != 1.0)
                    throw domain_error("medium: contrast must vanish on the boundary shell");
            }
}

cplx incident_wave(const std::array<double, 3>& x, double k, const SourceSpec& src) {
    const double dx = x[0] - src.position[0], dy = x[1] - src.position[1],
                 dz = x[2] - src.position[2];
    const double r = std::sqrt(dx * dx + dy * dy + dz * dz);
    if (r == 0) throw domain_error("incident_wave: evaluation at the source point");
    return std::polar(1.0, k * r) / (4 * kPi * r);
}

ContrastSolution solve_contrast_source(const MediumModel& m, double k, const SourceSpec& src,
                                       double tol) {
    validate_medium(m);
    if (!(k > 0)) throw domain_error("solve_contrast_source: wavenumber must be positive");
    const auto& g = m.grid;
    if (std::abs(src.position[0]) <= g.R && std::abs(src.position[1]) <= g.R &&
        std::abs(src.position[2]) <= g.b)
        throw geometry_error("solve_contrast_source: source must lie outside the medium box");

    ContrastSolution sol;
    sol.grid = g;
    sol.k = k;
    int lo[3] = {g.Nx, g.Ny, g.Nz}, hi[3] = {-1, -1, -1};
    for (int iz = 0; iz < g.Nz; ++iz)
        for (int iy = 0; iy < g.Ny; ++iy)
            for (int ix = 0; ix < g.Nx; ++ix)
                if (m.c[g.idx(ix, iy, iz)] != 1.0) {
                    lo[0] = std::min(lo[0], ix);
                    lo[1] = std::min(lo[1], iy);
                    lo[2] = std::min(lo[2], iz);
                    hi[0] = std::max(hi[0], ix);
                    hi[1] = std::max(hi[1], iy);
                    hi[2] = std::max(hi[2], iz);
                }
    if (hi[0] < 0) return sol;  // zero contrast: w empty, u = u_i
    for (int d = 0; d < 3; ++d) {
        sol.lo[d] = lo[d];
        sol.shape[d] = hi[d] - lo[d] + 1;
    }

    const std::size_t n = std::size_t(sol.shape[0]) * sol.shape[1] * sol.shape[2];
    std::vector<double> chi(n);
    std::vector<cplx> rhs(n);
    ConvKernel kernel(k, g.h, sol.shape);
    for (int iz = 0; iz < sol.shape[2]; ++iz)
        for (int iy = 0; iy < sol.shape[1]; ++iy)
            for (int ix = 0; ix < sol.shape[0]; ++ix) {
                const std::size_t bi = kernel.bidx(ix, iy, iz);
                const int gx = lo[0] + ix, gy = lo[1] + iy, gz = lo[2] + iz;
                chi[bi] = m.c[g.idx(gx, gy, gz)] - 1.0;
                rhs[bi] = k * k * chi[bi] * incident_wave({g.x(gx), g.y(gy), g.z(gz)}, k, src);
            }

    auto matvec = [&](const std::vector<cplx>& x, std::vector<cplx>& y) {
        kernel.apply(x, y);
        for (std::size_t i = 0; i < n; ++i) y[i] = x[i] - k * k * chi[i] * y[i];
    };
    auto [iters, res] = gmres(matvec, rhs, sol.w, tol, 800, 50);
    sol.iterations = iters;
    sol.residual = res;
    return sol;
}

ComplexPlane scattered_plane(const ContrastSolution& sol, double z, int nx, int ny) {
    if (nx < 2 || ny < 2) throw config_error("scattered_plane: need at least a 2x2 grid");
    const auto& g = sol.grid;
    ComplexPlane p(g.R, nx, ny, z);
    if (sol.w.empty()) return p;

    // gather nonzero cells once, then direct-sum the outgoing kernel
    struct Cell {
        double x, y, z;
        cplx w;
    };
    std::vector<Cell> cells;
    std::size_t bi = 0;
    for (int iz = 0; iz < sol.shape[2]; ++iz)
        for (int iy = 0; iy < sol.shape[1]; ++iy)
            for (int ix = 0; ix < sol.shape[0]; ++ix, ++bi)
                if (sol.w[bi] != cplx(0))
                    cells.push_back({g.x(sol.lo[0] + ix), g.y(sol.lo[1] + iy),
                                     g.z(sol.lo[2] + iz), sol.w[bi]});
    const double h3 = g.h * g.h * g.h;
    const double hx = 2 * g.R / (nx - 1), hy = 2 * g.R / (ny - 1);
    for (int iy = 0; iy < ny; ++iy)
        for (int ix = 0; ix < nx; ++ix) {
            const double px = -g.R + ix * hx, py = -g.R + iy * hy;
            cplx s = 0;
            for (const auto& c : cells) {
                const double r = std::sqrt((px - c.x) * (px - c.x) + (py - c.y) * (py - c.y) +
                                           (z - c.z) * (z - c.z));
                s += std::polar(1.0, sol.k * r) / (4 * kPi * r) * c.w;
            }
            p.at(ix, iy) = s * h3;
        }
    return p;
}

ComplexVolume solve_total_wave(const MediumModel& m, double k, const SourceSpec& src) {
    auto sol = solve_contrast_source(m, k, src);
    const auto& g = m.grid;
    ComplexVolume u(g);
    for (int iz = 0; iz < g.Nz; ++iz)
        for (int iy = 0; iy < g.Ny; ++iy)
            for (int ix = 0; ix < g.Nx; ++ix)
                u.at(ix, iy, iz) = incident_wave({g.x(ix), g.y(iy), g.z(iz)}, k, src);
    if (sol.w.empty()) return u;

    // one full-grid convolution of the contrast source gives u_s everywhere
    std::array<int, 3> full{g.Nx, g.Ny, g.Nz};
    ConvKernel kernel(k, g.h, full);
    std::vector<cplx> wfull(g.size(), 0), us;
    std::size_t bi = 0;
    for (int iz = 0; iz < sol.shape[2]; ++iz)
        for (int iy = 0; iy < sol.shape[1]; ++iy)
            for (int ix = 0; ix < sol.shape[0]; ++ix, ++bi)
                wfull[g.idx(sol.lo[0] + ix, sol.lo[1] + iy, sol.lo[2] + iz)] = sol.w[bi];
    kernel.apply(wfull, us);
    for (std::size_t i = 0; i < g.size(); ++i) u.v[i] += us[i];
    return u;
}

ScatterDataset sample_far_plane(const MediumModel& m, const FrequencyGrid& kgrid,
                                const SourceSpec& src, double D, double noise_pct,
                                std::uint64_t seed, int plane_nx, int plane_ny) {
    if (!(D > m.grid.b)) throw geometry_error("sample_far_plane: need D > b");
    if (noise_pct < 0) throw config_error("sample_far_plane: noise must be non-negative");
    if (plane_nx <= 0) plane_nx = m.grid.Nx;
    if (plane_ny <= 0) plane_ny = m.grid.Ny;
    if (plane_nx < 2 || plane_ny < 2)
        throw config_error("sample_far_plane: need at least a 2x2 plane");

    ScatterDataset ds;
    ds.source = src;
    ds.kgrid = kgrid;
    ds.D = D;
    ds.noise_pct = noise_pct;
    ds.seed = seed;

    std::mt19937_64 rng(seed);
    auto unit_normal_pair = [&rng]() {
        double u1 = double(rng() >> 11) * 0x1.0p-53;
        if (u1 <= 0) u1 = 0x1.0p-53;
        const double u2 = double(rng() >> 11) * 0x1.0p-53;
        const double r = std::sqrt(-2.0 * std::log(u1));
        return cplx(r * std::cos(2 * kPi * u2), r * std::sin(2 * kPi * u2));
    };

    const double hx = 2 * m.grid.R / (plane_nx - 1), hy = 2 * m.grid.R / (plane_ny - 1);
    for (int q = 0; q < kgrid.Nk; ++q) {
        const double k = kgrid.nodes[q];
        auto sol = solve_contrast_source(m, k, src);
        ComplexPlane p = scattered_plane(sol, -D, plane_nx, plane_ny);
        for (int iy = 0; iy < plane_ny; ++iy)
            for (int ix = 0; ix < plane_nx; ++ix) {
                const std::array<double, 3> x{-m.grid.R + ix * hx, -m.grid.R + iy * hy, -D};
                p.at(ix, iy) += incident_wave(x, k, src);
                if (noise_pct > 0) {
                    const cplx xi = unit_normal_pair();
                    p.at(ix, iy) *= 1.0 + noise_pct * xi / std::sqrt(2.0);
                }
            }
        ds.planes.push_back(std::move(p));
    }
    return ds;
}

}  // namespace mfci
