#include "mfci/inversion.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <random>

#include "mfci/errors.hpp"

namespace mfci {

namespace {

bool is_free(const Grid3& g, int ix, int iy, int iz) {
    return ix >= 1 && ix <= g.Nx - 2 && iy >= 1 && iy <= g.Ny - 2 && iz >= 2 && iz <= g.Nz - 2;
}

// in-place stencil kernels mirroring the public finite-difference operators;
// out buffers are fully overwritten, boundary nodes get zero
void lap_inplace(const Grid3& g, const cplx* f, cplx* out) {
    const std::size_t sx = 1, sy = g.Nx, sz = std::size_t(g.Nx) * g.Ny;
    const double ih2 = 1.0 / (g.h * g.h);
    std::fill(out, out + g.size(), cplx(0));
    for (int iz = 1; iz < g.Nz - 1; ++iz)
        for (int iy = 1; iy < g.Ny - 1; ++iy) {
            std::size_t i = g.idx(1, iy, iz);
            for (int ix = 1; ix < g.Nx - 1; ++ix, ++i)
                out[i] = (f[i - sx] + f[i + sx] + f[i - sy] + f[i + sy] + f[i - sz] + f[i + sz] -
                          6.0 * f[i]) *
                         ih2;
        }
}

void grad_inplace(const Grid3& g, const cplx* f, cplx* ox, cplx* oy, cplx* oz) {
    const std::size_t sx = 1, sy = g.Nx, sz = std::size_t(g.Nx) * g.Ny;
    const double i2h = 1.0 / (2 * g.h);
    std::fill(ox, ox + g.size(), cplx(0));
    std::fill(oy, oy + g.size(), cplx(0));
    std::fill(oz, oz + g.size(), cplx(0));
    for (int iz = 1; iz < g.Nz - 1; ++iz)
        for (int iy = 1; iy < g.Ny - 1; ++iy) {
            std::size_t i = g.idx(1, iy, iz);
            for (int ix = 1; ix < g.Nx - 1; ++ix, ++i) {
                ox[i] = (f[i + sx] - f[i - sx]) * i2h;
                oy[i] = (f[i + sy] - f[i - sy]) * i2h;
                oz[i] = (f[i + sz] - f[i - sz]) * i2h;
            }
        }
}

// transposes: read interior values of x, scatter through the stencil
void lap_t_inplace(const Grid3& g, const cplx* x, cplx* out) {
    const std::size_t sx = 1, sy = g.Nx, sz = std::size_t(g.Nx) * g.Ny;
    const double ih2 = 1.0 / (g.h * g.h);
    std::fill(out, out + g.size(), cplx(0));
    for (int iz = 1; iz < g.Nz - 1; ++iz)
        for (int iy = 1; iy < g.Ny - 1; ++iy) {
            std::size_t i = g.idx(1, iy, iz);
            for (int ix = 1; ix < g.Nx - 1; ++ix, ++i) {
                const cplx v = x[i] * ih2;
                out[i] -= 6.0 * v;
                out[i - sx] += v;
                out[i + sx] += v;
                out[i - sy] += v;
                out[i + sy] += v;
                out[i - sz] += v;
                out[i + sz] += v;
            }
        }
}

void grad_t_inplace(const Grid3& g, const cplx* ax, const cplx* ay, const cplx* az, cplx* out) {
    const std::size_t sx = 1, sy = g.Nx, sz = std::size_t(g.Nx) * g.Ny;
    const double i2h = 1.0 / (2 * g.h);
    std::fill(out, out + g.size(), cplx(0));
    for (int iz = 1; iz < g.Nz - 1; ++iz)
        for (int iy = 1; iy < g.Ny - 1; ++iy) {
            std::size_t i = g.idx(1, iy, iz);
            for (int ix = 1; ix < g.Nx - 1; ++ix, ++i) {
                out[i + sx] += ax[i] * i2h;
                out[i - sx] -= ax[i] * i2h;
                out[i + sy] += ay[i] * i2h;
                out[i - sy] -= ay[i] * i2h;
                out[i + sz] += az[i] * i2h;
                out[i - sz] -= az[i] * i2h;
            }
        }
}

void check_shapes(const CoeffVector& V, const Basis& basis, const QField& Q,
                  const std::vector<double>* weights) {
    if (V.N != basis.N || V.N != Q.N || int(V.v.size()) != V.N)
        throw dimension_error("inversion: coefficient stack does not match the basis");
    if (!(V.grid == Q.grid))
        throw dimension_error("inversion: coefficient grid does not match the tensor field");
    for (const auto& f : V.v)
        if (!(f.grid == V.grid))
            throw dimension_error("inversion: component fields disagree on the grid");
    if (weights && int(weights->size()) != V.grid.Nz)
        throw dimension_error("inversion: need one weight per z layer");
}

void check_config(const InverseConfig& cfg) {
    if (cfg.eps < 0) throw config_error("inversion: regularization weight must be >= 0");
    if (!(cfg.eta_min > 0 && cfg.eta_min < cfg.eta0 && cfg.eta0 < 1))
        throw config_error("inversion: need 0 < eta_min < eta0 < 1");
}

// shared assembly state for one evaluation point V
struct Engine {
    const Basis& basis;
    const QField& Q;
    const std::vector<double>& w;
    const Grid3& g;
    const int N;
    const bool use_p;
    const std::vector<ComplexVolume>* f;  // optional driving term in the data part

    std::vector<std::vector<cplx>> lap, gx, gy, gz;  // stencils per component
    std::vector<std::vector<cplx>> res;              // residual per l
    std::vector<double> psym;  // (P_lnm + P_lmn) reordered as [(n*N+m)*N+l]

    Engine(const Basis& b, const QField& q, const std::vector<double>& wz, const Grid3& grid,
           bool with_p, const std::vector<ComplexVolume>* drive)
        : basis(b), Q(q), w(wz), g(grid), N(b.N), use_p(with_p), f(drive) {
        lap.assign(N, std::vector<cplx>(g.size()));
        gx.assign(N, std::vector<cplx>(g.size()));
        gy.assign(N, std::vector<cplx>(g.size()));
        gz.assign(N, std::vector<cplx>(g.size()));
        res.assign(N, std::vector<cplx>(g.size()));
        if (use_p) {
            psym.resize(std::size_t(N) * N * N);
            for (int n = 0; n < N; ++n)
                for (int m = 0; m < N; ++m)
                    for (int l = 0; l < N; ++l)
                        psym[(std::size_t(n) * N + m) * N + l] =
                            basis.P[(std::size_t(l) * N + n) * N + m] +
                            basis.P[(std::size_t(l) * N + m) * N + n];
        }
    }

    void stencils(const CoeffVector& V) {
        for (int n = 0; n < N; ++n) {
            lap_inplace(g, V.v[n].v.data(), lap[n].data());
            grad_inplace(g, V.v[n].v.data(), gx[n].data(), gy[n].data(), gz[n].data());
        }
    }

    void residuals() {
        for (auto& r : res) std::fill(r.begin(), r.end(), cplx(0));
        std::vector<cplx> rg(N), dots(std::size_t(N) * N);
        for (int iz = 1; iz < g.Nz - 1; ++iz)
            for (int iy = 1; iy < g.Ny - 1; ++iy) {
                std::size_t i = g.idx(1, iy, iz);
                for (int ix = 1; ix < g.Nx - 1; ++ix, ++i) {
                    const double rx = Q.rhohat[0][i], ry = Q.rhohat[1][i], rz = Q.rhohat[2][i];
                    const double irho = 1.0 / Q.rho[i];
                    for (int n = 0; n < N; ++n)
                        rg[n] = rx * gx[n][i] + ry * gy[n][i] + rz * gz[n][i];
                    if (use_p)
                        for (int n = 0; n < N; ++n)
                            for (int m = n; m < N; ++m)
                                dots[std::size_t(n) * N + m] = gx[n][i] * gx[m][i] +
                                                               gy[n][i] * gy[m][i] +
                                                               gz[n][i] * gz[m][i];
                    for (int l = 0; l < N; ++l) {
                        cplx acc = 0;
                        const double* Sl = basis.S.data() + std::size_t(l) * N;
                        const double* al = Q.alpha.data() + std::size_t(l) * N;
                        const double* bl = Q.beta.data() + std::size_t(l) * N;
                        for (int n = 0; n < N; ++n) {
                            acc += Sl[n] * lap[n][i];
                            acc += cplx(bl[n] * irho, al[n]) * rg[n];
                        }
                        if (use_p) {
                            const double* Pl = basis.P.data() + std::size_t(l) * N * N;
                            for (int n = 0; n < N; ++n) {
                                acc += Pl[std::size_t(n) * N + n] * dots[std::size_t(n) * N + n];
                                for (int m = n + 1; m < N; ++m)
                                    acc += (Pl[std::size_t(n) * N + m] +
                                            Pl[std::size_t(m) * N + n]) *
                                           dots[std::size_t(n) * N + m];
                            }
                        }
                        if (f) acc -= (*f)[l].v[i];
                        res[l][i] = acc;
                    }
                }
            }
    }

    double data_term() const {
        double s = 0;
        for (int iz = 1; iz < g.Nz - 1; ++iz) {
            double layer = 0;
            for (int iy = 1; iy < g.Ny - 1; ++iy) {
                std::size_t i = g.idx(1, iy, iz);
                for (int ix = 1; ix < g.Nx - 1; ++ix, ++i)
                    for (int l = 0; l < N; ++l) layer += std::norm(res[l][i]);
            }
            s += w[iz] * layer;
        }
        return s * g.h * g.h * g.h;
    }

    double reg_term(const CoeffVector& V) const {
        double s = 0;
        for (int n = 0; n < N; ++n) {
            for (std::size_t i = 0; i < g.size(); ++i)
                s += std::norm(V.v[n].v[i]) + std::norm(lap[n][i]) + std::norm(gx[n][i]) +
                     std::norm(gy[n][i]) + std::norm(gz[n][i]);
        }
        return s * g.h * g.h * g.h;
    }

    // gradient of data + eps * reg with respect to free nodes of V
    void gradient(const CoeffVector& V, double eps, CoeffVector& out) const {
        const double h3 = g.h * g.h * g.h;
        std::vector<std::vector<cplx>> wr(N, std::vector<cplx>(g.size(), cplx(0)));
        for (int l = 0; l < N; ++l)
            for (int iz = 1; iz < g.Nz - 1; ++iz)
                for (int iy = 1; iy < g.Ny - 1; ++iy) {
                    std::size_t i = g.idx(1, iy, iz);
                    for (int ix = 1; ix < g.Nx - 1; ++ix, ++i)
                        wr[l][i] = w[iz] * std::conj(res[l][i]);
                }

        std::vector<cplx> an(g.size()), bx(g.size()), by(g.size()), bz(g.size());
        std::vector<cplx> t1(g.size()), t2(g.size());
        std::vector<cplx> cw(N);
        for (int n = 0; n < N; ++n) {
            // Laplacian channel: sum_l S_ln wr_l, pulled back through the stencil
            for (std::size_t i = 0; i < g.size(); ++i) {
                cplx a = 0;
                for (int l = 0; l < N; ++l) a += basis.S[std::size_t(l) * N + n] * wr[l][i];
                an[i] = a;
            }
            lap_t_inplace(g, an.data(), t1.data());

            // gradient channel: the linearized coupling plus the tensor term
            std::fill(bx.begin(), bx.end(), cplx(0));
            std::fill(by.begin(), by.end(), cplx(0));
            std::fill(bz.begin(), bz.end(), cplx(0));
            for (int iz = 1; iz < g.Nz - 1; ++iz)
                for (int iy = 1; iy < g.Ny - 1; ++iy) {
                    std::size_t i = g.idx(1, iy, iz);
                    for (int ix = 1; ix < g.Nx - 1; ++ix, ++i) {
                        for (int l = 0; l < N; ++l) cw[l] = wr[l][i];
                        const double irho = 1.0 / Q.rho[i];
                        cplx sn = 0;
                        for (int l = 0; l < N; ++l)
                            sn += cw[l] * cplx(Q.beta[std::size_t(l) * N + n] * irho,
                                               Q.alpha[std::size_t(l) * N + n]);
                        cplx ax = sn * Q.rhohat[0][i], ay = sn * Q.rhohat[1][i],
                             az = sn * Q.rhohat[2][i];
                        if (use_p)
                            for (int m = 0; m < N; ++m) {
                                cplx beta_nm = 0;
                                const double* pp =
                                    psym.data() + (std::size_t(n) * N + m) * N;
                                for (int l = 0; l < N; ++l) beta_nm += cw[l] * pp[l];
                                ax += beta_nm * gx[m][i];
                                ay += beta_nm * gy[m][i];
                                az += beta_nm * gz[m][i];
                            }
                        bx[i] = ax;
                        by[i] = ay;
                        bz[i] = az;
                    }
                }
            grad_t_inplace(g, bx.data(), by.data(), bz.data(), t2.data());

            for (std::size_t i = 0; i < g.size(); ++i)
                out.v[n].v[i] = 2 * h3 * std::conj(t1[i] + t2[i]);

            if (eps > 0) {
                lap_t_inplace(g, lap[n].data(), t1.data());
                grad_t_inplace(g, gx[n].data(), gy[n].data(), gz[n].data(), t2.data());
                for (std::size_t i = 0; i < g.size(); ++i)
                    out.v[n].v[i] += 2 * eps * h3 * (V.v[n].v[i] + t1[i] + t2[i]);
            }
        }
        // pinned nodes carry no gradient
        for (int n = 0; n < N; ++n)
            for (int iz = 0; iz < g.Nz; ++iz)
                for (int iy = 0; iy < g.Ny; ++iy)
                    for (int ix = 0; ix < g.Nx; ++ix)
                        if (!is_free(g, ix, iy, iz)) out.v[n].v[g.idx(ix, iy, iz)] = cplx(0);
    }
};

double dot_re(const CoeffVector& a, const CoeffVector& b) {
    double s = 0;
    for (int n = 0; n < a.N; ++n)
        for (std::size_t i = 0; i < a.v[n].v.size(); ++i)
            s += std::real(std::conj(a.v[n].v[i]) * b.v[n].v[i]);
    return s;
}

double sq_norm(const CoeffVector& a) {
    double s = 0;
    for (const auto& f : a.v)
        for (const auto& c : f.v) s += std::norm(c);
    return s;
}

void axpy(CoeffVector& y, double alpha, const CoeffVector& x) {
    for (int n = 0; n < y.N; ++n)
        for (std::size_t i = 0; i < y.v[n].v.size(); ++i) y.v[n].v[i] += alpha * x.v[n].v[i];
}

std::pair<double, double> normal_pair(std::mt19937_64& rng) {
    double u1 = double(rng() >> 11) * 0x1.0p-53;
    if (u1 <= 0) u1 = 0x1.0p-53;
    const double u2 = double(rng() >> 11) * 0x1.0p-53;
    const double r = std::sqrt(-2.0 * std::log(u1));
    return {r * std::cos(2 * 3.14159265358979323846 * u2),
            r * std::sin(2 * 3.14159265358979323846 * u2)};
}

// separable truncated-Gaussian blur of a complex volume, zero-padded
void blur_volume(const Grid3& g, std::vector<cplx>& v, double sigma) {
    const int rad = int(std::ceil(3 * sigma));
    std::vector<double> ker(2 * rad + 1);
    double ksum = 0;
    for (int t = -rad; t <= rad; ++t) ksum += ker[t + rad] = std::exp(-0.5 * t * t / (sigma * sigma));
    for (auto& kv : ker) kv /= ksum;

    std::vector<cplx> tmp(v.size());
    const int dims[3] = {g.Nx, g.Ny, g.Nz};
    const std::size_t strides[3] = {1, std::size_t(g.Nx), std::size_t(g.Nx) * g.Ny};
    for (int axis = 0; axis < 3; ++axis) {
        std::fill(tmp.begin(), tmp.end(), cplx(0));
        for (int iz = 0; iz < g.Nz; ++iz)
            for (int iy = 0; iy < g.Ny; ++iy)
                for (int ix = 0; ix < g.Nx; ++ix) {
                    const int pos[3] = {ix, iy, iz};
                    const std::size_t i = g.idx(ix, iy, iz);
                    cplx acc = 0;
                    for (int t = -rad; t <= rad; ++t) {
                        const int p = pos[axis] + t;
                        if (p < 0 || p >= dims[axis]) continue;
                        acc += ker[t + rad] * v[i + strides[axis] * p - strides[axis] * pos[axis]];
                    }
                    tmp[i] = acc;
                }
        v.swap(tmp);
    }
}

// smooth random stack supported on the free nodes, H2-scaled
CoeffVector smooth_perturbation(const Grid3& g, int N, std::mt19937_64& rng, double scale) {
    CoeffVector d(g, N);
    for (int n = 0; n < N; ++n) {
        for (auto& c : d.v[n].v) {
            const auto [a, b] = normal_pair(rng);
            c = cplx(a, b);
        }
        blur_volume(g, d.v[n].v, 2.0);
        for (int iz = 0; iz < g.Nz; ++iz)
            for (int iy = 0; iy < g.Ny; ++iy)
                for (int ix = 0; ix < g.Nx; ++ix)
                    if (!is_free(g, ix, iy, iz)) d.v[n].v[g.idx(ix, iy, iz)] = cplx(0);
    }
    const double nrm = coeff_h2_norm(d);
    if (nrm > 0)
        for (auto& f : d.v)
            for (auto& c : f.v) c *= scale / nrm;
    return d;
}

}  // namespace

double carleman_weight(double z, const CarlemanParams& p, double R) {
    return std::exp(-p.lambda * (R + p.r) * (R + p.r)) * std::exp(p.lambda * (z - p.r) * (z - p.r));
}

std::vector<double> functional_weights(const Grid3& grid, const CarlemanParams& p) {
    if (!(p.lambda > 0)) throw config_error("functional_weights: lambda must be positive");
    if (!(p.r > grid.b)) throw config_error("functional_weights: need r > b");
    std::vector<double> w(grid.Nz);
    const double ref = (grid.b + p.r) * (grid.b + p.r);
    for (int iz = 0; iz < grid.Nz; ++iz) {
        const double z = grid.z(iz);
        w[iz] = std::exp(2 * p.lambda * ((z - p.r) * (z - p.r) - ref));
    }
    return w;
}

double coeff_h2_norm(const CoeffVector& V) {
    double s = 0;
    for (const auto& f : V.v) s += h2_norm_sq(f);
    return std::sqrt(s);
}

CoeffVector pinned_shell(const BoundaryData& boundary, const Grid3& grid) {
    if (int(boundary.g0.size()) != boundary.N || int(boundary.g1.size()) != boundary.N)
        throw dimension_error("pinned_shell: boundary data is incomplete");
    CoeffVector V(grid, boundary.N);
    for (int n = 0; n < boundary.N; ++n) {
        const auto& p0 = boundary.g0[n];
        const auto& p1 = boundary.g1[n];
        if (p0.Nx != grid.Nx || p0.Ny != grid.Ny || p1.Nx != grid.Nx || p1.Ny != grid.Ny)
            throw dimension_error("pinned_shell: boundary planes do not match the grid");
        for (int iy = 0; iy < grid.Ny; ++iy)
            for (int ix = 0; ix < grid.Nx; ++ix) {
                V.v[n].at(ix, iy, 0) = p0.at(ix, iy);
                if (ix >= 1 && ix <= grid.Nx - 2 && iy >= 1 && iy <= grid.Ny - 2)
                    V.v[n].at(ix, iy, 1) = p0.at(ix, iy) + grid.h * p1.at(ix, iy);
            }
    }
    return V;
}

std::vector<ComplexVolume> residual(const CoeffVector& V, const Basis& basis, const QField& Q) {
    check_shapes(V, basis, Q, nullptr);
    const std::vector<double> ones(V.grid.Nz, 1.0);
    Engine e(basis, Q, ones, V.grid, true, nullptr);
    e.stencils(V);
    e.residuals();
    std::vector<ComplexVolume> out(V.N, ComplexVolume(V.grid));
    for (int l = 0; l < V.N; ++l) out[l].v.assign(e.res[l].begin(), e.res[l].end());
    return out;
}

double evaluate_J(const CoeffVector& V, const Basis& basis, const QField& Q,
                  const std::vector<double>& weights, const InverseConfig& cfg) {
    check_shapes(V, basis, Q, &weights);
    if (cfg.eps < 0) throw config_error("inversion: regularization weight must be >= 0");
    Engine e(basis, Q, weights, V.grid, true, nullptr);
    e.stencils(V);
    e.residuals();
    return e.data_term() + cfg.eps * e.reg_term(V);
}

CoeffVector gradient_J(const CoeffVector& V, const Basis& basis, const QField& Q,
                       const std::vector<double>& weights, const InverseConfig& cfg) {
    check_shapes(V, basis, Q, &weights);
    if (cfg.eps < 0) throw config_error("inversion: regularization weight must be >= 0");
    Engine e(basis, Q, weights, V.grid, true, nullptr);
    e.stencils(V);
    e.residuals();
    CoeffVector out(V.grid, V.N);
    e.gradient(V, cfg.eps, out);
    return out;
}

CoeffVector qr_initialize(const BoundaryData& boundary, const Basis& basis, const QField& Q,
                          const std::vector<double>& weights, const InverseConfig& cfg,
                          const std::vector<ComplexVolume>* source, int max_cg_iters) {
    const Grid3& g = Q.grid;
    if (boundary.N != basis.N)
        throw dimension_error("qr_initialize: boundary data does not match the basis");
    if (int(weights.size()) != g.Nz)
        throw dimension_error("qr_initialize: need one weight per z layer");
    if (cfg.eps < 0) throw config_error("inversion: regularization weight must be >= 0");
    if (source && int(source->size()) != basis.N)
        throw dimension_error("qr_initialize: driving term does not match the basis");

    const int N = basis.N;
    CoeffVector Vp = pinned_shell(boundary, g);

    Engine e(basis, Q, weights, g, false, source);
    auto apply_grad = [&](const CoeffVector& V, bool with_source, CoeffVector& out) {
        e.f = with_source ? source : nullptr;
        e.stencils(V);
        e.residuals();
        e.gradient(V, cfg.eps, out);
    };

    // right-hand side: minus the gradient at the pinned shell
    CoeffVector b(g, N), tmp(g, N);
    apply_grad(Vp, true, b);
    for (auto& f : b.v)
        for (auto& c : f.v) c = -c;
    const double bnorm = std::sqrt(sq_norm(b));
    if (bnorm == 0) return Vp;

    // exact Jacobi diagonal of the normal operator on the free nodes
    const double h3 = g.h * g.h * g.h, h2 = g.h * g.h, h4 = h2 * h2;
    CoeffVector diag(g, N);
    for (int n = 0; n < N; ++n)
        for (int iz = 2; iz <= g.Nz - 2; ++iz)
            for (int iy = 1; iy <= g.Ny - 2; ++iy)
                for (int ix = 1; ix <= g.Nx - 2; ++ix) {
                    const std::size_t i = g.idx(ix, iy, iz);
                    double data = 0;
                    for (int l = 0; l < N; ++l) {
                        const double S = basis.S[std::size_t(l) * N + n];
                        data += weights[iz] * 36 * S * S / h4;
                        const int off[6][3] = {{1, 0, 0},  {-1, 0, 0}, {0, 1, 0},
                                               {0, -1, 0}, {0, 0, 1},  {0, 0, -1}};
                        for (int s = 0; s < 6; ++s) {
                            const int jx = ix + off[s][0], jy = iy + off[s][1],
                                      jz = iz + off[s][2];
                            if (jx < 1 || jx > g.Nx - 2 || jy < 1 || jy > g.Ny - 2 || jz < 1 ||
                                jz > g.Nz - 2)
                                continue;
                            const std::size_t j = g.idx(jx, jy, jz);
                            const int d = (off[s][0] ? 0 : (off[s][1] ? 1 : 2));
                            const double sgn = (off[s][0] + off[s][1] + off[s][2]) > 0 ? -1 : 1;
                            const cplx q = Q.rhohat[d][j] *
                                           cplx(Q.beta[std::size_t(l) * N + n] / Q.rho[j],
                                                Q.alpha[std::size_t(l) * N + n]);
                            data += weights[jz] * std::norm(S / h2 + sgn * q / (2 * g.h));
                        }
                    }
                    double reg = 1.0;
                    int gr = 0, lp = 0;
                    const int off[6][3] = {{1, 0, 0},  {-1, 0, 0}, {0, 1, 0},
                                           {0, -1, 0}, {0, 0, 1},  {0, 0, -1}};
                    for (int s = 0; s < 6; ++s) {
                        const int jx = ix + off[s][0], jy = iy + off[s][1], jz = iz + off[s][2];
                        if (jx >= 1 && jx <= g.Nx - 2 && jy >= 1 && jy <= g.Ny - 2 && jz >= 1 &&
                            jz <= g.Nz - 2) {
                            ++gr;
                            ++lp;
                        }
                    }
                    reg += gr / (4 * h2) + (36.0 + lp) / h4;
                    diag.v[n].v[i] = 2 * h3 * (data + cfg.eps * reg);
                }

    auto precond = [&](const CoeffVector& r, CoeffVector& z) {
        for (int n = 0; n < N; ++n)
            for (std::size_t i = 0; i < r.v[n].v.size(); ++i) {
                const double d = diag.v[n].v[i].real();
                z.v[n].v[i] = d > 0 ? r.v[n].v[i] / d : cplx(0);
            }
    };

    CoeffVector x(g, N), r = b, z(g, N), p(g, N), Ap(g, N);
    precond(r, z);
    p = z;
    double rz = dot_re(r, z);
    double rel = 1.0;
    const double tol = 1e-8;
    for (int it = 0; it < max_cg_iters; ++it) {
        apply_grad(p, false, Ap);
        const double pAp = dot_re(p, Ap);
        if (!(pAp > 0)) break;
        const double alpha = rz / pAp;
        axpy(x, alpha, p);
        axpy(r, -alpha, Ap);
        rel = std::sqrt(sq_norm(r)) / bnorm;
        if (rel <= tol) break;
        precond(r, z);
        const double rz_new = dot_re(r, z);
        const double beta = rz_new / rz;
        rz = rz_new;
        for (int n = 0; n < N; ++n)
            for (std::size_t i = 0; i < p.v[n].v.size(); ++i)
                p.v[n].v[i] = z.v[n].v[i] + beta * p.v[n].v[i];
    }
    if (rel > tol) {
        if (rel > std::sqrt(tol))
            throw initialization_error(
                "qr_initialize: conjugate gradients stalled at relative residual " +
                    std::to_string(rel),
                rel);
        std::fprintf(stderr,
                     "qr_initialize: accepting partially converged start (relative residual "
                     "%.3e)\n",
                     rel);
    }
    axpy(Vp, 1.0, x);
    return Vp;
}

CoeffVector minimize(const CoeffVector& V0, const Basis& basis, const QField& Q,
                     const std::vector<double>& weights, const InverseConfig& cfg,
                     DescentTrace* trace, const std::function<void(int, const CoeffVector&)>& observer) {
    check_shapes(V0, basis, Q, &weights);
    check_config(cfg);

    CoeffVector V = V0;
    double J = evaluate_J(V, basis, Q, weights, cfg);
    if (!std::isfinite(J)) throw divergence_error("minimize: functional not finite at the start");

    DescentTrace local;
    DescentTrace& tr = trace ? *trace : local;
    tr.records.push_back({0, J, cfg.eta0, 0.0});
    tr.terminal = "max_iters";

    double eta = cfg.eta0;
    for (int it = 1; it <= cfg.max_iters; ++it) {
        CoeffVector grad = gradient_J(V, basis, Q, weights, cfg);
        const double gnorm = std::sqrt(sq_norm(grad));
        if (gnorm == 0) {
            tr.terminal = "stationary";
            break;
        }
        double gh2 = 0;
        for (const auto& f : grad.v) gh2 += h2_norm_sq(f);
        gh2 = std::sqrt(gh2);

        bool accepted = false;
        while (true) {
            CoeffVector trial = V;
            axpy(trial, -eta, grad);
            const double Jt = evaluate_J(trial, basis, Q, weights, cfg);
            if (!std::isfinite(Jt))
                throw divergence_error("minimize: functional not finite at iteration " +
                                       std::to_string(it));
            if (Jt > J) {
                eta /= 2;
                if (eta < cfg.eta_min) break;
                continue;
            }
            V = std::move(trial);
            J = Jt;
            accepted = true;
            break;
        }
        if (!accepted) {
            tr.terminal = "eta_min";
            break;
        }
        const double step = eta * gh2;
        tr.records.push_back({it, J, eta, step});
        if (observer) observer(it, V);
        if (cfg.M > 0 && coeff_h2_norm(V) > cfg.M && !tr.ball_exceeded) {
            tr.ball_exceeded = true;
            std::fprintf(stderr, "minimize: iterate left the diagnostic ball of radius %g\n",
                         cfg.M);
        }
        if (step < cfg.step_tol) {
            tr.terminal = "step_tol";
            break;
        }
    }
    return V;
}

std::vector<double> reconstruct_c(const CoeffVector& V, const Basis& basis,
                                  const SourceSpec& src) {
    if (V.N != basis.N) throw dimension_error("reconstruct_c: stack does not match the basis");
    const Grid3& g = V.grid;
    const FrequencyGrid& kg = basis.kgrid;
    std::vector<double> c(g.size(), 0.0);
    ComplexVolume vk(g);
    std::vector<cplx> lap(g.size()), gx(g.size()), gy(g.size()), gz(g.size());
    for (int q = 0; q < kg.Nk; ++q) {
        const double k = kg.nodes[q];
        for (std::size_t i = 0; i < g.size(); ++i) {
            cplx s = 0;
            for (int n = 0; n < V.N; ++n) s += basis.psi_at(n, q) * V.v[n].v[i];
            vk.v[i] = s;
        }
        lap_inplace(g, vk.v.data(), lap.data());
        grad_inplace(g, vk.v.data(), gx.data(), gy.data(), gz.data());
        for (int iz = 0; iz < g.Nz; ++iz)
            for (int iy = 0; iy < g.Ny; ++iy)
                for (int ix = 0; ix < g.Nx; ++ix) {
                    const std::size_t i = g.idx(ix, iy, iz);
                    const double dx = g.x(ix) - src.position[0], dy = g.y(iy) - src.position[1],
                                 dz = g.z(iz) - src.position[2];
                    const double rho = std::sqrt(dx * dx + dy * dy + dz * dz);
                    const cplx ray = cplx(-1.0 / rho, k) / rho;
                    const cplx du = (dx * gx[i] + dy * gy[i] + dz * gz[i]) * ray;
                    const cplx val =
                        lap[i] + k * k * (gx[i] * gx[i] + gy[i] * gy[i] + gz[i] * gz[i]) +
                        2.0 * du;
                    c[i] += std::abs(val.real());
                }
    }
    for (auto& x : c) x = x / kg.Nk + 1.0;
    return c;
}

double fit_contraction(const std::vector<double>& dist) {
    std::vector<std::pair<double, double>> pts;
    for (std::size_t n = 0; n < dist.size(); ++n)
        if (dist[n] > 0) pts.push_back({double(n), std::log(dist[n])});
    if (pts.size() < 3) return -1;
    const std::size_t n0 = pts.size() / 2;
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    const double cnt = double(pts.size() - n0);
    for (std::size_t i = n0; i < pts.size(); ++i) {
        sx += pts[i].first;
        sy += pts[i].second;
        sxx += pts[i].first * pts[i].first;
        sxy += pts[i].first * pts[i].second;
    }
    const double denom = cnt * sxx - sx * sx;
    if (denom == 0) return -1;
    return std::exp((cnt * sxy - sx * sy) / denom);
}

ProbeReport probe_theorems(const CoeffVector& Vref, const Basis& basis, const QField& Q,
                           const InverseConfig& cfg, const CarlemanParams& base,
                           const std::vector<double>& lambdas, int pairs, std::uint64_t seed,
                           const std::vector<double>& descent_dist) {
    check_shapes(Vref, basis, Q, nullptr);
    if (lambdas.empty()) throw config_error("probe_theorems: need at least one lambda");
    if (pairs < 1) throw config_error("probe_theorems: need at least one pair");
    const Grid3& g = Vref.grid;

    ProbeReport rep;
    rep.lambdas = lambdas;
    rep.pairs = pairs;

    // (a) weighted derivative estimate on smooth fields vanishing on the shell
    const int ns = 8;
    const double h3 = g.h * g.h * g.h;
    std::mt19937_64 crng(seed ^ 0xC0FFEE);
    std::vector<std::vector<cplx>> samples;
    for (int s = 0; s < ns; ++s) {
        std::vector<cplx> v(g.size());
        for (auto& c : v) {
            const auto [a, b] = normal_pair(crng);
            c = cplx(a, b);
        }
        blur_volume(g, v, 2.0);
        for (int iz = 0; iz < g.Nz; ++iz)
            for (int iy = 0; iy < g.Ny; ++iy)
                for (int ix = 0; ix < g.Nx; ++ix) {
                    auto taper = [](double t) {
                        const double s0 = std::sin(3.14159265358979323846 * t);
                        return s0 * s0;
                    };
                    v[g.idx(ix, iy, iz)] *= taper(double(ix) / (g.Nx - 1)) *
                                            taper(double(iy) / (g.Ny - 1)) *
                                            taper(double(iz) / (g.Nz - 1));
                }
        samples.push_back(std::move(v));
    }
    const std::size_t sx = 1, sy = g.Nx, sz = std::size_t(g.Nx) * g.Ny;
    for (const double lam : lambdas) {
        std::vector<double> nu(g.Nz);
        const double ref = (g.b + base.r) * (g.b + base.r);
        for (int iz = 0; iz < g.Nz; ++iz)
            nu[iz] = std::exp(lam * ((g.z(iz) - base.r) * (g.z(iz) - base.r) - ref));
        double worst = -1;
        for (const auto& v : samples) {
            double lhs = 0, d2 = 0, d1 = 0, d0 = 0;
            for (int iz = 1; iz < g.Nz - 1; ++iz)
                for (int iy = 1; iy < g.Ny - 1; ++iy) {
                    std::size_t i = g.idx(1, iy, iz);
                    for (int ix = 1; ix < g.Nx - 1; ++ix, ++i) {
                        const double ih2 = 1.0 / (g.h * g.h);
                        const cplx vxx = (v[i + sx] - 2.0 * v[i] + v[i - sx]) * ih2;
                        const cplx vyy = (v[i + sy] - 2.0 * v[i] + v[i - sy]) * ih2;
                        const cplx vzz = (v[i + sz] - 2.0 * v[i] + v[i - sz]) * ih2;
                        const cplx vxy =
                            (v[i + sx + sy] - v[i + sx - sy] - v[i - sx + sy] + v[i - sx - sy]) *
                            (0.25 * ih2);
                        const cplx vyz =
                            (v[i + sy + sz] - v[i + sy - sz] - v[i - sy + sz] + v[i - sy - sz]) *
                            (0.25 * ih2);
                        const cplx vxz =
                            (v[i + sx + sz] - v[i + sx - sz] - v[i - sx + sz] + v[i - sx - sz]) *
                            (0.25 * ih2);
                        const cplx gxv = (v[i + sx] - v[i - sx]) / (2 * g.h);
                        const cplx gyv = (v[i + sy] - v[i - sy]) / (2 * g.h);
                        const cplx gzv = (v[i + sz] - v[i - sz]) / (2 * g.h);
                        const double mu = nu[iz];
                        lhs += mu * std::norm(vxx + vyy + vzz);
                        d2 += mu * (std::norm(vxx) + std::norm(vyy) + std::norm(vzz) +
                                    std::norm(vxy) + std::norm(vyz) + std::norm(vxz));
                        d1 += mu * (std::norm(gxv) + std::norm(gyv) + std::norm(gzv));
                        d0 += mu * std::norm(v[i]);
                    }
                }
            lhs *= h3;
            const double rhs_over_C = d2 * h3 / lam + lam * d1 * h3 + lam * lam * lam * d0 * h3;
            const double ratio = rhs_over_C > 0 ? lhs / rhs_over_C : 0;
            worst = worst < 0 ? ratio : std::min(worst, ratio);
        }
        rep.carleman_ratio.push_back(worst);
    }
    rep.carleman_C = 0.5 * *std::max_element(rep.carleman_ratio.begin(), rep.carleman_ratio.end());
    for (std::size_t i = 0; i < lambdas.size(); ++i)
        if (rep.carleman_ratio[i] >= rep.carleman_C) {
            rep.carleman_lambda_ok = lambdas[i];
            break;
        }

    // (b) convexity gap fraction with pair sets shared across lambda
    const double scale = 0.5 * std::max(coeff_h2_norm(Vref), 1.0);
    auto gap_fraction = [&](const Basis& b, const std::vector<double>& w) {
        int ok = 0;
        for (int pidx = 0; pidx < pairs; ++pidx) {
            std::mt19937_64 prng(seed ^ (0x9E3779B97F4A7C15ull * (pidx + 1)));
            CoeffVector V1 = Vref, V2 = Vref;
            axpy(V1, 1.0, smooth_perturbation(g, Vref.N, prng, scale));
            axpy(V2, 1.0, smooth_perturbation(g, Vref.N, prng, scale));
            const double J1 = evaluate_J(V1, b, Q, w, cfg);
            const double J2 = evaluate_J(V2, b, Q, w, cfg);
            CoeffVector d = V2;
            axpy(d, -1.0, V1);
            const double lin = dot_re(gradient_J(V1, b, Q, w, cfg), d);
            const double gapv = J2 - J1 - lin;
            if (gapv >= -1e-12 * std::max(std::abs(J1), 1.0)) ++ok;
        }
        return double(ok) / pairs;
    };
    for (const double lam : lambdas)
        rep.convexity_fraction.push_back(
            gap_fraction(basis, functional_weights(g, {lam, base.r})));
    Basis quad = basis;
    std::fill(quad.P.begin(), quad.P.end(), 0.0);
    rep.quadratic_fraction =
        gap_fraction(quad, functional_weights(g, {lambdas.front(), base.r}));

    // (c) contraction factor from the supplied distance sequence
    if (!descent_dist.empty()) rep.varsigma = fit_contraction(descent_dist);
    return rep;
}

}  // namespace mfci
