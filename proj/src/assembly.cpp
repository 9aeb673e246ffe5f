#include "mfci/assembly.hpp"

#include <cmath>
#include <string>

#include "mfci/errors.hpp"

namespace mfci {

namespace {

constexpr double kPi = 3.14159265358979323846;
constexpr double kFieldFloor = 1e-12;

void check_planes(const std::vector<ComplexPlane>& p, const FrequencyGrid& kgrid,
                  const char* who) {
    if (int(p.size()) != kgrid.Nk)
        throw dimension_error(std::string(who) + ": need one plane per quadrature node");
    for (const auto& q : p)
        if (q.Nx != p[0].Nx || q.Ny != p[0].Ny || q.z != p[0].z || q.R != p[0].R)
            throw dimension_error(std::string(who) + ": planes disagree on geometry");
}

}  // namespace

std::vector<ComplexPlane> log_ratio_continuous(const std::vector<ComplexPlane>& u,
                                               const std::vector<ComplexPlane>& u_i,
                                               const FrequencyGrid& kgrid) {
    check_planes(u, kgrid, "log_ratio_continuous");
    check_planes(u_i, kgrid, "log_ratio_continuous");
    if (u[0].Nx != u_i[0].Nx || u[0].Ny != u_i[0].Ny)
        throw dimension_error("log_ratio_continuous: total and incident planes disagree");

    std::vector<ComplexPlane> v;
    v.reserve(u.size());
    for (const auto& p : u) v.emplace_back(p.R, p.Nx, p.Ny, p.z);

    for (int iy = 0; iy < u[0].Ny; ++iy)
        for (int ix = 0; ix < u[0].Nx; ++ix) {
            double theta = 0;
            for (int q = 0; q < kgrid.Nk; ++q) {
                const double k = kgrid.nodes[q];
                const cplx a = u[q].at(ix, iy), b = u_i[q].at(ix, iy);
                if (std::abs(a) <= kFieldFloor || std::abs(b) <= kFieldFloor)
                    throw degenerate_field_error(
                        "log_ratio_continuous: field magnitude below 1e-12 at pixel (" +
                            std::to_string(ix) + "," + std::to_string(iy) + "), k = " +
                            std::to_string(k),
                        ix, iy, k);
                const cplx ratio = a / b;
                const double raw = std::arg(ratio);
                if (q == 0) {
                    theta = raw;
                } else {
                    // keep the jump from the previous node inside (-pi, pi]
                    const double d = raw - theta;
                    theta += d - 2 * kPi * std::ceil((d - kPi) / (2 * kPi));
                }
                v[q].at(ix, iy) = cplx(std::log(std::abs(ratio)), theta) / (k * k);
            }
        }
    return v;
}

std::vector<ComplexPlane> dz_log_ratio(const std::vector<ComplexPlane>& u,
                                       const std::vector<ComplexPlane>& dzu,
                                       const FrequencyGrid& kgrid, const SourceSpec& src) {
    check_planes(u, kgrid, "dz_log_ratio");
    check_planes(dzu, kgrid, "dz_log_ratio");
    if (u[0].Nx != dzu[0].Nx || u[0].Ny != dzu[0].Ny || u[0].z != dzu[0].z)
        throw dimension_error("dz_log_ratio: field and derivative planes disagree");

    std::vector<ComplexPlane> out;
    out.reserve(u.size());
    const double R = u[0].R, z = u[0].z;
    const int nx = u[0].Nx, ny = u[0].Ny;
    const double hx = 2 * R / (nx - 1), hy = 2 * R / (ny - 1);
    for (int q = 0; q < kgrid.Nk; ++q) {
        const double k = kgrid.nodes[q];
        ComplexPlane p(R, nx, ny, z);
        for (int iy = 0; iy < ny; ++iy)
            for (int ix = 0; ix < nx; ++ix) {
                const cplx a = u[q].at(ix, iy);
                if (std::abs(a) <= kFieldFloor)
                    throw degenerate_field_error(
                        "dz_log_ratio: field magnitude below 1e-12 at pixel (" +
                            std::to_string(ix) + "," + std::to_string(iy) + "), k = " +
                            std::to_string(k),
                        ix, iy, k);
                const double dx = -R + ix * hx - src.position[0];
                const double dy = -R + iy * hy - src.position[1];
                const double dz = z - src.position[2];
                const double rho = std::sqrt(dx * dx + dy * dy + dz * dz);
                const cplx dzui_over_ui = cplx(-1.0 / rho, k) * (dz / rho);
                p.at(ix, iy) = (dzu[q].at(ix, iy) / a - dzui_over_ui) / (k * k);
            }
        out.push_back(std::move(p));
    }
    return out;
}

BoundaryData boundary_coeffs(const std::vector<ComplexPlane>& v,
                             const std::vector<ComplexPlane>& dzv, const Basis& basis,
                             const FrequencyGrid& kgrid) {
    if (!(kgrid == basis.kgrid))
        throw config_error("boundary_coeffs: frequency grid does not match the basis");
    check_planes(v, kgrid, "boundary_coeffs");
    check_planes(dzv, kgrid, "boundary_coeffs");

    BoundaryData bd;
    bd.N = basis.N;
    for (int n = 0; n < basis.N; ++n) {
        ComplexPlane p0(v[0].R, v[0].Nx, v[0].Ny, v[0].z);
        ComplexPlane p1(dzv[0].R, dzv[0].Nx, dzv[0].Ny, dzv[0].z);
        for (int q = 0; q < kgrid.Nk; ++q) {
            const double wq = basis.kgrid.weights[q] * basis.psi_at(n, q);
            for (std::size_t i = 0; i < p0.v.size(); ++i) p0.v[i] += wq * v[q].v[i];
            for (std::size_t i = 0; i < p1.v.size(); ++i) p1.v[i] += wq * dzv[q].v[i];
        }
        bd.g0.push_back(std::move(p0));
        bd.g1.push_back(std::move(p1));
    }
    return bd;
}

QField compute_Q(const Basis& basis, const FrequencyGrid& kgrid, const SourceSpec& src,
                 const Grid3& grid) {
    if (!(kgrid == basis.kgrid))
        throw config_error("compute_Q: frequency grid does not match the basis");
    if (std::abs(src.position[0]) <= grid.R && std::abs(src.position[1]) <= grid.R &&
        std::abs(src.position[2]) <= grid.b)
        throw geometry_error("compute_Q: source must lie outside the reconstruction box");

    QField f;
    f.grid = grid;
    f.N = basis.N;
    const std::vector<double> T = compute_T(basis, kgrid);
    f.alpha.resize(std::size_t(basis.N) * basis.N);
    f.beta.resize(f.alpha.size());
    for (int l = 0; l < basis.N; ++l)
        for (int n = 0; n < basis.N; ++n) {
            const std::size_t i = std::size_t(l) * basis.N + n;
            f.alpha[i] = 2 * (T[i] + (l == n ? 1.0 : 0.0));
            f.beta[i] = -2 * basis.S[i];
        }

    f.rho.resize(grid.size());
    for (auto& c : f.rhohat) c.resize(grid.size());
    for (int iz = 0; iz < grid.Nz; ++iz)
        for (int iy = 0; iy < grid.Ny; ++iy)
            for (int ix = 0; ix < grid.Nx; ++ix) {
                const std::size_t i = grid.idx(ix, iy, iz);
                const double dx = grid.x(ix) - src.position[0];
                const double dy = grid.y(iy) - src.position[1];
                const double dz = grid.z(iz) - src.position[2];
                const double rho = std::sqrt(dx * dx + dy * dy + dz * dz);
                f.rho[i] = rho;
                f.rhohat[0][i] = dx / rho;
                f.rhohat[1][i] = dy / rho;
                f.rhohat[2][i] = dz / rho;
            }
    return f;
}

}  // namespace mfci
