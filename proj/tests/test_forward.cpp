#include <algorithm>
#include <cmath>
#include <complex>
#include <vector>

#include "doctest.h"
#include "mfci/errors.hpp"
#include "mfci/forward.hpp"
#include "mfci/grid.hpp"

using namespace mfci;

namespace {

constexpr double kPi = 3.14159265358979323846;

MediumModel box_medium(double R, double b, int nx, int ny, int nz, int pad, double cval) {
    MediumModel m;
    m.grid = Grid3(R, b, nx, ny, nz);
    m.c.assign(m.grid.size(), 1.0);
    for (int iz = pad; iz < nz - pad; ++iz)
        for (int iy = pad; iy < ny - pad; ++iy)
            for (int ix = pad; ix < nx - pad; ++ix) m.c[m.grid.idx(ix, iy, iz)] = cval;
    return m;
}

// same cell kernel as the solver: h^3-weighted free-space values, closed-form self cell
cplx cell_green(double k, double h, int dx, int dy, int dz) {
    if (dx == 0 && dy == 0 && dz == 0) {
        const double a = h * std::cbrt(3.0 / (4.0 * kPi));
        return (std::polar(1.0, k * a) * cplx(1.0, -k * a) - 1.0) / (k * k);
    }
    const double r = h * std::sqrt(double(dx) * dx + double(dy) * dy + double(dz) * dz);
    return h * h * h * std::polar(1.0, k * r) / (4 * kPi * r);
}

double rel_l2(const std::vector<cplx>& a, const std::vector<cplx>& b) {
    double num = 0, den = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        num += std::norm(a[i] - b[i]);
        den += std::norm(b[i]);
    }
    return std::sqrt(num / den);
}

}  // namespace

TEST_SUITE("forward") {
    TEST_CASE("incident wave is the outgoing point source") {
        SourceSpec src;
        src.position = {0, 0, 0};
        const cplx u1 = incident_wave({1, 0, 0}, 2.0, src);
        CHECK(std::abs(u1) == doctest::Approx(1.0 / (4 * kPi)).epsilon(1e-12));
        CHECK(std::arg(u1) == doctest::Approx(2.0).epsilon(1e-12));
        const cplx u2 = incident_wave({0, 0, 2}, 2.0, src);
        CHECK(std::abs(u2) == doctest::Approx(1.0 / (8 * kPi)).epsilon(1e-12));
        CHECK_THROWS_AS(incident_wave({0, 0, 0}, 2.0, src), domain_error);
    }

    TEST_CASE("incident wave satisfies the equation to second order") {
        SourceSpec src;  // default position, well away from the probe points
        const double k = 8.0;
        auto residual = [&](double h) {
            double worst = 0;
            const double probes[3][3] = {{0.5, 0.3, -0.7}, {-1.2, 0.4, 0.9}, {0.2, -0.8, 1.4}};
            for (const auto& p : probes) {
                cplx lap = -6.0 * incident_wave({p[0], p[1], p[2]}, k, src);
                for (int d = 0; d < 3; ++d)
                    for (int s = -1; s <= 1; s += 2) {
                        std::array<double, 3> q{p[0], p[1], p[2]};
                        q[d] += s * h;
                        lap += incident_wave(q, k, src);
                    }
                lap /= h * h;
                worst = std::max(worst,
                                 std::abs(lap + k * k * incident_wave({p[0], p[1], p[2]}, k, src)));
            }
            return worst;
        };
        const double e1 = residual(0.1), e2 = residual(0.05);
        CHECK(std::log2(e1 / e2) > 1.8);
    }

    TEST_CASE("medium validation") {
        MediumModel m = box_medium(1.0, 1.0, 11, 11, 11, 3, 2.0);
        CHECK_NOTHROW(validate_medium(m));

        SUBCASE("size mismatch") {
            m.c.pop_back();
            CHECK_THROWS_AS(validate_medium(m), dimension_error);
        }
        SUBCASE("coefficient below one") {
            m.c[m.grid.idx(5, 5, 5)] = 0.5;
            CHECK_THROWS_AS(validate_medium(m), domain_error);
        }
        SUBCASE("contrast reaches the boundary") {
            m.c[m.grid.idx(0, 5, 5)] = 2.0;
            CHECK_THROWS_AS(validate_medium(m), domain_error);
        }
        SUBCASE("source inside the box is rejected") {
            SourceSpec src;
            src.position = {0.2, 0.0, 0.5};
            CHECK_THROWS_AS(solve_contrast_source(m, 3.0, src), geometry_error);
        }
    }

    TEST_CASE("uniform medium scatters nothing") {
        MediumModel m;
        m.grid = Grid3(1.0, 1.0, 11, 11, 11);
        m.c.assign(m.grid.size(), 1.0);
        SourceSpec src;
        src.position = {0.1, 0.0, -4.0};

        auto sol = solve_contrast_source(m, 3.0, src);
        CHECK(sol.w.empty());
        CHECK(sol.iterations == 0);
        CHECK(sol.residual == 0.0);

        auto u = solve_total_wave(m, 3.0, src);
        const auto& g = m.grid;
        double worst = 0;
        for (int iz = 0; iz < g.Nz; ++iz)
            for (int iy = 0; iy < g.Ny; ++iy)
                for (int ix = 0; ix < g.Nx; ++ix)
                    worst = std::max(
                        worst, std::abs(u.at(ix, iy, iz) -
                                        incident_wave({g.x(ix), g.y(iy), g.z(iz)}, 3.0, src)));
        CHECK(worst == 0.0);
    }

    TEST_CASE("solver residual holds under direct re-evaluation") {
        MediumModel m = box_medium(1.0, 1.0, 15, 15, 15, 4, 2.0);
        SourceSpec src;
        src.position = {0.1, 0.0, -4.0};
        const double k = 5.0;
        auto sol = solve_contrast_source(m, k, src);
        CHECK(sol.iterations > 0);
        CHECK(sol.residual <= 1e-8);

        const auto& g = m.grid;
        const auto& s = sol.shape;
        const std::size_t n = std::size_t(s[0]) * s[1] * s[2];
        REQUIRE(sol.w.size() == n);

        // rebuild chi and the right-hand side, then apply the operator by direct summation
        std::vector<double> chi(n);
        std::vector<cplx> rhs(n);
        std::size_t bi = 0;
        for (int iz = 0; iz < s[2]; ++iz)
            for (int iy = 0; iy < s[1]; ++iy)
                for (int ix = 0; ix < s[0]; ++ix, ++bi) {
                    const int gx = sol.lo[0] + ix, gy = sol.lo[1] + iy, gz = sol.lo[2] + iz;
                    chi[bi] = m.c[g.idx(gx, gy, gz)] - 1.0;
                    rhs[bi] = k * k * chi[bi] * incident_wave({g.x(gx), g.y(gy), g.z(gz)}, k, src);
                }
        double rnorm = 0, bnorm = 0;
        bi = 0;
        for (int iz = 0; iz < s[2]; ++iz)
            for (int iy = 0; iy < s[1]; ++iy)
                for (int ix = 0; ix < s[0]; ++ix, ++bi) {
                    cplx conv = 0;
                    std::size_t bj = 0;
                    for (int jz = 0; jz < s[2]; ++jz)
                        for (int jy = 0; jy < s[1]; ++jy)
                            for (int jx = 0; jx < s[0]; ++jx, ++bj)
                                conv += cell_green(k, g.h, ix - jx, iy - jy, iz - jz) * sol.w[bj];
                    rnorm += std::norm(rhs[bi] - (sol.w[bi] - k * k * chi[bi] * conv));
                    bnorm += std::norm(rhs[bi]);
                }
        CHECK(std::sqrt(rnorm / bnorm) <= 2e-8);
    }

    TEST_CASE("weak contrast matches the single-scattering field") {
        MediumModel m = box_medium(1.0, 1.0, 21, 21, 21, 6, 1.0 + 1e-3);
        SourceSpec src;
        src.position = {0.05, 0.0, -3.0};
        const double k = 3.0;
        auto sol = solve_contrast_source(m, k, src);

        const auto& g = m.grid;
        const auto& s = sol.shape;
        std::vector<cplx> born(sol.w.size());
        std::size_t bi = 0;
        for (int iz = 0; iz < s[2]; ++iz)
            for (int iy = 0; iy < s[1]; ++iy)
                for (int ix = 0; ix < s[0]; ++ix, ++bi) {
                    const int gx = sol.lo[0] + ix, gy = sol.lo[1] + iy, gz = sol.lo[2] + iz;
                    born[bi] = k * k * (m.c[g.idx(gx, gy, gz)] - 1.0) *
                               incident_wave({g.x(gx), g.y(gy), g.z(gz)}, k, src);
                }
        CHECK(rel_l2(sol.w, born) < 0.05);
    }

    TEST_CASE("field positions swap with the source position") {
        MediumModel m = box_medium(1.0, 1.0, 21, 21, 21, 7, 2.0);
        const double k = 3.0;
        SourceSpec p, q;
        p.position = {0.3, -0.2, -6.0};
        q.position = {-0.5, 0.1, 4.0};

        auto sol_p = solve_contrast_source(m, k, p);
        auto sol_q = solve_contrast_source(m, k, q);
        // both observation points sit on 21x21 sampling lattices of their planes
        const cplx u_qp = incident_wave(q.position, k, p) +
                          scattered_plane(sol_p, 4.0, 21, 21).at(5, 11);
        const cplx u_pq = incident_wave(p.position, k, q) +
                          scattered_plane(sol_q, -6.0, 21, 21).at(13, 8);
        CHECK(std::abs(u_qp - u_pq) / std::abs(u_qp) < 1e-6);
    }

    TEST_CASE("total field equals incident plus convolved contrast source") {
        MediumModel m = box_medium(1.0, 1.0, 15, 15, 15, 5, 2.0);
        SourceSpec src;
        src.position = {0.1, 0.0, -4.0};
        const double k = 4.0;
        auto sol = solve_contrast_source(m, k, src);
        auto u = solve_total_wave(m, k, src);

        const auto& g = m.grid;
        // probe nodes outside the support, against a direct sum over the support cells
        const int probes[3][3] = {{1, 1, 1}, {13, 2, 12}, {7, 13, 3}};
        for (const auto& pr : probes) {
            cplx us = 0;
            std::size_t bi = 0;
            for (int jz = 0; jz < sol.shape[2]; ++jz)
                for (int jy = 0; jy < sol.shape[1]; ++jy)
                    for (int jx = 0; jx < sol.shape[0]; ++jx, ++bi)
                        us += cell_green(k, g.h, pr[0] - (sol.lo[0] + jx),
                                         pr[1] - (sol.lo[1] + jy), pr[2] - (sol.lo[2] + jz)) *
                              sol.w[bi];
            const cplx want =
                incident_wave({g.x(pr[0]), g.y(pr[1]), g.z(pr[2])}, k, src) + us;
            CHECK(std::abs(u.at(pr[0], pr[1], pr[2]) - want) < 1e-10 * std::abs(want));
        }
    }

    TEST_CASE("scattered field decays away from the target") {
        MediumModel m = box_medium(1.0, 1.0, 15, 15, 15, 5, 2.0);
        SourceSpec src;
        src.position = {0.1, 0.0, -5.0};
        auto sol = solve_contrast_source(m, 5.0, src);
        auto near = scattered_plane(sol, -1.0, 21, 21);
        auto far = scattered_plane(sol, -3.0, 21, 21);
        double mn = 0, mf = 0;
        for (const auto& c : near.v) mn = std::max(mn, std::abs(c));
        for (const auto& c : far.v) mf = std::max(mf, std::abs(c));
        CHECK(mf < mn);
        CHECK(mf > 0);
    }

    TEST_CASE("far plane sampling") {
        MediumModel m = box_medium(1.0, 1.0, 15, 15, 15, 5, 2.0);
        SourceSpec src;
        src.position = {0.1, 0.0, -5.0};
        FrequencyGrid kg(4.0, 6.0, 5);

        SUBCASE("geometry and parameter validation") {
            CHECK_THROWS_AS(sample_far_plane(m, kg, src, 0.5, 0.0, 1), geometry_error);
            CHECK_THROWS_AS(sample_far_plane(m, kg, src, 3.0, -0.1, 1), config_error);
            CHECK_THROWS_AS(sample_far_plane(m, kg, src, 3.0, 0.0, 1, 1, 1), config_error);
        }

        SUBCASE("clean samples are incident plus scattered, on an off-node lattice") {
            auto ds = sample_far_plane(m, kg, src, 3.0, 0.0, 7, 17, 17);
            REQUIRE(ds.planes.size() == 5);
            CHECK(ds.planes[0].Nx == 17);
            for (int q = 0; q < 5; ++q) {
                auto sol = solve_contrast_source(m, kg.nodes[q], src);
                auto us = scattered_plane(sol, -3.0, 17, 17);
                double worst = 0;
                for (int iy = 0; iy < 17; ++iy)
                    for (int ix = 0; ix < 17; ++ix) {
                        const double x = -1.0 + ix * 2.0 / 16, y = -1.0 + iy * 2.0 / 16;
                        const cplx want =
                            us.at(ix, iy) + incident_wave({x, y, -3.0}, kg.nodes[q], src);
                        worst = std::max(worst, std::abs(ds.planes[q].at(ix, iy) - want));
                    }
                CHECK(worst < 1e-14);
            }
        }

        SUBCASE("noise is seeded, multiplicative, and bounded") {
            auto clean = sample_far_plane(m, kg, src, 3.0, 0.0, 7);
            auto a = sample_far_plane(m, kg, src, 3.0, 0.05, 7);
            auto b = sample_far_plane(m, kg, src, 3.0, 0.05, 7);
            auto c = sample_far_plane(m, kg, src, 3.0, 0.05, 8);

            bool same = true, differ = false;
            std::size_t total = 0, above3 = 0;
            double worst_rel = 0;
            for (std::size_t q = 0; q < a.planes.size(); ++q)
                for (std::size_t i = 0; i < a.planes[q].v.size(); ++i) {
                    same = same && a.planes[q].v[i] == b.planes[q].v[i];
                    differ = differ || a.planes[q].v[i] != c.planes[q].v[i];
                    const double rel = std::abs(a.planes[q].v[i] - clean.planes[q].v[i]) /
                                       std::abs(clean.planes[q].v[i]);
                    worst_rel = std::max(worst_rel, rel);
                    ++total;
                    if (rel > 3 * 0.05) ++above3;
                }
            CHECK(same);
            CHECK(differ);
            CHECK(worst_rel <= 5 * 0.05);
            CHECK(double(above3) / double(total) < 0.01);
            CHECK(worst_rel > 0.01);
        }
    }
}
