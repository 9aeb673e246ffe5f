#pragma once
#include <array>
#include <cstdint>
#include <vector>

#include "mfci/grid.hpp"

namespace mfci {

// Refractive medium c(x) >= 1 on a grid, c = 1 on the boundary shell so the
// contrast c-1 is compactly supported inside the box.
struct MediumModel {
    Grid3 grid;
    std::vector<double> c;
};

void validate_medium(const MediumModel& m);

struct SourceSpec {
    std::array<double, 3> position{0.1, 0.0, -9.0};
};

// Total-wave planes at z = -D, one per wavenumber node.
struct ScatterDataset {
    SourceSpec source;
    FrequencyGrid kgrid;
    double D = 0;
    double noise_pct = 0;
    std::uint64_t seed = 0;
    std::vector<ComplexPlane> planes;
};

cplx incident_wave(const std::array<double, 3>& x, double k, const SourceSpec& src);

// Contrast source w = k^2 (c-1) u restricted to the bounding box of the
// support of c-1; u anywhere follows from w by one application of the
// outgoing-kernel integral. Midpoint cells of volume h^3; the singular
// self-cell uses the closed-form integral over the equal-volume ball.
struct ContrastSolution {
    Grid3 grid;
    double k = 0;
    std::array<int, 3> lo{0, 0, 0};     // bounding box origin (ix,iy,iz)
    std::array<int, 3> shape{0, 0, 0};  // bounding box extent
    std::vector<cplx> w;                // x fastest, z slowest; empty if c == 1
    int iterations = 0;
    double residual = 0;
};

ContrastSolution solve_contrast_source(const MediumModel& m, double k, const SourceSpec& src,
                                       double tol = 1e-8);

// u_s sampled on the plane z = const over (-R,R)^2 by direct summation.
ComplexPlane scattered_plane(const ContrastSolution& sol, double z, int nx, int ny);

// Total wave u = u_i + u_s on the medium grid.
ComplexVolume solve_total_wave(const MediumModel& m, double k, const SourceSpec& src);

// Far-plane dataset: per k, total wave on z=-D at the medium's transverse
// resolution (or plane_nx x plane_ny samples when given), with multiplicative
// complex Gaussian noise of relative size noise_pct.
ScatterDataset sample_far_plane(const MediumModel& m, const FrequencyGrid& kgrid,
                                const SourceSpec& src, double D, double noise_pct,
                                std::uint64_t seed, int plane_nx = 0, int plane_ny = 0);

}  // namespace mfci
