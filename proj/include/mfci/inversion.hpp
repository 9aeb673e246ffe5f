#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "mfci/assembly.hpp"
#include "mfci/basis.hpp"
#include "mfci/grid.hpp"

namespace mfci {

struct CarlemanParams {
    double lambda = 1.1;
    double r = 5.5;
};

// mu_lambda(z) = exp(-lambda (R+r)^2) exp(lambda (z-r)^2)
double carleman_weight(double z, const CarlemanParams& p, double R);

// Per-layer squared weight for the data term, normalized to 1 on the
// measurement face z = -b so the ratio against the regularization weight
// stays representable: w(z) = exp(2 lambda ((z-r)^2 - (b+r)^2)).
std::vector<double> functional_weights(const Grid3& grid, const CarlemanParams& p);

struct InverseConfig {
    double eps = 1e-9;     // Tikhonov weight on the discrete H2 norm
    double eta0 = 0.1;     // initial descent step
    double eta_min = 1e-9; // stop once halving reaches this step
    double step_tol = 0;   // stop when the iterate moves less than this (H2)
    int max_iters = 1500;
    double M = 0;          // diagnostic ball radius; 0 disables the check
};

// The stack of coefficient fields v_1..v_N on the inversion grid.
struct CoeffVector {
    Grid3 grid;
    int N = 0;
    std::vector<ComplexVolume> v;

    CoeffVector() = default;
    CoeffVector(const Grid3& g, int n) : grid(g), N(n), v(n, ComplexVolume(g)) {}
};

// sqrt of the summed discrete H2 norms of all component fields
double coeff_h2_norm(const CoeffVector& V);

// Zero volume stack with the data-pinned nodes filled in: the measurement
// face carries g0, the first interior layer above it carries g0 + h*g1 (the
// one-sided derivative completion), and the remaining faces stay zero.
CoeffVector pinned_shell(const BoundaryData& boundary, const Grid3& grid);

// Per-l equation residual at interior nodes (zero on the boundary shell):
//   sum_n S_ln lap(v_n) + sum_nm P_lnm grad(v_n).grad(v_m) + sum_n Q_ln.grad(v_n)
std::vector<ComplexVolume> residual(const CoeffVector& V, const Basis& basis, const QField& Q);

// h^3 sum_i w(z_i) sum_l |residual_l(i)|^2 + eps * sum_l h2_norm_sq(v_l)
double evaluate_J(const CoeffVector& V, const Basis& basis, const QField& Q,
                  const std::vector<double>& weights, const InverseConfig& cfg);

// Exact gradient of evaluate_J with respect to the real and imaginary parts
// of the free nodes, in the convention g = dJ/dRe + i dJ/dIm; pinned nodes
// (boundary shell and the completed first layer) carry zero.
CoeffVector gradient_J(const CoeffVector& V, const Basis& basis, const QField& Q,
                       const std::vector<double>& weights, const InverseConfig& cfg);

// Minimizes the quadratic part of the functional (the gradient.gradient
// coupling dropped) over the free nodes with the boundary data pinned, by
// Jacobi-preconditioned conjugate gradients on the normal equations.
// `source` optionally drives the linear system: the data term becomes
// |L(V)_l - source_l|^2, which manufactured-solution tests rely on.
// Relative residual above 1e-8 after max_cg_iters is tolerated up to 1e-4
// with a warning; beyond that the initialization is considered failed.
CoeffVector qr_initialize(const BoundaryData& boundary, const Basis& basis, const QField& Q,
                          const std::vector<double>& weights, const InverseConfig& cfg,
                          const std::vector<ComplexVolume>* source = nullptr,
                          int max_cg_iters = 1500);

struct DescentRecord {
    int iteration;
    double J;
    double eta;
    double step_norm;
};

struct DescentTrace {
    std::vector<DescentRecord> records;
    std::string terminal;        // "stationary", "eta_min", "step_tol", "max_iters"
    bool ball_exceeded = false;  // some iterate left the diagnostic ball
};

// Gradient descent with step halving: a step that increases J is rolled back
// and retried at eta/2 until accepted or eta underflows eta_min.
CoeffVector minimize(const CoeffVector& V0, const Basis& basis, const QField& Q,
                     const std::vector<double>& weights, const InverseConfig& cfg,
                     DescentTrace* trace = nullptr,
                     const std::function<void(int, const CoeffVector&)>& observer = {});

// c(x) = 1 + mean over quadrature nodes of |Re(lap v + k^2 grad v . grad v
//        + 2 grad v . grad u_i / u_i)| with v synthesized from the series.
std::vector<double> reconstruct_c(const CoeffVector& V, const Basis& basis,
                                  const SourceSpec& src);

// Least-squares fit of the contraction factor from per-iteration distances to
// the final iterate: slope of ln d_n over the tail half. Returns -1 when the
// sequence is too short or degenerate.
double fit_contraction(const std::vector<double>& dist);

struct ProbeReport {
    std::vector<double> lambdas;
    // weight-estimate probe: worst-case ratio of the two sides per lambda,
    // the half-margin constant fitted from the best ratio, and the smallest
    // lambda at which the estimate holds with that constant (-1 if none)
    std::vector<double> carleman_ratio;
    double carleman_C = 0;
    double carleman_lambda_ok = -1;
    // convexity probe
    std::vector<double> convexity_fraction;
    double quadratic_fraction = 0;
    int pairs = 0;
    // contraction probe
    double varsigma = -1;
};

// Diagnostic probes of the theory on a desk-scale instance: (a) the weighted
// derivative estimate over a lambda range on random smooth fields vanishing
// with their first derivatives on the boundary, (b) the Monte-Carlo convexity
// gap fraction around Vref with shared smooth perturbation pairs, plus the
// same fraction for the quadratic-only functional, (c) the contraction factor
// fitted from a descent distance sequence when one is supplied.
ProbeReport probe_theorems(const CoeffVector& Vref, const Basis& basis, const QField& Q,
                           const InverseConfig& cfg, const CarlemanParams& base,
                           const std::vector<double>& lambdas, int pairs, std::uint64_t seed,
                           const std::vector<double>& descent_dist = {});

}  // namespace mfci
