#pragma once
#include <array>
#include <vector>

#include "mfci/grid.hpp"

namespace mfci {

// Outcome of sliding a fixed-length window over the per-k maxima curve of a
// near-field dataset. Candidate windows are scored by how much the maxima
// vary inside the window and by how far the argmax pixel wanders; the
// lowest combined score wins, leftmost on ties.
struct WindowReport {
    double k_lo = 0, k_hi = 0;  // chosen window, k_hi = k_lo + window_len
    int first = -1, last = -1;  // inclusive node index range of the chosen window

    std::vector<double> k;                       // dataset nodes, ascending
    std::vector<double> max_abs;                 // per-k max |plane|
    std::vector<std::array<int, 2>> argmax_px;   // per-k argmax pixel (ix,iy)

    std::vector<int> candidate_start;            // scored window start indices
    std::vector<double> variation;               // raw (max-min)/mean per candidate
    std::vector<double> drift;                   // raw max pairwise argmax distance (px)
    std::vector<double> score;                   // combined normalized score
    int chosen = -1;                             // index into the candidate arrays
};

// ks and planes are parallel arrays (one plane per wavenumber, any order).
// Weights a and b multiply the [0,1]-normalized variation and drift scores.
WindowReport select_window(const std::vector<double>& ks,
                           const std::vector<ComplexPlane>& planes, double window_len,
                           double a = 1.0, double b = 1.0);

// Threshold at fraction*max|p|, Gaussian-blur real and imaginary parts
// (separable, kernel radius ceil(3*sigma), zero padded), then rescale so the
// output max equals the thresholded max. All-zero planes pass through.
ComplexPlane truncate_smooth(const ComplexPlane& p, double fraction, double sigma);

}  // namespace mfci
