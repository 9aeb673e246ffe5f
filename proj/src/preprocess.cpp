#include "mfci/preprocess.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "mfci/errors.hpp"

namespace mfci {

WindowReport select_window(const std::vector<double>& ks,
                           const std::vector<ComplexPlane>& planes, double window_len,
                           double a, double b) {
    if (ks.size() != planes.size())
        throw dimension_error("select_window: one plane per wavenumber required");
    if (ks.size() < 3) throw insufficient_data_error("select_window: need at least 3 samples");
    if (!(window_len > 0)) throw config_error("select_window: window length must be positive");

    // canonical k order so storage order cannot influence the choice
    std::vector<int> ord(ks.size());
    std::iota(ord.begin(), ord.end(), 0);
    std::sort(ord.begin(), ord.end(), [&](int i, int j) { return ks[i] < ks[j]; });

    WindowReport rep;
    const int n = int(ks.size());
    rep.k.resize(n);
    rep.max_abs.resize(n);
    rep.argmax_px.resize(n);
    for (int i = 0; i < n; ++i) {
        const auto& p = planes[ord[i]];
        rep.k[i] = ks[ord[i]];
        double mx = -1;
        int best = 0;
        for (std::size_t j = 0; j < p.v.size(); ++j) {
            const double m = std::abs(p.v[j]);
            if (m > mx) {
                mx = m;
                best = int(j);
            }
        }
        rep.max_abs[i] = mx;
        rep.argmax_px[i] = {best % p.Nx, best / p.Nx};
    }
    if (!(window_len < rep.k.back() - rep.k.front()))
        throw config_error("select_window: window length must be shorter than the measured band");

    for (int s = 0; s < n; ++s) {
        if (rep.k[s] + window_len > rep.k.back() + 1e-9) break;
        int e = s;
        while (e + 1 < n && rep.k[e + 1] <= rep.k[s] + window_len + 1e-9) ++e;
        if (e - s + 1 < 3)
            throw insufficient_data_error(
                "select_window: fewer than 3 samples in a candidate window");

        double lo = rep.max_abs[s], hi = rep.max_abs[s], sum = 0;
        for (int i = s; i <= e; ++i) {
            lo = std::min(lo, rep.max_abs[i]);
            hi = std::max(hi, rep.max_abs[i]);
            sum += rep.max_abs[i];
        }
        const double mean = sum / (e - s + 1);
        double dmax = 0;
        for (int i = s; i <= e; ++i)
            for (int j = i + 1; j <= e; ++j) {
                const double dx = rep.argmax_px[i][0] - rep.argmax_px[j][0];
                const double dy = rep.argmax_px[i][1] - rep.argmax_px[j][1];
                dmax = std::max(dmax, std::hypot(dx, dy));
            }
        rep.candidate_start.push_back(s);
        rep.variation.push_back(mean > 0 ? (hi - lo) / mean : 0.0);
        rep.drift.push_back(dmax);
    }
    if (rep.candidate_start.empty())
        throw insufficient_data_error("select_window: no candidate window fits the band");

    auto normalized = [](const std::vector<double>& raw) {
        const auto [lo, hi] = std::minmax_element(raw.begin(), raw.end());
        std::vector<double> out(raw.size(), 0.0);
        if (*hi > *lo)
            for (std::size_t i = 0; i < raw.size(); ++i) out[i] = (raw[i] - *lo) / (*hi - *lo);
        return out;
    };
    const auto nv = normalized(rep.variation), nd = normalized(rep.drift);
    rep.score.resize(rep.candidate_start.size());
    for (std::size_t i = 0; i < rep.score.size(); ++i) rep.score[i] = a * nv[i] + b * nd[i];
    rep.chosen =
        int(std::min_element(rep.score.begin(), rep.score.end()) - rep.score.begin());

    rep.first = rep.candidate_start[rep.chosen];
    rep.k_lo = rep.k[rep.first];
    rep.k_hi = rep.k_lo + window_len;
    rep.last = rep.first;
    while (rep.last + 1 < n && rep.k[rep.last + 1] <= rep.k_hi + 1e-9) ++rep.last;
    return rep;
}

ComplexPlane truncate_smooth(const ComplexPlane& p, double fraction, double sigma) {
    if (!(fraction > 0) || !(fraction < 1))
        throw config_error("truncate_smooth: fraction must lie in (0,1)");
    if (!(sigma > 0)) throw config_error("truncate_smooth: sigma must be positive");

    double mx = 0;
    for (const auto& c : p.v) mx = std::max(mx, std::abs(c));
    if (mx == 0) return p;

    ComplexPlane tr = p;
    double tmax = 0;
    for (auto& c : tr.v) {
        if (std::abs(c) < fraction * mx)
            c = 0;
        else
            tmax = std::max(tmax, std::abs(c));
    }

    const int r = int(std::ceil(3.0 * sigma));
    std::vector<double> w(2 * r + 1);
    double wsum = 0;
    for (int j = -r; j <= r; ++j) wsum += w[j + r] = std::exp(-0.5 * j * j / (sigma * sigma));
    for (auto& x : w) x /= wsum;

    auto blur_axis = [&](const ComplexPlane& in, bool along_x) {
        ComplexPlane out(in.R, in.Nx, in.Ny, in.z);
        for (int iy = 0; iy < in.Ny; ++iy)
            for (int ix = 0; ix < in.Nx; ++ix) {
                cplx s = 0;
                for (int j = -r; j <= r; ++j) {
                    const int qx = ix + (along_x ? j : 0), qy = iy + (along_x ? 0 : j);
                    if (qx < 0 || qx >= in.Nx || qy < 0 || qy >= in.Ny) continue;
                    s += w[j + r] * in.at(qx, qy);
                }
                out.at(ix, iy) = s;
            }
        return out;
    };
    ComplexPlane sm = blur_axis(blur_axis(tr, true), false);

    double smax = 0;
    for (const auto& c : sm.v) smax = std::max(smax, std::abs(c));
    if (smax == 0) return sm;
    const double factor = tmax / smax;
    for (auto& c : sm.v) c *= factor;
    return sm;
}

}  // namespace mfci
