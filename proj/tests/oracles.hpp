// oracles.hpp - Test-only reference computations, kept independent of the
// library paths they check.

#pragma once

#include <cmath>
#include <complex>
#include <vector>

#include <Eigen/Dense>

#include "afdmjsg/channel.hpp"

namespace oracle {

using afdm::AfdmConfig;
using afdm::Complex;
using afdm::CVec;
using afdm::PathSpec;

inline Complex phasor(double turns) {
    return std::polar(1.0, 2.0 * 3.141592653589793238462643383279502884 * turns);
}

// Time-domain matrix of one path from the definitions:
// H_p = h * Gamma_CPP * Delta_nu * Pi^d, acting on the N body samples.
inline Eigen::MatrixXcd path_time_matrix(const PathSpec& p, const AfdmConfig& cfg) {
    const int n = cfg.n;
    Eigen::MatrixXcd pi = Eigen::MatrixXcd::Zero(n, n);
    for (int r = 0; r < n; ++r) pi(r, ((r - p.delay) % n + n) % n) = 1.0;
    Eigen::MatrixXcd gd = Eigen::MatrixXcd::Zero(n, n);
    for (int r = 0; r < n; ++r) {
        const Complex doppler = phasor(-p.doppler() * r / n);
        const Complex cpp = (r < p.delay)
                                ? phasor(-cfg.c1 * (static_cast<double>(n) * n -
                                                    2.0 * n * (p.delay - r)))
                                : Complex(1.0, 0.0);
        gd(r, r) = cpp * doppler;
    }
    return p.gain * gd * pi;
}

// Dense-transform reference for the effective DAFT-domain channel of a path
// list: sum_p A * H_time_p * A^H.
inline Eigen::MatrixXcd effective_dense(const std::vector<PathSpec>& paths, const AfdmConfig& cfg) {
    const Eigen::MatrixXcd a = afdm::daft_matrix(cfg);
    Eigen::MatrixXcd h = Eigen::MatrixXcd::Zero(cfg.n, cfg.n);
    for (const PathSpec& p : paths) h += path_time_matrix(p, cfg);
    return a * h * a.adjoint();
}

// Scalar tanh-product boxplus, folded pairwise.
inline double boxplus_tanh(double a, double b) {
    return 2.0 * std::atanh(std::tanh(a / 2.0) * std::tanh(b / 2.0));
}

inline double boxplus_fold(const std::vector<double>& xs) {
    double acc = xs.front();
    for (size_t i = 1; i < xs.size(); ++i) acc = boxplus_tanh(acc, xs[i]);
    return acc;
}

// GF(2) parity product H * c^T.
inline bool gf2_parity_ok(const std::vector<std::vector<int>>& rows,
                          const std::vector<uint8_t>& bits) {
    for (const auto& row : rows) {
        int s = 0;
        for (int v : row) s ^= bits[v] & 1;
        if (s) return false;
    }
    return true;
}

// Exact per-symbol posterior marginals of y = Hx + w, w ~ CN(0, n0), x
// uniform over the constellation, by full enumeration.
inline std::vector<std::vector<double>> enumerate_marginals(const Eigen::MatrixXcd& h,
                                                            const CVec& y,
                                                            const std::vector<Complex>& points,
                                                            double n0) {
    const int n = static_cast<int>(h.cols());
    const int m = static_cast<int>(points.size());
    long combos = 1;
    for (int i = 0; i < n; ++i) combos *= m;
    std::vector<std::vector<double>> post(n, std::vector<double>(m, 0.0));
    std::vector<int> conf(n, 0);
    CVec x(n);
    double best = -std::numeric_limits<double>::infinity();
    std::vector<double> metrics(combos);
    for (long c = 0; c < combos; ++c) {
        long rem = c;
        for (int i = 0; i < n; ++i) {
            conf[i] = static_cast<int>(rem % m);
            rem /= m;
            x[i] = points[conf[i]];
        }
        const double metric = -(y - h * x).squaredNorm() / n0;
        metrics[c] = metric;
        best = std::max(best, metric);
    }
    for (long c = 0; c < combos; ++c) {
        long rem = c;
        const double w = std::exp(metrics[c] - best);
        for (int i = 0; i < n; ++i) {
            post[i][static_cast<size_t>(rem % m)] += w;
            rem /= m;
        }
    }
    for (int i = 0; i < n; ++i) {
        double z = 0.0;
        for (double v : post[i]) z += v;
        for (double& v : post[i]) v /= z;
    }
    return post;
}

}  // namespace oracle
