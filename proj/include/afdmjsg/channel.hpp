// channel.hpp - Doubly-selective channels and their DAFT-domain form.
//
// A realization is a list of paths (gain, integer delay, normalized Doppler).
// In the DAFT domain each path turns into a cyclically banded matrix whose
// band sits at the loop shift Ind_p = (alpha_p + 2*N*c1*d_p) mod N; the
// per-entry closed form lives in effective_entry().

#pragma once

#include <random>
#include <vector>

#include "afdmjsg/afdm_core.hpp"

namespace afdm {

/// One propagation path. doppler = alpha + beta with beta in (-1/2, 1/2].
struct PathSpec {
    Complex gain;
    int delay = 0;        // samples, must not exceed n_cpp
    int alpha = 0;        // integer Doppler
    double beta = 0.0;    // fractional Doppler

    double doppler() const { return alpha + beta; }

    static PathSpec make(Complex gain, int delay, double nu);
};

using PathList = std::vector<PathSpec>;

/// Independent path lists per (receive, transmit) antenna pair.
struct ChannelRealization {
    int n_r = 1;
    int n_t = 1;
    std::vector<PathList> paths;  // index r * n_t + t

    PathList& at(int r, int t) { return paths[static_cast<size_t>(r) * n_t + t]; }
    const PathList& at(int r, int t) const { return paths[static_cast<size_t>(r) * n_t + t]; }
};

// One path list: h_p ~ CN(0, 1/p), d_1 = 0 forced, remaining delays uniform
// on {0..delay_max}, nu_p = nu_max * cos(psi) with psi ~ U[-pi, pi].
PathList sample_paths(int p, double nu_max, int delay_max, std::mt19937_64& rng);

// Independent draw per antenna pair; throws if delay_max > cfg.n_cpp.
ChannelRealization sample_channel(int n_r, int n_t, int p, double nu_max, int delay_max,
                                  const AfdmConfig& cfg, std::mt19937_64& rng);

// Push a CPP-prefixed time signal through the channel; returns the N body
// samples of sum_p h_p * exp(-j*2*pi/N * nu_p * t) * s[t - d_p] plus
// CN(0, n0) noise (n0 = 0 for a noiseless pass).
CVec apply_time_domain(const CVec& s_with_cpp, const PathList& paths, const AfdmConfig& cfg,
                       double n0, std::mt19937_64& rng);

// Complex AWGN helper, variance n0 per complex sample.
void add_awgn(CVec& v, double n0, std::mt19937_64& rng);

// Loop shift Ind_p = (alpha_p + 2*N*c1*d_p) mod N. Throws unless 2*N*c1*d_p
// is an integer (the banded structure is only defined then).
int loop_shift(const PathSpec& p, const AfdmConfig& cfg);

// Closed-form DAFT-domain entry of one path, including the 1/N factor, so
// that the full matrix equals A * H_time_p * A^H / h_p. The removable
// singularity at (n - m + Ind_p + beta_p) = 0 mod N evaluates to eta alone.
Complex effective_entry(const PathSpec& p, int n, int m, const AfdmConfig& cfg);

inline constexpr int kFullBand = -1;

/// One (r, t) block of the effective channel, stored by cyclic shift:
/// coef(n, j) = H[n, (n + shifts[j]) mod N].
struct BlockChannel {
    int n = 0;
    std::vector<int> shifts;
    Eigen::MatrixXcd coef;

    Eigen::MatrixXcd dense() const;
    CVec apply(const CVec& x) const;
    // Average gain per stored shift: G_s = (1/N) sum_n |H[n,(n+s)_N]|^2.
    std::vector<double> shift_gains() const;
};

/// Block matrix over the antenna grid (N*N_r x N*N_t once stacked).
struct EffectiveChannel {
    int n = 0;
    int n_r = 1;
    int n_t = 1;
    std::vector<BlockChannel> blocks;  // index r * n_t + t

    BlockChannel& block(int r, int t) { return blocks[static_cast<size_t>(r) * n_t + t]; }
    const BlockChannel& block(int r, int t) const { return blocks[static_cast<size_t>(r) * n_t + t]; }

    Eigen::MatrixXcd dense() const;
    CVec apply(const CVec& x) const;  // x stacked over transmit antennas
};

// Banded construction from the closed form. k_nu = kFullBand keeps every
// shift; otherwise only |(m - n - Ind_p)|_N <= k_nu survives per path.
BlockChannel build_effective_block(const PathList& paths, const AfdmConfig& cfg, int k_nu);
EffectiveChannel build_effective(const ChannelRealization& ch, const AfdmConfig& cfg, int k_nu);

// Scenario 1 keeps the block grid; Scenario 2 sums the blocks of each row
// (all transmit antennas send the same signal).
EffectiveChannel stack_mimo(const EffectiveChannel& h, int scenario);

// JSON fixtures for channel realizations (paths with gain re/im, delay, doppler).
std::string realization_to_json(const ChannelRealization& ch);
ChannelRealization realization_from_json(const std::string& text);

}  // namespace afdm
