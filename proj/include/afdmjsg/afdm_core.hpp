// afdm_core.hpp - DAFT-domain modulation primitives.
//
// The discrete affine Fourier transform (DAFT) generalizes the DFT with two
// chirp rates c1, c2:  A = Lambda_c2 * F * Lambda_c1, where
// Lambda_c = diag(exp(-j*2*pi*c*n^2)) and F is the unitary DFT.
// Setting c1 = c2 = 0 recovers a plain OFDM chain.

#pragma once

#include <complex>
#include <cstdint>
#include <vector>

#include <Eigen/Dense>

namespace afdm {

using Complex = std::complex<double>;
using CVec = Eigen::VectorXcd;
using CMat = Eigen::MatrixXcd;

inline constexpr double kPi = 3.141592653589793238462643383279502884;

/// Frame geometry and chirp rates of one AFDM carrier set.
struct AfdmConfig {
    int n = 128;          // subcarrier count N
    double c1 = 1.0 / 128;
    double c2 = 1.0 / 128;
    int n_cpp = 24;       // chirp-periodic prefix length

    // Throws std::invalid_argument on n < 2, negative rates or n_cpp >= n.
    void validate() const;
};

// Dense DAFT matrix A = Lambda_c2 F Lambda_c1 (unitary).
CMat daft_matrix(const AfdmConfig& cfg);

// s = A^H x (modulation) and r = A r_time (demodulation).
CVec idaft(const CVec& x, const AfdmConfig& cfg);
CVec daft(const CVec& r_time, const AfdmConfig& cfg);

// Prepend the chirp-periodic prefix:
// s[-k] = s[N-k] * exp(-j*2*pi*c1*(N^2 + 2*N*(-k))), k = 1..N_CPP.
// Output has length n + n_cpp; for c1 = 0 this is a plain cyclic prefix.
CVec add_cpp(const CVec& s, const AfdmConfig& cfg);

// Drop the prefix again (last n samples survive).
CVec remove_cpp(const CVec& s, const AfdmConfig& cfg);

/**
 * Linear-encoding constellation x = g.u with u in {+1,-1}^log2(M).
 *
 * Bit convention: bit 0 -> u = +1, bit 1 -> u = -1. Point index a is the
 * integer value of the bit vector (first bit = LSB), so points[a] = g.u(a)
 * with the generator normalized to unit average symbol energy.
 */
struct Constellation {
    int m = 0;                                  // order M (power of two)
    std::vector<Complex> points;                // M points, unit average energy
    std::vector<std::vector<uint8_t>> labels;   // labels[a][k] = bit k of point a
    std::vector<Complex> generator;             // normalized g, length log2(M)

    int bits_per_symbol() const { return generator.empty() ? 0 : static_cast<int>(generator.size()); }

    // Build from a raw generator vector; normalizes average energy to 1.
    static Constellation linear(const std::vector<Complex>& g_raw);

    // The paper's M = 4 case: g = [1, -1j] (normalized internally).
    static Constellation qpsk();
};

// Map bits to DAFT-domain symbols; |bits| must be a multiple of log2(M).
CVec map_bits(const std::vector<uint8_t>& bits, const Constellation& c);

// Nearest-point hard demapping back to bits.
std::vector<uint8_t> demap_hard(const CVec& x, const Constellation& c);

}  // namespace afdm
