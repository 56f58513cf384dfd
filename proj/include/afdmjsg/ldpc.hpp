// ldpc.hpp - LDPC code construction, encoding, and message-passing kernels.
//
// Codes are built greedily (progressive edge growth) to match a target
// variable-node degree distribution at a given rate; check degrees come out
// as balanced as the edge budget allows. The CN update is the exact boxplus.

#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace afdm::ldpc {

/// Node-perspective degree distribution: fractions[i] of nodes have degrees[i].
struct DegreeDist {
    std::vector<int> degrees;
    std::vector<double> fractions;

    static DegreeDist regular(int degree) { return {{degree}, {1.0}}; }
    // lambda(x) = 0.4 x^2 + 0.4 x^3 + 0.2 x^5 from the default code.
    static DegreeDist default_lambda() { return {{2, 3, 5}, {0.4, 0.4, 0.2}}; }
    // rho(x) = 0.5 x^6 + 0.5 x^7.
    static DegreeDist default_rho() { return {{6, 7}, {0.5, 0.5}}; }
};

struct LdpcCode {
    int n_bits = 0;
    int k_bits = 0;
    std::vector<std::vector<int>> rows;  // check -> variable indices
    std::vector<std::vector<int>> cols;  // variable -> check indices

    // Systematic encoder after column permutation: parity bit r equals
    // the GF(2) dot product of enc[r] with the message.
    std::vector<int> message_pos;               // codeword positions of message bits
    std::vector<int> parity_pos;                // codeword positions of parity bits
    std::vector<std::vector<uint64_t>> enc;     // (n - k) x ceil(k/64) bit rows

    int n_checks() const { return static_cast<int>(rows.size()); }
    double rate() const { return static_cast<double>(k_bits) / n_bits; }
};

// Build an (n_bits, rate) code whose LVN degrees follow lambda; CN degrees
// are drawn from rho's support, padded to balance the edge count. Throws on
// an infeasible degree sequence. Full rank is repaired deterministically.
LdpcCode build_code(int n_bits, double rate, const DegreeDist& lambda, const DegreeDist& rho,
                    std::mt19937_64& rng);

std::vector<uint8_t> encode(const LdpcCode& code, const std::vector<uint8_t>& message);

bool parity_ok(const LdpcCode& code, const std::vector<uint8_t>& bits);

// Exact pairwise boxplus of two LLRs (numerically stable Jacobian form).
double boxplus(double a, double b);

// Magnitude kernel gamma(x) = -log(tanh(x/2)) for x > 0; an involution.
double cn_gamma(double x);

// Leave-one-out boxplus on one check: out[i] combines every input but i.
// Inputs are clipped to +-30 first. Requires degree >= 2.
void cn_update(std::span<const double> in, std::span<double> out);

struct DecodeResult {
    std::vector<uint8_t> bits;
    bool ok = false;
    int iterations = 0;
};

// Flooding BP decoder with early exit on satisfied parity. When
// per_iter_bits is non-null it records the hard decisions of every iteration.
DecodeResult ldpc_decode(const LdpcCode& code, const std::vector<double>& llr, int max_iter,
                         std::vector<double>* posterior = nullptr,
                         std::vector<std::vector<uint8_t>>* per_iter_bits = nullptr);

// alist text format (MacKay style) for cross-checks with external tools.
std::string to_alist(const LdpcCode& code);
LdpcCode from_alist(const std::string& text, std::mt19937_64& rng);

}  // namespace afdm::ldpc
