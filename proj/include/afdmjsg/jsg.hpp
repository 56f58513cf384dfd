// jsg.hpp - Joint sparse graph: VI factor graph merged with the LDPC Tanner
// graph, plus the message-passing schedules that run on it.
//
// Three schedules share one graph object:
//   BP    max-log messages over joint symbol configurations (degree-capped)
//   EP    Gaussian mean/variance messages with discrete moment matching
//   E-JSG bit-level EP on +-1 variables via the linear constellation encoding
//
// E-JSG LLRs follow the paper's sign convention L = log P(u=-1)/P(u=+1)
// (bit 0 -> u = +1); the schedule reconciles that with the boxplus CN update
// internally. Bit LLRs returned to callers are always log P(0)/P(1).

#pragma once

#include <atomic>
#include <cstdint>
#include <span>
#include <vector>

#include "afdmjsg/channel.hpp"
#include "afdmjsg/ldpc.hpp"

namespace afdm::jsg {

inline constexpr double kVarMin = 1e-8;
inline constexpr double kVarMax = 1e8;
inline constexpr int kBpDegreeCap = 8;
inline constexpr double kInitVar = 10.0;

enum class GraphMode { Symbol, Bit };
enum class ScheduleKind { Bp, Ep, Ejsg };
enum class MergedMode { Averaged, FixedPrior };

struct GaussianMessage {
    Complex mean{0.0, 0.0};
    double var = kInitVar;
};

/// eSNR-based channel sparsification: per (r,t) block, the kept cyclic
/// shifts D_L (10*log10(G_s/N0) >= threshold) and the gains behind them.
struct EsnrPruning {
    double threshold_db = 0.0;
    std::vector<std::vector<char>> keep;     // per block, aligned with BlockChannel::shifts
    std::vector<std::vector<double>> gains;  // G_s per block/shift

    int kept_count(int block) const;
};

EsnrPruning prune_esnr(const EffectiveChannel& h, double n0, double threshold_db);

// Zero fraction of the kept-shift indicator matrix, averaged over blocks.
double pruning_sparsity(const EffectiveChannel& h, const EsnrPruning& p);

/**
 * The merged bipartite graph. Variable side: AVNs (symbol mode) or BVNs (bit
 * mode), which double as the LDPC variable nodes. Function side: likelihood
 * FNs and LDPC check nodes.
 *
 * One graph instance serves one detection problem (one channel, n_slots AFDM
 * symbols, n_codewords LDPC codewords); message buffers live inside.
 */
struct JsgGraph {
    GraphMode mode = GraphMode::Symbol;
    Constellation constel;
    const ldpc::LdpcCode* code = nullptr;

    int n = 0;        // subcarriers
    int n_r = 1;
    int n_t = 1;      // effective transmit layers (1 for Scenario 2)
    int n_slots = 1;
    int n_codewords = 1;
    int n_avn = 0;    // n_slots * n_t * n
    int n_fn = 0;     // n_slots * n_r * n
    int n_vn = 0;     // variable count: n_avn (symbol) or total bits (bit)
    int n_bits = 0;   // n_codewords * code->n_bits

    // VI edges, FN-major CSR. In bit mode every channel coefficient expands
    // into log2(M) bit edges weighted by the generator.
    std::vector<int> fn_begin;
    std::vector<int> edge_vn;
    std::vector<Complex> edge_h;
    std::vector<double> edge_h2;
    std::vector<char> edge_live;                 // D_L membership
    std::vector<std::vector<int>> vn_edges;      // live edges per VN

    // Merged-edge bookkeeping for pruned FNs (D_S side).
    std::vector<Complex> fn_dead_sum_h;
    std::vector<double> fn_dead_sum_h2;
    std::vector<std::vector<int>> fn_dead_vns;
    std::vector<GaussianMessage> fn_merged;      // (mu_S, xi_S) per FN

    // LDPC side, check-major CSR over n_codewords copies of the code.
    std::vector<int> cn_begin;
    std::vector<int> cn_edge_bit;
    std::vector<std::vector<int>> bit_cn_edges;

    // Interleaving (symbol mode only): modulated position of coded bit i.
    std::vector<int> interleaver, deinterleaver;

    // Observation.
    CVec y;           // per FN, indexed like fn ids
    double n0 = 1.0;

    // Runtime knobs (set by run_schedule; unit tests may set directly).
    double damping = 1.0;
    MergedMode merged_mode = MergedMode::Averaged;
    struct OpTally {
        double mults = 0, adds = 0, exps = 0, logs = 0;
    } ops;

    // ---- message state ----
    std::vector<GaussianMessage> v2f, f2v;        // per VI edge
    std::vector<double> f2v_llr;                  // edge*M (symbol) / edge (bit)
    std::vector<double> v2f_llr;                  // edge*M, BP only
    std::vector<double> avn_prior;                // n_avn*M, from LDPC side
    std::vector<double> lvn_prior;                // n_bits, from VI side
    std::vector<double> lv2cn, cn2lv;             // per LDPC edge
    std::vector<double> avn_belief;               // n_avn*M
    std::vector<GaussianMessage> vn_posterior;    // per VN
    std::vector<double> bit_llr;                  // n_bits, log P(0)/P(1)

    int fn_degree(int fn) const { return fn_begin[fn + 1] - fn_begin[fn]; }
    int live_fn_degree(int fn) const;
    double avg_live_fn_degree() const;
    double avg_live_vn_degree() const;

    // Map coded bit index -> (avn, bit-in-symbol) through the interleaver
    // (symbol mode) or directly (bit mode).
    std::pair<int, int> bit_position(int coded_bit) const;

    void set_observation(const CVec& y_all, double n0);
    void reset_messages();

    std::string dump_json() const;  // small-instance debugging
};

// Build the merged graph over the stacked effective channel. The interleaver
// is required in symbol mode and must be absent in bit mode; pruning is
// optional. n_slots * n * n_t * log2(M) must be a multiple of code.n_bits.
JsgGraph build_jsg(const EffectiveChannel& h, const ldpc::LdpcCode& code, GraphMode mode,
                   const Constellation& constel, int n_slots = 1,
                   const std::vector<int>* interleaver = nullptr,
                   const EsnrPruning* pruning = nullptr);

// ---- per-node updates (phase kernels; run_schedule drives them) ----

// Max-log update of all messages leaving one FN. Throws when the live degree
// exceeds kBpDegreeCap.
void bp_fn_update(JsgGraph& g, int fn);
void bp_avn_update(JsgGraph& g, int avn);

// Discrete moment matching at an AVN: posterior pmf from FN LLRs plus the
// LDPC prior, then extrinsic Gaussians by precision subtraction.
void ep_avn_update(JsgGraph& g, int avn);
// Leave-one-out Gaussian combining at an FN, O(degree) via total sums.
void ep_fn_update(JsgGraph& g, int fn);

void ejsg_bvn_update(JsgGraph& g, int bvn);
void ejsg_fn_update(JsgGraph& g, int fn);

// Exact LLR conversions (log-sum-exp, not max-log).
std::vector<double> llr_symbol_to_bit(std::span<const double> sym_llr, const Constellation& c);
std::vector<double> llr_bit_to_symbol(std::span<const double> bit_llr, const Constellation& c);

std::vector<double> interleave(std::span<const double> x, std::span<const int> perm);
std::vector<double> deinterleave(std::span<const double> x, std::span<const int> perm);
std::vector<uint8_t> interleave_bits(std::span<const uint8_t> x, std::span<const int> perm);
std::vector<int> random_interleaver(int length, std::mt19937_64& rng);

struct ScheduleOptions {
    int iters = 12;
    double damping = 0.7;
    bool early_exit = true;
    MergedMode merged_mode = MergedMode::Averaged;
    bool ldpc_coupling = true;   // false: pure VI detector (turbo inner loop)
    bool capture_per_iter = false;
    // Fixed symbol priors for detector-only runs (size n_avn * M).
    const std::vector<double>* fixed_avn_prior = nullptr;
};

struct ScheduleDiag {
    int iterations_used = 0;
    std::vector<char> parity_per_iter;
    std::vector<std::vector<uint8_t>> bits_per_iter;  // filled when capture_per_iter
};

// Flooding schedule per the paper's Algorithm 1 (variable phase, then
// function/check phase). Returns per-bit LLRs, log P(0)/P(1).
std::vector<double> run_schedule(JsgGraph& g, ScheduleKind kind, const ScheduleOptions& opt,
                                 ScheduleDiag* diag = nullptr);

// Call counters behind the structural "no interleaver / no LLR conversion on
// the E-JSG path" check.
namespace testhooks {
void reset_conversion_counters();
uint64_t interleave_calls();
uint64_t llr_conversion_calls();
}  // namespace testhooks

}  // namespace afdm::jsg
