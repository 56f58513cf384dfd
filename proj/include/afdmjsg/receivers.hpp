// receivers.hpp - End-to-end receivers over one detection frame, plus the
// closed-form complexity and latency models they are compared against.

#pragma once

#include <optional>
#include <string>
#include <vector>

#include "afdmjsg/jsg.hpp"

namespace afdm::rx {

enum class ReceiverKind { MmseLdpc, TurboIddBp, TurboIddEp, BpJsg, EpJsg, Ejsg };

std::string kind_name(ReceiverKind k);
ReceiverKind kind_from_name(const std::string& name);

struct ReceiverConfig {
    ReceiverKind kind = ReceiverKind::EpJsg;
    int iters = 12;                 // JSG sweeps / MMSE-LDPC decoder iterations
    int n_out = 4;                  // turbo outer rounds
    int n_vi = 3;                   // turbo inner detector sweeps
    int n_ldpc = 3;                 // turbo inner decoder iterations
    std::optional<double> esnr_threshold_db;
    double damping = 0.7;
    bool early_exit = true;
    jsg::MergedMode merged_mode = jsg::MergedMode::Averaged;

    void validate() const;
};

struct OpCounts {
    double mults = 0, adds = 0, exps = 0, logs = 0;
    OpCounts& operator+=(const OpCounts& o);
};

struct ReceiverOutput {
    std::vector<uint8_t> bits;   // decoded payload (message bits, all codewords)
    int iterations_used = 0;
    OpCounts ops;
    bool parity_ok = false;
    // per-iteration payload decisions when requested (convergence studies)
    std::vector<std::vector<uint8_t>> payload_per_iter;
};

/// Everything one frame hands to a receiver: perfect CSI, the stacked
/// observation per slot, and the bit-mapping conventions of the transmitter.
struct FrameContext {
    const AfdmConfig* cfg = nullptr;
    const Constellation* constel = nullptr;
    const ldpc::LdpcCode* code = nullptr;
    const std::vector<int>* interleaver = nullptr;  // symbol-mode receivers
    const EffectiveChannel* h = nullptr;            // stacked (post stack_mimo)
    std::vector<CVec> y;                            // per slot, length n * n_r
    double n0 = 1.0;
    int n_slots = 1;
    int n_codewords = 1;
};

// Slot count so that n_slots * n * n_t_eff * log2(M) is the smallest multiple
// of the code length; the paired codeword count comes with it.
std::pair<int, int> frame_geometry(int n, int n_t_eff, int bits_per_symbol, int code_bits);

ReceiverOutput run_receiver(const FrameContext& fc, const ReceiverConfig& rc,
                            bool capture_per_iter = false);

// ---- closed forms ----

struct OpFormulaParams {
    double n_v = 0;        // variable nodes (symbols)
    double n_f = 0;        // function nodes
    double d_f_ave = 0;
    double d_v_ave = 0;
    int m_order = 4;
    double n_mmse = 0;                // stacked dimension for the MMSE row
    std::vector<int> d_f_per_fn;      // BP row needs the full degree list
};

// Per-iteration operation counts from the complexity table (MMSE counts its
// one-shot equalization instead).
OpCounts count_ops_formula(ReceiverKind kind, const OpFormulaParams& p);

struct LatencyParams {
    double t_vi_vn = 1, t_vi_fn = 1, t_ldpc_vn = 1, t_ldpc_cn = 1;
    double t_res_mmse = 0, t_res_idd = 0, t_res_jsg = 0;
    double t_mmse = 1;
};

// Parametric detection-and-decoding latency; iteration counts come from the
// receiver config (iters for MMSE-LDPC/JSG kinds, n_out/n_vi/n_ldpc for IDD).
double latency_model(ReceiverKind kind, const LatencyParams& p, const ReceiverConfig& rc);

}  // namespace afdm::rx
