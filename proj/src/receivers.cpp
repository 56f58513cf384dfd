#include "afdmjsg/receivers.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include <Eigen/Dense>

namespace afdm::rx {

using jsg::JsgGraph;
using jsg::ScheduleKind;
using jsg::ScheduleOptions;

std::string kind_name(ReceiverKind k) {
    switch (k) {
        case ReceiverKind::MmseLdpc: return "mmse_ldpc";
        case ReceiverKind::TurboIddBp: return "turbo_idd_bp";
        case ReceiverKind::TurboIddEp: return "turbo_idd_ep";
        case ReceiverKind::BpJsg: return "bp_jsg";
        case ReceiverKind::EpJsg: return "ep_jsg";
        case ReceiverKind::Ejsg: return "e_jsg";
    }
    return "unknown";
}

ReceiverKind kind_from_name(const std::string& name) {
    for (ReceiverKind k : {ReceiverKind::MmseLdpc, ReceiverKind::TurboIddBp,
                           ReceiverKind::TurboIddEp, ReceiverKind::BpJsg, ReceiverKind::EpJsg,
                           ReceiverKind::Ejsg}) {
        if (kind_name(k) == name) return k;
    }
    throw std::invalid_argument("unknown receiver kind: " + name);
}

void ReceiverConfig::validate() const {
    if (iters < 1 || n_out < 1 || n_vi < 1 || n_ldpc < 1) {
        throw std::invalid_argument("ReceiverConfig: iteration counts must be >= 1");
    }
    if (damping <= 0.0 || damping > 1.0) {
        throw std::invalid_argument("ReceiverConfig: damping must be in (0, 1]");
    }
    if (esnr_threshold_db && kind != ReceiverKind::BpJsg && kind != ReceiverKind::EpJsg &&
        kind != ReceiverKind::Ejsg) {
        throw std::invalid_argument("ReceiverConfig: eSNR threshold only applies to JSG kinds");
    }
}

OpCounts& OpCounts::operator+=(const OpCounts& o) {
    mults += o.mults;
    adds += o.adds;
    exps += o.exps;
    logs += o.logs;
    return *this;
}

std::pair<int, int> frame_geometry(int n, int n_t_eff, int bits_per_symbol, int code_bits) {
    const long per_slot = static_cast<long>(n) * n_t_eff * bits_per_symbol;
    const long g = std::gcd(per_slot, static_cast<long>(code_bits));
    const int slots = static_cast<int>(code_bits / g);
    const int codewords = static_cast<int>(per_slot / g);
    return {slots, codewords};
}

namespace {

std::vector<uint8_t> extract_payload(const ldpc::LdpcCode& code, int n_codewords,
                                     const std::vector<uint8_t>& coded) {
    std::vector<uint8_t> out;
    out.reserve(static_cast<size_t>(n_codewords) * code.k_bits);
    for (int c = 0; c < n_codewords; ++c) {
        for (int pos : code.message_pos) out.push_back(coded[static_cast<long>(c) * code.n_bits + pos]);
    }
    return out;
}

bool coded_parity_ok(const ldpc::LdpcCode& code, int n_codewords,
                     const std::vector<uint8_t>& coded) {
    for (int c = 0; c < n_codewords; ++c) {
        std::vector<uint8_t> cw(coded.begin() + static_cast<long>(c) * code.n_bits,
                                coded.begin() + static_cast<long>(c + 1) * code.n_bits);
        if (!ldpc::parity_ok(code, cw)) return false;
    }
    return true;
}

CVec concat_slots(const FrameContext& fc) {
    const int per_slot = static_cast<int>(fc.y.front().size());
    CVec all(static_cast<Eigen::Index>(per_slot) * fc.n_slots);
    for (int s = 0; s < fc.n_slots; ++s) all.segment(static_cast<Eigen::Index>(s) * per_slot, per_slot) = fc.y[s];
    return all;
}

ReceiverOutput mmse_ldpc(const FrameContext& fc, const ReceiverConfig& rc, bool capture) {
    const Constellation& con = *fc.constel;
    const int m = con.m;
    const int q = con.bits_per_symbol();
    const int d = fc.h->n * fc.h->n_t;  // stacked transmit dimension

    const Eigen::MatrixXcd hd = fc.h->dense();
    const Eigen::MatrixXcd gram = hd.adjoint() * hd;
    Eigen::MatrixXcd reg = gram;
    reg.diagonal().array() += fc.n0;
    const Eigen::LDLT<Eigen::MatrixXcd> solver(reg);

    // Unbiased MMSE: g_m = [ (H^H H + n0 I)^-1 H^H H ]_mm
    const Eigen::MatrixXcd wh = solver.solve(gram);
    Eigen::VectorXd gains(d);
    for (int i = 0; i < d; ++i) gains[i] = std::clamp(wh(i, i).real(), 1e-9, 1.0 - 1e-12);

    const int total_syms = fc.n_slots * d;
    std::vector<double> mod_llr(static_cast<size_t>(total_syms) * q, 0.0);
    std::vector<double> sym_llr(m);
    for (int s = 0; s < fc.n_slots; ++s) {
        const CVec xhat = solver.solve(hd.adjoint() * fc.y[s]);
        for (int i = 0; i < d; ++i) {
            const Complex z = xhat[i] / gains[i];
            const double res_var = (1.0 - gains[i]) / gains[i];
            for (int x = 0; x < m; ++x) sym_llr[x] = -std::norm(z - con.points[x]) / res_var;
            const std::vector<double> bl = jsg::llr_symbol_to_bit(sym_llr, con);
            // symbol index within the frame follows the AVN layout: slot-major
            const long sym_idx = static_cast<long>(s) * d + i;
            for (int k = 0; k < q; ++k) mod_llr[sym_idx * q + k] = bl[k];
        }
    }
    const std::vector<double> coded_llr = jsg::deinterleave(mod_llr, *fc.interleaver);

    ReceiverOutput out;
    std::vector<uint8_t> coded(static_cast<size_t>(fc.n_codewords) * fc.code->n_bits, 0);
    std::vector<std::vector<std::vector<uint8_t>>> per_iter_cw(fc.n_codewords);
    bool all_ok = true;
    int max_iters = 0;
    for (int c = 0; c < fc.n_codewords; ++c) {
        std::vector<double> llr(coded_llr.begin() + static_cast<long>(c) * fc.code->n_bits,
                                coded_llr.begin() + static_cast<long>(c + 1) * fc.code->n_bits);
        std::vector<std::vector<uint8_t>> iters_bits;
        const ldpc::DecodeResult res =
            ldpc::ldpc_decode(*fc.code, llr, rc.iters, nullptr, capture ? &iters_bits : nullptr);
        std::copy(res.bits.begin(), res.bits.end(),
                  coded.begin() + static_cast<long>(c) * fc.code->n_bits);
        all_ok = all_ok && res.ok;
        max_iters = std::max(max_iters, res.iterations);
        if (capture) per_iter_cw[c] = std::move(iters_bits);
    }
    out.bits = extract_payload(*fc.code, fc.n_codewords, coded);
    out.parity_ok = all_ok;
    out.iterations_used = max_iters;

    if (capture) {
        for (int it = 0; it < rc.iters; ++it) {
            std::vector<uint8_t> coded_it(coded.size(), 0);
            for (int c = 0; c < fc.n_codewords; ++c) {
                const auto& hist = per_iter_cw[c];
                const std::vector<uint8_t>& cw =
                    hist.empty() ? std::vector<uint8_t>(coded.begin() + static_cast<long>(c) * fc.code->n_bits,
                                                        coded.begin() + static_cast<long>(c + 1) * fc.code->n_bits)
                                 : hist[std::min<size_t>(it, hist.size() - 1)];
                std::copy(cw.begin(), cw.end(), coded_it.begin() + static_cast<long>(c) * fc.code->n_bits);
            }
            out.payload_per_iter.push_back(extract_payload(*fc.code, fc.n_codewords, coded_it));
        }
    }

    const double n_v = total_syms;
    out.ops.mults = 6.0 * std::pow(d, 3) + 2.0 * std::pow(d, 2) + 2.0 * d;
    out.ops.exps = 2.0 * n_v * (q + m);
    out.ops.logs = 2.0 * n_v * q;
    return out;
}

ReceiverOutput turbo_idd(const FrameContext& fc, const ReceiverConfig& rc, bool inner_bp) {
    const Constellation& con = *fc.constel;
    const int m = con.m;
    const int q = con.bits_per_symbol();

    JsgGraph graph = jsg::build_jsg(*fc.h, *fc.code, jsg::GraphMode::Symbol, con, fc.n_slots,
                                    fc.interleaver, nullptr);
    graph.set_observation(concat_slots(fc), fc.n0);

    const int n_bits = graph.n_bits;
    std::vector<double> prior_mod(n_bits, 0.0);
    std::vector<double> avn_prior(static_cast<size_t>(graph.n_avn) * m, 0.0);

    ReceiverOutput out;
    OpCounts ops;
    std::vector<uint8_t> coded(n_bits, 0);
    bool ok = false;

    ScheduleOptions inner;
    inner.iters = rc.n_vi;
    inner.damping = rc.damping;
    inner.early_exit = false;
    inner.ldpc_coupling = false;
    inner.fixed_avn_prior = &avn_prior;

    int rounds = 0;
    for (int round = 0; round < rc.n_out; ++round) {
        rounds = round + 1;
        const std::vector<double> post_mod =
            jsg::run_schedule(graph, inner_bp ? ScheduleKind::Bp : ScheduleKind::Ep, inner);
        ops += OpCounts{graph.ops.mults, graph.ops.adds, graph.ops.exps, graph.ops.logs};

        std::vector<double> ext_mod(n_bits);
        for (int i = 0; i < n_bits; ++i) ext_mod[i] = post_mod[i] - prior_mod[i];
        const std::vector<double> prior_ldpc = jsg::deinterleave(ext_mod, *fc.interleaver);

        std::vector<double> post_ldpc(n_bits, 0.0);
        ok = true;
        for (int c = 0; c < fc.n_codewords; ++c) {
            std::vector<double> llr(prior_ldpc.begin() + static_cast<long>(c) * fc.code->n_bits,
                                    prior_ldpc.begin() + static_cast<long>(c + 1) * fc.code->n_bits);
            std::vector<double> posterior;
            const ldpc::DecodeResult res = ldpc::ldpc_decode(*fc.code, llr, rc.n_ldpc, &posterior);
            ok = ok && res.ok;
            std::copy(res.bits.begin(), res.bits.end(),
                      coded.begin() + static_cast<long>(c) * fc.code->n_bits);
            std::copy(posterior.begin(), posterior.end(),
                      post_ldpc.begin() + static_cast<long>(c) * fc.code->n_bits);
        }
        if (ok && rc.early_exit) break;
        if (round + 1 == rc.n_out) break;

        std::vector<double> ext_ldpc(n_bits);
        for (int i = 0; i < n_bits; ++i) ext_ldpc[i] = post_ldpc[i] - prior_ldpc[i];
        prior_mod = jsg::interleave(ext_ldpc, *fc.interleaver);
        std::vector<double> bits_k(q);
        for (int a = 0; a < graph.n_avn; ++a) {
            for (int k = 0; k < q; ++k) bits_k[k] = prior_mod[static_cast<size_t>(a) * q + k];
            const std::vector<double> sym = jsg::llr_bit_to_symbol(bits_k, con);
            for (int x = 0; x < m; ++x) avn_prior[static_cast<size_t>(a) * m + x] = sym[x];
        }
    }

    out.bits = extract_payload(*fc.code, fc.n_codewords, coded);
    out.parity_ok = ok;
    out.iterations_used = rounds;
    out.ops = ops;
    return out;
}

ReceiverOutput jsg_receive(const FrameContext& fc, const ReceiverConfig& rc, bool capture) {
    const bool bit_mode = rc.kind == ReceiverKind::Ejsg;
    jsg::EsnrPruning pruning;
    const jsg::EsnrPruning* pruning_ptr = nullptr;
    if (rc.esnr_threshold_db) {
        pruning = jsg::prune_esnr(*fc.h, fc.n0, *rc.esnr_threshold_db);
        pruning_ptr = &pruning;
    }
    JsgGraph graph = jsg::build_jsg(*fc.h, *fc.code,
                                    bit_mode ? jsg::GraphMode::Bit : jsg::GraphMode::Symbol,
                                    *fc.constel, fc.n_slots,
                                    bit_mode ? nullptr : fc.interleaver, pruning_ptr);
    graph.set_observation(concat_slots(fc), fc.n0);

    ScheduleOptions opt;
    opt.iters = rc.iters;
    opt.damping = rc.damping;
    opt.early_exit = rc.early_exit;
    opt.merged_mode = rc.merged_mode;
    opt.capture_per_iter = capture;

    ScheduleKind kind = ScheduleKind::Ep;
    if (rc.kind == ReceiverKind::BpJsg) kind = ScheduleKind::Bp;
    if (rc.kind == ReceiverKind::Ejsg) kind = ScheduleKind::Ejsg;

    jsg::ScheduleDiag diag;
    const std::vector<double> llr = jsg::run_schedule(graph, kind, opt, &diag);

    std::vector<uint8_t> coded(graph.n_bits, 0);
    for (int i = 0; i < graph.n_bits; ++i) coded[i] = llr[i] < 0.0 ? 1 : 0;

    ReceiverOutput out;
    out.bits = extract_payload(*fc.code, fc.n_codewords, coded);
    out.iterations_used = diag.iterations_used;
    out.parity_ok = !diag.parity_per_iter.empty() && diag.parity_per_iter.back();
    out.ops = OpCounts{graph.ops.mults, graph.ops.adds, graph.ops.exps, graph.ops.logs};
    if (capture) {
        for (const auto& bits : diag.bits_per_iter) {
            out.payload_per_iter.push_back(extract_payload(*fc.code, fc.n_codewords, bits));
        }
    }
    return out;
}

}  // namespace

ReceiverOutput run_receiver(const FrameContext& fc, const ReceiverConfig& rc, bool capture_per_iter) {
    rc.validate();
    if (fc.y.empty() || !fc.h || !fc.code || !fc.constel) {
        throw std::invalid_argument("run_receiver: incomplete frame context");
    }
    switch (rc.kind) {
        case ReceiverKind::MmseLdpc:
            return mmse_ldpc(fc, rc, capture_per_iter);
        case ReceiverKind::TurboIddBp:
            return turbo_idd(fc, rc, true);
        case ReceiverKind::TurboIddEp:
            return turbo_idd(fc, rc, false);
        default:
            return jsg_receive(fc, rc, capture_per_iter);
    }
}

OpCounts count_ops_formula(ReceiverKind kind, const OpFormulaParams& p) {
    OpCounts c;
    const double m = p.m_order;
    const double q = std::log2(m);
    switch (kind) {
        case ReceiverKind::MmseLdpc: {
            const double n = p.n_mmse;
            c.mults = 6.0 * n * n * n + 2.0 * n * n + 2.0 * n;
            c.exps = 2.0 * p.n_v * (q + m);
            c.logs = 2.0 * p.n_v * q;
            break;
        }
        case ReceiverKind::BpJsg:
        case ReceiverKind::TurboIddBp: {
            double mults = 0.0, adds = 0.0;
            for (int d : p.d_f_per_fn) {
                const double md = std::pow(m, d);
                mults += 4.0 * d * md;
                adds += 2.0 * md;
            }
            c.mults = mults;
            c.adds = adds + 2.0 * p.n_v * (m * p.d_v_ave + 3.0 * q - 1.0);
            c.exps = 2.0 * p.n_v * (q + m);
            c.logs = 2.0 * p.n_v * q;
            break;
        }
        case ReceiverKind::EpJsg:
        case ReceiverKind::TurboIddEp: {
            c.mults = 4.0 * (p.n_v * (3.0 * m + 8.0) + p.n_f * (3.0 * p.d_f_ave + 3.0 + 2.0 * m));
            c.adds = 2.0 * (p.n_v * (m * p.d_v_ave + 2.0 * m + 3.0) +
                            p.n_f * (2.0 * p.d_f_ave + 2.0 + m));
            c.exps = 2.0 * p.n_v * (q + 3.0 * m);
            c.logs = 2.0 * p.n_v * q;
            break;
        }
        case ReceiverKind::Ejsg: {
            // bit-level rows: d_v_ave / d_f_ave are bit-edge degrees
            c.mults = p.n_v * q * (p.d_v_ave + 7.0);
            c.adds = 8.0 * p.n_v * q + 6.0 * p.n_f * q * p.d_f_ave;
            c.exps = p.n_v * q;
            break;
        }
    }
    return c;
}

double latency_model(ReceiverKind kind, const LatencyParams& p, const ReceiverConfig& rc) {
    switch (kind) {
        case ReceiverKind::MmseLdpc:
            return p.t_mmse + rc.iters * (p.t_ldpc_vn + p.t_ldpc_cn) + p.t_res_mmse;
        case ReceiverKind::TurboIddBp:
        case ReceiverKind::TurboIddEp:
            return rc.n_out * (rc.n_vi * (p.t_vi_vn + p.t_vi_fn) +
                               rc.n_ldpc * (p.t_ldpc_vn + p.t_ldpc_cn) + p.t_res_idd);
        case ReceiverKind::BpJsg:
        case ReceiverKind::EpJsg:
            return rc.iters * (std::max(p.t_vi_vn, p.t_ldpc_vn) +
                               std::max(p.t_vi_fn, p.t_ldpc_cn) + p.t_res_jsg);
        case ReceiverKind::Ejsg:
            return rc.iters *
                   (std::max(p.t_vi_vn, p.t_ldpc_vn) + std::max(p.t_vi_fn, p.t_ldpc_cn));
    }
    return 0.0;
}

}  // namespace afdm::rx
