#include "afdmjsg/jsg.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace afdm::jsg {

namespace {

constexpr double kEdgeEnergyFloor = 1e-20;

std::atomic<uint64_t> g_interleave_calls{0};
std::atomic<uint64_t> g_llr_conversion_calls{0};

double clamp_var(double v) { return std::clamp(v, kVarMin, kVarMax); }

// Extrinsic Gaussian by precision subtraction; falls back to an
// uninformative message around the posterior mean when the subtraction
// goes non-positive.
GaussianMessage extrinsic(const GaussianMessage& posterior, const GaussianMessage& incoming) {
    const double prec = 1.0 / posterior.var - 1.0 / incoming.var;
    if (prec <= 1.0 / kVarMax) {
        return {posterior.mean, kVarMax};
    }
    const double var = std::max(1.0 / prec, kVarMin);
    const Complex mean = var * (posterior.mean / posterior.var - incoming.mean / incoming.var);
    return {mean, var};
}

GaussianMessage damp(const GaussianMessage& fresh, const GaussianMessage& old, double delta) {
    if (delta >= 1.0) return fresh;
    return {delta * fresh.mean + (1.0 - delta) * old.mean,
            clamp_var(delta * fresh.var + (1.0 - delta) * old.var)};
}

double log_sum_exp(std::span<const double> v) {
    double mx = -std::numeric_limits<double>::infinity();
    for (double x : v) mx = std::max(mx, x);
    if (!std::isfinite(mx)) return mx;
    double acc = 0.0;
    for (double x : v) acc += std::exp(x - mx);
    return mx + std::log(acc);
}

}  // namespace

// ---------------------------------------------------------------------------
// Pruning

int EsnrPruning::kept_count(int block) const {
    int c = 0;
    for (char k : keep[block]) c += (k != 0);
    return c;
}

EsnrPruning prune_esnr(const EffectiveChannel& h, double n0, double threshold_db) {
    if (n0 <= 0.0) throw std::invalid_argument("prune_esnr: n0 must be positive");
    EsnrPruning p;
    p.threshold_db = threshold_db;
    p.keep.resize(h.blocks.size());
    p.gains.resize(h.blocks.size());
    for (size_t b = 0; b < h.blocks.size(); ++b) {
        const std::vector<double> g = h.blocks[b].shift_gains();
        p.gains[b] = g;
        p.keep[b].resize(g.size());
        for (size_t j = 0; j < g.size(); ++j) {
            const double esnr_db = 10.0 * std::log10(std::max(g[j], 1e-300) / n0);
            p.keep[b][j] = esnr_db >= threshold_db ? 1 : 0;
        }
    }
    return p;
}

double pruning_sparsity(const EffectiveChannel& h, const EsnrPruning& p) {
    double zero_frac = 0.0;
    for (size_t b = 0; b < h.blocks.size(); ++b) {
        const int kept = p.kept_count(static_cast<int>(b));
        zero_frac += 1.0 - static_cast<double>(kept) / h.blocks[b].n;
    }
    return zero_frac / static_cast<double>(h.blocks.size());
}

// ---------------------------------------------------------------------------
// Graph construction

int JsgGraph::live_fn_degree(int fn) const {
    int d = 0;
    for (int e = fn_begin[fn]; e < fn_begin[fn + 1]; ++e) d += (edge_live[e] != 0);
    return d;
}

double JsgGraph::avg_live_fn_degree() const {
    long total = 0;
    for (int f = 0; f < n_fn; ++f) total += live_fn_degree(f);
    return n_fn ? static_cast<double>(total) / n_fn : 0.0;
}

double JsgGraph::avg_live_vn_degree() const {
    long total = 0;
    for (const auto& es : vn_edges) total += static_cast<long>(es.size());
    return n_vn ? static_cast<double>(total) / n_vn : 0.0;
}

std::pair<int, int> JsgGraph::bit_position(int coded_bit) const {
    const int q = constel.bits_per_symbol();
    const int pos = (mode == GraphMode::Bit) ? coded_bit : interleaver[coded_bit];
    return {pos / q, pos % q};
}

void JsgGraph::set_observation(const CVec& y_all, double noise_var) {
    if (y_all.size() != n_fn) throw std::invalid_argument("set_observation: bad y length");
    if (noise_var <= 0.0) throw std::invalid_argument("set_observation: n0 must be positive");
    y = y_all;
    n0 = noise_var;
    reset_messages();
}

void JsgGraph::reset_messages() {
    const int n_edges = static_cast<int>(edge_vn.size());
    const int m_order = constel.m;
    v2f.assign(n_edges, GaussianMessage{});
    f2v.assign(n_edges, GaussianMessage{});
    f2v_llr.assign(static_cast<size_t>(n_edges) * (mode == GraphMode::Symbol ? m_order : 1), 0.0);
    v2f_llr.assign(mode == GraphMode::Symbol ? static_cast<size_t>(n_edges) * m_order : 0, 0.0);
    avn_prior.assign(mode == GraphMode::Symbol ? static_cast<size_t>(n_avn) * m_order : 0, 0.0);
    avn_belief.assign(avn_prior.size(), 0.0);
    lvn_prior.assign(n_bits, 0.0);
    lv2cn.assign(cn_edge_bit.size(), 0.0);
    cn2lv.assign(cn_edge_bit.size(), 0.0);
    vn_posterior.assign(n_vn, GaussianMessage{Complex(0.0, 0.0), 1.0});
    fn_merged.assign(n_fn, GaussianMessage{Complex(0.0, 0.0), 1.0});
    bit_llr.assign(n_bits, 0.0);
    ops = OpTally{};
}

JsgGraph build_jsg(const EffectiveChannel& h, const ldpc::LdpcCode& code, GraphMode mode,
                   const Constellation& constel, int n_slots,
                   const std::vector<int>* interleaver, const EsnrPruning* pruning) {
    if (n_slots < 1) throw std::invalid_argument("build_jsg: n_slots must be >= 1");
    const int q = constel.bits_per_symbol();
    JsgGraph g;
    g.mode = mode;
    g.constel = constel;
    g.code = &code;
    g.n = h.n;
    g.n_r = h.n_r;
    g.n_t = h.n_t;
    g.n_slots = n_slots;
    g.n_avn = n_slots * h.n_t * h.n;
    g.n_fn = n_slots * h.n_r * h.n;

    const long total_bits = static_cast<long>(g.n_avn) * q;
    if (total_bits % code.n_bits != 0) {
        throw std::invalid_argument("build_jsg: modulated bits not a multiple of the code length");
    }
    g.n_codewords = static_cast<int>(total_bits / code.n_bits);
    g.n_bits = static_cast<int>(total_bits);
    g.n_vn = (mode == GraphMode::Symbol) ? g.n_avn : g.n_bits;

    if (mode == GraphMode::Symbol) {
        if (!interleaver || static_cast<int>(interleaver->size()) != g.n_bits) {
            throw std::invalid_argument("build_jsg: symbol mode needs an interleaver of bit length");
        }
        g.interleaver = *interleaver;
        g.deinterleaver.assign(g.n_bits, 0);
        for (int i = 0; i < g.n_bits; ++i) g.deinterleaver[g.interleaver[i]] = i;
    } else if (interleaver) {
        throw std::invalid_argument("build_jsg: bit mode takes no interleaver");
    }
    if (pruning && pruning->keep.size() != h.blocks.size()) {
        throw std::invalid_argument("build_jsg: pruning does not match the channel");
    }

    // VI edges, FN-major. Channel coefficients repeat across slots.
    g.fn_begin.assign(g.n_fn + 1, 0);
    g.vn_edges.assign(g.n_vn, {});
    g.fn_dead_sum_h.assign(g.n_fn, Complex(0.0, 0.0));
    g.fn_dead_sum_h2.assign(g.n_fn, 0.0);
    g.fn_dead_vns.assign(g.n_fn, {});

    const int n = h.n;
    for (int s = 0; s < n_slots; ++s) {
        for (int r = 0; r < h.n_r; ++r) {
            for (int row = 0; row < n; ++row) {
                const int fn = (s * h.n_r + r) * n + row;
                for (int t = 0; t < h.n_t; ++t) {
                    const BlockChannel& blk = h.block(r, t);
                    const size_t bidx = static_cast<size_t>(r) * h.n_t + t;
                    for (size_t j = 0; j < blk.shifts.size(); ++j) {
                        const Complex hc = blk.coef(row, static_cast<int>(j));
                        if (std::norm(hc) <= kEdgeEnergyFloor) continue;
                        const bool live = !pruning || pruning->keep[bidx][j];
                        const int m = (row + blk.shifts[j]) % n;
                        const int avn = (s * h.n_t + t) * n + m;
                        if (mode == GraphMode::Symbol) {
                            g.fn_begin[fn + 1]++;
                            g.edge_vn.push_back(avn);
                            g.edge_h.push_back(hc);
                            g.edge_h2.push_back(std::norm(hc));
                            g.edge_live.push_back(live ? 1 : 0);
                        } else {
                            for (int k = 0; k < q; ++k) {
                                const Complex hb = hc * constel.generator[k];
                                g.fn_begin[fn + 1]++;
                                g.edge_vn.push_back(avn * q + k);
                                g.edge_h.push_back(hb);
                                g.edge_h2.push_back(std::norm(hb));
                                g.edge_live.push_back(live ? 1 : 0);
                            }
                        }
                    }
                }
            }
        }
    }
    for (int f = 0; f < g.n_fn; ++f) g.fn_begin[f + 1] += g.fn_begin[f];

    for (int f = 0; f < g.n_fn; ++f) {
        for (int e = g.fn_begin[f]; e < g.fn_begin[f + 1]; ++e) {
            if (g.edge_live[e]) {
                g.vn_edges[g.edge_vn[e]].push_back(e);
            } else {
                g.fn_dead_sum_h[f] += g.edge_h[e];
                g.fn_dead_sum_h2[f] += g.edge_h2[e];
                g.fn_dead_vns[f].push_back(g.edge_vn[e]);
            }
        }
    }

    // LDPC side: n_codewords copies of the Tanner graph.
    const int m_checks = code.n_checks();
    g.cn_begin.assign(static_cast<size_t>(g.n_codewords) * m_checks + 1, 0);
    g.bit_cn_edges.assign(g.n_bits, {});
    for (int c = 0; c < g.n_codewords; ++c) {
        for (int j = 0; j < m_checks; ++j) {
            const int cj = c * m_checks + j;
            g.cn_begin[cj + 1] = g.cn_begin[cj] + static_cast<int>(code.rows[j].size());
            for (int v : code.rows[j]) {
                g.cn_edge_bit.push_back(c * code.n_bits + v);
            }
        }
    }
    for (int e = 0; e < static_cast<int>(g.cn_edge_bit.size()); ++e) {
        g.bit_cn_edges[g.cn_edge_bit[e]].push_back(e);
    }

    g.y = CVec::Zero(g.n_fn);
    g.reset_messages();
    return g;
}

// ---------------------------------------------------------------------------
// LLR conversions and interleaving

std::vector<double> llr_symbol_to_bit(std::span<const double> sym_llr, const Constellation& c) {
    g_llr_conversion_calls.fetch_add(1, std::memory_order_relaxed);
    const int q = c.bits_per_symbol();
    if (static_cast<int>(sym_llr.size()) != c.m) {
        throw std::invalid_argument("llr_symbol_to_bit: size must be M");
    }
    std::vector<double> out(q, 0.0);
    std::vector<double> zero, one;
    for (int k = 0; k < q; ++k) {
        zero.clear();
        one.clear();
        for (int a = 0; a < c.m; ++a) {
            (c.labels[a][k] ? one : zero).push_back(sym_llr[a]);
        }
        out[k] = log_sum_exp(zero) - log_sum_exp(one);
    }
    return out;
}

std::vector<double> llr_bit_to_symbol(std::span<const double> bit_llr, const Constellation& c) {
    g_llr_conversion_calls.fetch_add(1, std::memory_order_relaxed);
    const int q = c.bits_per_symbol();
    if (static_cast<int>(bit_llr.size()) != q) {
        throw std::invalid_argument("llr_bit_to_symbol: size must be log2(M)");
    }
    std::vector<double> out(c.m, 0.0);
    for (int a = 0; a < c.m; ++a) {
        double acc = 0.0;
        for (int k = 0; k < q; ++k) {
            // log P(b_k = label) with L = log P(0)/P(1)
            const double sgn = c.labels[a][k] ? 1.0 : -1.0;
            acc -= std::log1p(std::exp(sgn * bit_llr[k]));
        }
        out[a] = acc;
    }
    const double mx = *std::max_element(out.begin(), out.end());
    for (double& v : out) v -= mx;
    return out;
}

std::vector<double> interleave(std::span<const double> x, std::span<const int> perm) {
    g_interleave_calls.fetch_add(1, std::memory_order_relaxed);
    if (x.size() != perm.size()) throw std::invalid_argument("interleave: length mismatch");
    std::vector<double> out(x.size());
    for (size_t i = 0; i < x.size(); ++i) out[perm[i]] = x[i];
    return out;
}

std::vector<double> deinterleave(std::span<const double> x, std::span<const int> perm) {
    g_interleave_calls.fetch_add(1, std::memory_order_relaxed);
    if (x.size() != perm.size()) throw std::invalid_argument("deinterleave: length mismatch");
    std::vector<double> out(x.size());
    for (size_t i = 0; i < x.size(); ++i) out[i] = x[perm[i]];
    return out;
}

std::vector<uint8_t> interleave_bits(std::span<const uint8_t> x, std::span<const int> perm) {
    g_interleave_calls.fetch_add(1, std::memory_order_relaxed);
    if (x.size() != perm.size()) throw std::invalid_argument("interleave_bits: length mismatch");
    std::vector<uint8_t> out(x.size());
    for (size_t i = 0; i < x.size(); ++i) out[perm[i]] = x[i];
    return out;
}

std::vector<int> random_interleaver(int length, std::mt19937_64& rng) {
    std::vector<int> perm(length);
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    return perm;
}

namespace testhooks {
void reset_conversion_counters() {
    g_interleave_calls.store(0);
    g_llr_conversion_calls.store(0);
}
uint64_t interleave_calls() { return g_interleave_calls.load(); }
uint64_t llr_conversion_calls() { return g_llr_conversion_calls.load(); }
}  // namespace testhooks

// ---------------------------------------------------------------------------
// EP updates (symbol mode)

void ep_avn_update(JsgGraph& g, int avn) {
    const int m = g.constel.m;
    const int q = g.constel.bits_per_symbol();
    std::vector<double> lq(m);
    for (int x = 0; x < m; ++x) lq[x] = g.avn_prior[static_cast<size_t>(avn) * m + x];
    for (int e : g.vn_edges[avn]) {
        for (int x = 0; x < m; ++x) lq[x] += g.f2v_llr[static_cast<size_t>(e) * m + x];
    }
    const double mx = *std::max_element(lq.begin(), lq.end());
    double z = 0.0;
    for (int x = 0; x < m; ++x) {
        lq[x] -= mx;
        z += std::exp(lq[x]);
        g.avn_belief[static_cast<size_t>(avn) * m + x] = lq[x];
    }

    Complex mu = 0.0;
    for (int x = 0; x < m; ++x) mu += (std::exp(lq[x]) / z) * g.constel.points[x];
    double xi = 0.0;
    for (int x = 0; x < m; ++x) xi += (std::exp(lq[x]) / z) * std::norm(g.constel.points[x] - mu);
    xi = clamp_var(xi);
    g.vn_posterior[avn] = {mu, xi};

    const GaussianMessage post{mu, xi};
    for (int e : g.vn_edges[avn]) {
        g.v2f[e] = damp(extrinsic(post, g.f2v[e]), g.v2f[e], g.damping);
    }

    const double d = static_cast<double>(g.vn_edges[avn].size());
    g.ops.mults += 4.0 * (3.0 * m + 8.0);
    g.ops.adds += 2.0 * (m * d + 2.0 * m + 3.0);
    g.ops.exps += 2.0 * (q + 3.0 * m);
    g.ops.logs += 2.0 * q;
}

void ep_fn_update(JsgGraph& g, int fn) {
    const int m = g.constel.m;
    Complex z_tot = g.fn_merged[fn].mean * g.fn_dead_sum_h[fn];
    double b_tot = g.fn_merged[fn].var * g.fn_dead_sum_h2[fn];
    int live = 0;
    for (int e = g.fn_begin[fn]; e < g.fn_begin[fn + 1]; ++e) {
        if (!g.edge_live[e]) continue;
        z_tot += g.edge_h[e] * g.v2f[e].mean;
        b_tot += g.edge_h2[e] * g.v2f[e].var;
        ++live;
    }
    for (int e = g.fn_begin[fn]; e < g.fn_begin[fn + 1]; ++e) {
        if (!g.edge_live[e]) continue;
        const Complex z_ex = z_tot - g.edge_h[e] * g.v2f[e].mean;
        const double b_ex = std::max(b_tot - g.edge_h2[e] * g.v2f[e].var, 0.0);
        const Complex mu = (g.y[fn] - z_ex) / g.edge_h[e];
        const double xi = clamp_var((g.n0 + b_ex) / g.edge_h2[e]);
        g.f2v[e] = {mu, xi};
        double best = -std::numeric_limits<double>::infinity();
        for (int x = 0; x < m; ++x) {
            const double l = -std::norm(g.constel.points[x] - mu) / xi;
            g.f2v_llr[static_cast<size_t>(e) * m + x] = l;
            best = std::max(best, l);
        }
        for (int x = 0; x < m; ++x) g.f2v_llr[static_cast<size_t>(e) * m + x] -= best;
    }
    g.ops.mults += 4.0 * (3.0 * live + 3.0 + 2.0 * m);
    g.ops.adds += 2.0 * (2.0 * live + 2.0 + m);
}

// ---------------------------------------------------------------------------
// BP updates (symbol mode, max-log)

void bp_avn_update(JsgGraph& g, int avn) {
    const int m = g.constel.m;
    const int q = g.constel.bits_per_symbol();
    std::vector<double> belief(m);
    for (int x = 0; x < m; ++x) belief[x] = g.avn_prior[static_cast<size_t>(avn) * m + x];
    for (int e : g.vn_edges[avn]) {
        for (int x = 0; x < m; ++x) belief[x] += g.f2v_llr[static_cast<size_t>(e) * m + x];
    }
    const double mx = *std::max_element(belief.begin(), belief.end());
    for (int x = 0; x < m; ++x) {
        belief[x] -= mx;
        g.avn_belief[static_cast<size_t>(avn) * m + x] = belief[x];
    }

    // Posterior moments feed the merged-edge stand-in under pruning.
    double z = 0.0;
    for (int x = 0; x < m; ++x) z += std::exp(belief[x]);
    Complex mu = 0.0;
    for (int x = 0; x < m; ++x) mu += (std::exp(belief[x]) / z) * g.constel.points[x];
    double xi = 0.0;
    for (int x = 0; x < m; ++x) xi += (std::exp(belief[x]) / z) * std::norm(g.constel.points[x] - mu);
    g.vn_posterior[avn] = {mu, clamp_var(xi)};

    for (int e : g.vn_edges[avn]) {
        double best = -std::numeric_limits<double>::infinity();
        for (int x = 0; x < m; ++x) {
            const double l = belief[x] - g.f2v_llr[static_cast<size_t>(e) * m + x];
            g.v2f_llr[static_cast<size_t>(e) * m + x] = l;
            best = std::max(best, l);
        }
        for (int x = 0; x < m; ++x) g.v2f_llr[static_cast<size_t>(e) * m + x] -= best;
    }
    const double d = static_cast<double>(g.vn_edges[avn].size());
    g.ops.adds += 2.0 * (m * d + 3.0 * q - 1.0);
    g.ops.exps += 2.0 * (q + m);
    g.ops.logs += 2.0 * q;
}

void bp_fn_update(JsgGraph& g, int fn) {
    const int m = g.constel.m;
    std::vector<int> live;
    for (int e = g.fn_begin[fn]; e < g.fn_begin[fn + 1]; ++e) {
        if (g.edge_live[e]) live.push_back(e);
    }
    const int d = static_cast<int>(live.size());
    if (d == 0) return;
    if (d > kBpDegreeCap) {
        throw std::runtime_error("bp_fn_update: FN degree " + std::to_string(d) +
                                 " exceeds the BP enumeration cap");
    }
    const Complex y_eff = g.y[fn] - g.fn_merged[fn].mean * g.fn_dead_sum_h[fn];
    const double n_eff = g.n0 + g.fn_merged[fn].var * g.fn_dead_sum_h2[fn];

    std::vector<double> best(static_cast<size_t>(d) * m,
                             -std::numeric_limits<double>::infinity());
    std::vector<int> conf(d, 0);
    long combos = 1;
    for (int i = 0; i < d; ++i) combos *= m;
    for (long c = 0; c < combos; ++c) {
        long rem = c;
        Complex sum = 0.0;
        double in_llr = 0.0;
        for (int i = 0; i < d; ++i) {
            conf[i] = static_cast<int>(rem % m);
            rem /= m;
            sum += g.edge_h[live[i]] * g.constel.points[conf[i]];
            in_llr += g.v2f_llr[static_cast<size_t>(live[i]) * m + conf[i]];
        }
        const double metric = -std::norm(y_eff - sum) / n_eff + in_llr;
        for (int i = 0; i < d; ++i) {
            // extrinsic: remove the target's own incoming LLR
            const double ex = metric - g.v2f_llr[static_cast<size_t>(live[i]) * m + conf[i]];
            double& slot = best[static_cast<size_t>(i) * m + conf[i]];
            slot = std::max(slot, ex);
        }
    }
    for (int i = 0; i < d; ++i) {
        double mx = -std::numeric_limits<double>::infinity();
        for (int x = 0; x < m; ++x) mx = std::max(mx, best[static_cast<size_t>(i) * m + x]);
        for (int x = 0; x < m; ++x) {
            g.f2v_llr[static_cast<size_t>(live[i]) * m + x] =
                best[static_cast<size_t>(i) * m + x] - mx;
        }
    }
    const double md = std::pow(static_cast<double>(m), d);
    g.ops.mults += 4.0 * d * md;
    g.ops.adds += 2.0 * md;
}

// ---------------------------------------------------------------------------
// E-JSG updates (bit mode; LLRs in the paper's log P(u=-1)/P(u=+1) sense)

void ejsg_bvn_update(JsgGraph& g, int bvn) {
    double fn_sum = 0.0;
    for (int e : g.vn_edges[bvn]) fn_sum += g.f2v_llr[e];
    double cn_sum = 0.0;
    for (int j : g.bit_cn_edges[bvn]) cn_sum += g.cn2lv[j];
    const double l_post = fn_sum + cn_sum;

    for (int j : g.bit_cn_edges[bvn]) g.lv2cn[j] = l_post - g.cn2lv[j];
    g.bit_llr[bvn] = -l_post;

    const double mu = -std::tanh(0.5 * l_post);
    const double xi = std::max(1.0 - mu * mu, kVarMin);
    g.vn_posterior[bvn] = {Complex(mu, 0.0), xi};

    const GaussianMessage post{Complex(mu, 0.0), xi};
    for (int e : g.vn_edges[bvn]) {
        g.v2f[e] = damp(extrinsic(post, g.f2v[e]), g.v2f[e], g.damping);
    }

    g.ops.mults += static_cast<double>(g.vn_edges[bvn].size()) + 7.0;
    g.ops.adds += 8.0;
    g.ops.exps += 1.0;
}

void ejsg_fn_update(JsgGraph& g, int fn) {
    Complex z_tot = g.fn_merged[fn].mean.real() * g.fn_dead_sum_h[fn];
    double b_tot = g.fn_merged[fn].var * g.fn_dead_sum_h2[fn];
    int live = 0;
    for (int e = g.fn_begin[fn]; e < g.fn_begin[fn + 1]; ++e) {
        if (!g.edge_live[e]) continue;
        z_tot += g.edge_h[e] * g.v2f[e].mean.real();
        b_tot += g.edge_h2[e] * g.v2f[e].var;
        ++live;
    }
    for (int e = g.fn_begin[fn]; e < g.fn_begin[fn + 1]; ++e) {
        if (!g.edge_live[e]) continue;
        const Complex z_ex = z_tot - g.edge_h[e] * g.v2f[e].mean.real();
        const double b_ex = std::max(b_tot - g.edge_h2[e] * g.v2f[e].var, 0.0);
        // The bit estimate lives on the real axis after dividing by h.
        const double mu = ((g.y[fn] - z_ex) / g.edge_h[e]).real();
        const double xi = clamp_var((g.n0 + b_ex) / g.edge_h2[e]);
        g.f2v[e] = {Complex(mu, 0.0), xi};
        g.f2v_llr[e] = -4.0 * mu / xi;
    }
    g.ops.adds += 6.0 * live;
}

// ---------------------------------------------------------------------------
// Schedule

namespace {

void refresh_merged(JsgGraph& g) {
    for (int f = 0; f < g.n_fn; ++f) {
        const auto& members = g.fn_dead_vns[f];
        if (members.empty()) continue;
        if (g.merged_mode == MergedMode::FixedPrior) {
            g.fn_merged[f] = {Complex(0.0, 0.0), 1.0};
            continue;
        }
        Complex mean = 0.0;
        double var = 0.0;
        for (int v : members) {
            mean += g.vn_posterior[v].mean;
            var += g.vn_posterior[v].var;
        }
        const double inv = 1.0 / static_cast<double>(members.size());
        g.fn_merged[f] = {mean * inv, var * inv};
        g.ops.adds += 2.0 * static_cast<double>(members.size());
    }
}

void cn_phase(JsgGraph& g, bool flip_convention) {
    const int n_checks = static_cast<int>(g.cn_begin.size()) - 1;
    std::vector<double> in, out;
    for (int j = 0; j < n_checks; ++j) {
        const int b = g.cn_begin[j];
        const int d = g.cn_begin[j + 1] - b;
        if (d == 1) {
            // a lone check pins its bit to zero
            g.cn2lv[b] = flip_convention ? -30.0 : 30.0;
            continue;
        }
        in.assign(g.lv2cn.begin() + b, g.lv2cn.begin() + b + d);
        if (flip_convention) {
            for (double& v : in) v = -v;
        }
        out.assign(d, 0.0);
        ldpc::cn_update(in, out);
        for (int i = 0; i < d; ++i) g.cn2lv[b + i] = flip_convention ? -out[i] : out[i];
    }
}

// VI -> LDPC and LDPC -> VI boundary refresh plus decision LLRs, symbol mode.
void symbol_boundary_and_decisions(JsgGraph& g) {
    const int m = g.constel.m;
    const int q = g.constel.bits_per_symbol();
    std::vector<double> ext(m), mod_bits(static_cast<size_t>(g.n_avn) * q);
    for (int a = 0; a < g.n_avn; ++a) {
        for (int x = 0; x < m; ++x) {
            double s = 0.0;
            for (int e : g.vn_edges[a]) s += g.f2v_llr[static_cast<size_t>(e) * m + x];
            ext[x] = s;
        }
        const std::vector<double> bl = llr_symbol_to_bit(ext, g.constel);
        for (int k = 0; k < q; ++k) mod_bits[static_cast<size_t>(a) * q + k] = bl[k];
    }
    g.lvn_prior = deinterleave(mod_bits, g.interleaver);
    for (int i = 0; i < g.n_bits; ++i) {
        double s = g.lvn_prior[i];
        for (int j : g.bit_cn_edges[i]) s += g.cn2lv[j];
        g.bit_llr[i] = s;
    }

    // LDPC extrinsic back to the AVN priors for the next sweep.
    std::vector<double> ldpc_ext(g.n_bits, 0.0);
    for (int i = 0; i < g.n_bits; ++i) {
        double s = 0.0;
        for (int j : g.bit_cn_edges[i]) s += g.cn2lv[j];
        ldpc_ext[i] = s;
    }
    const std::vector<double> mod_prior = interleave(ldpc_ext, g.interleaver);
    std::vector<double> bits_k(q);
    for (int a = 0; a < g.n_avn; ++a) {
        for (int k = 0; k < q; ++k) bits_k[k] = mod_prior[static_cast<size_t>(a) * q + k];
        const std::vector<double> sym = llr_bit_to_symbol(bits_k, g.constel);
        for (int x = 0; x < m; ++x) g.avn_prior[static_cast<size_t>(a) * m + x] = sym[x];
    }
}

// Detector-only posterior with the fixed prior folded in (turbo inner loop).
void detector_decisions(JsgGraph& g) {
    const int m = g.constel.m;
    const int q = g.constel.bits_per_symbol();
    std::vector<double> full(m);
    for (int a = 0; a < g.n_avn; ++a) {
        for (int x = 0; x < m; ++x) {
            double s = g.avn_prior[static_cast<size_t>(a) * m + x];
            for (int e : g.vn_edges[a]) s += g.f2v_llr[static_cast<size_t>(e) * m + x];
            full[x] = s;
        }
        const std::vector<double> bl = llr_symbol_to_bit(full, g.constel);
        for (int k = 0; k < q; ++k) g.bit_llr[static_cast<size_t>(a) * q + k] = bl[k];
    }
}

void ejsg_decisions(JsgGraph& g) {
    for (int i = 0; i < g.n_bits; ++i) {
        double s = 0.0;
        for (int e : g.vn_edges[i]) s += g.f2v_llr[e];
        for (int j : g.bit_cn_edges[i]) s += g.cn2lv[j];
        g.bit_llr[i] = -s;
    }
}

bool parity_all(const JsgGraph& g, const std::vector<uint8_t>& bits) {
    const int nb = g.code->n_bits;
    for (int c = 0; c < g.n_codewords; ++c) {
        std::vector<uint8_t> cw(bits.begin() + static_cast<long>(c) * nb,
                                bits.begin() + static_cast<long>(c + 1) * nb);
        if (!ldpc::parity_ok(*g.code, cw)) return false;
    }
    return true;
}

}  // namespace

std::vector<double> run_schedule(JsgGraph& g, ScheduleKind kind, const ScheduleOptions& opt,
                                 ScheduleDiag* diag) {
    if ((kind == ScheduleKind::Ejsg) != (g.mode == GraphMode::Bit)) {
        throw std::invalid_argument("run_schedule: schedule kind does not match graph mode");
    }
    if (kind == ScheduleKind::Ejsg && !opt.ldpc_coupling) {
        throw std::invalid_argument("run_schedule: E-JSG always couples detection and decoding");
    }
    g.damping = opt.damping;
    g.merged_mode = opt.merged_mode;
    g.reset_messages();
    if (opt.fixed_avn_prior) {
        if (opt.fixed_avn_prior->size() != g.avn_prior.size()) {
            throw std::invalid_argument("run_schedule: fixed prior size mismatch");
        }
        g.avn_prior = *opt.fixed_avn_prior;
    }

    std::vector<uint8_t> hard(g.n_bits, 0);
    if (diag) *diag = ScheduleDiag{};

    for (int it = 1; it <= opt.iters; ++it) {
        // variable phase
        switch (kind) {
            case ScheduleKind::Bp:
                for (int a = 0; a < g.n_avn; ++a) bp_avn_update(g, a);
                break;
            case ScheduleKind::Ep:
                for (int a = 0; a < g.n_avn; ++a) ep_avn_update(g, a);
                break;
            case ScheduleKind::Ejsg:
                for (int i = 0; i < g.n_vn; ++i) ejsg_bvn_update(g, i);
                break;
        }
        // function/check phase
        refresh_merged(g);
        for (int f = 0; f < g.n_fn; ++f) {
            switch (kind) {
                case ScheduleKind::Bp:
                    bp_fn_update(g, f);
                    break;
                case ScheduleKind::Ep:
                    ep_fn_update(g, f);
                    break;
                case ScheduleKind::Ejsg:
                    ejsg_fn_update(g, f);
                    break;
            }
        }
        if (opt.ldpc_coupling) cn_phase(g, kind == ScheduleKind::Ejsg);

        // decision LLRs and boundary state for the next sweep
        if (kind == ScheduleKind::Ejsg) {
            ejsg_decisions(g);
        } else if (opt.ldpc_coupling) {
            symbol_boundary_and_decisions(g);
        } else {
            detector_decisions(g);
        }

        for (int i = 0; i < g.n_bits; ++i) hard[i] = g.bit_llr[i] < 0.0 ? 1 : 0;
        bool ok = false;
        if (opt.ldpc_coupling) ok = parity_all(g, hard);
        if (diag) {
            diag->iterations_used = it;
            diag->parity_per_iter.push_back(ok ? 1 : 0);
            if (opt.capture_per_iter) diag->bits_per_iter.push_back(hard);
        }
        if (opt.early_exit && ok) break;
    }
    return g.bit_llr;
}

std::string JsgGraph::dump_json() const {
    nlohmann::json j;
    j["mode"] = mode == GraphMode::Symbol ? "symbol" : "bit";
    j["n"] = n;
    j["n_r"] = n_r;
    j["n_t"] = n_t;
    j["n_slots"] = n_slots;
    j["n_vn"] = n_vn;
    j["n_fn"] = n_fn;
    j["n_bits"] = n_bits;
    nlohmann::json edges = nlohmann::json::array();
    for (int f = 0; f < n_fn; ++f) {
        for (int e = fn_begin[f]; e < fn_begin[f + 1]; ++e) {
            edges.push_back({{"fn", f},
                             {"vn", edge_vn[e]},
                             {"h_re", edge_h[e].real()},
                             {"h_im", edge_h[e].imag()},
                             {"live", edge_live[e] != 0}});
        }
    }
    j["vi_edges"] = std::move(edges);
    nlohmann::json checks = nlohmann::json::array();
    const int n_checks = static_cast<int>(cn_begin.size()) - 1;
    for (int c = 0; c < n_checks; ++c) {
        nlohmann::json row = nlohmann::json::array();
        for (int e = cn_begin[c]; e < cn_begin[c + 1]; ++e) row.push_back(cn_edge_bit[e]);
        checks.push_back(std::move(row));
    }
    j["checks"] = std::move(checks);
    return j.dump(2);
}

}  // namespace afdm::jsg
