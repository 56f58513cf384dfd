#include "afdmjsg/ldpc.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <numeric>
#include <queue>
#include <sstream>
#include <stdexcept>

namespace afdm::ldpc {

namespace {

constexpr double kLlrClip = 30.0;

std::vector<int> round_degree_counts(const DegreeDist& dist, int n_nodes) {
    if (dist.degrees.empty() || dist.degrees.size() != dist.fractions.size()) {
        throw std::invalid_argument("DegreeDist: degrees/fractions mismatch");
    }
    // largest-remainder rounding of fractions * n_nodes
    std::vector<int> counts(dist.degrees.size(), 0);
    std::vector<std::pair<double, size_t>> rem;
    int assigned = 0;
    for (size_t i = 0; i < dist.degrees.size(); ++i) {
        const double exact = dist.fractions[i] * n_nodes;
        counts[i] = static_cast<int>(std::floor(exact));
        assigned += counts[i];
        rem.push_back({exact - counts[i], i});
    }
    std::sort(rem.begin(), rem.end(), [](const auto& a, const auto& b) {
        if (a.first != b.first) return a.first > b.first;
        return a.second < b.second;
    });
    for (int i = 0; i < n_nodes - assigned; ++i) counts[rem[i % rem.size()].second]++;
    return counts;
}

using BitRow = std::vector<uint64_t>;

void toggle_bit(BitRow& row, int col) { row[col >> 6] ^= (1ull << (col & 63)); }
bool get_bit(const BitRow& row, int col) { return (row[col >> 6] >> (col & 63)) & 1; }

void xor_rows(BitRow& dst, const BitRow& src) {
    for (size_t w = 0; w < dst.size(); ++w) dst[w] ^= src[w];
}

// Reduced row echelon over GF(2); returns pivot column per reduced row.
std::vector<int> rref(std::vector<BitRow>& w, int n_cols) {
    std::vector<int> pivots;
    size_t r = 0;
    for (int c = 0; c < n_cols && r < w.size(); ++c) {
        size_t sel = r;
        while (sel < w.size() && !get_bit(w[sel], c)) ++sel;
        if (sel == w.size()) continue;
        std::swap(w[r], w[sel]);
        for (size_t i = 0; i < w.size(); ++i) {
            if (i != r && get_bit(w[i], c)) xor_rows(w[i], w[r]);
        }
        pivots.push_back(c);
        ++r;
    }
    return pivots;
}

std::vector<BitRow> pack_parity(const LdpcCode& code) {
    const size_t words = (static_cast<size_t>(code.n_bits) + 63) / 64;
    std::vector<BitRow> h(code.rows.size(), BitRow(words, 0));
    for (size_t j = 0; j < code.rows.size(); ++j) {
        for (int v : code.rows[j]) toggle_bit(h[j], v);
    }
    return h;
}

// Derive the permuted-systematic encoder; returns false on rank deficiency.
bool derive_encoder(LdpcCode& code) {
    const int m = code.n_checks();
    std::vector<BitRow> w = pack_parity(code);
    const std::vector<int> pivots = rref(w, code.n_bits);
    if (static_cast<int>(pivots.size()) < m) return false;

    std::vector<char> is_pivot(code.n_bits, 0);
    for (int c : pivots) is_pivot[c] = 1;
    code.parity_pos = pivots;
    code.message_pos.clear();
    for (int c = 0; c < code.n_bits; ++c) {
        if (!is_pivot[c]) code.message_pos.push_back(c);
    }
    code.k_bits = static_cast<int>(code.message_pos.size());

    const size_t kw = (static_cast<size_t>(code.k_bits) + 63) / 64;
    code.enc.assign(m, BitRow(kw, 0));
    for (int r = 0; r < m; ++r) {
        for (int i = 0; i < code.k_bits; ++i) {
            if (get_bit(w[r], code.message_pos[i])) toggle_bit(code.enc[r], i);
        }
    }
    return true;
}

void rebuild_cols(LdpcCode& code) {
    code.cols.assign(code.n_bits, {});
    for (size_t j = 0; j < code.rows.size(); ++j) {
        for (int v : code.rows[j]) code.cols[v].push_back(static_cast<int>(j));
    }
}

// Deterministic rank repair: grow edges on rows that came out dependent.
void repair_rank(LdpcCode& code) {
    for (int pass = 0; pass < code.n_bits; ++pass) {
        std::vector<BitRow> w = pack_parity(code);
        const std::vector<int> pivots = rref(w, code.n_bits);
        if (static_cast<int>(pivots.size()) == code.n_checks()) return;
        // Zero rows of the eliminated matrix sit at the bottom.
        const int dead = static_cast<int>(pivots.size());
        std::vector<char> is_pivot(code.n_bits, 0);
        for (int c : pivots) is_pivot[c] = 1;
        // Identify one original row that is dependent: re-eliminate rows one
        // by one and find the first that does not raise the rank.
        std::vector<BitRow> acc;
        int victim = -1;
        for (int j = 0; j < code.n_checks(); ++j) {
            std::vector<BitRow> trial = acc;
            trial.push_back(pack_parity(code)[j]);
            if (static_cast<int>(rref(trial, code.n_bits).size()) == static_cast<int>(acc.size())) {
                victim = j;
                break;
            }
            acc = std::move(trial);
        }
        if (victim < 0) victim = code.n_checks() - 1;
        for (int c = 0; c < code.n_bits; ++c) {
            if (!is_pivot[c] &&
                std::find(code.rows[victim].begin(), code.rows[victim].end(), c) ==
                    code.rows[victim].end()) {
                code.rows[victim].push_back(c);
                std::sort(code.rows[victim].begin(), code.rows[victim].end());
                break;
            }
        }
        rebuild_cols(code);
        (void)dead;
    }
    throw std::runtime_error("repair_rank: could not reach full rank");
}

struct PegBuilder {
    int n, m;
    std::vector<int> vn_degree, cn_capacity, cn_degree;
    std::vector<std::vector<int>> rows, cols;
    std::vector<int> cn_priority;  // random tie-break order

    // BFS over the current bipartite graph from variable v; marks reached CNs.
    std::vector<char> reach(int v) const {
        std::vector<char> cn_seen(m, 0);
        std::vector<char> vn_seen(n, 0);
        std::queue<int> vq;
        vq.push(v);
        vn_seen[v] = 1;
        while (!vq.empty()) {
            const int u = vq.front();
            vq.pop();
            for (int c : cols[u]) {
                if (cn_seen[c]) continue;
                cn_seen[c] = 1;
                for (int u2 : rows[c]) {
                    if (!vn_seen[u2]) {
                        vn_seen[u2] = 1;
                        vq.push(u2);
                    }
                }
            }
        }
        return cn_seen;
    }

    int pick(int v) {
        const std::vector<char> seen = reach(v);
        int best = -1;
        auto better = [&](int c) {
            if (best < 0) return true;
            if (cn_degree[c] != cn_degree[best]) return cn_degree[c] < cn_degree[best];
            return cn_priority[c] < cn_priority[best];
        };
        // Prefer checks outside the current tree; fall back to any check that
        // is not already a direct neighbor.
        for (int c = 0; c < m; ++c) {
            if (!seen[c] && cn_capacity[c] > 0 && better(c)) best = c;
        }
        if (best < 0) {
            for (int c = 0; c < m; ++c) {
                if (cn_capacity[c] > 0 &&
                    std::find(cols[v].begin(), cols[v].end(), c) == cols[v].end() && better(c))
                    best = c;
            }
        }
        if (best < 0) {
            // Capacities exhausted; overflow onto the lightest non-neighbor.
            for (int c = 0; c < m; ++c) {
                if (std::find(cols[v].begin(), cols[v].end(), c) == cols[v].end() && better(c))
                    best = c;
            }
        }
        if (best < 0) throw std::runtime_error("PEG: no admissible check node");
        return best;
    }
};

}  // namespace

LdpcCode build_code(int n_bits, double rate, const DegreeDist& lambda, const DegreeDist& rho,
                    std::mt19937_64& rng) {
    if (n_bits < 4) throw std::invalid_argument("build_code: n_bits too small");
    if (rate <= 0.0 || rate >= 1.0) throw std::invalid_argument("build_code: rate must be in (0,1)");
    const int m = static_cast<int>(std::lround(n_bits * (1.0 - rate)));

    for (int attempt = 0; attempt < 10; ++attempt) {
        // Variable-node degrees per lambda.
        std::vector<int> vn_counts = round_degree_counts(lambda, n_bits);
        std::vector<int> vn_degree;
        for (size_t i = 0; i < vn_counts.size(); ++i) {
            vn_degree.insert(vn_degree.end(), vn_counts[i], lambda.degrees[i]);
        }
        std::shuffle(vn_degree.begin(), vn_degree.end(), rng);

        long edges = std::accumulate(vn_degree.begin(), vn_degree.end(), 0L);
        const int d_min = *std::min_element(rho.degrees.begin(), rho.degrees.end());
        const int d_max = *std::max_element(rho.degrees.begin(), rho.degrees.end());

        // Nudge VN degrees (within lambda's support) until the edge total is
        // coverable by check degrees in [d_min, d_max].
        const int lam_lo = *std::min_element(lambda.degrees.begin(), lambda.degrees.end());
        const int lam_hi = *std::max_element(lambda.degrees.begin(), lambda.degrees.end());
        size_t cursor = 0;
        while (edges < static_cast<long>(m) * d_min) {
            while (cursor < vn_degree.size() && vn_degree[cursor] >= lam_hi) ++cursor;
            if (cursor == vn_degree.size()) throw std::invalid_argument("build_code: infeasible degree sequence");
            vn_degree[cursor]++;
            edges++;
        }
        cursor = 0;
        while (edges > static_cast<long>(m) * d_max) {
            while (cursor < vn_degree.size() && vn_degree[cursor] <= lam_lo) ++cursor;
            if (cursor == vn_degree.size()) throw std::invalid_argument("build_code: infeasible degree sequence");
            vn_degree[cursor]--;
            edges--;
        }

        // Check capacities: d_min everywhere, +1 passes until edges are covered.
        std::vector<int> cn_capacity(m, d_min);
        long extra = edges - static_cast<long>(m) * d_min;
        int level = d_min;
        while (extra > 0) {
            if (level >= d_max) throw std::invalid_argument("build_code: infeasible degree sequence");
            for (int c = 0; c < m && extra > 0; ++c) {
                if (cn_capacity[c] == level) {
                    cn_capacity[c]++;
                    extra--;
                }
            }
            level++;
        }

        PegBuilder peg;
        peg.n = n_bits;
        peg.m = m;
        peg.vn_degree = vn_degree;
        peg.cn_capacity = cn_capacity;
        peg.cn_degree.assign(m, 0);
        peg.rows.assign(m, {});
        peg.cols.assign(n_bits, {});
        peg.cn_priority.resize(m);
        std::iota(peg.cn_priority.begin(), peg.cn_priority.end(), 0);
        std::shuffle(peg.cn_priority.begin(), peg.cn_priority.end(), rng);

        // High-degree variables first so the tail never starves for checks.
        std::vector<int> order(n_bits);
        std::iota(order.begin(), order.end(), 0);
        std::sort(order.begin(), order.end(), [&](int a, int b) {
            if (vn_degree[a] != vn_degree[b]) return vn_degree[a] > vn_degree[b];
            return a < b;
        });
        for (int v : order) {
            for (int e = 0; e < vn_degree[v]; ++e) {
                const int c = peg.pick(v);
                peg.rows[c].push_back(v);
                peg.cols[v].push_back(c);
                peg.cn_degree[c]++;
                peg.cn_capacity[c]--;
            }
        }

        LdpcCode code;
        code.n_bits = n_bits;
        code.rows = peg.rows;
        for (auto& r : code.rows) std::sort(r.begin(), r.end());
        rebuild_cols(code);
        if (derive_encoder(code)) return code;
        if (attempt == 9) {
            repair_rank(code);
            if (!derive_encoder(code)) throw std::runtime_error("build_code: encoder derivation failed");
            return code;
        }
    }
    throw std::runtime_error("build_code: unreachable");
}

std::vector<uint8_t> encode(const LdpcCode& code, const std::vector<uint8_t>& message) {
    if (static_cast<int>(message.size()) != code.k_bits) {
        throw std::invalid_argument("encode: message length mismatch");
    }
    const size_t kw = (static_cast<size_t>(code.k_bits) + 63) / 64;
    BitRow msg(kw, 0);
    for (int i = 0; i < code.k_bits; ++i) {
        if (message[i] & 1) toggle_bit(msg, i);
    }
    std::vector<uint8_t> cw(code.n_bits, 0);
    for (int i = 0; i < code.k_bits; ++i) cw[code.message_pos[i]] = message[i] & 1;
    for (int r = 0; r < code.n_checks(); ++r) {
        uint64_t acc = 0;
        for (size_t wdx = 0; wdx < kw; ++wdx) acc ^= code.enc[r][wdx] & msg[wdx];
        cw[code.parity_pos[r]] = static_cast<uint8_t>(std::popcount(acc) & 1);
    }
    return cw;
}

bool parity_ok(const LdpcCode& code, const std::vector<uint8_t>& bits) {
    if (static_cast<int>(bits.size()) != code.n_bits) return false;
    for (const auto& row : code.rows) {
        int sum = 0;
        for (int v : row) sum ^= bits[v] & 1;
        if (sum) return false;
    }
    return true;
}

double boxplus(double a, double b) {
    const double mag = std::min(std::abs(a), std::abs(b));
    const double sign = ((a < 0.0) != (b < 0.0)) ? -1.0 : 1.0;
    if (a == 0.0 || b == 0.0) return 0.0;
    return sign * mag + std::log1p(std::exp(-std::abs(a + b))) -
           std::log1p(std::exp(-std::abs(a - b)));
}

double cn_gamma(double x) { return -std::log(std::tanh(x / 2.0)); }

void cn_update(std::span<const double> in, std::span<double> out) {
    const size_t d = in.size();
    if (d < 2 || out.size() != d) throw std::invalid_argument("cn_update: degree must be >= 2");
    std::vector<double> clipped(d);
    for (size_t i = 0; i < d; ++i) clipped[i] = std::clamp(in[i], -kLlrClip, kLlrClip);

    std::vector<double> fwd(d), bwd(d);
    fwd[0] = clipped[0];
    for (size_t i = 1; i < d; ++i) fwd[i] = boxplus(fwd[i - 1], clipped[i]);
    bwd[d - 1] = clipped[d - 1];
    for (size_t i = d - 1; i-- > 0;) bwd[i] = boxplus(bwd[i + 1], clipped[i]);

    out[0] = bwd[1];
    out[d - 1] = fwd[d - 2];
    for (size_t i = 1; i + 1 < d; ++i) out[i] = boxplus(fwd[i - 1], bwd[i + 1]);
}

DecodeResult ldpc_decode(const LdpcCode& code, const std::vector<double>& llr, int max_iter,
                         std::vector<double>* posterior,
                         std::vector<std::vector<uint8_t>>* per_iter_bits) {
    if (static_cast<int>(llr.size()) != code.n_bits) {
        throw std::invalid_argument("ldpc_decode: LLR length mismatch");
    }
    const int m = code.n_checks();

    // Edge storage, check-major.
    std::vector<int> edge_begin(m + 1, 0);
    for (int j = 0; j < m; ++j) edge_begin[j + 1] = edge_begin[j] + static_cast<int>(code.rows[j].size());
    const int n_edges = edge_begin[m];
    std::vector<double> v2c(n_edges), c2v(n_edges, 0.0);
    // variable -> (edge index) lookup
    std::vector<std::vector<int>> var_edges(code.n_bits);
    for (int j = 0; j < m; ++j) {
        for (size_t i = 0; i < code.rows[j].size(); ++i) {
            var_edges[code.rows[j][i]].push_back(edge_begin[j] + static_cast<int>(i));
        }
    }
    for (int v = 0; v < code.n_bits; ++v) {
        for (int e : var_edges[v]) v2c[e] = llr[v];
    }

    DecodeResult res;
    res.bits.assign(code.n_bits, 0);
    std::vector<double> post(llr);

    auto harden = [&]() {
        for (int v = 0; v < code.n_bits; ++v) res.bits[v] = post[v] < 0.0 ? 1 : 0;
    };
    harden();
    if (parity_ok(code, res.bits)) {
        res.ok = true;
        res.iterations = 0;
        if (posterior) *posterior = post;
        return res;
    }

    for (int it = 1; it <= max_iter; ++it) {
        for (int j = 0; j < m; ++j) {
            const int b = edge_begin[j];
            const int d = edge_begin[j + 1] - b;
            cn_update(std::span<const double>(v2c.data() + b, d), std::span<double>(c2v.data() + b, d));
        }
        for (int v = 0; v < code.n_bits; ++v) {
            double sum = llr[v];
            for (int e : var_edges[v]) sum += c2v[e];
            post[v] = sum;
            for (int e : var_edges[v]) v2c[e] = sum - c2v[e];
        }
        harden();
        res.iterations = it;
        if (per_iter_bits) per_iter_bits->push_back(res.bits);
        if (parity_ok(code, res.bits)) {
            res.ok = true;
            break;
        }
    }
    if (posterior) *posterior = post;
    return res;
}

std::string to_alist(const LdpcCode& code) {
    std::ostringstream os;
    const int m = code.n_checks();
    int max_col = 0, max_row = 0;
    for (const auto& c : code.cols) max_col = std::max(max_col, static_cast<int>(c.size()));
    for (const auto& r : code.rows) max_row = std::max(max_row, static_cast<int>(r.size()));
    os << code.n_bits << ' ' << m << '\n' << max_col << ' ' << max_row << '\n';
    for (int v = 0; v < code.n_bits; ++v) os << code.cols[v].size() << (v + 1 < code.n_bits ? ' ' : '\n');
    for (int j = 0; j < m; ++j) os << code.rows[j].size() << (j + 1 < m ? ' ' : '\n');
    for (int v = 0; v < code.n_bits; ++v) {
        for (int i = 0; i < max_col; ++i) {
            os << (i < static_cast<int>(code.cols[v].size()) ? code.cols[v][i] + 1 : 0)
               << (i + 1 < max_col ? ' ' : '\n');
        }
    }
    for (int j = 0; j < m; ++j) {
        for (int i = 0; i < max_row; ++i) {
            os << (i < static_cast<int>(code.rows[j].size()) ? code.rows[j][i] + 1 : 0)
               << (i + 1 < max_row ? ' ' : '\n');
        }
    }
    return os.str();
}

LdpcCode from_alist(const std::string& text, std::mt19937_64& rng) {
    (void)rng;
    std::istringstream is(text);
    int n = 0, m = 0, max_col = 0, max_row = 0;
    if (!(is >> n >> m >> max_col >> max_row)) throw std::invalid_argument("from_alist: bad header");
    std::vector<int> col_deg(n), row_deg(m);
    for (int v = 0; v < n; ++v) is >> col_deg[v];
    for (int j = 0; j < m; ++j) is >> row_deg[j];
    LdpcCode code;
    code.n_bits = n;
    code.rows.assign(m, {});
    for (int v = 0; v < n; ++v) {
        for (int i = 0; i < max_col; ++i) {
            int c = 0;
            is >> c;
            if (c > 0 && i < col_deg[v]) code.rows[c - 1].push_back(v);
        }
    }
    // row lists in the file are redundant; skip them
    for (auto& r : code.rows) std::sort(r.begin(), r.end());
    rebuild_cols(code);
    if (!derive_encoder(code)) throw std::runtime_error("from_alist: rank-deficient parity matrix");
    return code;
}

}  // namespace afdm::ldpc
