#include "afdmjsg/channel.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace afdm {

namespace {

Complex unit_phasor(double turns) { return std::polar(1.0, 2.0 * kPi * turns); }

// Squared magnitudes below this never enter a shift list.
constexpr double kShiftEnergyFloor = 1e-24;

}  // namespace

PathSpec PathSpec::make(Complex gain, int delay, double nu) {
    PathSpec p;
    p.gain = gain;
    p.delay = delay;
    // beta in (-1/2, 1/2]
    p.alpha = static_cast<int>(std::ceil(nu - 0.5));
    p.beta = nu - p.alpha;
    return p;
}

PathList sample_paths(int p, double nu_max, int delay_max, std::mt19937_64& rng) {
    if (p < 1) throw std::invalid_argument("sample_paths: need p >= 1");
    if (delay_max < 0) throw std::invalid_argument("sample_paths: delay_max must be >= 0");
    std::normal_distribution<double> gauss(0.0, std::sqrt(0.5 / p));
    std::uniform_int_distribution<int> delay(0, delay_max);
    std::uniform_real_distribution<double> angle(-kPi, kPi);
    PathList out;
    out.reserve(p);
    for (int i = 0; i < p; ++i) {
        const Complex h(gauss(rng), gauss(rng));
        const int d = (i == 0) ? 0 : delay(rng);
        const double nu = nu_max * std::cos(angle(rng));
        out.push_back(PathSpec::make(h, d, nu));
    }
    return out;
}

ChannelRealization sample_channel(int n_r, int n_t, int p, double nu_max, int delay_max,
                                  const AfdmConfig& cfg, std::mt19937_64& rng) {
    cfg.validate();
    if (delay_max > cfg.n_cpp) {
        throw std::invalid_argument("sample_channel: delay_max exceeds CPP length");
    }
    ChannelRealization ch;
    ch.n_r = n_r;
    ch.n_t = n_t;
    ch.paths.resize(static_cast<size_t>(n_r) * n_t);
    for (auto& list : ch.paths) list = sample_paths(p, nu_max, delay_max, rng);
    return ch;
}

void add_awgn(CVec& v, double n0, std::mt19937_64& rng) {
    if (n0 <= 0.0) return;
    std::normal_distribution<double> gauss(0.0, std::sqrt(0.5 * n0));
    for (int i = 0; i < v.size(); ++i) v[i] += Complex(gauss(rng), gauss(rng));
}

CVec apply_time_domain(const CVec& s_with_cpp, const PathList& paths, const AfdmConfig& cfg,
                       double n0, std::mt19937_64& rng) {
    cfg.validate();
    const int n = cfg.n;
    if (s_with_cpp.size() != n + cfg.n_cpp) {
        throw std::invalid_argument("apply_time_domain: signal must carry the CPP");
    }
    CVec out = CVec::Zero(n);
    for (const PathSpec& p : paths) {
        if (p.delay < 0 || p.delay > cfg.n_cpp) {
            throw std::invalid_argument("apply_time_domain: path delay outside [0, n_cpp]");
        }
        const double nu = p.doppler();
        for (int t = 0; t < n; ++t) {
            // index t - d_p falls into the prefix for t < d_p
            const Complex tap = s_with_cpp[t - p.delay + cfg.n_cpp];
            out[t] += p.gain * unit_phasor(-nu * t / n) * tap;
        }
    }
    add_awgn(out, n0, rng);
    return out;
}

int loop_shift(const PathSpec& p, const AfdmConfig& cfg) {
    const double raw = 2.0 * cfg.n * cfg.c1 * p.delay;
    const double rounded = std::round(raw);
    if (std::abs(raw - rounded) > 1e-9) {
        throw std::invalid_argument("loop_shift: 2*N*c1*d_p is not an integer for this config");
    }
    const long long ind = static_cast<long long>(rounded) + p.alpha;
    return static_cast<int>(((ind % cfg.n) + cfg.n) % cfg.n);
}

Complex effective_entry(const PathSpec& p, int n, int m, const AfdmConfig& cfg) {
    const int nn = cfg.n;
    const double eta_turns =
        cfg.c1 * static_cast<double>(p.delay) * p.delay -
        static_cast<double>(m) * p.delay / nn +
        cfg.c2 * (static_cast<double>(m) * m - static_cast<double>(n) * n);
    const Complex eta = unit_phasor(eta_turns);

    // gamma is the geometric sum over the N time samples; psi uses the raw
    // shift 2*N*c1*d + nu, which reduces to Ind_p + beta_p mod N whenever
    // 2*N*c1*d is an integer.
    const double psi = n - m + 2.0 * nn * cfg.c1 * p.delay + p.doppler();
    const Complex den = unit_phasor(-psi / nn) - 1.0;
    Complex gamma;
    if (std::abs(den) < 1e-12) {
        gamma = static_cast<double>(nn);
    } else {
        gamma = (unit_phasor(-psi) - 1.0) / den;
    }
    return eta * gamma / static_cast<double>(nn);
}

Eigen::MatrixXcd BlockChannel::dense() const {
    Eigen::MatrixXcd h = Eigen::MatrixXcd::Zero(n, n);
    for (size_t j = 0; j < shifts.size(); ++j) {
        for (int row = 0; row < n; ++row) {
            h(row, (row + shifts[j]) % n) += coef(row, static_cast<int>(j));
        }
    }
    return h;
}

CVec BlockChannel::apply(const CVec& x) const {
    CVec y = CVec::Zero(n);
    for (size_t j = 0; j < shifts.size(); ++j) {
        const int s = shifts[j];
        for (int row = 0; row < n; ++row) {
            y[row] += coef(row, static_cast<int>(j)) * x[(row + s) % n];
        }
    }
    return y;
}

std::vector<double> BlockChannel::shift_gains() const {
    std::vector<double> g(shifts.size(), 0.0);
    for (size_t j = 0; j < shifts.size(); ++j) {
        g[j] = coef.col(static_cast<int>(j)).squaredNorm() / n;
    }
    return g;
}

Eigen::MatrixXcd EffectiveChannel::dense() const {
    Eigen::MatrixXcd h = Eigen::MatrixXcd::Zero(static_cast<Eigen::Index>(n) * n_r,
                                               static_cast<Eigen::Index>(n) * n_t);
    for (int r = 0; r < n_r; ++r) {
        for (int t = 0; t < n_t; ++t) {
            h.block(static_cast<Eigen::Index>(r) * n, static_cast<Eigen::Index>(t) * n, n, n) =
                block(r, t).dense();
        }
    }
    return h;
}

CVec EffectiveChannel::apply(const CVec& x) const {
    if (x.size() != static_cast<Eigen::Index>(n) * n_t) {
        throw std::invalid_argument("EffectiveChannel::apply: bad input length");
    }
    CVec y = CVec::Zero(static_cast<Eigen::Index>(n) * n_r);
    for (int r = 0; r < n_r; ++r) {
        for (int t = 0; t < n_t; ++t) {
            y.segment(static_cast<Eigen::Index>(r) * n, n) +=
                block(r, t).apply(x.segment(static_cast<Eigen::Index>(t) * n, n));
        }
    }
    return y;
}

BlockChannel build_effective_block(const PathList& paths, const AfdmConfig& cfg, int k_nu) {
    cfg.validate();
    const int n = cfg.n;
    if (k_nu != kFullBand && (k_nu < 0 || k_nu >= (n + 1) / 2)) {
        throw std::invalid_argument("build_effective_block: need 0 <= k_nu < N/2 or kFullBand");
    }

    // Candidate shifts: everything for a full build, otherwise the union of
    // the per-path bands around Ind_p.
    std::set<int> wanted;
    if (k_nu == kFullBand) {
        for (int s = 0; s < n; ++s) wanted.insert(s);
    } else {
        for (const PathSpec& p : paths) {
            const int ind = loop_shift(p, cfg);
            for (int off = -k_nu; off <= k_nu; ++off) {
                wanted.insert(((ind + off) % n + n) % n);
            }
        }
    }

    Eigen::MatrixXcd coef = Eigen::MatrixXcd::Zero(n, static_cast<int>(wanted.size()));
    std::vector<int> shifts(wanted.begin(), wanted.end());
    for (const PathSpec& p : paths) {
        for (size_t j = 0; j < shifts.size(); ++j) {
            const int s = shifts[j];
            if (k_nu != kFullBand) {
                const int ind = loop_shift(p, cfg);
                const int dist = std::min(((s - ind) % n + n) % n, ((ind - s) % n + n) % n);
                if (dist > k_nu) continue;
            }
            for (int row = 0; row < n; ++row) {
                coef(row, static_cast<int>(j)) +=
                    p.gain * effective_entry(p, row, (row + s) % n, cfg);
            }
        }
    }

    // Drop shifts with no energy (integer Doppler leaves exact zeros).
    BlockChannel out;
    out.n = n;
    for (size_t j = 0; j < shifts.size(); ++j) {
        if (coef.col(static_cast<int>(j)).squaredNorm() / n > kShiftEnergyFloor) {
            out.shifts.push_back(shifts[j]);
        }
    }
    out.coef = Eigen::MatrixXcd::Zero(n, static_cast<int>(out.shifts.size()));
    int keep = 0;
    for (size_t j = 0; j < shifts.size(); ++j) {
        if (coef.col(static_cast<int>(j)).squaredNorm() / n > kShiftEnergyFloor) {
            out.coef.col(keep++) = coef.col(static_cast<int>(j));
        }
    }
    return out;
}

EffectiveChannel build_effective(const ChannelRealization& ch, const AfdmConfig& cfg, int k_nu) {
    EffectiveChannel h;
    h.n = cfg.n;
    h.n_r = ch.n_r;
    h.n_t = ch.n_t;
    h.blocks.reserve(ch.paths.size());
    for (const PathList& list : ch.paths) {
        h.blocks.push_back(build_effective_block(list, cfg, k_nu));
    }
    return h;
}

EffectiveChannel stack_mimo(const EffectiveChannel& h, int scenario) {
    if (scenario == 1) return h;
    if (scenario != 2) throw std::invalid_argument("stack_mimo: scenario must be 1 or 2");

    EffectiveChannel out;
    out.n = h.n;
    out.n_r = h.n_r;
    out.n_t = 1;
    out.blocks.resize(h.n_r);
    for (int r = 0; r < h.n_r; ++r) {
        std::set<int> shifts;
        for (int t = 0; t < h.n_t; ++t) {
            const BlockChannel& b = h.block(r, t);
            if (b.n != h.n) throw std::invalid_argument("stack_mimo: inconsistent N across blocks");
            shifts.insert(b.shifts.begin(), b.shifts.end());
        }
        BlockChannel sum;
        sum.n = h.n;
        sum.shifts.assign(shifts.begin(), shifts.end());
        sum.coef = Eigen::MatrixXcd::Zero(h.n, static_cast<int>(sum.shifts.size()));
        for (int t = 0; t < h.n_t; ++t) {
            const BlockChannel& b = h.block(r, t);
            for (size_t j = 0; j < b.shifts.size(); ++j) {
                const auto it = std::lower_bound(sum.shifts.begin(), sum.shifts.end(), b.shifts[j]);
                const int col = static_cast<int>(it - sum.shifts.begin());
                sum.coef.col(col) += b.coef.col(static_cast<int>(j));
            }
        }
        out.blocks[r] = std::move(sum);
    }
    return out;
}

std::string realization_to_json(const ChannelRealization& ch) {
    nlohmann::json j;
    j["n_r"] = ch.n_r;
    j["n_t"] = ch.n_t;
    j["pairs"] = nlohmann::json::array();
    for (const PathList& list : ch.paths) {
        nlohmann::json paths = nlohmann::json::array();
        for (const PathSpec& p : list) {
            paths.push_back({{"gain_re", p.gain.real()},
                             {"gain_im", p.gain.imag()},
                             {"delay", p.delay},
                             {"doppler", p.doppler()}});
        }
        j["pairs"].push_back(std::move(paths));
    }
    return j.dump(2);
}

ChannelRealization realization_from_json(const std::string& text) {
    const nlohmann::json j = nlohmann::json::parse(text);
    ChannelRealization ch;
    ch.n_r = j.at("n_r").get<int>();
    ch.n_t = j.at("n_t").get<int>();
    for (const auto& pair : j.at("pairs")) {
        PathList list;
        for (const auto& p : pair) {
            list.push_back(PathSpec::make(
                Complex(p.at("gain_re").get<double>(), p.at("gain_im").get<double>()),
                p.at("delay").get<int>(), p.at("doppler").get<double>()));
        }
        ch.paths.push_back(std::move(list));
    }
    if (ch.paths.size() != static_cast<size_t>(ch.n_r) * ch.n_t) {
        throw std::invalid_argument("realization_from_json: pair count mismatch");
    }
    return ch;
}

}  // namespace afdm
