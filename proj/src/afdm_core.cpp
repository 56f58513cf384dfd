#include "afdmjsg/afdm_core.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace afdm {

namespace {

Complex unit_phasor(double turns) {
    // exp(j*2*pi*turns)
    return std::polar(1.0, 2.0 * kPi * turns);
}

void check_length(const CVec& v, int want, const char* what) {
    if (v.size() != want) {
        throw std::invalid_argument(std::string(what) + ": expected length " +
                                    std::to_string(want) + ", got " + std::to_string(v.size()));
    }
}

}  // namespace

void AfdmConfig::validate() const {
    if (n < 2) throw std::invalid_argument("AfdmConfig: n must be >= 2");
    if (c1 < 0.0 || c2 < 0.0) throw std::invalid_argument("AfdmConfig: chirp rates must be >= 0");
    if (n_cpp < 0 || n_cpp >= n) throw std::invalid_argument("AfdmConfig: require 0 <= n_cpp < n");
}

CMat daft_matrix(const AfdmConfig& cfg) {
    cfg.validate();
    const int n = cfg.n;
    const double scale = 1.0 / std::sqrt(static_cast<double>(n));
    CMat a(n, n);
    for (int row = 0; row < n; ++row) {
        const double chirp2 = cfg.c2 * static_cast<double>(row) * row;
        for (int col = 0; col < n; ++col) {
            const double chirp1 = cfg.c1 * static_cast<double>(col) * col;
            // integer-exact reduction of the DFT phase keeps unitarity tight
            const double twiddle = static_cast<double>((static_cast<int64_t>(row) * col) % n) / n;
            a(row, col) = scale * unit_phasor(-(chirp1 + chirp2 + twiddle));
        }
    }
    return a;
}

CVec idaft(const CVec& x, const AfdmConfig& cfg) {
    cfg.validate();
    check_length(x, cfg.n, "idaft");
    const int n = cfg.n;
    const double scale = 1.0 / std::sqrt(static_cast<double>(n));
    CVec s(n);
    for (int t = 0; t < n; ++t) {
        const double chirp1 = cfg.c1 * static_cast<double>(t) * t;
        Complex acc = 0.0;
        for (int m = 0; m < n; ++m) {
            const double chirp2 = cfg.c2 * static_cast<double>(m) * m;
            const double twiddle = static_cast<double>((static_cast<int64_t>(t) * m) % n) / n;
            acc += x[m] * unit_phasor(chirp1 + chirp2 + twiddle);
        }
        s[t] = scale * acc;
    }
    return s;
}

CVec daft(const CVec& r_time, const AfdmConfig& cfg) {
    cfg.validate();
    check_length(r_time, cfg.n, "daft");
    const int n = cfg.n;
    const double scale = 1.0 / std::sqrt(static_cast<double>(n));
    CVec r(n);
    for (int m = 0; m < n; ++m) {
        const double chirp2 = cfg.c2 * static_cast<double>(m) * m;
        Complex acc = 0.0;
        for (int t = 0; t < n; ++t) {
            const double chirp1 = cfg.c1 * static_cast<double>(t) * t;
            const double twiddle = static_cast<double>((static_cast<int64_t>(t) * m) % n) / n;
            acc += r_time[t] * unit_phasor(-(chirp1 + chirp2 + twiddle));
        }
        r[m] = scale * acc;
    }
    return r;
}

CVec add_cpp(const CVec& s, const AfdmConfig& cfg) {
    cfg.validate();
    check_length(s, cfg.n, "add_cpp");
    const int n = cfg.n;
    const int n_cpp = cfg.n_cpp;
    CVec out(n + n_cpp);
    for (int k = 0; k < n_cpp; ++k) {
        const int t = k - n_cpp;  // t in [-n_cpp, -1]
        const double phase = cfg.c1 * (static_cast<double>(n) * n + 2.0 * n * t);
        out[k] = s[n + t] * unit_phasor(-phase);
    }
    out.tail(n) = s;
    return out;
}

CVec remove_cpp(const CVec& s, const AfdmConfig& cfg) {
    cfg.validate();
    check_length(s, cfg.n + cfg.n_cpp, "remove_cpp");
    return s.tail(cfg.n);
}

Constellation Constellation::linear(const std::vector<Complex>& g_raw) {
    if (g_raw.empty() || g_raw.size() > 16) {
        throw std::invalid_argument("Constellation: generator length must be in [1, 16]");
    }
    const int q = static_cast<int>(g_raw.size());
    const int m = 1 << q;

    // E|x|^2 = sum |g_k|^2 for independent +-1 inputs
    double energy = 0.0;
    for (const Complex& g : g_raw) energy += std::norm(g);
    const double scale = 1.0 / std::sqrt(energy);

    Constellation c;
    c.m = m;
    c.generator.resize(q);
    for (int k = 0; k < q; ++k) c.generator[k] = g_raw[k] * scale;

    c.points.resize(m);
    c.labels.assign(m, std::vector<uint8_t>(q, 0));
    for (int a = 0; a < m; ++a) {
        Complex x = 0.0;
        for (int k = 0; k < q; ++k) {
            const uint8_t bit = static_cast<uint8_t>((a >> k) & 1);
            c.labels[a][k] = bit;
            x += c.generator[k] * (bit ? -1.0 : 1.0);
        }
        c.points[a] = x;
    }
    return c;
}

Constellation Constellation::qpsk() {
    return linear({Complex(1.0, 0.0), Complex(0.0, -1.0)});
}

CVec map_bits(const std::vector<uint8_t>& bits, const Constellation& c) {
    const int q = c.bits_per_symbol();
    if (q == 0 || bits.size() % static_cast<size_t>(q) != 0) {
        throw std::invalid_argument("map_bits: bit count not a multiple of log2(M)");
    }
    const int n_sym = static_cast<int>(bits.size()) / q;
    CVec x(n_sym);
    for (int i = 0; i < n_sym; ++i) {
        int a = 0;
        for (int k = 0; k < q; ++k) a |= (bits[i * q + k] & 1) << k;
        x[i] = c.points[a];
    }
    return x;
}

std::vector<uint8_t> demap_hard(const CVec& x, const Constellation& c) {
    const int q = c.bits_per_symbol();
    std::vector<uint8_t> bits(static_cast<size_t>(x.size()) * q);
    for (int i = 0; i < x.size(); ++i) {
        int best = 0;
        double best_d = std::norm(x[i] - c.points[0]);
        for (int a = 1; a < c.m; ++a) {
            const double d = std::norm(x[i] - c.points[a]);
            if (d < best_d) {
                best_d = d;
                best = a;
            }
        }
        for (int k = 0; k < q; ++k) bits[static_cast<size_t>(i) * q + k] = c.labels[best][k];
    }
    return bits;
}

}  // namespace afdm
