#include "afdmjsg/harness.hpp"

#include <atomic>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <stdexcept>
#include <thread>

#include <nlohmann/json.hpp>

namespace afdm::harness {

using nlohmann::json;

void SimConfig::validate() const {
    afdm.validate();
    if (mimo.n_t < 1 || mimo.n_r < 1) throw std::invalid_argument("SimConfig: antenna counts must be >= 1");
    if (mimo.scenario != 1 && mimo.scenario != 2) throw std::invalid_argument("SimConfig: scenario must be 1 or 2");
    if (channel.p < 1) throw std::invalid_argument("SimConfig: path count must be >= 1");
    if (channel.delay_max > afdm.n_cpp) throw std::invalid_argument("SimConfig: delay_max exceeds n_cpp");
    if (receivers.empty()) throw std::invalid_argument("SimConfig: no receivers configured");
    for (const auto& r : receivers) r.validate();
    if (frames.max_frames < 1 || frames.max_errors < 1) throw std::invalid_argument("SimConfig: bad frame budget");
    for (size_t i = 1; i < ebn0_grid_db.size(); ++i) {
        if (ebn0_grid_db[i] <= ebn0_grid_db[i - 1]) {
            throw std::invalid_argument("SimConfig: Eb/N0 grid must be strictly increasing");
        }
    }
}

SimConfig SimConfig::desk_default() {
    SimConfig cfg;
    cfg.afdm = {64, 1.0 / 64, 1.0 / 64, 16};
    cfg.mimo = {1, 1, 1};
    cfg.channel = {2, 0.0, 6};
    cfg.code = {256, 0.5, ldpc::DegreeDist::default_lambda(), ldpc::DegreeDist::default_rho()};
    cfg.ebn0_grid_db = {0.0, 1.0, 2.0, 3.0, 4.0, 5.0, 6.0};
    cfg.frames = {10000, 200};
    cfg.study.ebn0_db = 4.0;
    cfg.study.iteration_grid = {1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12, 13, 14, 15};
    cfg.study.threshold_grid = {-24.0, -20.0, -17.0, -14.0, -11.0, -8.0, -4.0};
    cfg.study.path_grid = {1, 2, 4, 8, 12};
    cfg.seed = 1;

    rx::ReceiverConfig mmse;
    mmse.kind = rx::ReceiverKind::MmseLdpc;
    mmse.iters = 12;
    rx::ReceiverConfig turbo;
    turbo.kind = rx::ReceiverKind::TurboIddEp;
    turbo.n_out = 4;
    turbo.n_vi = 3;
    turbo.n_ldpc = 3;
    rx::ReceiverConfig ep;
    ep.kind = rx::ReceiverKind::EpJsg;
    ep.iters = 12;
    ep.esnr_threshold_db = -12.0;
    rx::ReceiverConfig ejsg;
    ejsg.kind = rx::ReceiverKind::Ejsg;
    ejsg.iters = 12;
    ejsg.esnr_threshold_db = -12.0;
    cfg.receivers = {mmse, turbo, ep, ejsg};
    return cfg;
}

SimConfig SimConfig::paper_default() {
    SimConfig cfg = desk_default();
    cfg.afdm = {128, 1.0 / 128, 1.0 / 128, 24};
    cfg.channel = {2, 0.075, 6};
    cfg.code.n_bits = 512;
    cfg.ebn0_grid_db = {0.0, 1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0};
    return cfg;
}

double ebn0_db_to_n0(double ebn0_db, double rate, int bits_per_symbol) {
    // unit-energy constellation: Es = 1 = rate * q * Eb
    return 1.0 / (rate * bits_per_symbol * std::pow(10.0, ebn0_db / 10.0));
}

// ---------------------------------------------------------------------------
// JSON config I/O

namespace {

ldpc::DegreeDist dist_from_json(const json& j) {
    ldpc::DegreeDist d;
    d.degrees = j.at("degrees").get<std::vector<int>>();
    d.fractions = j.at("fractions").get<std::vector<double>>();
    return d;
}

json dist_to_json(const ldpc::DegreeDist& d) {
    return json{{"degrees", d.degrees}, {"fractions", d.fractions}};
}

rx::ReceiverConfig receiver_from_json(const json& j) {
    rx::ReceiverConfig r;
    r.kind = rx::kind_from_name(j.at("kind").get<std::string>());
    r.iters = j.value("iters", r.iters);
    r.n_out = j.value("n_out", r.n_out);
    r.n_vi = j.value("n_vi", r.n_vi);
    r.n_ldpc = j.value("n_ldpc", r.n_ldpc);
    if (j.contains("esnr_threshold_db") && !j.at("esnr_threshold_db").is_null()) {
        r.esnr_threshold_db = j.at("esnr_threshold_db").get<double>();
    }
    r.damping = j.value("damping", r.damping);
    r.early_exit = j.value("early_exit", r.early_exit);
    if (j.value("merged_mode", std::string("averaged")) == "fixed_prior") {
        r.merged_mode = jsg::MergedMode::FixedPrior;
    }
    return r;
}

json receiver_to_json(const rx::ReceiverConfig& r) {
    json j;
    j["kind"] = rx::kind_name(r.kind);
    j["iters"] = r.iters;
    j["n_out"] = r.n_out;
    j["n_vi"] = r.n_vi;
    j["n_ldpc"] = r.n_ldpc;
    if (r.esnr_threshold_db) j["esnr_threshold_db"] = *r.esnr_threshold_db;
    j["damping"] = r.damping;
    j["early_exit"] = r.early_exit;
    j["merged_mode"] = r.merged_mode == jsg::MergedMode::FixedPrior ? "fixed_prior" : "averaged";
    return j;
}

}  // namespace

SimConfig config_from_json(const std::string& text) {
    const json j = json::parse(text);
    SimConfig cfg = SimConfig::desk_default();
    if (j.contains("afdm")) {
        const json& a = j.at("afdm");
        cfg.afdm.n = a.value("n", cfg.afdm.n);
        cfg.afdm.c1 = a.value("c1", 1.0 / cfg.afdm.n);
        cfg.afdm.c2 = a.value("c2", 1.0 / cfg.afdm.n);
        cfg.afdm.n_cpp = a.value("n_cpp", cfg.afdm.n_cpp);
    }
    if (j.contains("mimo")) {
        const json& m = j.at("mimo");
        cfg.mimo.n_t = m.value("n_t", cfg.mimo.n_t);
        cfg.mimo.n_r = m.value("n_r", cfg.mimo.n_r);
        cfg.mimo.scenario = m.value("scenario", cfg.mimo.scenario);
    }
    if (j.contains("channel")) {
        const json& c = j.at("channel");
        cfg.channel.p = c.value("p", cfg.channel.p);
        cfg.channel.nu_max = c.value("nu_max", cfg.channel.nu_max);
        cfg.channel.delay_max = c.value("delay_max", cfg.channel.delay_max);
    }
    if (j.contains("code")) {
        const json& c = j.at("code");
        cfg.code.n_bits = c.value("n_bits", cfg.code.n_bits);
        cfg.code.rate = c.value("rate", cfg.code.rate);
        if (c.contains("lambda")) cfg.code.lambda = dist_from_json(c.at("lambda"));
        if (c.contains("rho")) cfg.code.rho = dist_from_json(c.at("rho"));
    }
    if (j.contains("receivers")) {
        cfg.receivers.clear();
        for (const json& r : j.at("receivers")) cfg.receivers.push_back(receiver_from_json(r));
    }
    if (j.contains("ebn0_grid_db")) cfg.ebn0_grid_db = j.at("ebn0_grid_db").get<std::vector<double>>();
    if (j.contains("frames")) {
        cfg.frames.max_frames = j.at("frames").value("max_frames", cfg.frames.max_frames);
        cfg.frames.max_errors = j.at("frames").value("max_errors", cfg.frames.max_errors);
    }
    if (j.contains("study")) {
        const json& s = j.at("study");
        cfg.study.ebn0_db = s.value("ebn0_db", cfg.study.ebn0_db);
        if (s.contains("iteration_grid")) cfg.study.iteration_grid = s.at("iteration_grid").get<std::vector<int>>();
        if (s.contains("threshold_grid")) cfg.study.threshold_grid = s.at("threshold_grid").get<std::vector<double>>();
        if (s.contains("path_grid")) cfg.study.path_grid = s.at("path_grid").get<std::vector<int>>();
    }
    cfg.seed = j.value("seed", cfg.seed);
    cfg.workers = j.value("workers", cfg.workers);
    cfg.validate();
    return cfg;
}

std::string config_to_json(const SimConfig& cfg) {
    json j;
    j["afdm"] = {{"n", cfg.afdm.n}, {"c1", cfg.afdm.c1}, {"c2", cfg.afdm.c2}, {"n_cpp", cfg.afdm.n_cpp}};
    j["mimo"] = {{"n_t", cfg.mimo.n_t}, {"n_r", cfg.mimo.n_r}, {"scenario", cfg.mimo.scenario}};
    j["channel"] = {{"p", cfg.channel.p}, {"nu_max", cfg.channel.nu_max}, {"delay_max", cfg.channel.delay_max}};
    j["code"] = {{"n_bits", cfg.code.n_bits},
                 {"rate", cfg.code.rate},
                 {"lambda", dist_to_json(cfg.code.lambda)},
                 {"rho", dist_to_json(cfg.code.rho)}};
    j["receivers"] = json::array();
    for (const auto& r : cfg.receivers) j["receivers"].push_back(receiver_to_json(r));
    j["ebn0_grid_db"] = cfg.ebn0_grid_db;
    j["frames"] = {{"max_frames", cfg.frames.max_frames}, {"max_errors", cfg.frames.max_errors}};
    j["study"] = {{"ebn0_db", cfg.study.ebn0_db},
                  {"iteration_grid", cfg.study.iteration_grid},
                  {"threshold_grid", cfg.study.threshold_grid},
                  {"path_grid", cfg.study.path_grid}};
    j["seed"] = cfg.seed;
    j["workers"] = cfg.workers;
    return j.dump(2);
}

// ---------------------------------------------------------------------------
// Deterministic RNG streams and the worker pool

namespace {

uint64_t splitmix64(uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
}

int resolve_workers(int configured) {
    if (configured > 0) return configured;
    if (const char* env = std::getenv("AFDM_JSG_WORKERS")) {
        const int w = std::atoi(env);
        if (w > 0) return w;
    }
    const unsigned hw = std::thread::hardware_concurrency();
    return hw ? static_cast<int>(hw) : 1;
}

void parallel_for(int count, int workers, const std::function<void(int)>& fn) {
    if (workers <= 1 || count <= 1) {
        for (int i = 0; i < count; ++i) fn(i);
        return;
    }
    std::atomic<int> next{0};
    std::atomic<bool> failed{false};
    std::vector<std::thread> pool;
    const int n_threads = std::min(workers, count);
    pool.reserve(n_threads);
    for (int t = 0; t < n_threads; ++t) {
        pool.emplace_back([&]() {
            for (;;) {
                const int i = next.fetch_add(1);
                if (i >= count || failed.load()) return;
                try {
                    fn(i);
                } catch (...) {
                    failed.store(true);
                    return;
                }
            }
        });
    }
    for (auto& th : pool) th.join();
    if (failed.load()) throw std::runtime_error("parallel_for: a frame simulation failed");
}

}  // namespace

std::mt19937_64 frame_rng(uint64_t seed, uint64_t point, uint64_t frame) {
    const uint64_t s = splitmix64(splitmix64(seed ^ 0x8f3ad1c2e96b5a47ull) ^
                                  splitmix64(point * 0x100000001b3ull + frame));
    return std::mt19937_64(s);
}

// ---------------------------------------------------------------------------
// Frame simulation

namespace {

struct SystemAssets {
    Constellation con;
    ldpc::LdpcCode code;
    std::vector<int> interleaver;
    int n_slots = 1;
    int n_codewords = 1;
    bool need_symbol_tx = false;
    bool need_bit_tx = false;
};

SystemAssets build_assets(const SimConfig& cfg) {
    SystemAssets as;
    as.con = Constellation::qpsk();
    std::mt19937_64 rng(splitmix64(cfg.seed ^ 0x5eedc0de5eedc0deull));
    as.code = ldpc::build_code(cfg.code.n_bits, cfg.code.rate, cfg.code.lambda, cfg.code.rho, rng);
    const auto [slots, codewords] = rx::frame_geometry(cfg.afdm.n, cfg.mimo.n_t_eff(),
                                                       as.con.bits_per_symbol(), as.code.n_bits);
    as.n_slots = slots;
    as.n_codewords = codewords;
    const int total_bits = slots * cfg.afdm.n * cfg.mimo.n_t_eff() * as.con.bits_per_symbol();
    as.interleaver = jsg::random_interleaver(total_bits, rng);
    for (const auto& r : cfg.receivers) {
        if (r.kind == rx::ReceiverKind::Ejsg) {
            as.need_bit_tx = true;
        } else {
            as.need_symbol_tx = true;
        }
    }
    return as;
}

struct FramePerReceiver {
    long bit_errors = 0;
    bool frame_error = false;
    int iters = 0;
    rx::OpCounts ops;
    double avg_fn_degree = 0.0;
    std::vector<long> per_iter_errors;
};

std::vector<CVec> modulate_variant(const std::vector<uint8_t>& mod_bits, const SimConfig& cfg,
                                   const SystemAssets& as) {
    // one DAFT-domain vector per (slot, effective TA)
    const int n = cfg.afdm.n;
    const int q = as.con.bits_per_symbol();
    const int n_t_eff = cfg.mimo.n_t_eff();
    std::vector<CVec> x(static_cast<size_t>(as.n_slots) * n_t_eff);
    for (int s = 0; s < as.n_slots; ++s) {
        for (int t = 0; t < n_t_eff; ++t) {
            const long off = (static_cast<long>(s) * n_t_eff + t) * n * q;
            const std::vector<uint8_t> slice(mod_bits.begin() + off, mod_bits.begin() + off + static_cast<long>(n) * q);
            x[static_cast<size_t>(s) * n_t_eff + t] = map_bits(slice, as.con);
        }
    }
    return x;
}

std::vector<CVec> received_slots(const std::vector<CVec>& x, const ChannelRealization& ch,
                                 const SimConfig& cfg, const SystemAssets& as,
                                 const std::vector<CVec>& noise) {
    const int n = cfg.afdm.n;
    const int n_t_eff = cfg.mimo.n_t_eff();
    std::vector<CVec> y(as.n_slots);
    std::mt19937_64 dummy(0);  // noiseless passes draw nothing
    for (int s = 0; s < as.n_slots; ++s) {
        CVec slot = CVec::Zero(static_cast<Eigen::Index>(n) * cfg.mimo.n_r);
        for (int t = 0; t < cfg.mimo.n_t; ++t) {
            const int eff_t = cfg.mimo.scenario == 2 ? 0 : t;
            const CVec tx = add_cpp(idaft(x[static_cast<size_t>(s) * n_t_eff + eff_t], cfg.afdm), cfg.afdm);
            for (int r = 0; r < cfg.mimo.n_r; ++r) {
                slot.segment(static_cast<Eigen::Index>(r) * n, n) +=
                    apply_time_domain(tx, ch.at(r, t), cfg.afdm, 0.0, dummy);
            }
        }
        slot += noise[s];
        // demodulate per receive antenna
        CVec y_slot(slot.size());
        for (int r = 0; r < cfg.mimo.n_r; ++r) {
            y_slot.segment(static_cast<Eigen::Index>(r) * n, n) =
                daft(slot.segment(static_cast<Eigen::Index>(r) * n, n), cfg.afdm);
        }
        y[s] = std::move(y_slot);
    }
    return y;
}

std::vector<FramePerReceiver> simulate_frame(const SimConfig& cfg, const SystemAssets& as,
                                             double n0, uint64_t point_idx, uint64_t frame_idx,
                                             bool capture, int capture_cap) {
    std::mt19937_64 rng = frame_rng(cfg.seed, point_idx, frame_idx);
    const int n = cfg.afdm.n;
    const int q = as.con.bits_per_symbol();

    const ChannelRealization ch = sample_channel(cfg.mimo.n_r, cfg.mimo.n_t, cfg.channel.p,
                                                 cfg.channel.nu_max, cfg.channel.delay_max,
                                                 cfg.afdm, rng);

    // payload and coded stream
    const long k_total = static_cast<long>(as.n_codewords) * as.code.k_bits;
    std::vector<uint8_t> payload(k_total);
    std::bernoulli_distribution coin(0.5);
    for (auto& b : payload) b = coin(rng) ? 1 : 0;
    std::vector<uint8_t> coded(static_cast<long>(as.n_codewords) * as.code.n_bits);
    for (int c = 0; c < as.n_codewords; ++c) {
        const std::vector<uint8_t> msg(payload.begin() + static_cast<long>(c) * as.code.k_bits,
                                       payload.begin() + static_cast<long>(c + 1) * as.code.k_bits);
        const std::vector<uint8_t> cw = ldpc::encode(as.code, msg);
        std::copy(cw.begin(), cw.end(), coded.begin() + static_cast<long>(c) * as.code.n_bits);
    }

    // shared noise across transmit variants
    std::vector<CVec> noise(as.n_slots);
    for (int s = 0; s < as.n_slots; ++s) {
        noise[s] = CVec::Zero(static_cast<Eigen::Index>(n) * cfg.mimo.n_r);
        add_awgn(noise[s], n0, rng);
    }

    const EffectiveChannel h = stack_mimo(build_effective(ch, cfg.afdm, kFullBand), cfg.mimo.scenario);

    rx::FrameContext fc;
    fc.cfg = &cfg.afdm;
    fc.constel = &as.con;
    fc.code = &as.code;
    fc.interleaver = &as.interleaver;
    fc.h = &h;
    fc.n0 = n0;
    fc.n_slots = as.n_slots;
    fc.n_codewords = as.n_codewords;

    std::vector<CVec> y_symbol, y_bit;
    if (as.need_symbol_tx) {
        const std::vector<uint8_t> mod_bits = jsg::interleave_bits(coded, as.interleaver);
        y_symbol = received_slots(modulate_variant(mod_bits, cfg, as), ch, cfg, as, noise);
    }
    if (as.need_bit_tx) {
        y_bit = received_slots(modulate_variant(coded, cfg, as), ch, cfg, as, noise);
    }

    std::vector<FramePerReceiver> out(cfg.receivers.size());
    for (size_t i = 0; i < cfg.receivers.size(); ++i) {
        const rx::ReceiverConfig& rc = cfg.receivers[i];
        fc.y = (rc.kind == rx::ReceiverKind::Ejsg) ? y_bit : y_symbol;
        const rx::ReceiverOutput res = rx::run_receiver(fc, rc, capture);

        FramePerReceiver& f = out[i];
        f.iters = res.iterations_used;
        f.ops = res.ops;
        for (long b = 0; b < k_total; ++b) f.bit_errors += (res.bits[b] != payload[b]);
        f.frame_error = f.bit_errors > 0;
        if (rc.esnr_threshold_db) {
            const jsg::EsnrPruning pr = jsg::prune_esnr(h, n0, *rc.esnr_threshold_db);
            double kept = 0.0;
            for (size_t b = 0; b < h.blocks.size(); ++b) kept += pr.kept_count(static_cast<int>(b));
            f.avg_fn_degree = kept / h.n_r;  // live symbol edges per FN row
        } else {
            double live = 0.0;
            for (const auto& blk : h.blocks) live += static_cast<double>(blk.shifts.size());
            f.avg_fn_degree = live / h.n_r;
        }
        if (capture) {
            f.per_iter_errors.assign(capture_cap, 0);
            for (int it = 0; it < capture_cap; ++it) {
                const std::vector<uint8_t>& bits =
                    res.payload_per_iter.empty()
                        ? res.bits
                        : res.payload_per_iter[std::min<size_t>(it, res.payload_per_iter.size() - 1)];
                long errs = 0;
                for (long b = 0; b < k_total; ++b) errs += (bits[b] != payload[b]);
                f.per_iter_errors[it] = errs;
            }
        }
    }
    (void)q;
    return out;
}

struct PointAccum {
    long frames = 0;
    long bit_errors = 0;
    long frame_errors = 0;
    double iters_sum = 0.0;
    double df_sum = 0.0;
    rx::OpCounts ops_sum;
    std::vector<long> per_iter_errors;
};

std::vector<PointAccum> run_point(const SimConfig& cfg, const SystemAssets& as, double n0,
                                  uint64_t point_idx, bool capture, int capture_cap) {
    const int workers = resolve_workers(cfg.workers);
    const int batch = 64;
    std::vector<PointAccum> acc(cfg.receivers.size());
    if (capture) {
        for (auto& a : acc) a.per_iter_errors.assign(capture_cap, 0);
    }

    long frames_done = 0;
    while (frames_done < cfg.frames.max_frames) {
        long min_errors = std::numeric_limits<long>::max();
        for (const auto& a : acc) min_errors = std::min(min_errors, a.bit_errors);
        if (frames_done > 0 && min_errors >= cfg.frames.max_errors) break;

        const int count = static_cast<int>(std::min<long>(batch, cfg.frames.max_frames - frames_done));
        std::vector<std::vector<FramePerReceiver>> results(count);
        parallel_for(count, workers, [&](int i) {
            results[i] = simulate_frame(cfg, as, n0, point_idx,
                                        static_cast<uint64_t>(frames_done) + i, capture, capture_cap);
        });
        for (int i = 0; i < count; ++i) {
            for (size_t r = 0; r < acc.size(); ++r) {
                const FramePerReceiver& f = results[i][r];
                acc[r].frames++;
                acc[r].bit_errors += f.bit_errors;
                acc[r].frame_errors += f.frame_error ? 1 : 0;
                acc[r].iters_sum += f.iters;
                acc[r].df_sum += f.avg_fn_degree;
                acc[r].ops_sum += f.ops;
                if (capture) {
                    for (int it = 0; it < capture_cap; ++it) {
                        acc[r].per_iter_errors[it] += f.per_iter_errors[it];
                    }
                }
            }
        }
        frames_done += count;
    }
    return acc;
}

BerPoint to_point(const PointAccum& a, double x, double ebn0_db, long payload_bits_per_frame) {
    BerPoint p;
    p.x = x;
    p.ebn0_db = ebn0_db;
    p.frames = a.frames;
    p.bit_errors = a.bit_errors;
    const double denom = static_cast<double>(a.frames) * payload_bits_per_frame;
    p.ber = denom > 0 ? a.bit_errors / denom : 0.0;
    p.fer = a.frames > 0 ? static_cast<double>(a.frame_errors) / a.frames : 0.0;
    p.avg_iterations = a.frames > 0 ? a.iters_sum / a.frames : 0.0;
    p.avg_fn_degree = a.frames > 0 ? a.df_sum / a.frames : 0.0;
    if (a.frames > 0) {
        p.ops_avg = a.ops_sum;
        p.ops_avg.mults /= a.frames;
        p.ops_avg.adds /= a.frames;
        p.ops_avg.exps /= a.frames;
        p.ops_avg.logs /= a.frames;
    }
    return p;
}

}  // namespace

CurveSet run_ber_sweep(const SimConfig& cfg) {
    cfg.validate();
    const SystemAssets as = build_assets(cfg);
    const long payload = static_cast<long>(as.n_codewords) * as.code.k_bits;
    CurveSet curves;
    for (const auto& r : cfg.receivers) curves.push_back({rx::kind_name(r.kind), {}});
    for (size_t pt = 0; pt < cfg.ebn0_grid_db.size(); ++pt) {
        const double ebn0 = cfg.ebn0_grid_db[pt];
        const double n0 = ebn0_db_to_n0(ebn0, as.code.rate(), as.con.bits_per_symbol());
        const std::vector<PointAccum> acc = run_point(cfg, as, n0, pt, false, 0);
        for (size_t r = 0; r < acc.size(); ++r) {
            curves[r].second.push_back(to_point(acc[r], ebn0, ebn0, payload));
        }
    }
    return curves;
}

CurveSet run_convergence(const SimConfig& cfg, const std::vector<int>& iteration_grid) {
    cfg.validate();
    if (iteration_grid.empty()) throw std::invalid_argument("run_convergence: empty grid");
    SimConfig work = cfg;
    // per-iteration capture cannot see inside turbo outer rounds
    std::erase_if(work.receivers, [](const rx::ReceiverConfig& r) {
        return r.kind == rx::ReceiverKind::TurboIddBp || r.kind == rx::ReceiverKind::TurboIddEp;
    });
    const int cap = *std::max_element(iteration_grid.begin(), iteration_grid.end());
    for (auto& r : work.receivers) r.iters = cap;

    const SystemAssets as = build_assets(work);
    const long payload = static_cast<long>(as.n_codewords) * as.code.k_bits;
    const double n0 = ebn0_db_to_n0(work.study.ebn0_db, as.code.rate(), as.con.bits_per_symbol());
    const std::vector<PointAccum> acc = run_point(work, as, n0, 0, true, cap);

    CurveSet curves;
    for (size_t r = 0; r < work.receivers.size(); ++r) {
        std::vector<BerPoint> pts;
        for (int it : iteration_grid) {
            BerPoint p = to_point(acc[r], it, work.study.ebn0_db, payload);
            p.bit_errors = acc[r].per_iter_errors[it - 1];
            p.ber = p.frames > 0 ? p.bit_errors / (static_cast<double>(p.frames) * payload) : 0.0;
            pts.push_back(p);
        }
        curves.push_back({rx::kind_name(work.receivers[r].kind), std::move(pts)});
    }
    return curves;
}

CurveSet run_esnr_study(const SimConfig& cfg, const std::vector<double>& threshold_grid) {
    cfg.validate();
    if (threshold_grid.empty()) throw std::invalid_argument("run_esnr_study: empty grid");
    SimConfig work = cfg;
    std::erase_if(work.receivers, [](const rx::ReceiverConfig& r) {
        return r.kind != rx::ReceiverKind::BpJsg && r.kind != rx::ReceiverKind::EpJsg &&
               r.kind != rx::ReceiverKind::Ejsg;
    });
    if (work.receivers.empty()) throw std::invalid_argument("run_esnr_study: no JSG receivers");

    const SystemAssets as = build_assets(work);
    const long payload = static_cast<long>(as.n_codewords) * as.code.k_bits;
    const double n0 = ebn0_db_to_n0(work.study.ebn0_db, as.code.rate(), as.con.bits_per_symbol());

    CurveSet curves;
    for (const auto& r : work.receivers) curves.push_back({rx::kind_name(r.kind), {}});
    for (size_t ti = 0; ti < threshold_grid.size(); ++ti) {
        SimConfig point_cfg = work;
        for (auto& r : point_cfg.receivers) {
            if (std::isinf(threshold_grid[ti]) && threshold_grid[ti] < 0) {
                r.esnr_threshold_db.reset();  // full graph
            } else {
                r.esnr_threshold_db = threshold_grid[ti];
            }
        }
        const std::vector<PointAccum> acc = run_point(point_cfg, as, n0, 1000 + ti, false, 0);
        for (size_t r = 0; r < acc.size(); ++r) {
            curves[r].second.push_back(to_point(acc[r], threshold_grid[ti], work.study.ebn0_db, payload));
        }
    }
    return curves;
}

CurveSet run_path_study(const SimConfig& cfg, const std::vector<int>& path_grid) {
    cfg.validate();
    if (path_grid.empty()) throw std::invalid_argument("run_path_study: empty grid");

    CurveSet curves;
    for (int variant = 0; variant < 2; ++variant) {
        SimConfig work = cfg;
        const std::string prefix = variant == 0 ? "afdm:" : "ofdm:";
        if (variant == 1) {
            work.afdm.c1 = 0.0;
            work.afdm.c2 = 0.0;
        }
        const SystemAssets as = build_assets(work);
        const long payload = static_cast<long>(as.n_codewords) * as.code.k_bits;
        const double n0 = ebn0_db_to_n0(work.study.ebn0_db, as.code.rate(), as.con.bits_per_symbol());

        std::vector<std::vector<BerPoint>> by_rx(work.receivers.size());
        for (size_t pi = 0; pi < path_grid.size(); ++pi) {
            SimConfig point_cfg = work;
            point_cfg.channel.p = path_grid[pi];
            const std::vector<PointAccum> acc =
                run_point(point_cfg, as, n0, 2000 + variant * 500 + pi, false, 0);
            for (size_t r = 0; r < acc.size(); ++r) {
                by_rx[r].push_back(to_point(acc[r], path_grid[pi], work.study.ebn0_db, payload));
            }
        }
        for (size_t r = 0; r < work.receivers.size(); ++r) {
            curves.push_back({prefix + rx::kind_name(work.receivers[r].kind), std::move(by_rx[r])});
        }
    }
    return curves;
}

double run_sparsity_report(int n, int p, double nu_max, double c1, double threshold_db,
                           double ebn0_db, int realizations, uint64_t seed) {
    AfdmConfig cfg;
    cfg.n = n;
    cfg.c1 = c1;
    cfg.c2 = c1;
    cfg.n_cpp = std::min(n - 1, 20);
    const double n0 = ebn0_db_to_n0(ebn0_db, 0.5, 2);
    const int delay_max = std::min(6, cfg.n_cpp);

    double total = 0.0;
    for (int i = 0; i < realizations; ++i) {
        std::mt19937_64 rng = frame_rng(seed, 42, static_cast<uint64_t>(i));
        ChannelRealization ch;
        ch.n_r = 1;
        ch.n_t = 1;
        ch.paths = {sample_paths(p, nu_max, delay_max, rng)};
        const EffectiveChannel h = build_effective(ch, cfg, kFullBand);
        const jsg::EsnrPruning pr = jsg::prune_esnr(h, n0, threshold_db);
        total += jsg::pruning_sparsity(h, pr);
    }
    return total / realizations;
}

// ---------------------------------------------------------------------------
// CSV

std::string format_g9(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.9g", v);
    return buf;
}

void emit_csv(const std::string& path, const std::vector<std::string>& header,
              const std::vector<std::vector<std::string>>& rows) {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("emit_csv: cannot open " + path);
    for (size_t i = 0; i < header.size(); ++i) os << header[i] << (i + 1 < header.size() ? "," : "");
    os << '\n';
    for (const auto& row : rows) {
        for (size_t i = 0; i < row.size(); ++i) os << row[i] << (i + 1 < row.size() ? "," : "");
        os << '\n';
    }
    if (!os) throw std::runtime_error("emit_csv: write failed for " + path);
}

void emit_curves_csv(const std::string& path, const std::string& x_name, const CurveSet& curves) {
    std::vector<std::vector<std::string>> rows;
    for (const auto& [name, pts] : curves) {
        for (const BerPoint& p : pts) {
            rows.push_back({name, format_g9(p.x), format_g9(p.ebn0_db), format_g9(p.ber),
                            format_g9(p.fer), std::to_string(p.frames), std::to_string(p.bit_errors),
                            format_g9(p.avg_iterations), format_g9(p.avg_fn_degree),
                            format_g9(p.ops_avg.mults), format_g9(p.ops_avg.adds),
                            format_g9(p.ops_avg.exps), format_g9(p.ops_avg.logs)});
        }
    }
    emit_csv(path,
             {"receiver", x_name, "ebn0_db", "ber", "fer", "frames", "bit_errors", "avg_iterations",
              "avg_fn_degree", "mults", "adds", "exps", "logs"},
             rows);
}

}  // namespace afdm::harness
