// harness.hpp - Monte Carlo studies: BER sweeps, convergence, eSNR trade-off,
// sparsity, and path-count runs, all deterministic in (config, seed).

#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "afdmjsg/receivers.hpp"

namespace afdm::harness {

struct MimoConfig {
    int n_t = 1;
    int n_r = 1;
    int scenario = 1;  // 1 multiplexing, 2 diversity
    int n_t_eff() const { return scenario == 2 ? 1 : n_t; }
};

struct ChannelConfig {
    int p = 2;
    double nu_max = 0.0;
    int delay_max = 6;
};

struct CodeConfig {
    int n_bits = 512;
    double rate = 0.5;
    ldpc::DegreeDist lambda = ldpc::DegreeDist::default_lambda();
    ldpc::DegreeDist rho = ldpc::DegreeDist::default_rho();
};

struct FrameBudget {
    long max_frames = 10000;
    long max_errors = 200;
};

/// Extra knobs for the non-sweep studies.
struct StudyConfig {
    double ebn0_db = 4.0;                       // operating point
    std::vector<int> iteration_grid;            // convergence
    std::vector<double> threshold_grid;         // esnr
    std::vector<int> path_grid;                 // paths
};

struct SimConfig {
    AfdmConfig afdm;
    MimoConfig mimo;
    ChannelConfig channel;
    CodeConfig code;
    std::vector<rx::ReceiverConfig> receivers;
    std::vector<double> ebn0_grid_db;
    FrameBudget frames;
    StudyConfig study;
    uint64_t seed = 1;
    int workers = 0;  // 0: AFDM_JSG_WORKERS env or hardware concurrency

    void validate() const;

    // CI-sized setup (N = 64, code length 256).
    static SimConfig desk_default();
    // The experiment section's values (N = 128, CPP 24, code length 512).
    static SimConfig paper_default();
};

SimConfig config_from_json(const std::string& text);
std::string config_to_json(const SimConfig& cfg);

double ebn0_db_to_n0(double ebn0_db, double rate, int bits_per_symbol);

struct BerPoint {
    double x = 0.0;        // study grid value (Eb/N0 dB, iterations, threshold, or P)
    double ebn0_db = 0.0;
    double ber = 0.0;
    double fer = 0.0;
    long frames = 0;
    long bit_errors = 0;
    double avg_iterations = 0.0;
    double avg_fn_degree = 0.0;  // live symbol-degree per FN (after pruning)
    rx::OpCounts ops_avg;        // per frame
};

// curve name ("ep_jsg", "afdm:ep_jsg", ...) -> points in grid order
using CurveSet = std::vector<std::pair<std::string, std::vector<BerPoint>>>;

CurveSet run_ber_sweep(const SimConfig& cfg);
CurveSet run_convergence(const SimConfig& cfg, const std::vector<int>& iteration_grid);
CurveSet run_esnr_study(const SimConfig& cfg, const std::vector<double>& threshold_grid);
CurveSet run_path_study(const SimConfig& cfg, const std::vector<int>& path_grid);

// Mean zero-fraction of the kept-shift indicator over SISO realizations.
double run_sparsity_report(int n, int p, double nu_max, double c1, double threshold_db,
                           double ebn0_db, int realizations, uint64_t seed);

void emit_csv(const std::string& path, const std::vector<std::string>& header,
              const std::vector<std::vector<std::string>>& rows);
void emit_curves_csv(const std::string& path, const std::string& x_name, const CurveSet& curves);
std::string format_g9(double v);

// (seed, point, frame) -> independent stream, schedule-invariant.
std::mt19937_64 frame_rng(uint64_t seed, uint64_t point, uint64_t frame);

}  // namespace afdm::harness
