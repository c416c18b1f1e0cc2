#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "mlt/fit.hpp"
#include "mlt/graph.hpp"
#include "mlt/model.hpp"

namespace mlt {

/// Number of worker threads: MLT_THREADS when set, else hardware concurrency.
int thread_count();

/// Deterministic per-task RNG stream derived from a seed and task indices.
std::mt19937_64 derive_stream(std::uint64_t seed, std::uint64_t a,
                              std::uint64_t b = 0, std::uint64_t c = 0);

/// i.i.d. zero-mean Gaussian rows with the given covariance (Cholesky
/// factor times standard normals).
Eigen::MatrixXd sample_gaussian(const CovarianceMatrix& sigma, int n,
                                std::mt19937_64& rng);

struct ProbeReplicate {
    bool below_threshold = false;
    bool witness_found = false;
    bool witness_verified = false;
    double divergence_gain = 0.0;  // l(1e6) - l(0)
    bool fit_converged = false;
    double loglik_value = 0.0;
    double upper_bound = 0.0;
    bool bounded_ok = false;  // loglik <= bound + 1e-6
    std::string error;
};

struct ProbeReport {
    int n = 0;
    int threshold = 0;
    int replicates = 0;
    int passes = 0;
    std::vector<ProbeReplicate> entries;
};

/// For each replicate of standard normal data: below the threshold, build
/// and verify a divergence witness; at or above it, fit and compare with
/// the explicit upper bound.
ProbeReport boundedness_probe(const MixedGraph& g, int n, int replicates,
                              std::uint64_t seed);

struct ExperimentConfig {
    int p = 20;
    std::vector<int> n_values{15, 20, 25};
    std::vector<double> lambda12_grid{-1.0, -0.5, -0.25, 0.0, 0.25, 0.5, 1.0};
    double other_coeff = 1.0 / 3.0;
    int replicates = 200;
    double alpha = 0.05;
    std::uint64_t seed = 2;
    int restarts = 1;
};

struct PowerRow {
    int n = 0;
    double lambda12 = 0.0;
    int rejections = 0;
    int replicates = 0;
    int failed = 0;      // nonconvergent replicates, excluded from the rate
    double rate = 0.0;
    double se = 0.0;     // sqrt(r(1-r)/converged replicates)
    bool valid = true;   // false when more than 5% of replicates failed
};

struct PowerTable {
    ExperimentConfig config;
    std::vector<PowerRow> rows;
};

/// Monte Carlo size/power of the likelihood ratio test for the 1 -> 2 edge
/// of the experiment graph. Error covariance is the identity; means are
/// known to be zero, so the uncentered second-moment matrix is used.
PowerTable power_experiment(const ExperimentConfig& cfg);

std::string power_table_csv(const PowerTable& table);
std::string power_table_svg(const PowerTable& table);

}  // namespace mlt
