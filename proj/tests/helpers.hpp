#pragma once

#include <Eigen/Dense>
#include <map>
#include <random>
#include <vector>

#include "mlt/graph.hpp"
#include "mlt/model.hpp"

namespace testing {

inline mlt::MixedGraph random_dag(int p, std::mt19937_64& rng,
                                  double edge_prob = 0.4) {
    std::bernoulli_distribution coin(edge_prob);
    std::vector<mlt::Edge> edges;
    for (int i = 1; i <= p; ++i) {
        for (int j = i + 1; j <= p; ++j) {
            if (coin(rng)) edges.emplace_back(i, j);
        }
    }
    return mlt::MixedGraph(p, std::move(edges), {});
}

inline mlt::MixedGraph random_mixed_graph(int p, std::mt19937_64& rng,
                                          double dir_prob = 0.3,
                                          double bidir_prob = 0.3) {
    std::bernoulli_distribution dir(dir_prob), bidir(bidir_prob);
    std::vector<mlt::Edge> directed, bidirected;
    for (int i = 1; i <= p; ++i) {
        for (int j = 1; j <= p; ++j) {
            if (i != j && dir(rng)) directed.emplace_back(i, j);
        }
    }
    for (int i = 1; i <= p; ++i) {
        for (int j = i + 1; j <= p; ++j) {
            if (bidir(rng)) bidirected.emplace_back(i, j);
        }
    }
    return mlt::MixedGraph(p, std::move(directed), std::move(bidirected));
}

/// Regular edge weights with entries small enough that I - Lambda is
/// comfortably invertible.
inline mlt::EdgeWeights random_weights(const mlt::MixedGraph& g,
                                       std::mt19937_64& rng,
                                       double scale = 0.3) {
    std::uniform_real_distribution<double> unif(-scale, scale);
    for (int attempt = 0; attempt < 100; ++attempt) {
        std::map<mlt::Edge, double> values;
        for (const auto& e : g.directed()) values[e] = unif(rng);
        mlt::EdgeWeights lam(g, std::move(values));
        if (lam.is_regular()) return lam;
    }
    throw std::runtime_error("random_weights: no regular draw found");
}

/// Positive definite noise covariance respecting the bidirected support.
inline mlt::NoiseCovariance random_noise(const mlt::MixedGraph& g,
                                         std::mt19937_64& rng,
                                         double off_scale = 0.3) {
    std::uniform_real_distribution<double> diag_unif(0.5, 2.0);
    std::uniform_real_distribution<double> off_unif(-off_scale, off_scale);
    for (int attempt = 0; attempt < 200; ++attempt) {
        Eigen::VectorXd diag(g.p());
        for (int i = 0; i < g.p(); ++i) diag(i) = diag_unif(rng);
        std::map<mlt::Edge, double> off;
        for (const auto& e : g.bidirected()) {
            off[e] = off_unif(rng) *
                     std::sqrt(diag(e.first - 1) * diag(e.second - 1));
        }
        mlt::NoiseCovariance om(g, diag, off);
        Eigen::LLT<Eigen::MatrixXd> llt(om.matrix());
        if (llt.info() == Eigen::Success) return om;
    }
    throw std::runtime_error("random_noise: no PD draw found");
}

inline Eigen::MatrixXd random_spd(int p, std::mt19937_64& rng) {
    std::normal_distribution<double> normal(0.0, 1.0);
    Eigen::MatrixXd a(p, p);
    for (int i = 0; i < p; ++i) {
        for (int j = 0; j < p; ++j) a(i, j) = normal(rng);
    }
    return a * a.transpose() + 0.1 * Eigen::MatrixXd::Identity(p, p);
}

inline Eigen::MatrixXd random_data(int n, int p, std::mt19937_64& rng) {
    std::normal_distribution<double> normal(0.0, 1.0);
    Eigen::MatrixXd x(n, p);
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < p; ++j) x(i, j) = normal(rng);
    }
    return x;
}

}  // namespace testing
