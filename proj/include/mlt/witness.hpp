#pragma once

#include <Eigen/Dense>
#include <string>
#include <utility>
#include <vector>

#include "mlt/graph.hpp"
#include "mlt/model.hpp"

namespace mlt {

class witness_error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Sample size already at or above the threshold: nothing to certify.
class no_witness_error : public witness_error {
public:
    using witness_error::witness_error;
};

/// Data failed the generic-position assumptions (probability-zero event).
class degenerate_data_error : public witness_error {
public:
    using witness_error::witness_error;
};

/// Certificate that the likelihood diverges along Sigma_t inside the model.
/// `support` lists the vertices of Pa(C_j) in the peripheral order used to
/// build sigma_base, so sigma_base * q = c * e_last holds in support order.
struct DivergenceWitness {
    int p = 0;                      // full graph size
    int component_index = 0;        // 0-based index into the decomposition
    std::vector<int> support;       // original vertex labels, peripheral order
    Eigen::VectorXd q;              // kernel direction, max |q_i| = 1
    Eigen::MatrixXd sigma_base;     // PD on the witness pattern
    double c = 0.0;                 // (sigma_base q)_last
    double slope = 0.0;             // a = q' Sigma q
    double offset = 0.0;            // b = log det(Sigma^{-1}) - tr(Sigma^{-1} S_sub)
    double trace_rest = 0.0;        // sum of off-support diagonal of S0
    std::vector<Edge> pattern;      // allowed off-diagonal pairs, support-order
                                    // indices (1-based), i < j
};

/// Kernel vector of the restricted data matrix (n x m, n < m) with every
/// coordinate nonzero. Follows the first-n-columns partition with trailing
/// entries one; falls back to random trailing vectors, then to cyclic
/// column shifts when the leading square block is singular.
Eigen::VectorXd allnonzero_kernel_vector(const Eigen::MatrixXd& x);

/// Row-by-row construction of Sigma in PD(pattern) with Sigma*q supported
/// on the last vertex of `ordering`. Returns Sigma (original labels) and
/// c = (Sigma q)_{ordering.back()}.
std::pair<Eigen::MatrixXd, double> annihilating_covariance(
    const MixedGraph& g, const Eigen::VectorXd& q,
    const std::vector<int>& ordering);

/// Full p x p matrix Sigma_t: rank-one corrected support block, identity
/// elsewhere.
Eigen::MatrixXd divergence_path(const DivergenceWitness& w, double t);

/// Closed form log(1 + t*a) + b - trace_rest.
double loglik_along_path(const DivergenceWitness& w, double t);

DivergenceWitness build_divergence_witness(const MixedGraph& g,
                                           const SampleStats& stats);

struct WitnessCheck {
    std::string name;
    double t = 0.0;   // NaN-free; 0 for grid-independent checks
    bool pass = false;
    double residual = 0.0;
};

struct WitnessReport {
    std::vector<WitnessCheck> checks;
    bool all_pass() const;
    double worst_residual(const std::string& name) const;
};

WitnessReport verify_witness(const DivergenceWitness& w, const MixedGraph& g,
                             const SampleStats& stats,
                             const std::vector<double>& t_grid);

}  // namespace mlt
