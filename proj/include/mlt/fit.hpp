#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <utility>
#include <vector>

#include "mlt/graph.hpp"
#include "mlt/model.hpp"

namespace mlt {

class fit_error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A parent-closure submatrix of the data covariance is singular: the
/// sample size is below the threshold and fitting is refused.
class threshold_error : public fit_error {
public:
    using fit_error::fit_error;
};

class nonconvergence_error : public fit_error {
public:
    using fit_error::fit_error;
};

struct FitOptions {
    int restarts = 5;
    int max_iter = 100000;
    double tol = 1e-6;
    std::uint64_t seed = 0;
    bool quasi_newton = true;  // L-BFGS direction; plain preconditioned
                               // gradient ascent when off
};

struct FitResult {
    EdgeWeights lam_hat;
    NoiseCovariance om_hat;
    double loglik_value = 0.0;
    bool converged = false;
    int iterations = 0;
    int restarts_used = 0;
    double gradient_norm = 0.0;
};

/// Closed-form MLE for acyclic digraphs: one regression per node.
FitResult fit_dag_mle(const MixedGraph& g, const Eigen::MatrixXd& s0);

/// Gradient-based MLE for general mixed graphs.
FitResult fit_mle(const MixedGraph& g, const Eigen::MatrixXd& s0,
                  const FitOptions& opts = {});

/// Analytic gradient of the log-likelihood with respect to the free
/// parameters. Lambda part ordered like g.directed(); omega part is the p
/// diagonal entries followed by g.bidirected().
std::pair<std::vector<double>, std::vector<double>> loglik_gradient(
    const MixedGraph& g, const EdgeWeights& lam, const NoiseCovariance& om,
    const Eigen::MatrixXd& s0);

struct LrtResult {
    double stat = 0.0;
    double p_value = 1.0;
    int df = 1;
    FitResult fit_full;
    FitResult fit_null;
};

/// n * (l_full - l_null) against a chi-square with df = number of removed
/// edges (at least 1). Uses the centered covariance S_n.
LrtResult lrt(const MixedGraph& g_full, const MixedGraph& g_null,
              const SampleStats& stats, const FitOptions& opts = {});

/// Upper tail P(X > x) of chi-square with df degrees of freedom.
double chi_square_upper_tail(double x, int df);

/// Lower quantile: smallest q with P(X <= q) = prob.
double chi_square_quantile(double prob, int df);

}  // namespace mlt
