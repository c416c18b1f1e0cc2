#pragma once

#include <Eigen/Dense>
#include <map>
#include <optional>
#include <stdexcept>
#include <vector>

#include "mlt/graph.hpp"

namespace mlt {

class model_error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// I - Lambda is numerically singular.
class regularity_error : public model_error {
public:
    using model_error::model_error;
};

/// A matrix required to be positive definite is not.
class definiteness_error : public model_error {
public:
    using model_error::model_error;
};

/// Sparse edge coefficients Lambda supported on the directed edges.
class EdgeWeights {
public:
    EdgeWeights(MixedGraph g, std::map<Edge, double> values);

    /// Construction that additionally rejects singular I - Lambda.
    static EdgeWeights regular(MixedGraph g, std::map<Edge, double> values);

    const MixedGraph& graph() const { return graph_; }
    const std::map<Edge, double>& values() const { return values_; }
    double value(int i, int j) const;

    Eigen::MatrixXd matrix() const;  // dense Lambda
    bool is_regular() const;

private:
    MixedGraph graph_;
    std::map<Edge, double> values_;
};

/// Error covariance Omega supported on the diagonal and the bidirected edges.
class NoiseCovariance {
public:
    NoiseCovariance(MixedGraph g, Eigen::VectorXd diagonal,
                    std::map<Edge, double> off_diagonal);

    /// Construction that additionally rejects non-PD Omega.
    static NoiseCovariance positive_definite(MixedGraph g, Eigen::VectorXd diagonal,
                                             std::map<Edge, double> off_diagonal);

    const MixedGraph& graph() const { return graph_; }
    const Eigen::VectorXd& diagonal() const { return diagonal_; }
    const std::map<Edge, double>& off_diagonal() const { return off_diagonal_; }

    Eigen::MatrixXd matrix() const;  // dense Omega

private:
    MixedGraph graph_;
    Eigen::VectorXd diagonal_;
    std::map<Edge, double> off_diagonal_;
};

struct SampleStats {
    int n = 0;
    int p = 0;
    Eigen::MatrixXd data;           // n x p, rows are observations
    Eigen::VectorXd mean;           // X-bar
    Eigen::MatrixXd cov_centered;   // S_n
    Eigen::MatrixXd cov_zero_mean;  // S_{0,n}
    bool zero_mean = false;         // modeling convention requested by caller
};

SampleStats sample_stats(const Eigen::MatrixXd& data, bool zero_mean = false);

/// Symmetric positive definite matrix with a lazily cached inverse.
class CovarianceMatrix {
public:
    explicit CovarianceMatrix(Eigen::MatrixXd sigma);

    int p() const { return static_cast<int>(sigma_.rows()); }
    const Eigen::MatrixXd& matrix() const { return sigma_; }
    const Eigen::MatrixXd& inverse() const;

private:
    Eigen::MatrixXd sigma_;
    mutable std::optional<Eigen::MatrixXd> inverse_;
};

/// Regularity acceptance rule for I - Lambda.
bool regular_within_tolerance(const Eigen::MatrixXd& lambda);

/// Sigma = (I-Lambda)^{-T} Omega (I-Lambda)^{-1}, symmetrized on return.
CovarianceMatrix covariance_from_params(const EdgeWeights& lam,
                                        const NoiseCovariance& om);

/// -log det(Sigma) - trace(Sigma^{-1} S)
double loglik(const CovarianceMatrix& sigma, const Eigen::MatrixXd& s);

/// loglik against S_n minus the (X-bar - mu)' Sigma^{-1} (X-bar - mu) term.
double loglik_with_mean(const Eigen::VectorXd& mu, const CovarianceMatrix& sigma,
                        const SampleStats& stats);

/// Closed-form profile blocks [(I-Lambda)' S0 (I-Lambda)]_{C_j,C_j} for a
/// graph whose bidirected components are cliques.
std::vector<Eigen::MatrixXd> profile_omega_blocks(const MixedGraph& g,
                                                  const EdgeWeights& lam,
                                                  const Eigen::MatrixXd& s0);

double profile_loglik(const MixedGraph& g, const EdgeWeights& lam,
                      const Eigen::MatrixXd& s0);

/// -p - sum_j |C_j| log(min eigenvalue of S0 on Pa(C_j)); +infinity when a
/// parent-closure submatrix is not positive definite.
double likelihood_upper_bound(const MixedGraph& g, const Eigen::MatrixXd& s0);

/// Sigma^{-1} = (I-Lambda) Omega^{-1} (I-Lambda)'
Eigen::MatrixXd concentration(const EdgeWeights& lam, const NoiseCovariance& om);

/// Submatrix helper: rows/cols of m picked by 1-based vertex labels.
Eigen::MatrixXd submatrix(const Eigen::MatrixXd& m, const std::vector<int>& idx);

}  // namespace mlt
