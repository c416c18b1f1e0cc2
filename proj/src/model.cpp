#include "mlt/model.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>
#include <limits>

namespace mlt {

namespace {

double logdet_from_llt(const Eigen::LLT<Eigen::MatrixXd>& llt) {
    return 2.0 * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
}

}  // namespace

EdgeWeights::EdgeWeights(MixedGraph g, std::map<Edge, double> values)
    : graph_(std::move(g)), values_(std::move(values)) {
    for (const auto& [e, v] : values_) {
        if (!graph_.has_directed(e.first, e.second)) {
            throw model_error("edge weight on " + std::to_string(e.first) + " -> " +
                              std::to_string(e.second) +
                              " outside the directed edge set");
        }
    }
}

EdgeWeights EdgeWeights::regular(MixedGraph g, std::map<Edge, double> values) {
    EdgeWeights w(std::move(g), std::move(values));
    if (!w.is_regular()) {
        throw regularity_error("I - Lambda is numerically singular");
    }
    return w;
}

double EdgeWeights::value(int i, int j) const {
    auto it = values_.find({i, j});
    return it == values_.end() ? 0.0 : it->second;
}

Eigen::MatrixXd EdgeWeights::matrix() const {
    Eigen::MatrixXd lam = Eigen::MatrixXd::Zero(graph_.p(), graph_.p());
    for (const auto& [e, v] : values_) lam(e.first - 1, e.second - 1) = v;
    return lam;
}

bool regular_within_tolerance(const Eigen::MatrixXd& lambda) {
    const int p = static_cast<int>(lambda.rows());
    const Eigen::MatrixXd a =
        Eigen::MatrixXd::Identity(p, p) - lambda;
    const double det = a.partialPivLu().determinant();
    const double max_abs = lambda.cwiseAbs().maxCoeff();
    const double tol = 1e-12 * std::pow(1.0 + max_abs, p);
    return std::abs(det) > tol;
}

bool EdgeWeights::is_regular() const { return regular_within_tolerance(matrix()); }

NoiseCovariance::NoiseCovariance(MixedGraph g, Eigen::VectorXd diagonal,
                                 std::map<Edge, double> off_diagonal)
    : graph_(std::move(g)),
      diagonal_(std::move(diagonal)),
      off_diagonal_(std::move(off_diagonal)) {
    if (diagonal_.size() != graph_.p()) {
        throw model_error("noise covariance diagonal has wrong length");
    }
    for (const auto& [e, v] : off_diagonal_) {
        if (!graph_.has_bidirected(e.first, e.second)) {
            throw model_error("noise covariance entry on " + std::to_string(e.first) +
                              " <-> " + std::to_string(e.second) +
                              " outside the bidirected edge set");
        }
    }
}

NoiseCovariance NoiseCovariance::positive_definite(
    MixedGraph g, Eigen::VectorXd diagonal, std::map<Edge, double> off_diagonal) {
    NoiseCovariance om(std::move(g), std::move(diagonal), std::move(off_diagonal));
    Eigen::LLT<Eigen::MatrixXd> llt(om.matrix());
    if (llt.info() != Eigen::Success) {
        throw definiteness_error("Omega is not positive definite");
    }
    return om;
}

Eigen::MatrixXd NoiseCovariance::matrix() const {
    Eigen::MatrixXd om = diagonal_.asDiagonal();
    for (const auto& [e, v] : off_diagonal_) {
        om(e.first - 1, e.second - 1) = v;
        om(e.second - 1, e.first - 1) = v;
    }
    return om;
}

SampleStats sample_stats(const Eigen::MatrixXd& data, bool zero_mean) {
    if (data.rows() < 1 || data.cols() < 1) {
        throw model_error("sample_stats: empty data matrix");
    }
    SampleStats st;
    st.n = static_cast<int>(data.rows());
    st.p = static_cast<int>(data.cols());
    st.data = data;
    st.zero_mean = zero_mean;
    st.mean = data.colwise().mean();
    Eigen::MatrixXd centered = data.rowwise() - st.mean.transpose();
    st.cov_centered = centered.transpose() * centered / static_cast<double>(st.n);
    st.cov_zero_mean = data.transpose() * data / static_cast<double>(st.n);
    st.cov_centered = 0.5 * (st.cov_centered + st.cov_centered.transpose()).eval();
    st.cov_zero_mean = 0.5 * (st.cov_zero_mean + st.cov_zero_mean.transpose()).eval();
    return st;
}

CovarianceMatrix::CovarianceMatrix(Eigen::MatrixXd sigma) : sigma_(std::move(sigma)) {
    if (sigma_.rows() != sigma_.cols()) {
        throw model_error("covariance matrix must be square");
    }
    if ((sigma_ - sigma_.transpose()).cwiseAbs().maxCoeff() >
        1e-10 * (1.0 + sigma_.cwiseAbs().maxCoeff())) {
        throw model_error("covariance matrix is not symmetric");
    }
    Eigen::LLT<Eigen::MatrixXd> llt(sigma_);
    if (llt.info() != Eigen::Success) {
        throw definiteness_error("covariance matrix is not positive definite");
    }
}

const Eigen::MatrixXd& CovarianceMatrix::inverse() const {
    if (!inverse_) {
        Eigen::LLT<Eigen::MatrixXd> llt(sigma_);
        inverse_ = llt.solve(Eigen::MatrixXd::Identity(p(), p()));
    }
    return *inverse_;
}

CovarianceMatrix covariance_from_params(const EdgeWeights& lam,
                                        const NoiseCovariance& om) {
    const int p = lam.graph().p();
    if (om.graph().p() != p) {
        throw model_error("edge weights and noise covariance disagree on p");
    }
    const Eigen::MatrixXd lambda = lam.matrix();
    if (!regular_within_tolerance(lambda)) {
        throw regularity_error("I - Lambda is numerically singular");
    }
    const Eigen::MatrixXd omega = om.matrix();
    {
        Eigen::LLT<Eigen::MatrixXd> llt(omega);
        if (llt.info() != Eigen::Success) {
            throw definiteness_error("Omega is not positive definite");
        }
    }
    const Eigen::MatrixXd a = Eigen::MatrixXd::Identity(p, p) - lambda;
    Eigen::PartialPivLU<Eigen::MatrixXd> lu(a);
    const Eigen::MatrixXd ainv = lu.inverse();
    Eigen::MatrixXd sigma = ainv.transpose() * omega * ainv;
    sigma = 0.5 * (sigma + sigma.transpose()).eval();
    return CovarianceMatrix(std::move(sigma));
}

double loglik(const CovarianceMatrix& sigma, const Eigen::MatrixXd& s) {
    Eigen::LLT<Eigen::MatrixXd> llt(sigma.matrix());
    if (llt.info() != Eigen::Success) {
        throw definiteness_error("loglik: sigma is not positive definite");
    }
    const double logdet = logdet_from_llt(llt);
    const double tr = llt.solve(s).trace();
    return -logdet - tr;
}

double loglik_with_mean(const Eigen::VectorXd& mu, const CovarianceMatrix& sigma,
                        const SampleStats& stats) {
    const Eigen::VectorXd d = stats.mean - mu;
    Eigen::LLT<Eigen::MatrixXd> llt(sigma.matrix());
    if (llt.info() != Eigen::Success) {
        throw definiteness_error("loglik_with_mean: sigma is not positive definite");
    }
    const double quad = d.dot(llt.solve(d));
    return loglik(sigma, stats.cov_centered) - quad;
}

Eigen::MatrixXd submatrix(const Eigen::MatrixXd& m, const std::vector<int>& idx) {
    Eigen::MatrixXd out(idx.size(), idx.size());
    for (std::size_t a = 0; a < idx.size(); ++a) {
        for (std::size_t b = 0; b < idx.size(); ++b) {
            out(static_cast<long>(a), static_cast<long>(b)) =
                m(idx[a] - 1, idx[b] - 1);
        }
    }
    return out;
}

namespace {

void require_saturated(const MixedGraph& g, const ComponentDecomposition& dec) {
    for (const auto& comp : dec.components) {
        for (std::size_t a = 0; a < comp.size(); ++a) {
            for (std::size_t b = a + 1; b < comp.size(); ++b) {
                if (!g.has_bidirected(comp[a], comp[b])) {
                    throw model_error(
                        "profile likelihood requires clique bidirected "
                        "components; apply saturate first");
                }
            }
        }
    }
}

}  // namespace

std::vector<Eigen::MatrixXd> profile_omega_blocks(const MixedGraph& g,
                                                  const EdgeWeights& lam,
                                                  const Eigen::MatrixXd& s0) {
    auto dec = bidirected_components(g);
    require_saturated(g, dec);
    const int p = g.p();
    const Eigen::MatrixXd a = Eigen::MatrixXd::Identity(p, p) - lam.matrix();
    const Eigen::MatrixXd m = a.transpose() * s0 * a;
    std::vector<Eigen::MatrixXd> blocks;
    blocks.reserve(dec.size());
    for (const auto& comp : dec.components) {
        Eigen::MatrixXd blk = submatrix(m, comp);
        blocks.push_back(0.5 * (blk + blk.transpose()));
    }
    return blocks;
}

double profile_loglik(const MixedGraph& g, const EdgeWeights& lam,
                      const Eigen::MatrixXd& s0) {
    const int p = g.p();
    const Eigen::MatrixXd lambda = lam.matrix();
    if (!regular_within_tolerance(lambda)) {
        throw regularity_error("profile_loglik: I - Lambda is numerically singular");
    }
    const Eigen::MatrixXd a = Eigen::MatrixXd::Identity(p, p) - lambda;
    const double logdet_a2 = 2.0 * std::log(std::abs(a.partialPivLu().determinant()));
    auto blocks = profile_omega_blocks(g, lam, s0);
    double sum = 0.0;
    for (std::size_t j = 0; j < blocks.size(); ++j) {
        Eigen::LLT<Eigen::MatrixXd> llt(blocks[j]);
        if (llt.info() != Eigen::Success) {
            throw definiteness_error("profile_loglik: singular profile block for "
                                     "component " + std::to_string(j + 1));
        }
        sum += logdet_from_llt(llt);
    }
    return logdet_a2 - p - sum;
}

double likelihood_upper_bound(const MixedGraph& g, const Eigen::MatrixXd& s0) {
    auto dec = bidirected_components(g);
    double sum = 0.0;
    for (std::size_t j = 0; j < dec.size(); ++j) {
        const Eigen::MatrixXd sub = submatrix(s0, dec.parent_closures[j]);
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sub, Eigen::EigenvaluesOnly);
        const double lam_min = es.eigenvalues().minCoeff();
        if (lam_min <= 0.0) return std::numeric_limits<double>::infinity();
        sum += static_cast<double>(dec.components[j].size()) * std::log(lam_min);
    }
    return -static_cast<double>(g.p()) - sum;
}

Eigen::MatrixXd concentration(const EdgeWeights& lam, const NoiseCovariance& om) {
    const int p = lam.graph().p();
    const Eigen::MatrixXd lambda = lam.matrix();
    if (!regular_within_tolerance(lambda)) {
        throw regularity_error("concentration: I - Lambda is numerically singular");
    }
    const Eigen::MatrixXd omega = om.matrix();
    Eigen::LLT<Eigen::MatrixXd> llt(omega);
    if (llt.info() != Eigen::Success) {
        throw definiteness_error("concentration: Omega is not positive definite");
    }
    const Eigen::MatrixXd a = Eigen::MatrixXd::Identity(p, p) - lambda;
    const Eigen::MatrixXd om_inv = llt.solve(Eigen::MatrixXd::Identity(p, p));
    Eigen::MatrixXd k = a * om_inv * a.transpose();
    return 0.5 * (k + k.transpose());
}

}  // namespace mlt
