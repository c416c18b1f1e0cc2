#include "mlt/witness.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <set>

namespace mlt {

namespace {

constexpr double kEntryZeroTol = 1e-10;
constexpr int kKernelRetries = 50;
// Smallest acceptable min|q_i| / max|q_i|: a badly unbalanced kernel vector
// forces huge entries in the annihilating covariance and ruins its
// conditioning, so when the kernel has spare dimensions we keep searching.
constexpr double kKernelBalance = 0.05;
// Smallest accepted path slope a = q' Sigma q; a smaller slope gets the
// base covariance rescaled so the certified gain stays comfortably large.
constexpr double kMinSlope = 0.1;

// Direct likelihood evaluation in extended precision: the witness base
// covariance can be ill-conditioned (its entries are dictated by kernel
// ratios), and the closed-form comparison needs more head room than a
// double-precision factorization of Sigma_t leaves.
double loglik_extended(const Eigen::MatrixXd& sigma, const Eigen::MatrixXd& s) {
    using LongMatrix = Eigen::Matrix<long double, Eigen::Dynamic, Eigen::Dynamic>;
    const LongMatrix a = sigma.cast<long double>();
    Eigen::LLT<LongMatrix> llt(a);
    if (llt.info() != Eigen::Success) {
        throw definiteness_error("loglik: covariance is not positive definite");
    }
    const long double logdet =
        2.0L * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
    const long double tr = llt.solve(s.cast<long double>()).trace();
    return static_cast<double>(-logdet - tr);
}

Eigen::VectorXd try_kernel(const Eigen::MatrixXd& x1_inv_x2,
                           const Eigen::VectorXd& e) {
    const Eigen::VectorXd u = -x1_inv_x2 * e;
    Eigen::VectorXd q(u.size() + e.size());
    q << u, e;
    return q;
}

}  // namespace

Eigen::VectorXd allnonzero_kernel_vector(const Eigen::MatrixXd& x) {
    const int n = static_cast<int>(x.rows());
    const int m = static_cast<int>(x.cols());
    if (n >= m) {
        throw witness_error("kernel vector needs n < m");
    }

    std::mt19937_64 rng(0x9e3779b97f4a7c15ULL);
    std::uniform_real_distribution<double> unif(0.5, 1.5);

    for (int shift = 0; shift < m; ++shift) {
        std::vector<int> cols(m);
        for (int k = 0; k < m; ++k) cols[k] = (k + shift) % m;
        Eigen::MatrixXd x1(n, n), x2(n, m - n);
        for (int k = 0; k < n; ++k) x1.col(k) = x.col(cols[k]);
        for (int k = n; k < m; ++k) x2.col(k - n) = x.col(cols[k]);
        Eigen::FullPivLU<Eigen::MatrixXd> lu(x1);
        if (!lu.isInvertible()) continue;
        const Eigen::MatrixXd x1_inv_x2 = lu.solve(x2);

        Eigen::VectorXd e = Eigen::VectorXd::Ones(m - n);
        Eigen::VectorXd best;
        double best_balance = -1.0;
        for (int attempt = 0; attempt <= kKernelRetries; ++attempt) {
            const Eigen::VectorXd qp = try_kernel(x1_inv_x2, e);
            const double balance =
                qp.cwiseAbs().minCoeff() / qp.cwiseAbs().maxCoeff();
            if (qp.cwiseAbs().minCoeff() > kEntryZeroTol &&
                balance > best_balance) {
                best_balance = balance;
                best = qp;
            }
            // With a one-dimensional kernel every retry is a rescaling, so
            // any nonzero candidate is as good as it gets; with spare
            // dimensions keep drawing until the entries are balanced.
            if (best_balance > 0.0 &&
                (m - n == 1 || best_balance >= kKernelBalance)) {
                break;
            }
            for (int k = 0; k < m - n; ++k) e(k) = unif(rng);
        }
        if (best_balance > 0.0) {
            Eigen::VectorXd q(m);
            for (int k = 0; k < m; ++k) q(cols[k]) = best(k);
            return q;
        }
        throw degenerate_data_error(
            "kernel vector construction kept hitting zero coordinates");
    }
    throw degenerate_data_error(
        "no invertible leading block found in the restricted data matrix");
}

std::pair<Eigen::MatrixXd, double> annihilating_covariance(
    const MixedGraph& g, const Eigen::VectorXd& q,
    const std::vector<int>& ordering) {
    const int p = g.p();
    if (!g.directed().empty()) {
        throw witness_error("annihilating_covariance: graph has directed edges");
    }
    if (q.size() != p) {
        throw witness_error("annihilating_covariance: q has wrong length");
    }
    if (q.cwiseAbs().minCoeff() < 1e-12) {
        throw witness_error("annihilating_covariance: q has a zero entry");
    }
    {
        std::vector<int> sorted = ordering;
        std::sort(sorted.begin(), sorted.end());
        for (int k = 0; k < p; ++k) {
            if (k >= static_cast<int>(sorted.size()) || sorted[k] != k + 1) {
                throw witness_error("annihilating_covariance: ordering is not a "
                                    "permutation of 1..p");
            }
        }
    }
    // suffix connectivity of the ordering
    for (std::size_t i = 0; i + 1 < ordering.size(); ++i) {
        std::set<int> suffix(ordering.begin() + static_cast<long>(i) + 1,
                             ordering.end());
        std::set<int> seen{*suffix.begin()};
        std::vector<int> stack{*suffix.begin()};
        while (!stack.empty()) {
            int u = stack.back();
            stack.pop_back();
            for (int w : suffix) {
                if (!seen.count(w) && g.has_bidirected(u, w)) {
                    seen.insert(w);
                    stack.push_back(w);
                }
            }
        }
        if (seen.size() != suffix.size()) {
            throw witness_error(
                "annihilating_covariance: ordering fails suffix connectivity");
        }
    }

    // Work in the relabeled space where vertex i is ordering[i-1].
    Eigen::VectorXd qr(p);
    for (int i = 0; i < p; ++i) qr(i) = q(ordering[i] - 1);
    auto adjacent = [&](int i, int k) {
        return g.has_bidirected(ordering[i - 1], ordering[k - 1]);
    };

    Eigen::MatrixXd sig = Eigen::MatrixXd::Zero(p, p);
    for (int i = 1; i <= p; ++i) {
        // diagonal: smallest natural number pushing the leading minor past 1e-9
        auto minor_det = [&](double d) {
            sig(i - 1, i - 1) = d;
            return sig.topLeftCorner(i, i).determinant();
        };
        const double det0 = minor_det(0.0);
        const double slope = minor_det(1.0) - det0;  // previous leading minor
        if (slope <= 0.0) {
            throw witness_error("annihilating_covariance: nonpositive leading "
                                "minor encountered");
        }
        double d = std::max(1.0, std::floor((1e-9 - det0) / slope) + 1.0);
        while (det0 + d * slope <= 1e-9) d += 1.0;
        sig(i - 1, i - 1) = d;

        if (i == p) break;
        // later neighbor with smallest original label
        int istar = 0;
        for (int k = i + 1; k <= p; ++k) {
            if (adjacent(i, k) &&
                (istar == 0 || ordering[k - 1] < ordering[istar - 1])) {
                istar = k;
            }
        }
        if (istar == 0) {
            throw witness_error("annihilating_covariance: no later neighbor; "
                                "ordering invalid");
        }
        for (int k = i + 1; k <= p; ++k) {
            if (k == istar) continue;
            const double v = adjacent(i, k) ? 1.0 : 0.0;
            sig(i - 1, k - 1) = v;
            sig(k - 1, i - 1) = v;
        }
        double acc = 0.0;
        for (int l = 1; l <= p; ++l) {
            if (l == istar) continue;
            acc += sig(i - 1, l - 1) * qr(l - 1);
        }
        const double v = -acc / qr(istar - 1);
        sig(i - 1, istar - 1) = v;
        sig(istar - 1, i - 1) = v;
    }

    const double c = sig.row(p - 1).dot(qr);
    {
        Eigen::LLT<Eigen::MatrixXd> llt(sig);
        if (llt.info() != Eigen::Success) {
            throw witness_error("annihilating_covariance: constructed matrix is "
                                "not positive definite");
        }
    }

    // map back to original labels
    Eigen::MatrixXd out(p, p);
    for (int a = 0; a < p; ++a) {
        for (int b = 0; b < p; ++b) {
            out(ordering[a] - 1, ordering[b] - 1) = sig(a, b);
        }
    }
    return {std::move(out), c};
}

Eigen::MatrixXd divergence_path(const DivergenceWitness& w, double t) {
    if (t < 0.0) throw witness_error("divergence_path: t must be nonnegative");
    const int m = static_cast<int>(w.support.size());
    Eigen::MatrixXd block = w.sigma_base;
    if (t > 0.0) {
        // Sigma q = c e_last, so the correction hits one diagonal entry.
        const double factor = 1.0 / (1.0 / t + w.slope);
        block(m - 1, m - 1) -= factor * w.c * w.c;
    }
    Eigen::MatrixXd full = Eigen::MatrixXd::Identity(w.p, w.p);
    for (int a = 0; a < m; ++a) {
        for (int b = 0; b < m; ++b) {
            full(w.support[a] - 1, w.support[b] - 1) = block(a, b);
        }
    }
    const double asym = (full - full.transpose()).cwiseAbs().maxCoeff();
    if (asym > 1e-10) {
        throw witness_error("divergence_path: internal asymmetry above 1e-10");
    }
    return 0.5 * (full + full.transpose());
}

double loglik_along_path(const DivergenceWitness& w, double t) {
    return std::log1p(t * w.slope) + w.offset - w.trace_rest;
}

DivergenceWitness build_divergence_witness(const MixedGraph& g,
                                           const SampleStats& stats) {
    const MltReport rep = mlt_zero_mean(g);
    if (stats.n >= rep.threshold_zero_mean) {
        throw no_witness_error(
            "sample size " + std::to_string(stats.n) +
            " is at or above the threshold " +
            std::to_string(rep.threshold_zero_mean) + "; no divergence witness");
    }
    int j = -1;
    for (std::size_t k = 0; k < rep.decomposition.size(); ++k) {
        if (static_cast<int>(rep.decomposition.parent_closures[k].size()) > stats.n) {
            j = static_cast<int>(k);
            break;
        }
    }
    // guaranteed by the threshold check
    const ComponentSubgraph cs = component_subgraph(g, j);
    const ReductionPair red = reduction_subgraph(cs.graph);
    const int m = cs.graph.p();

    Eigen::MatrixXd xsub(stats.n, m);
    for (int k = 0; k < m; ++k) xsub.col(k) = stats.data.col(cs.labels[k] - 1);
    Eigen::VectorXd q = allnonzero_kernel_vector(xsub);
    q /= q.cwiseAbs().maxCoeff();

    // End the ordering at the vertex carrying the largest |q| entry: the
    // path slope is q_last * (Sigma q)_last, and a unit last coordinate
    // keeps the certified divergence gain well away from zero.
    int last = 1;
    for (int k = 1; k < m; ++k) {
        if (std::abs(q(k)) > std::abs(q(last - 1))) last = k + 1;
    }
    const std::vector<int> ord = peripheral_ordering(red.h_bidirected, last);
    auto [sigma, c] = annihilating_covariance(red.h_bidirected, q, ord);

    DivergenceWitness w;
    w.p = g.p();
    w.component_index = j;
    w.support.reserve(m);
    for (int k = 0; k < m; ++k) w.support.push_back(cs.labels[ord[k] - 1]);
    w.q.resize(m);
    for (int k = 0; k < m; ++k) w.q(k) = q(ord[k] - 1);
    w.sigma_base.resize(m, m);
    for (int a = 0; a < m; ++a) {
        for (int b = 0; b < m; ++b) {
            w.sigma_base(a, b) = sigma(ord[a] - 1, ord[b] - 1);
        }
    }
    w.c = c;
    w.slope = w.q.dot(w.sigma_base * w.q);
    if (w.slope <= 0.0) {
        throw witness_error("witness slope q' Sigma q is not positive");
    }
    if (w.slope < kMinSlope) {
        // Rescaling the base covariance keeps it inside PD(pattern) while
        // lifting the slope, so the divergence gain cannot collapse just
        // because the constructed c happened to be small.
        const double scale = kMinSlope / w.slope;
        w.sigma_base *= scale;
        w.c *= scale;
        w.slope = kMinSlope;
    }

    // Extended precision: the base covariance may be ill-conditioned, and
    // the offset feeds the closed form that verification compares against.
    {
        using LongMatrix =
            Eigen::Matrix<long double, Eigen::Dynamic, Eigen::Dynamic>;
        const Eigen::MatrixXd s_sub = submatrix(stats.cov_zero_mean, w.support);
        const LongMatrix base = w.sigma_base.cast<long double>();
        Eigen::LLT<LongMatrix> llt(base);
        if (llt.info() != Eigen::Success) {
            throw witness_error("witness base covariance lost positive "
                                "definiteness");
        }
        const long double logdet_sigma =
            2.0L *
            llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
        w.offset = static_cast<double>(
            -llt.solve(s_sub.cast<long double>()).trace() - logdet_sigma);
    }

    std::set<int> in_support(w.support.begin(), w.support.end());
    w.trace_rest = 0.0;
    for (int v = 1; v <= g.p(); ++v) {
        if (!in_support.count(v)) w.trace_rest += stats.cov_zero_mean(v - 1, v - 1);
    }

    for (int a = 1; a <= m; ++a) {
        for (int b = a + 1; b <= m; ++b) {
            if (red.h_bidirected.has_bidirected(ord[a - 1], ord[b - 1])) {
                w.pattern.emplace_back(a, b);
            }
        }
    }
    return w;
}

bool WitnessReport::all_pass() const {
    for (const auto& c : checks) {
        if (!c.pass) return false;
    }
    return !checks.empty();
}

double WitnessReport::worst_residual(const std::string& name) const {
    double worst = 0.0;
    for (const auto& c : checks) {
        if (c.name == name) worst = std::max(worst, std::abs(c.residual));
    }
    return worst;
}

WitnessReport verify_witness(const DivergenceWitness& w, const MixedGraph& g,
                             const SampleStats& stats,
                             const std::vector<double>& t_grid) {
    WitnessReport report;
    if (t_grid.empty()) return report;

    const Eigen::MatrixXd s_sub = submatrix(stats.cov_zero_mean, w.support);
    const double s_scale = std::max(s_sub.cwiseAbs().maxCoeff(), 1e-300);

    {
        const double res = (s_sub * w.q).cwiseAbs().maxCoeff();
        report.checks.push_back({"kernel", 0.0, res <= 1e-8 * s_scale, res});
    }
    {
        const double min_abs = w.q.cwiseAbs().minCoeff();
        report.checks.push_back({"q_nonzero", 0.0, min_abs > kEntryZeroTol, min_abs});
    }
    {
        const Eigen::VectorXd sq = w.sigma_base * w.q;
        int big = 0;
        for (int i = 0; i < sq.size(); ++i) {
            if (std::abs(sq(i)) > 1e-8) ++big;
        }
        const double res =
            sq.size() > 1 ? sq.head(sq.size() - 1).cwiseAbs().maxCoeff() : 0.0;
        report.checks.push_back({"annihilation", 0.0, big == 1, res});
    }

    const int m = static_cast<int>(w.support.size());
    std::set<std::pair<int, int>> allowed(w.pattern.begin(), w.pattern.end());
    std::vector<double> values;
    for (double t : t_grid) {
        const Eigen::MatrixXd sig_t = divergence_path(w, t);

        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sig_t,
                                                          Eigen::EigenvaluesOnly);
        const double min_eig = es.eigenvalues().minCoeff();
        report.checks.push_back({"positive_definite", t, min_eig > 0.0, min_eig});

        // off-pattern entries of the full matrix must be exactly zero
        double worst = 0.0;
        for (int a = 1; a <= w.p; ++a) {
            for (int b = a + 1; b <= w.p; ++b) {
                // translate to support-order indices when both are in support
                int ia = 0, ib = 0;
                for (int k = 0; k < m; ++k) {
                    if (w.support[k] == a) ia = k + 1;
                    if (w.support[k] == b) ib = k + 1;
                }
                bool ok = ia > 0 && ib > 0 &&
                          (allowed.count({std::min(ia, ib), std::max(ia, ib)}) > 0);
                if (!ok) worst = std::max(worst, std::abs(sig_t(a - 1, b - 1)));
            }
        }
        report.checks.push_back({"zero_pattern", t, worst <= 1e-10, worst});

        const double closed = loglik_along_path(w, t);
        double direct = 0.0;
        bool ok = true;
        try {
            direct = loglik_extended(sig_t, stats.cov_zero_mean);
        } catch (const model_error&) {
            ok = false;
        }
        const double res = ok ? std::abs(closed - direct)
                              : std::numeric_limits<double>::infinity();
        report.checks.push_back({"closed_form", t, ok && res <= 1e-6, res});
        values.push_back(closed);
    }

    {
        std::vector<std::pair<double, double>> pts;
        for (std::size_t i = 0; i < t_grid.size(); ++i) pts.push_back({t_grid[i], values[i]});
        std::sort(pts.begin(), pts.end());
        bool mono = true;
        double min_inc = std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i + 1 < pts.size(); ++i) {
            if (pts[i + 1].first == pts[i].first) continue;
            const double inc = pts[i + 1].second - pts[i].second;
            min_inc = std::min(min_inc, inc);
            if (inc <= 0.0) mono = false;
        }
        if (pts.size() < 2) min_inc = 0.0;
        report.checks.push_back({"monotone", 0.0, mono, min_inc});
    }
    return report;
}

}  // namespace mlt
