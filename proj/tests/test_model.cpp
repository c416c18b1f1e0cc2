#include <cmath>
#include <random>

#include "doctest.h"
#include "helpers.hpp"
#include "mlt/model.hpp"

using mlt::Edge;
using mlt::MixedGraph;

TEST_CASE("covariance_from_params: p=2 single edge") {
    const MixedGraph g(2, {{1, 2}}, {});
    const double a = 0.7;
    const mlt::EdgeWeights lam(g, {{{1, 2}, a}});
    const mlt::NoiseCovariance om(g, Eigen::VectorXd::Ones(2), {});
    const auto sig = mlt::covariance_from_params(lam, om);
    CHECK(sig.matrix()(0, 0) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(sig.matrix()(0, 1) == doctest::Approx(a).epsilon(1e-12));
    CHECK(sig.matrix()(1, 1) == doctest::Approx(1.0 + a * a).epsilon(1e-12));
}

TEST_CASE("covariance_from_params: Lambda = 0 returns Omega") {
    std::mt19937_64 rng(41);
    const MixedGraph g(4, {{1, 2}, {3, 4}}, {{1, 3}});
    const auto om = testing::random_noise(g, rng);
    const mlt::EdgeWeights lam(g, {});
    const auto sig = mlt::covariance_from_params(lam, om);
    CHECK((sig.matrix() - om.matrix()).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("covariance_from_params: singular I - Lambda rejected") {
    const MixedGraph g = mlt::make_graph("directed-cycle", 4);
    std::map<Edge, double> all_one;
    for (const auto& e : g.directed()) all_one[e] = 1.0;
    const mlt::EdgeWeights lam(g, all_one);
    CHECK_FALSE(lam.is_regular());
    const mlt::NoiseCovariance om(g, Eigen::VectorXd::Ones(4), {});
    CHECK_THROWS_AS(mlt::covariance_from_params(lam, om), mlt::regularity_error);
    CHECK_THROWS_AS(mlt::EdgeWeights::regular(g, all_one), mlt::regularity_error);
}

TEST_CASE("EdgeWeights / NoiseCovariance validate support") {
    const MixedGraph g(3, {{1, 2}}, {{2, 3}});
    CHECK_THROWS_AS(mlt::EdgeWeights(g, {{{2, 1}, 0.5}}), mlt::model_error);
    CHECK_THROWS_AS(
        mlt::NoiseCovariance(g, Eigen::VectorXd::Ones(3), {{{1, 2}, 0.1}}),
        mlt::model_error);
    Eigen::VectorXd bad = Eigen::VectorXd::Ones(3);
    bad(1) = -1.0;
    CHECK_THROWS_AS(
        mlt::NoiseCovariance::positive_definite(g, bad, {}),
        mlt::definiteness_error);
}

TEST_CASE("loglik: reference values") {
    for (int p : {1, 3, 5}) {
        const mlt::CovarianceMatrix eye{Eigen::MatrixXd::Identity(p, p)};
        CHECK(mlt::loglik(eye, Eigen::MatrixXd::Identity(p, p)) ==
              doctest::Approx(-p).epsilon(1e-12));
    }
    const mlt::CovarianceMatrix two{2.0 * Eigen::MatrixXd::Identity(1, 1)};
    CHECK(mlt::loglik(two, Eigen::MatrixXd::Identity(1, 1)) ==
          doctest::Approx(-std::log(2.0) - 0.5).epsilon(1e-12));
}

TEST_CASE("loglik: Sigma = S is the unrestricted maximum") {
    std::mt19937_64 rng(43);
    const Eigen::MatrixXd s = testing::random_spd(4, rng);
    const double best = mlt::loglik(mlt::CovarianceMatrix(s), s);
    CHECK(best == doctest::Approx(-std::log(s.determinant()) - 4).epsilon(1e-9));
    for (int rep = 0; rep < 50; ++rep) {
        const Eigen::MatrixXd other = testing::random_spd(4, rng);
        CHECK(mlt::loglik(mlt::CovarianceMatrix(other), s) <= best + 1e-9);
    }
}

TEST_CASE("loglik_with_mean") {
    std::mt19937_64 rng(47);
    const Eigen::MatrixXd x = testing::random_data(10, 3, rng);
    const auto stats = mlt::sample_stats(x);
    const mlt::CovarianceMatrix eye{Eigen::MatrixXd::Identity(3, 3)};
    const double base = mlt::loglik(eye, stats.cov_centered);
    CHECK(mlt::loglik_with_mean(stats.mean, eye, stats) ==
          doctest::Approx(base).epsilon(1e-12));
    Eigen::VectorXd shifted = stats.mean;
    shifted(0) += 1.0;
    CHECK(mlt::loglik_with_mean(shifted, eye, stats) ==
          doctest::Approx(base - 1.0).epsilon(1e-12));

    // p=1, Sigma=1, X-bar=0, mu=2, S=1 -> -1 - 4
    Eigen::MatrixXd x1(2, 1);
    x1 << 1.0, -1.0;
    const auto st1 = mlt::sample_stats(x1);
    const mlt::CovarianceMatrix one{Eigen::MatrixXd::Identity(1, 1)};
    Eigen::VectorXd mu(1);
    mu << 2.0;
    CHECK(mlt::loglik_with_mean(mu, one, st1) ==
          doctest::Approx(-1.0 - 4.0).epsilon(1e-12));
}

TEST_CASE("sample_stats") {
    Eigen::MatrixXd one_row(1, 2);
    one_row << 1.0, 1.0;
    const auto st = mlt::sample_stats(one_row, true);
    CHECK(st.cov_zero_mean(0, 0) == doctest::Approx(1.0));
    CHECK(st.cov_zero_mean(0, 1) == doctest::Approx(1.0));
    CHECK(st.cov_zero_mean(1, 1) == doctest::Approx(1.0));
    CHECK(st.zero_mean);

    Eigen::MatrixXd twice(2, 2);
    twice << 3.0, -1.0, 3.0, -1.0;
    CHECK(mlt::sample_stats(twice).cov_centered.cwiseAbs().maxCoeff() < 1e-14);

    std::mt19937_64 rng(53);
    const Eigen::MatrixXd x = testing::random_data(8, 3, rng);
    const auto stats = mlt::sample_stats(x);
    const Eigen::MatrixXd recon =
        stats.cov_centered + stats.mean * stats.mean.transpose();
    CHECK((recon - stats.cov_zero_mean).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("profile_omega_blocks") {
    std::mt19937_64 rng(59);
    const MixedGraph g(3, {}, {{1, 2}});
    const Eigen::MatrixXd s0 = testing::random_spd(3, rng);
    const mlt::EdgeWeights zero(g, {});
    const auto blocks = mlt::profile_omega_blocks(g, zero, s0);
    REQUIRE(blocks.size() == 2);
    CHECK((blocks[0] - s0.topLeftCorner(2, 2)).cwiseAbs().maxCoeff() < 1e-12);
    CHECK(blocks[1](0, 0) == doctest::Approx(s0(2, 2)));

    const MixedGraph chain(2, {{1, 2}}, {});
    Eigen::MatrixXd s(2, 2);
    s << 1.0, 1.0, 1.0, 2.0;
    for (double l : {-0.5, 0.0, 0.3, 1.0}) {
        const mlt::EdgeWeights lam(chain, {{{1, 2}, l}});
        const auto b = mlt::profile_omega_blocks(chain, lam, s);
        CHECK(b[1](0, 0) == doctest::Approx(2.0 - 2.0 * l + l * l).epsilon(1e-12));
    }

    // non-clique component refused
    const MixedGraph path(3, {}, {{1, 2}, {2, 3}});
    CHECK_THROWS_AS(
        mlt::profile_omega_blocks(path, mlt::EdgeWeights(path, {}), s0),
        mlt::model_error);
}

TEST_CASE("profile_loglik") {
    const MixedGraph g(3, {{1, 2}}, {});
    CHECK(mlt::profile_loglik(g, mlt::EdgeWeights(g, {}),
                              Eigen::MatrixXd::Identity(3, 3)) ==
          doctest::Approx(-3.0).epsilon(1e-12));

    // equals the per-node regression decomposition on a DAG
    std::mt19937_64 rng(61);
    const MixedGraph dag = mlt::make_graph("fig1a", 6);
    const Eigen::MatrixXd s0 = testing::random_spd(6, rng);
    const auto lam = testing::random_weights(dag, rng);
    const auto blocks = mlt::profile_omega_blocks(dag, lam, s0);
    double expect = -6.0;
    for (const auto& b : blocks) expect -= std::log(b(0, 0));
    // log det(I - Lambda)^2 = 0 on a DAG (unit triangular)
    CHECK(mlt::profile_loglik(dag, lam, s0) ==
          doctest::Approx(expect).epsilon(1e-10));
}

TEST_CASE("profile_loglik agrees with the explicit likelihood at Omega-hat") {
    std::mt19937_64 rng(67);
    for (int rep = 0; rep < 20; ++rep) {
        MixedGraph g = testing::random_mixed_graph(5, rng, 0.3, 0.3);
        g = mlt::saturate(g);
        const Eigen::MatrixXd s0 = testing::random_spd(5, rng);
        const auto lam = testing::random_weights(g, rng);
        const auto blocks = mlt::profile_omega_blocks(g, lam, s0);
        const auto dec = mlt::bidirected_components(g);
        Eigen::VectorXd diag(5);
        std::map<Edge, double> off;
        for (std::size_t j = 0; j < dec.size(); ++j) {
            const auto& comp = dec.components[j];
            for (std::size_t a = 0; a < comp.size(); ++a) {
                diag(comp[a] - 1) = blocks[j](a, a);
                for (std::size_t b = a + 1; b < comp.size(); ++b) {
                    off[{comp[a], comp[b]}] = blocks[j](a, b);
                }
            }
        }
        const mlt::NoiseCovariance om(g, diag, off);
        const double direct =
            mlt::loglik(mlt::covariance_from_params(lam, om), s0);
        CHECK(mlt::profile_loglik(g, lam, s0) ==
              doctest::Approx(direct).epsilon(1e-9));
    }
}

TEST_CASE("profile optimality: perturbing a block never helps") {
    std::mt19937_64 rng(71);
    for (int rep = 0; rep < 10; ++rep) {
        MixedGraph g = mlt::saturate(testing::random_mixed_graph(4, rng, 0.2, 0.4));
        const Eigen::MatrixXd s0 = testing::random_spd(4, rng);
        const auto lam = testing::random_weights(g, rng);
        const auto blocks = mlt::profile_omega_blocks(g, lam, s0);
        const auto dec = mlt::bidirected_components(g);
        const double best = mlt::profile_loglik(g, lam, s0);
        for (int trial = 0; trial < 5; ++trial) {
            Eigen::VectorXd diag(4);
            std::map<Edge, double> off;
            for (std::size_t j = 0; j < dec.size(); ++j) {
                const auto& comp = dec.components[j];
                const int m = static_cast<int>(comp.size());
                Eigen::MatrixXd pert =
                    blocks[j] + 0.1 * testing::random_spd(m, rng);
                for (int a = 0; a < m; ++a) {
                    diag(comp[a] - 1) = pert(a, a);
                    for (int b = a + 1; b < m; ++b) {
                        off[{comp[a], comp[b]}] = pert(a, b);
                    }
                }
            }
            const mlt::NoiseCovariance om(g, diag, off);
            const double val =
                mlt::loglik(mlt::covariance_from_params(lam, om), s0);
            CHECK(val <= best + 1e-9);
        }
    }
}

TEST_CASE("likelihood_upper_bound") {
    const MixedGraph g(2, {}, {{1, 2}});
    CHECK(mlt::likelihood_upper_bound(g, Eigen::MatrixXd::Identity(2, 2)) ==
          doctest::Approx(-2.0).epsilon(1e-12));
    Eigen::MatrixXd diag14 = Eigen::MatrixXd::Zero(2, 2);
    diag14(0, 0) = 1.0;
    diag14(1, 1) = 4.0;
    CHECK(mlt::likelihood_upper_bound(g, diag14) ==
          doctest::Approx(-2.0).epsilon(1e-12));

    // rank-deficient S0: below-threshold marker
    Eigen::MatrixXd sing(2, 2);
    sing << 1.0, 1.0, 1.0, 1.0;
    CHECK(std::isinf(mlt::likelihood_upper_bound(g, sing)));
}

TEST_CASE("bound dominance: profile_loglik below the upper bound") {
    std::mt19937_64 rng(73);
    for (int rep = 0; rep < 200; ++rep) {
        MixedGraph g = mlt::saturate(testing::random_mixed_graph(5, rng, 0.3, 0.3));
        const Eigen::MatrixXd s0 = testing::random_spd(5, rng);
        const auto lam = testing::random_weights(g, rng);
        CHECK(mlt::profile_loglik(g, lam, s0) <=
              mlt::likelihood_upper_bound(g, s0) + 1e-9);
    }
}

TEST_CASE("block Hadamard inequality") {
    std::mt19937_64 rng(79);
    std::uniform_int_distribution<int> cut(1, 4);
    for (int rep = 0; rep < 1000; ++rep) {
        const int p = 5;
        // random regular Lambda on a random digraph
        const MixedGraph g = testing::random_mixed_graph(p, rng, 0.4, 0.0);
        const auto lam = testing::random_weights(g, rng);
        const Eigen::MatrixXd a =
            Eigen::MatrixXd::Identity(p, p) - lam.matrix();
        const Eigen::MatrixXd m = a.transpose() * a;
        // random partition into two intervals of a random shuffle
        std::vector<int> idx{1, 2, 3, 4, 5};
        std::shuffle(idx.begin(), idx.end(), rng);
        const int k = cut(rng);
        const std::vector<int> left(idx.begin(), idx.begin() + k);
        const std::vector<int> right(idx.begin() + k, idx.end());
        double rhs = std::log(mlt::submatrix(m, left).determinant());
        if (!right.empty()) {
            rhs += std::log(mlt::submatrix(m, right).determinant());
        }
        const double lhs = 2.0 * std::log(std::abs(a.determinant()));
        CHECK(lhs <= rhs + 1e-9);
    }
}

TEST_CASE("concentration") {
    std::mt19937_64 rng(83);
    const MixedGraph g(3, {{1, 2}}, {{2, 3}});
    const auto lam = testing::random_weights(g, rng);
    const auto om = testing::random_noise(g, rng);
    SUBCASE("inverse of the covariance") {
        const auto sig = mlt::covariance_from_params(lam, om);
        const Eigen::MatrixXd prod =
            mlt::concentration(lam, om) * sig.matrix();
        CHECK((prod - Eigen::MatrixXd::Identity(3, 3)).cwiseAbs().maxCoeff() <
              1e-9);
    }
    SUBCASE("Lambda = 0 gives the inverse of Omega") {
        const mlt::EdgeWeights zero(g, {});
        const Eigen::MatrixXd k = mlt::concentration(zero, om);
        const Eigen::MatrixXd prod = k * om.matrix();
        CHECK((prod - Eigen::MatrixXd::Identity(3, 3)).cwiseAbs().maxCoeff() <
              1e-9);
    }
}

namespace {

// closed-form concentration of the directed p-cycle with diagonal Omega
Eigen::MatrixXd cycle_concentration(const std::vector<double>& lam,
                                    const std::vector<double>& om) {
    const int p = static_cast<int>(lam.size());
    Eigen::MatrixXd k = Eigen::MatrixXd::Zero(p, p);
    auto nxt = [&](int i) { return (i + 1) % p; };
    for (int i = 0; i < p; ++i) {
        k(i, i) = 1.0 / om[i] + lam[i] * lam[i] / om[nxt(i)];
        k(i, nxt(i)) -= lam[i] / om[nxt(i)];
        k(nxt(i), i) -= lam[i] / om[nxt(i)];
    }
    return k;
}

}  // namespace

TEST_CASE("concentration: directed cycle closed form and zero pattern") {
    std::mt19937_64 rng(89);
    std::uniform_real_distribution<double> lam_dist(-0.8, 0.8);
    std::uniform_real_distribution<double> om_dist(0.5, 2.0);
    for (int p = 4; p <= 8; ++p) {
        const MixedGraph g = mlt::make_graph("directed-cycle", p);
        for (int rep = 0; rep < 20; ++rep) {
            std::vector<double> lv(p), ov(p);
            std::map<Edge, double> lam_map;
            Eigen::VectorXd diag(p);
            for (int i = 0; i < p; ++i) {
                lv[i] = lam_dist(rng);
                ov[i] = om_dist(rng);
                diag(i) = ov[i];
            }
            for (int i = 1; i < p; ++i) lam_map[{i, i + 1}] = lv[i - 1];
            lam_map[{p, 1}] = lv[p - 1];
            const mlt::EdgeWeights lam(g, lam_map);
            if (!lam.is_regular()) continue;
            const mlt::NoiseCovariance om(g, diag, {});
            const Eigen::MatrixXd k = mlt::concentration(lam, om);
            const Eigen::MatrixXd ref = cycle_concentration(lv, ov);
            CHECK((k - ref).cwiseAbs().maxCoeff() < 1e-10);
            // exact zero pattern away from the cyclic tridiagonal band
            for (int i = 0; i < p; ++i) {
                for (int j = 0; j < p; ++j) {
                    const int d = std::abs(i - j);
                    if (d >= 2 && d != p - 1) CHECK(std::abs(k(i, j)) < 1e-10);
                }
            }
        }
    }
}

TEST_CASE("concentration: C4 at lambda=1/2, omega=1") {
    const MixedGraph g = mlt::make_graph("directed-cycle", 4);
    const mlt::EdgeWeights lam(
        g, {{{1, 2}, 0.5}, {{2, 3}, 0.5}, {{3, 4}, 0.5}, {{4, 1}, 0.5}});
    const mlt::NoiseCovariance om(g, Eigen::VectorXd::Ones(4), {});
    const Eigen::MatrixXd k = mlt::concentration(lam, om);
    for (int i = 0; i < 4; ++i) {
        CHECK(k(i, i) == doctest::Approx(1.25).epsilon(1e-12));
        CHECK(k(i, (i + 1) % 4) == doctest::Approx(-0.5).epsilon(1e-12));
    }
    CHECK(std::abs(k(0, 2)) < 1e-12);
    CHECK(std::abs(k(1, 3)) < 1e-12);
}

TEST_CASE("concentration: sign flip of lambda_12 moves only two entries") {
    std::mt19937_64 rng(97);
    const MixedGraph g = mlt::make_graph("directed-cycle", 5);
    for (int rep = 0; rep < 20; ++rep) {
        const auto lam = testing::random_weights(g, rng, 0.6);
        const auto om = testing::random_noise(g, rng);
        std::map<Edge, double> flipped = lam.values();
        flipped[{1, 2}] = -flipped[{1, 2}];
        const mlt::EdgeWeights lam2(g, flipped);
        const Eigen::MatrixXd k1 = mlt::concentration(lam, om);
        const Eigen::MatrixXd k2 = mlt::concentration(lam2, om);
        for (int i = 0; i < 5; ++i) {
            for (int j = 0; j < 5; ++j) {
                const bool is12 = (i == 0 && j == 1) || (i == 1 && j == 0);
                if (is12) {
                    CHECK(std::abs(k1(i, j) + k2(i, j)) < 1e-12);  // negated
                } else {
                    CHECK(std::abs(k1(i, j) - k2(i, j)) < 1e-12);
                }
            }
        }
    }
}

TEST_CASE("CovarianceMatrix validates") {
    Eigen::MatrixXd notpd(2, 2);
    notpd << 1.0, 2.0, 2.0, 1.0;
    CHECK_THROWS_AS(mlt::CovarianceMatrix{notpd}, mlt::definiteness_error);
    Eigen::MatrixXd asym(2, 2);
    asym << 1.0, 0.5, 0.2, 1.0;
    CHECK_THROWS_AS(mlt::CovarianceMatrix{asym}, mlt::model_error);
}
