#include "mlt/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <sstream>
#include <thread>

#include "mlt/witness.hpp"

namespace mlt {

namespace {

std::uint64_t splitmix64(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

template <typename F>
void parallel_for(int count, F&& fn) {
    const int threads = std::min(thread_count(), count);
    if (threads <= 1) {
        for (int i = 0; i < count; ++i) fn(i);
        return;
    }
    std::atomic<int> next{0};
    std::vector<std::thread> pool;
    pool.reserve(threads);
    for (int t = 0; t < threads; ++t) {
        pool.emplace_back([&] {
            for (int i = next.fetch_add(1); i < count; i = next.fetch_add(1)) {
                fn(i);
            }
        });
    }
    for (auto& th : pool) th.join();
}

std::string format_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.10g", v);
    return buf;
}

}  // namespace

int thread_count() {
    if (const char* env = std::getenv("MLT_THREADS")) {
        const int v = std::atoi(env);
        if (v >= 1) return v;
    }
    const unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : static_cast<int>(hw);
}

std::mt19937_64 derive_stream(std::uint64_t seed, std::uint64_t a,
                              std::uint64_t b, std::uint64_t c) {
    std::uint64_t s = splitmix64(seed);
    s = splitmix64(s ^ splitmix64(a + 0x100));
    s = splitmix64(s ^ splitmix64(b + 0x10000));
    s = splitmix64(s ^ splitmix64(c + 0x1000000));
    return std::mt19937_64(s);
}

Eigen::MatrixXd sample_gaussian(const CovarianceMatrix& sigma, int n,
                                std::mt19937_64& rng) {
    if (n < 1) throw model_error("sample_gaussian: n must be positive");
    const int p = sigma.p();
    Eigen::LLT<Eigen::MatrixXd> llt(sigma.matrix());
    if (llt.info() != Eigen::Success) {
        throw definiteness_error("sample_gaussian: sigma is not positive definite");
    }
    const Eigen::MatrixXd l = llt.matrixL();
    std::normal_distribution<double> normal(0.0, 1.0);
    Eigen::MatrixXd z(n, p);
    for (int s = 0; s < n; ++s) {
        for (int i = 0; i < p; ++i) z(s, i) = normal(rng);
    }
    return z * l.transpose();
}

ProbeReport boundedness_probe(const MixedGraph& g, int n, int replicates,
                              std::uint64_t seed) {
    ProbeReport report;
    report.n = n;
    report.threshold = mlt_zero_mean(g).threshold_zero_mean;
    report.replicates = replicates;
    report.entries.resize(replicates);

    const CovarianceMatrix identity{
        Eigen::MatrixXd::Identity(g.p(), g.p())};
    const std::vector<double> grid{0.0, 1.0, 10.0, 1e3, 1e6};

    parallel_for(replicates, [&](int r) {
        ProbeReplicate& entry = report.entries[r];
        entry.below_threshold = n < report.threshold;
        try {
            std::mt19937_64 rng = derive_stream(seed, static_cast<std::uint64_t>(r));
            const Eigen::MatrixXd data = sample_gaussian(identity, n, rng);
            const SampleStats stats = sample_stats(data, /*zero_mean=*/true);
            if (entry.below_threshold) {
                const DivergenceWitness w = build_divergence_witness(g, stats);
                entry.witness_found = true;
                const WitnessReport rep = verify_witness(w, g, stats, grid);
                entry.witness_verified = rep.all_pass();
                entry.divergence_gain =
                    loglik_along_path(w, 1e6) - loglik_along_path(w, 0.0);
            } else {
                FitOptions opts;
                opts.restarts = 3;
                opts.seed = seed ^ static_cast<std::uint64_t>(r);
                const FitResult fit = fit_mle(g, stats.cov_zero_mean, opts);
                entry.fit_converged = fit.converged;
                entry.loglik_value = fit.loglik_value;
                entry.upper_bound = likelihood_upper_bound(g, stats.cov_zero_mean);
                entry.bounded_ok = fit.loglik_value <= entry.upper_bound + 1e-6;
            }
        } catch (const std::exception& e) {
            entry.error = e.what();
        }
    });

    for (const auto& entry : report.entries) {
        const bool pass = entry.error.empty() &&
                          (entry.below_threshold
                               ? entry.witness_found && entry.witness_verified &&
                                     entry.divergence_gain > 0.0
                               : entry.bounded_ok);
        if (pass) ++report.passes;
    }
    return report;
}

PowerTable power_experiment(const ExperimentConfig& cfg) {
    if (cfg.replicates < 1) throw model_error("power_experiment: replicates >= 1");
    if (cfg.alpha <= 0.0 || cfg.alpha >= 1.0) {
        throw model_error("power_experiment: alpha must be in (0,1)");
    }
    const MixedGraph g_full = make_graph("experiment", cfg.p);
    std::vector<Edge> null_edges;
    for (const auto& e : g_full.directed()) {
        if (e != Edge{1, 2}) null_edges.push_back(e);
    }
    const MixedGraph g_null(cfg.p, std::move(null_edges), {});

    const MltReport rep = mlt_zero_mean(g_full);
    for (int n : cfg.n_values) {
        if (n < rep.threshold_zero_mean) {
            throw model_error("power_experiment: n = " + std::to_string(n) +
                              " is below the threshold " +
                              std::to_string(rep.threshold_zero_mean));
        }
    }
    const double reject_above = chi_square_quantile(1.0 - cfg.alpha, 1);

    PowerTable table;
    table.config = cfg;

    for (std::size_t ni = 0; ni < cfg.n_values.size(); ++ni) {
        for (std::size_t li = 0; li < cfg.lambda12_grid.size(); ++li) {
            const int n = cfg.n_values[ni];
            const double lambda12 = cfg.lambda12_grid[li];

            std::map<Edge, double> truth;
            for (const auto& e : g_full.directed()) {
                truth[e] = (e == Edge{1, 2}) ? lambda12 : cfg.other_coeff;
            }
            const EdgeWeights lam_true =
                EdgeWeights::regular(g_full, std::move(truth));
            const NoiseCovariance om_true(
                g_full, Eigen::VectorXd::Ones(cfg.p), {});
            const CovarianceMatrix sigma_true =
                covariance_from_params(lam_true, om_true);

            std::vector<int> outcome(cfg.replicates, 0);  // 1 reject, 0 accept, -1 failed
            parallel_for(cfg.replicates, [&](int r) {
                try {
                    std::mt19937_64 rng =
                        derive_stream(cfg.seed, ni, li, static_cast<std::uint64_t>(r));
                    const Eigen::MatrixXd data = sample_gaussian(sigma_true, n, rng);
                    const SampleStats stats =
                        sample_stats(data, /*zero_mean=*/true);
                    FitOptions opts;
                    opts.restarts = cfg.restarts;
                    // Tight tolerance: the statistic is a difference of two
                    // maximized likelihoods scaled by n, so sloppy stops on
                    // either side bias the test.
                    opts.tol = 1e-9;
                    opts.seed = rng();
                    const LrtResult res = lrt(g_full, g_null, stats, opts);
                    if (!res.fit_full.converged || !res.fit_null.converged) {
                        outcome[r] = -1;
                    } else {
                        outcome[r] = res.stat > reject_above ? 1 : 0;
                    }
                } catch (const std::exception&) {
                    outcome[r] = -1;
                }
            });

            PowerRow row;
            row.n = n;
            row.lambda12 = lambda12;
            row.replicates = cfg.replicates;
            for (int v : outcome) {
                if (v < 0) ++row.failed;
                else if (v == 1) ++row.rejections;
            }
            const int used = cfg.replicates - row.failed;
            row.rate = used > 0 ? static_cast<double>(row.rejections) / used : 0.0;
            row.se = used > 0 ? std::sqrt(row.rate * (1.0 - row.rate) / used) : 0.0;
            row.valid = row.failed <= 0.05 * cfg.replicates;
            table.rows.push_back(row);
        }
    }
    return table;
}

std::string power_table_csv(const PowerTable& table) {
    std::ostringstream out;
    out << "n,lambda12,rejections,replicates,rate,se,failed\n";
    for (const auto& r : table.rows) {
        out << r.n << ',' << format_double(r.lambda12) << ',' << r.rejections << ','
            << r.replicates << ',' << format_double(r.rate) << ','
            << format_double(r.se) << ',' << r.failed << '\n';
    }
    return out.str();
}

std::string power_table_svg(const PowerTable& table) {
    const int width = 640, height = 420;
    const double ml = 60, mr = 20, mt = 30, mb = 50;
    double xmin = -1.0, xmax = 1.0;
    for (const auto& r : table.rows) {
        xmin = std::min(xmin, r.lambda12);
        xmax = std::max(xmax, r.lambda12);
    }
    auto sx = [&](double x) {
        return ml + (x - xmin) / (xmax - xmin) * (width - ml - mr);
    };
    auto sy = [&](double y) { return height - mb - y * (height - mt - mb); };

    const char* colors[] = {"#1b6ca8", "#c1403d", "#3d8a41", "#8a5ca8", "#a87f1b"};
    std::ostringstream out;
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width
        << "\" height=\"" << height << "\">\n"
        << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    // axes
    out << "<line x1=\"" << sx(xmin) << "\" y1=\"" << sy(0) << "\" x2=\""
        << sx(xmax) << "\" y2=\"" << sy(0) << "\" stroke=\"black\"/>\n"
        << "<line x1=\"" << sx(xmin) << "\" y1=\"" << sy(0) << "\" x2=\""
        << sx(xmin) << "\" y2=\"" << sy(1) << "\" stroke=\"black\"/>\n";
    for (double y : {0.0, 0.25, 0.5, 0.75, 1.0}) {
        out << "<text x=\"" << ml - 8 << "\" y=\"" << sy(y) + 4
            << "\" text-anchor=\"end\" font-size=\"12\">" << format_double(y)
            << "</text>\n";
    }
    out << "<text x=\"" << (width / 2) << "\" y=\"" << height - 12
        << "\" text-anchor=\"middle\" font-size=\"13\">lambda12</text>\n"
        << "<text x=\"" << (width / 2) << "\" y=\"18\" text-anchor=\"middle\" "
           "font-size=\"13\">rejection rate (alpha="
        << format_double(table.config.alpha) << ")</text>\n";

    int color_idx = 0;
    for (std::size_t ni = 0; ni < table.config.n_values.size(); ++ni) {
        const int n = table.config.n_values[ni];
        std::vector<std::pair<double, double>> pts;
        for (const auto& r : table.rows) {
            if (r.n == n) pts.push_back({r.lambda12, r.rate});
        }
        std::sort(pts.begin(), pts.end());
        const char* color = colors[color_idx % 5];
        out << "<polyline fill=\"none\" stroke=\"" << color
            << "\" stroke-width=\"2\" points=\"";
        for (const auto& [x, y] : pts) out << sx(x) << ',' << sy(y) << ' ';
        out << "\"/>\n";
        out << "<text x=\"" << width - mr - 4 << "\" y=\"" << mt + 16 * (color_idx + 1)
            << "\" text-anchor=\"end\" font-size=\"12\" fill=\"" << color
            << "\">n=" << n << "</text>\n";
        ++color_idx;
    }
    out << "</svg>\n";
    return out.str();
}

}  // namespace mlt
