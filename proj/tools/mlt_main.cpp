#include <cstdio>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "mlt/experiment.hpp"
#include "mlt/fit.hpp"
#include "mlt/graph.hpp"
#include "mlt/io.hpp"
#include "mlt/model.hpp"
#include "mlt/witness.hpp"

namespace {

constexpr const char* kVersion = "mlt 0.1.0";

std::vector<double> parse_double_list(const std::string& text) {
    std::vector<double> out;
    if (text.find(':') != std::string::npos) {
        // start:end:step range
        double start = 0, end = 0, step = 0;
        char c1 = 0, c2 = 0;
        std::istringstream in(text);
        if (!(in >> start >> c1 >> end >> c2 >> step) || c1 != ':' || c2 != ':' ||
            step <= 0) {
            throw mlt::io_error("invalid range '" + text + "' (want start:end:step)");
        }
        for (double v = start; v <= end + 1e-12; v += step) {
            out.push_back(std::abs(v) < 1e-12 ? 0.0 : v);
        }
        return out;
    }
    std::istringstream in(text);
    std::string cell;
    while (std::getline(in, cell, ',')) {
        try {
            out.push_back(std::stod(cell));
        } catch (const std::exception&) {
            throw mlt::io_error("invalid number '" + cell + "' in list");
        }
    }
    if (out.empty()) throw mlt::io_error("empty list '" + text + "'");
    return out;
}

std::vector<int> parse_int_list(const std::string& text) {
    std::vector<int> out;
    for (double v : parse_double_list(text)) out.push_back(static_cast<int>(v));
    return out;
}

void emit(const nlohmann::json& j) { std::cout << j.dump(2) << "\n"; }

std::string join(const std::vector<int>& v) {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) s += ",";
        s += std::to_string(v[i]);
    }
    return s;
}

int run_threshold(const std::string& path, bool json) {
    const mlt::MixedGraph g = mlt::parse_graph(mlt::read_file(path));
    const mlt::MltReport rep = mlt::mlt_zero_mean(g);
    if (json) {
        emit(mlt::mlt_report_to_json(rep));
        return 0;
    }
    std::cout << "threshold_zero_mean    " << rep.threshold_zero_mean << "\n";
    std::cout << "threshold_unknown_mean " << rep.threshold_unknown_mean << "\n";
    std::cout << "achieving_component    " << rep.achieving_component + 1 << "\n";
    for (std::size_t j = 0; j < rep.decomposition.size(); ++j) {
        std::cout << "C" << j + 1 << " = {" << join(rep.decomposition.components[j])
                  << "}  Pa = {" << join(rep.decomposition.parent_closures[j])
                  << "}\n";
    }
    return 0;
}

int run_witness(const std::string& graph_path, const std::string& data_path,
                const std::string& t_grid_text, bool json) {
    const mlt::MixedGraph g = mlt::parse_graph(mlt::read_file(graph_path));
    const mlt::SampleStats stats =
        mlt::sample_stats(mlt::read_csv_file(data_path), /*zero_mean=*/true);
    const mlt::DivergenceWitness w = mlt::build_divergence_witness(g, stats);
    const std::vector<double> grid = parse_double_list(t_grid_text);
    const mlt::WitnessReport rep = mlt::verify_witness(w, g, stats, grid);

    nlohmann::json j;
    j["witness"] = mlt::witness_to_json(w);
    j["verification"] = mlt::witness_report_to_json(rep);
    if (json) {
        emit(j);
    } else {
        std::cout << "component " << w.component_index + 1 << ", support size "
                  << w.support.size() << ", slope " << w.slope << "\n";
        std::cout << "verification " << (rep.all_pass() ? "PASS" : "FAIL") << "\n";
    }
    return rep.all_pass() ? 0 : 1;
}

int run_fit(const std::string& graph_path, const std::string& data_path,
            bool zero_mean, int restarts, std::uint64_t seed, bool json) {
    const mlt::MixedGraph g = mlt::parse_graph(mlt::read_file(graph_path));
    const mlt::SampleStats stats =
        mlt::sample_stats(mlt::read_csv_file(data_path), zero_mean);
    const Eigen::MatrixXd& s = zero_mean ? stats.cov_zero_mean : stats.cov_centered;
    mlt::FitOptions opts;
    opts.restarts = restarts;
    opts.seed = seed;
    const mlt::FitResult fit = mlt::fit_mle(g, s, opts);
    nlohmann::json j = mlt::fit_result_to_json(fit);
    j["upper_bound"] = mlt::likelihood_upper_bound(g, s);
    if (json) {
        emit(j);
    } else {
        std::cout << "loglik      " << fit.loglik_value << "\n"
                  << "upper_bound " << j["upper_bound"].get<double>() << "\n"
                  << "converged   " << (fit.converged ? "yes" : "no") << "\n"
                  << "iterations  " << fit.iterations << "\n";
    }
    return 0;
}

int run_lrt(const std::string& full_path, const std::string& null_path,
            const std::string& data_path, int restarts, std::uint64_t seed,
            bool json) {
    const mlt::MixedGraph g_full = mlt::parse_graph(mlt::read_file(full_path));
    const mlt::MixedGraph g_null = mlt::parse_graph(mlt::read_file(null_path));
    const mlt::SampleStats stats = mlt::sample_stats(mlt::read_csv_file(data_path));
    mlt::FitOptions opts;
    opts.restarts = restarts;
    opts.seed = seed;
    const mlt::LrtResult res = mlt::lrt(g_full, g_null, stats, opts);
    if (json) {
        emit(mlt::lrt_result_to_json(res));
    } else {
        std::cout << "stat    " << res.stat << "\n"
                  << "df      " << res.df << "\n"
                  << "p_value " << res.p_value << "\n";
    }
    return 0;
}

int run_probe(const std::string& graph_path, int n, int reps, std::uint64_t seed,
              bool json) {
    const mlt::MixedGraph g = mlt::parse_graph(mlt::read_file(graph_path));
    const mlt::ProbeReport rep = mlt::boundedness_probe(g, n, reps, seed);
    if (json) {
        emit(mlt::probe_report_to_json(rep));
    } else {
        std::cout << "threshold " << rep.threshold << ", n " << rep.n << ", mode "
                  << (rep.n < rep.threshold ? "witness" : "fit") << "\n"
                  << "passes " << rep.passes << "/" << rep.replicates << "\n";
    }
    return 0;
}

int run_power(int p, const std::string& n_text, const std::string& grid_text,
              int reps, double alpha, std::uint64_t seed, int restarts,
              const std::string& out_path, const std::string& svg_path,
              bool json) {
    mlt::ExperimentConfig cfg;
    cfg.p = p;
    cfg.n_values = parse_int_list(n_text);
    cfg.lambda12_grid = parse_double_list(grid_text);
    cfg.replicates = reps;
    cfg.alpha = alpha;
    cfg.seed = seed;
    cfg.restarts = restarts;
    const mlt::PowerTable table = mlt::power_experiment(cfg);
    const std::string csv = mlt::power_table_csv(table);
    if (!out_path.empty()) mlt::write_file(out_path, csv);
    if (!svg_path.empty()) mlt::write_file(svg_path, mlt::power_table_svg(table));
    if (json) {
        emit(mlt::power_table_to_json(table));
    } else if (out_path.empty()) {
        std::cout << csv;
    }
    return 0;
}

int run_generate(const std::string& kind, int p, const std::string& out_path) {
    const mlt::MixedGraph g = mlt::make_graph(kind, p);
    const std::string text = mlt::serialize_graph(g);
    if (out_path.empty()) std::cout << text;
    else mlt::write_file(out_path, text);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"maximum likelihood thresholds, divergence certificates, and "
                 "likelihood fits for mixed-graph Gaussian models"};
    app.set_version_flag("--version", kVersion);
    app.require_subcommand(1);

    std::string graph_path, null_path, data_path, out_path, svg_path;
    std::string t_grid_text = "0,1,1e3,1e6";
    std::string n_text = "15,20,25";
    std::string grid_text = "-1:1:0.25";
    std::string kind;
    bool json = false, zero_mean = false;
    int restarts = 5, reps = 100, n = 0, p = 20;
    double alpha = 0.05;
    std::uint64_t seed = 0;

    auto* threshold = app.add_subcommand("threshold", "maximum likelihood threshold");
    threshold->add_option("file", graph_path, "graph file")->required();
    threshold->add_flag("--json", json);

    auto* witness = app.add_subcommand("witness", "divergence certificate below the threshold");
    witness->add_option("file", graph_path, "graph file")->required();
    witness->add_option("--data", data_path, "data csv")->required();
    witness->add_option("--t-grid", t_grid_text, "verification grid");
    witness->add_flag("--json", json);

    auto* fit = app.add_subcommand("fit", "maximum likelihood fit");
    fit->add_option("file", graph_path, "graph file")->required();
    fit->add_option("--data", data_path, "data csv")->required();
    fit->add_flag("--zero-mean", zero_mean, "use the zero-mean covariance");
    fit->add_option("--restarts", restarts);
    fit->add_option("--seed", seed);
    fit->add_flag("--json", json);

    auto* lrt_cmd = app.add_subcommand("lrt", "likelihood ratio test of nested graphs");
    lrt_cmd->add_option("full", graph_path, "full graph file")->required();
    lrt_cmd->add_option("null", null_path, "null graph file")->required();
    lrt_cmd->add_option("--data", data_path, "data csv")->required();
    lrt_cmd->add_option("--restarts", restarts);
    lrt_cmd->add_option("--seed", seed);
    lrt_cmd->add_flag("--json", json);

    auto* probe = app.add_subcommand("probe", "boundedness probe over random data");
    probe->add_option("file", graph_path, "graph file")->required();
    probe->add_option("--n", n, "sample size")->required();
    probe->add_option("--reps", reps, "replicates");
    probe->add_option("--seed", seed);
    probe->add_flag("--json", json);

    auto* power = app.add_subcommand("power", "Monte Carlo size/power of the LRT");
    power->add_option("--p", p, "graph size (even)");
    power->add_option("--n", n_text, "sample sizes, comma list");
    power->add_option("--grid", grid_text, "lambda12 grid (list or start:end:step)");
    power->add_option("--reps", reps, "replicates");
    power->add_option("--alpha", alpha, "nominal level");
    power->add_option("--seed", seed);
    power->add_option("--restarts", restarts);
    power->add_option("--out", out_path, "csv output path");
    power->add_option("--svg", svg_path, "svg plot path");
    power->add_flag("--json", json);

    auto* generate = app.add_subcommand("generate", "write a built-in graph family");
    generate->add_option("--kind", kind, "experiment | directed-cycle | "
                         "bidirected-path | bidirected-complete | fig1a | fig1b")
        ->required();
    int gen_p = 0;  // 0 lets fixed-size families (fig1a/fig1b) pick their own p
    generate->add_option("--p", gen_p, "graph size");
    generate->add_option("-o,--out", out_path, "output path");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (threshold->parsed()) return run_threshold(graph_path, json);
        if (witness->parsed()) return run_witness(graph_path, data_path, t_grid_text, json);
        if (fit->parsed())
            return run_fit(graph_path, data_path, zero_mean, restarts, seed, json);
        if (lrt_cmd->parsed())
            return run_lrt(graph_path, null_path, data_path, restarts, seed, json);
        if (probe->parsed()) return run_probe(graph_path, n, reps, seed, json);
        if (power->parsed())
            return run_power(p, n_text, grid_text, reps, alpha, seed, restarts,
                             out_path, svg_path, json);
        if (generate->parsed()) return run_generate(kind, gen_p, out_path);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 2;
}
