#include "mlt/io.hpp"

#include <cctype>
#include <fstream>
#include <sstream>

namespace mlt {

Eigen::MatrixXd read_csv_matrix(const std::string& text) {
    std::vector<std::vector<double>> rows;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        while (!line.empty() && (line.back() == '\r' || line.back() == ' ')) {
            line.pop_back();
        }
        if (line.empty()) continue;
        std::vector<double> row;
        std::istringstream ls(line);
        std::string cell;
        while (std::getline(ls, cell, ',')) {
            try {
                std::size_t used = 0;
                const double v = std::stod(cell, &used);
                while (used < cell.size() && std::isspace(static_cast<unsigned char>(cell[used]))) ++used;
                if (used != cell.size()) throw std::invalid_argument(cell);
                row.push_back(v);
            } catch (const std::exception&) {
                throw io_error("csv line " + std::to_string(lineno) +
                               ": invalid number '" + cell + "'");
            }
        }
        if (!rows.empty() && row.size() != rows.front().size()) {
            throw io_error("csv line " + std::to_string(lineno) +
                           ": inconsistent column count");
        }
        rows.push_back(std::move(row));
    }
    if (rows.empty()) throw io_error("csv: no data rows");
    Eigen::MatrixXd m(rows.size(), rows.front().size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        for (std::size_t j = 0; j < rows[i].size(); ++j) {
            m(static_cast<long>(i), static_cast<long>(j)) = rows[i][j];
        }
    }
    return m;
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw io_error("cannot open file '" + path + "'");
    std::ostringstream out;
    out << in.rdbuf();
    return out.str();
}

void write_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw io_error("cannot write file '" + path + "'");
    out << content;
}

Eigen::MatrixXd read_csv_file(const std::string& path) {
    return read_csv_matrix(read_file(path));
}

nlohmann::json params_to_json(const EdgeWeights& lam, const NoiseCovariance& om) {
    nlohmann::json j;
    j["p"] = lam.graph().p();
    j["lambda"] = nlohmann::json::array();
    for (const auto& [e, v] : lam.values()) {
        j["lambda"].push_back({e.first, e.second, v});
    }
    j["omega_diag"] = std::vector<double>(
        om.diagonal().data(), om.diagonal().data() + om.diagonal().size());
    j["omega_off"] = nlohmann::json::array();
    for (const auto& [e, v] : om.off_diagonal()) {
        j["omega_off"].push_back({e.first, e.second, v});
    }
    return j;
}

std::pair<EdgeWeights, NoiseCovariance> params_from_json(const MixedGraph& g,
                                                         const nlohmann::json& j) {
    if (j.value("p", g.p()) != g.p()) {
        throw io_error("parameter file disagrees with the graph on p");
    }
    std::map<Edge, double> lam_values;
    for (const auto& triple : j.value("lambda", nlohmann::json::array())) {
        lam_values[{triple.at(0).get<int>(), triple.at(1).get<int>()}] =
            triple.at(2).get<double>();
    }
    Eigen::VectorXd diag = Eigen::VectorXd::Ones(g.p());
    if (j.contains("omega_diag")) {
        const auto v = j.at("omega_diag").get<std::vector<double>>();
        if (static_cast<int>(v.size()) != g.p()) {
            throw io_error("omega_diag has wrong length");
        }
        for (int i = 0; i < g.p(); ++i) diag(i) = v[i];
    }
    std::map<Edge, double> om_values;
    for (const auto& triple : j.value("omega_off", nlohmann::json::array())) {
        om_values[{triple.at(0).get<int>(), triple.at(1).get<int>()}] =
            triple.at(2).get<double>();
    }
    return {EdgeWeights(g, std::move(lam_values)),
            NoiseCovariance(g, std::move(diag), std::move(om_values))};
}

nlohmann::json matrix_to_json(const Eigen::MatrixXd& m) {
    nlohmann::json rows = nlohmann::json::array();
    for (long i = 0; i < m.rows(); ++i) {
        nlohmann::json row = nlohmann::json::array();
        for (long j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
        rows.push_back(std::move(row));
    }
    return rows;
}

nlohmann::json mlt_report_to_json(const MltReport& rep) {
    nlohmann::json j;
    j["threshold_zero_mean"] = rep.threshold_zero_mean;
    j["threshold_unknown_mean"] = rep.threshold_unknown_mean;
    j["achieving_component"] = rep.achieving_component + 1;
    j["components"] = rep.decomposition.components;
    j["parent_closures"] = rep.decomposition.parent_closures;
    return j;
}

nlohmann::json fit_result_to_json(const FitResult& fit) {
    nlohmann::json j;
    j["loglik_value"] = fit.loglik_value;
    j["converged"] = fit.converged;
    j["iterations"] = fit.iterations;
    j["restarts_used"] = fit.restarts_used;
    j["gradient_norm"] = fit.gradient_norm;
    j["parameters"] = params_to_json(fit.lam_hat, fit.om_hat);
    return j;
}

nlohmann::json witness_to_json(const DivergenceWitness& w) {
    nlohmann::json j;
    j["component_index"] = w.component_index + 1;
    j["support"] = w.support;
    j["q"] = std::vector<double>(w.q.data(), w.q.data() + w.q.size());
    j["sigma_base"] = matrix_to_json(w.sigma_base);
    j["c"] = w.c;
    j["slope"] = w.slope;
    j["offset"] = w.offset;
    j["trace_rest"] = w.trace_rest;
    return j;
}

nlohmann::json witness_report_to_json(const WitnessReport& rep) {
    nlohmann::json checks = nlohmann::json::array();
    for (const auto& c : rep.checks) {
        checks.push_back({{"name", c.name},
                          {"t", c.t},
                          {"pass", c.pass},
                          {"residual", c.residual}});
    }
    return {{"all_pass", rep.all_pass()}, {"checks", std::move(checks)}};
}

nlohmann::json lrt_result_to_json(const LrtResult& res) {
    nlohmann::json j;
    j["stat"] = res.stat;
    j["p_value"] = res.p_value;
    j["df"] = res.df;
    j["fit_full"] = fit_result_to_json(res.fit_full);
    j["fit_null"] = fit_result_to_json(res.fit_null);
    return j;
}

nlohmann::json probe_report_to_json(const ProbeReport& rep) {
    nlohmann::json entries = nlohmann::json::array();
    for (const auto& e : rep.entries) {
        nlohmann::json item;
        item["below_threshold"] = e.below_threshold;
        if (e.below_threshold) {
            item["witness_found"] = e.witness_found;
            item["witness_verified"] = e.witness_verified;
            item["divergence_gain"] = e.divergence_gain;
        } else {
            item["fit_converged"] = e.fit_converged;
            item["loglik_value"] = e.loglik_value;
            item["upper_bound"] = e.upper_bound;
            item["bounded_ok"] = e.bounded_ok;
        }
        if (!e.error.empty()) item["error"] = e.error;
        entries.push_back(std::move(item));
    }
    return {{"n", rep.n},
            {"threshold", rep.threshold},
            {"replicates", rep.replicates},
            {"passes", rep.passes},
            {"entries", std::move(entries)}};
}

nlohmann::json power_table_to_json(const PowerTable& table) {
    nlohmann::json rows = nlohmann::json::array();
    for (const auto& r : table.rows) {
        rows.push_back({{"n", r.n},
                        {"lambda12", r.lambda12},
                        {"rejections", r.rejections},
                        {"replicates", r.replicates},
                        {"failed", r.failed},
                        {"rate", r.rate},
                        {"se", r.se},
                        {"valid", r.valid}});
    }
    nlohmann::json meta;
    meta["p"] = table.config.p;
    meta["alpha"] = table.config.alpha;
    meta["seed"] = table.config.seed;
    meta["other_coeff"] = table.config.other_coeff;
    meta["assumptions"] = {
        "error covariance Omega = I (variances unstated in the design)",
        "known zero means; uncentered second-moment matrix"};
    return {{"meta", std::move(meta)}, {"rows", std::move(rows)}};
}

}  // namespace mlt
