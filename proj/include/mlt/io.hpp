#pragma once

#include <Eigen/Dense>
#include <string>

#include "json.hpp"
#include "mlt/experiment.hpp"
#include "mlt/fit.hpp"
#include "mlt/graph.hpp"
#include "mlt/model.hpp"
#include "mlt/witness.hpp"

namespace mlt {

class io_error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Headerless CSV, one observation per row.
Eigen::MatrixXd read_csv_matrix(const std::string& text);
Eigen::MatrixXd read_csv_file(const std::string& path);

std::string read_file(const std::string& path);
void write_file(const std::string& path, const std::string& content);

/// Parameter interchange: {"p":..., "lambda":[[i,j,v],...],
/// "omega_diag":[...], "omega_off":[[i,j,v],...]}.
nlohmann::json params_to_json(const EdgeWeights& lam, const NoiseCovariance& om);
std::pair<EdgeWeights, NoiseCovariance> params_from_json(const MixedGraph& g,
                                                         const nlohmann::json& j);

nlohmann::json matrix_to_json(const Eigen::MatrixXd& m);  // row-major nested arrays

nlohmann::json mlt_report_to_json(const MltReport& rep);
nlohmann::json fit_result_to_json(const FitResult& fit);
nlohmann::json witness_to_json(const DivergenceWitness& w);
nlohmann::json witness_report_to_json(const WitnessReport& rep);
nlohmann::json lrt_result_to_json(const LrtResult& res);
nlohmann::json probe_report_to_json(const ProbeReport& rep);
nlohmann::json power_table_to_json(const PowerTable& table);

}  // namespace mlt
