#pragma once

#include "erot/conditions.hpp"
#include "erot/costs.hpp"
#include "erot/exact_ot.hpp"
#include "erot/measures.hpp"
#include "erot/resampling.hpp"
#include "erot/sensitivity.hpp"
#include "erot/sinkhorn.hpp"

#include <json.hpp>

#include <filesystem>
#include <string>
#include <vector>

namespace erot::io {

using json = nlohmann::json;

/// %.17g, with "nan", "inf" and "-inf" for non-finite values.
std::string format_double(double x);

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, const std::string& text);
/// Pretty-printed with a trailing newline.
void write_json_file(const std::filesystem::path& path, const json& j);
json read_json_file(const std::filesystem::path& path);

Vector vector_from_json(const json& j, const std::string& what);
Matrix matrix_from_json(const json& j, const std::string& what);
json to_json(const Vector& v);
json to_json(const Matrix& m);

SpacePtr space_from_json(const json& j);
TailModel tail_from_json(const json& j);
json to_json(const TailModel& tail);

/// Either an explicit measure {labels?, weights, coords?, tail?, renormalize?} or a
/// family {space: {...}, family: geometric|polynomial|sub_weibull|uniform, ...}.
/// A string is read as a path, resolved against base_dir.
DiscreteMeasure measure_from_json(const json& j, const std::filesystem::path& base_dir = {});
json to_json(const DiscreteMeasure& mu);

/// Measures from .json files or from CSV files with header label,weight[,coord...].
DiscreteMeasure load_measure(const std::filesystem::path& path);

/// Function tables for plan functionals. JSON holds one table, a list of tables
/// or {"functions": [...]}; CSV holds dense tables separated by blank lines.
std::vector<Matrix> load_function_tables(const std::filesystem::path& path);

CostFamily cost_family_from_string(const std::string& name);
FamilySpec family_spec_from_json(const json& j, const std::filesystem::path& base_dir = {});
FamilySpec load_family_spec(const std::filesystem::path& path);

SampleMode sample_mode_from_string(const std::string& name);
Normalization normalization_from_string(const std::string& name);

struct ExperimentFile {
  ExperimentConfig config;
  FamilySpec cost_spec;
  bool has_seed = false;
};

/// Experiment config JSON. The cost is built at the fixed lambda (or at lambda = 1
/// when only a schedule is given).
ExperimentFile experiment_from_json(const json& j, const std::filesystem::path& base_dir = {});
ExperimentFile load_experiment(const std::filesystem::path& path);

/// Plan as a dense table, or as [i, j, value] triplets above 1e-16 when sparse.
json to_json(const SinkhornSolution& sol, bool sparse_plan = false);
json to_json(const BoundReport& rep);
json to_json(const ConditionReport& rep);
json to_json(const CovarianceReport& rep);
json to_json(const OTSolution& sol);
json to_json(const GapReport& rep);
json to_json(const MCReport& rep, bool include_runtime = false);

/// Columns replication,draw.
std::string draws_csv(const std::vector<double>& draws);
/// Columns i,empirical,theoretical: sorted draws against N(0, sigma2) quantiles
/// at (i - 0.5) / n.
std::string qq_csv(const std::vector<double>& draws, double sigma2);
/// Columns n,lambda,mean_empirical_variance,mean_abs_error.
std::string variance_trace_csv(const std::vector<VarianceTraceEntry>& trace);

/// Inverse of the standard normal CDF.
double normal_quantile(double p);

}  // namespace erot::io
