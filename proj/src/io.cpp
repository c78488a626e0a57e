#include "erot/io.hpp"

#include "erot/error.hpp"

#include <boost/math/distributions/normal.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>

namespace erot::io {

namespace fs = std::filesystem;

namespace {

[[noreturn]] void parse_error(const std::string& msg) { throw Error(ErrorCode::ConfigParse, msg); }

template <typename T>
T get_or(const json& j, const char* key, T fallback) {
  if (!j.contains(key) || j.at(key).is_null()) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    parse_error(std::string("field '") + key + "': " + e.what());
  }
}

fs::path resolve(const fs::path& p, const fs::path& base) {
  if (p.is_absolute() || base.empty()) return p;
  return base / p;
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream is(line);
  while (std::getline(is, cell, ',')) {
    const auto b = cell.find_first_not_of(" \t\r");
    const auto e = cell.find_last_not_of(" \t\r");
    out.push_back(b == std::string::npos ? std::string() : cell.substr(b, e - b + 1));
  }
  return out;
}

double parse_double(const std::string& s, const std::string& what) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) parse_error("trailing characters in " + what + ": '" + s + "'");
    return v;
  } catch (const std::logic_error&) {
    parse_error("not a number in " + what + ": '" + s + "'");
  }
}

DominatingFunctions dominating_from_json(const json& j) {
  if (!j.is_object()) parse_error("dominating functions must be an object");
  DominatingFunctions d;
  for (const char* key : {"x_lower", "x_upper", "y_lower", "y_upper"})
    if (!j.contains(key)) parse_error(std::string("dominating functions miss '") + key + "'");
  d.x_lower = vector_from_json(j.at("x_lower"), "x_lower");
  d.x_upper = vector_from_json(j.at("x_upper"), "x_upper");
  d.y_lower = vector_from_json(j.at("y_lower"), "y_lower");
  d.y_upper = vector_from_json(j.at("y_upper"), "y_upper");
  return d;
}

}  // namespace

std::string format_double(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

std::string read_text_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) parse_error("cannot open '" + path.string() + "'");
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

void write_text_file(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) parse_error("cannot write '" + path.string() + "'");
  out << text;
  if (!out) parse_error("failed writing '" + path.string() + "'");
}

void write_json_file(const fs::path& path, const json& j) { write_text_file(path, j.dump(2) + "\n"); }

json read_json_file(const fs::path& path) {
  const std::string text = read_text_file(path);
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    parse_error("'" + path.string() + "': " + e.what());
  }
}

Vector vector_from_json(const json& j, const std::string& what) {
  if (!j.is_array()) parse_error(what + " must be an array of numbers");
  Vector v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_number()) parse_error(what + " must be an array of numbers");
    v[static_cast<Eigen::Index>(i)] = j[i].get<double>();
  }
  return v;
}

Matrix matrix_from_json(const json& j, const std::string& what) {
  if (!j.is_array() || j.empty() || !j[0].is_array()) parse_error(what + " must be an array of rows");
  const std::size_t cols = j[0].size();
  Matrix m(static_cast<Eigen::Index>(j.size()), static_cast<Eigen::Index>(cols));
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_array() || j[i].size() != cols) parse_error(what + " has ragged rows");
    m.row(static_cast<Eigen::Index>(i)) = vector_from_json(j[i], what).transpose();
  }
  return m;
}

json to_json(const Vector& v) {
  json out = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v[i]);
  return out;
}

json to_json(const Matrix& m) {
  json out = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) out.push_back(to_json(Vector(m.row(i).transpose())));
  return out;
}

SpacePtr space_from_json(const json& j) {
  if (!j.is_object()) parse_error("space must be an object");
  const std::string kind = get_or<std::string>(j, "kind", "integers");
  if (kind == "integers") {
    const int count = get_or<int>(j, "count", 0);
    if (count < 1) parse_error("integer space needs count >= 1");
    return IndexedSpace::integers(get_or<int>(j, "start", 0), count);
  }
  if (kind == "points") {
    if (!j.contains("values")) parse_error("point space needs 'values'");
    const Vector v = vector_from_json(j.at("values"), "space values");
    return IndexedSpace::points(std::vector<double>(v.data(), v.data() + v.size()));
  }
  if (kind == "labels") {
    if (!j.contains("labels")) parse_error("label space needs 'labels'");
    std::vector<std::vector<double>> coords;
    if (j.contains("coords")) coords = j.at("coords").get<std::vector<std::vector<double>>>();
    return std::make_shared<const IndexedSpace>(j.at("labels").get<std::vector<std::string>>(), std::move(coords));
  }
  parse_error("unknown space kind '" + kind + "'");
}

TailModel tail_from_json(const json& j) {
  if (j.is_string()) return tail_from_json(json{{"kind", j}});
  if (!j.is_object()) parse_error("tail must be an object");
  const std::string kind = get_or<std::string>(j, "kind", "unknown");
  TailModel t;
  if (kind == "unknown") {
    t = TailModel{};
  } else if (kind == "finite") {
    t = TailModel::finite();
  } else if (kind == "geometric") {
    t = TailModel::geometric(get_or<double>(j, "q", 0.0));
  } else if (kind == "polynomial") {
    t = TailModel::polynomial(get_or<double>(j, "a", 0.0));
  } else if (kind == "sub_weibull") {
    t = TailModel::sub_weibull(get_or<double>(j, "gamma", 0.0), get_or<double>(j, "theta", 0.0));
  } else {
    parse_error("unknown tail kind '" + kind + "'");
  }
  t.shell_degree = get_or<double>(j, "shell_degree", 0.0);
  return t;
}

json to_json(const TailModel& t) {
  json j{{"kind", to_string(t.kind)}};
  switch (t.kind) {
    case TailModel::Kind::Geometric: j["q"] = t.q; break;
    case TailModel::Kind::Polynomial: j["a"] = t.a; break;
    case TailModel::Kind::SubWeibull:
      j["gamma"] = t.gamma;
      j["theta"] = t.theta;
      break;
    default: break;
  }
  if (t.shell_degree != 0.0) j["shell_degree"] = t.shell_degree;
  return j;
}

DiscreteMeasure measure_from_json(const json& j, const fs::path& base_dir) {
  if (j.is_string()) return load_measure(resolve(j.get<std::string>(), base_dir));
  if (!j.is_object()) parse_error("measure must be an object or a path");

  if (j.contains("family")) {
    if (!j.contains("space")) parse_error("measure family needs a 'space'");
    const SpacePtr space = space_from_json(j.at("space"));
    const std::string family = j.at("family").get<std::string>();
    if (family == "uniform") {
      return DiscreteMeasure(space, Vector::Constant(space->size(), 1.0 / space->size()),
                             {false, TailModel::finite()});
    }
    json tail = j;
    tail["kind"] = family;
    const bool countable = get_or<bool>(j, "countable", true);
    return family_measure(tail_from_json(tail), space, countable);
  }

  if (!j.contains("weights")) parse_error("measure needs 'weights' or 'family'");
  const Vector w = vector_from_json(j.at("weights"), "weights");
  SpacePtr space;
  if (j.contains("space")) {
    space = space_from_json(j.at("space"));
  } else if (j.contains("labels")) {
    std::vector<std::vector<double>> coords;
    if (j.contains("coords")) coords = j.at("coords").get<std::vector<std::vector<double>>>();
    space = std::make_shared<const IndexedSpace>(j.at("labels").get<std::vector<std::string>>(), std::move(coords));
  } else {
    space = IndexedSpace::integers(0, static_cast<int>(w.size()));
  }
  MeasureOptions opt;
  opt.renormalize = get_or<bool>(j, "renormalize", false);
  if (j.contains("tail")) opt.tail = tail_from_json(j.at("tail"));
  return DiscreteMeasure(space, w, opt);
}

json to_json(const DiscreteMeasure& mu) {
  const IndexedSpace& sp = *mu.space();
  json j{{"labels", sp.labels()}, {"weights", to_json(mu.weights())}};
  if (sp.has_coords()) {
    json coords = json::array();
    for (int i = 0; i < sp.size(); ++i) coords.push_back(sp.coord(i));
    j["coords"] = coords;
  }
  j["tail"] = to_json(mu.tail());
  return j;
}

DiscreteMeasure load_measure(const fs::path& path) {
  if (path.extension() == ".csv") {
    std::istringstream in(read_text_file(path));
    std::string line;
    std::vector<std::string> labels;
    std::vector<double> weights;
    std::vector<std::vector<double>> coords;
    bool header = true;
    while (std::getline(in, line)) {
      if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
      const auto cells = split_csv_line(line);
      if (header) {
        header = false;
        if (cells.size() < 2 || cells[0] != "label" || cells[1] != "weight")
          parse_error("'" + path.string() + "': header must start with label,weight");
        continue;
      }
      if (cells.size() < 2) parse_error("'" + path.string() + "': short row");
      labels.push_back(cells[0]);
      weights.push_back(parse_double(cells[1], "weight"));
      if (cells.size() > 2) {
        std::vector<double> c;
        for (std::size_t k = 2; k < cells.size(); ++k) c.push_back(parse_double(cells[k], "coordinate"));
        coords.push_back(std::move(c));
      }
    }
    if (labels.empty()) parse_error("'" + path.string() + "' holds no atoms");
    if (!coords.empty() && coords.size() != labels.size())
      parse_error("'" + path.string() + "': coordinates must be given for every atom or none");
    auto space = std::make_shared<const IndexedSpace>(std::move(labels), std::move(coords));
    return DiscreteMeasure(space, Eigen::Map<const Vector>(weights.data(), static_cast<Eigen::Index>(weights.size())));
  }
  return measure_from_json(read_json_file(path), path.parent_path());
}

std::vector<Matrix> load_function_tables(const fs::path& path) {
  if (path.extension() != ".csv") {
    json j = read_json_file(path);
    if (j.is_object() && j.contains("functions")) j = j.at("functions");
    std::vector<Matrix> fns;
    if (j.is_array() && !j.empty() && j[0].is_array() && !j[0].empty() && j[0][0].is_array()) {
      for (const auto& f : j) fns.push_back(matrix_from_json(f, "function"));
    } else {
      fns.push_back(matrix_from_json(j, "function"));
    }
    return fns;
  }
  std::vector<Matrix> fns;
  std::vector<std::vector<double>> rows;
  auto flush = [&] {
    if (rows.empty()) return;
    Matrix m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.front().size()));
    for (std::size_t i = 0; i < rows.size(); ++i) {
      if (rows[i].size() != rows.front().size()) parse_error("'" + path.string() + "': ragged function table");
      for (std::size_t k = 0; k < rows[i].size(); ++k) m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = rows[i][k];
    }
    fns.push_back(std::move(m));
    rows.clear();
  };
  std::istringstream in(read_text_file(path));
  std::string line;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) {
      flush();
      continue;
    }
    std::vector<double> row;
    for (const auto& cell : split_csv_line(line)) row.push_back(parse_double(cell, "function table"));
    rows.push_back(std::move(row));
  }
  flush();
  if (fns.empty()) parse_error("'" + path.string() + "' holds no function tables");
  return fns;
}

CostFamily cost_family_from_string(const std::string& name) {
  for (CostFamily f : {CostFamily::Bounded, CostFamily::MetricPower, CostFamily::SemiBoundedMetricPower,
                       CostFamily::SeparabilityMetric, CostFamily::NormPower, CostFamily::Custom})
    if (to_string(f) == name) return f;
  parse_error("unknown cost family '" + name + "'");
}

FamilySpec family_spec_from_json(const json& j, const fs::path& base_dir) {
  if (j.is_string()) return load_family_spec(resolve(j.get<std::string>(), base_dir));
  if (!j.is_object()) parse_error("cost spec must be an object or a path");
  FamilySpec spec;
  if (!j.contains("family")) parse_error("cost spec needs 'family'");
  spec.family = cost_family_from_string(j.at("family").get<std::string>());
  spec.base = get_or<std::string>(j, "base", spec.base);
  spec.setting = get_or<std::string>(j, "setting", "");
  spec.p = get_or<double>(j, "p", spec.p);
  spec.epsilon = get_or<double>(j, "epsilon", spec.epsilon);
  spec.gamma = get_or<double>(j, "gamma", spec.gamma);
  spec.norm = get_or<std::string>(j, "norm", spec.norm);
  spec.x_bounded = get_or<bool>(j, "x_bounded", false);
  spec.y_bounded = get_or<bool>(j, "y_bounded", false);
  spec.separated = get_or<bool>(j, "separated", false);
  spec.kappa_max = get_or<double>(j, "kappa_max", spec.kappa_max);
  if (j.contains("anchor")) {
    if (j.at("anchor").is_number()) {
      spec.anchor = {j.at("anchor").get<double>()};
    } else {
      const Vector a = vector_from_json(j.at("anchor"), "anchor");
      spec.anchor.assign(a.data(), a.data() + a.size());
    }
  }
  if (j.contains("matrix")) spec.matrix = matrix_from_json(j.at("matrix"), "cost matrix");
  if (j.contains("dominating")) spec.dominating = dominating_from_json(j.at("dominating"));
  if (j.contains("dominating_secondary")) spec.dominating_secondary = dominating_from_json(j.at("dominating_secondary"));
  if (j.contains("x_variation_bounded")) spec.declared_x_variation_bounded = j.at("x_variation_bounded").get<bool>();
  if (j.contains("y_variation_bounded")) spec.declared_y_variation_bounded = j.at("y_variation_bounded").get<bool>();
  return spec;
}

FamilySpec load_family_spec(const fs::path& path) {
  return family_spec_from_json(read_json_file(path), path.parent_path());
}

SampleMode sample_mode_from_string(const std::string& name) {
  for (SampleMode m : {SampleMode::OneSampleR, SampleMode::OneSampleS, SampleMode::TwoSample})
    if (to_string(m) == name) return m;
  parse_error("unknown sample mode '" + name + "'");
}

Normalization normalization_from_string(const std::string& name) {
  for (Normalization n : {Normalization::Balanced, Normalization::AnchoredAtY1})
    if (to_string(n) == name) return n;
  parse_error("unknown normalization '" + name + "'");
}

ExperimentFile experiment_from_json(const json& j, const fs::path& base_dir) {
  if (!j.is_object()) parse_error("experiment config must be an object");
  for (const char* key : {"r", "s", "cost"})
    if (!j.contains(key)) parse_error(std::string("experiment config needs '") + key + "'");
  DiscreteMeasure r = measure_from_json(j.at("r"), base_dir);
  DiscreteMeasure s = measure_from_json(j.at("s"), base_dir);
  FamilySpec spec = family_spec_from_json(j.at("cost"), base_dir);

  std::optional<LambdaSchedule> schedule;
  if (j.contains("lambda_schedule")) {
    const json& ls = j.at("lambda_schedule");
    schedule = LambdaSchedule{get_or<double>(ls, "scale", 1.0), get_or<double>(ls, "exponent", -0.6)};
  }
  const double lambda = get_or<double>(j, "lambda", schedule ? 0.0 : -1.0);
  if (!schedule && !(lambda > 0.0)) parse_error("experiment config needs a positive 'lambda' or a 'lambda_schedule'");
  auto [model, profile] = build_cost(spec, r.space(), s.space(), lambda > 0.0 ? lambda : 1.0);

  ExperimentFile out{ExperimentConfig(std::move(r), std::move(s), std::move(model)), spec, j.contains("seed")};
  ExperimentConfig& cfg = out.config;
  cfg.lambda = lambda > 0.0 ? lambda : 1.0;
  cfg.schedule = schedule;
  cfg.n = get_or<int>(j, "n", cfg.n);
  cfg.m = get_or<int>(j, "m", 0);
  if (j.contains("delta") && cfg.m == 0) {
    const double delta = j.at("delta").get<double>();
    if (!(delta > 0.0 && delta < 1.0)) parse_error("delta must lie in (0, 1)");
    cfg.m = static_cast<int>(std::lround(cfg.n * delta / (1.0 - delta)));
  }
  cfg.mode = sample_mode_from_string(get_or<std::string>(j, "mode", to_string(SampleMode::OneSampleR)));
  cfg.replications = get_or<int>(j, "replications", cfg.replications);
  cfg.statistic = statistic_from_string(get_or<std::string>(j, "statistic", to_string(Statistic::ValueCLT)));
  cfg.seed = get_or<std::uint64_t>(j, "seed", 0);
  cfg.sample_sizes = get_or<std::vector<int>>(j, "sample_sizes", {});
  if (j.contains("function")) cfg.function = matrix_from_json(j.at("function"), "function");
  if (j.contains("solver")) {
    const json& sj = j.at("solver");
    cfg.solver.tol = get_or<double>(sj, "tol", cfg.solver.tol);
    cfg.solver.max_iter = get_or<int>(sj, "max_iter", cfg.solver.max_iter);
  }
  cfg.validate();
  return out;
}

ExperimentFile load_experiment(const fs::path& path) {
  return experiment_from_json(read_json_file(path), path.parent_path());
}

json to_json(const SinkhornSolution& sol, bool sparse_plan) {
  json j{{"lambda", sol.lambda},
         {"value", sol.value},
         {"sinkhorn_cost", sol.cost_part},
         {"mutual_information", sol.mutual_info},
         {"duality_gap", sol.duality_gap},
         {"iterations", sol.iterations},
         {"marginal_residual", sol.marginal_residual},
         {"normalization", to_string(sol.normalization)},
         {"y1_index", sol.y1_index},
         {"alpha", to_json(sol.alpha)},
         {"beta", to_json(sol.beta)}};
  if (sparse_plan) {
    json triplets = json::array();
    for (Eigen::Index x = 0; x < sol.plan.rows(); ++x)
      for (Eigen::Index y = 0; y < sol.plan.cols(); ++y)
        if (sol.plan(x, y) > 1e-16) triplets.push_back({x, y, sol.plan(x, y)});
    j["plan"] = {{"rows", sol.plan.rows()}, {"cols", sol.plan.cols()}, {"entries", triplets}};
  } else {
    j["plan"] = to_json(sol.plan);
  }
  return j;
}

json to_json(const BoundReport& rep) {
  return {{"alpha_lower", rep.alpha_lower},   {"alpha_upper", rep.alpha_upper},
          {"beta_lower", rep.beta_lower},     {"beta_upper", rep.beta_upper},
          {"plan_lower", rep.plan_lower},     {"plan_upper", rep.plan_upper},
          {"plan_lower_ratio", rep.plan_lower_ratio}, {"plan_upper_ratio", rep.plan_upper_ratio},
          {"max_violation", rep.max_violation()}};
}

json to_json(const ConditionReport& rep) {
  json sums = json::array();
  for (const auto& g : rep.checked_sums) {
    json e{{"description", g.description}, {"partial_sum", g.partial_sum}, {"analytic", to_string(g.analytic)}};
    if (!g.note.empty()) e["note"] = g.note;
    sums.push_back(e);
  }
  return {{"theorem", rep.theorem_tag},
          {"mode", to_string(rep.mode)},
          {"verdict", to_string(rep.verdict)},
          {"x_variation_bounded", rep.x_variation_bounded},
          {"checked_sums", sums},
          {"reasons", rep.reasons}};
}

json to_json(const CovarianceReport& rep) {
  json j{{"sigma2_value", rep.sigma2_value},
         {"sigma2_value_s", rep.sigma2_value_s},
         {"sigma2_value_two_sample", rep.sigma2_value_two_sample},
         {"delta", rep.delta},
         {"sigma_tilde2_cost", rep.sigma_tilde2_cost}};
  if (rep.has_divergence) j["sigma2_divergence"] = rep.sigma2_divergence;
  if (rep.functional_cov.size() > 0) j["functional_covariance"] = to_json(rep.functional_cov);
  return j;
}

json to_json(const OTSolution& sol) {
  return {{"value", sol.value},
          {"unique_potentials", sol.unique_potentials},
          {"pivots", sol.pivots},
          {"alpha0", to_json(sol.alpha0)},
          {"beta0", to_json(sol.beta0)},
          {"plan", to_json(sol.plan)}};
}

json to_json(const GapReport& rep) {
  json entries = json::array();
  for (const auto& e : rep.entries) {
    entries.push_back({{"lambda", e.lambda},
                       {"erot", e.erot},
                       {"sinkhorn_cost", e.sinkhorn_cost},
                       {"cost_gap", e.cost_gap},
                       {"value_gap", e.value_gap},
                       {"bound", e.bound},
                       {"holds", e.holds}});
  }
  return {{"ot", rep.ot}, {"entropy", rep.entropy}, {"all_hold", rep.all_hold}, {"entries", entries}};
}

json to_json(const MCReport& rep, bool include_runtime) {
  json j{{"statistic", to_string(rep.statistic)},
         {"mode", to_string(rep.mode)},
         {"n", rep.n},
         {"m", rep.m},
         {"replications", rep.replications},
         {"lambda", rep.lambda},
         {"rate", rep.rate},
         {"population_value", rep.population_value},
         {"target_sigma2", rep.target_sigma2},
         {"ks_distance", rep.ks_distance},
         {"sample_mean", rep.sample_mean},
         {"sample_var", rep.sample_var},
         {"condition_verdict", rep.condition_verdict},
         {"warnings", rep.warnings},
         {"standardized_draws", rep.standardized_draws}};
  if (rep.statistic == Statistic::VanishingLambda) {
    json trace = json::array();
    for (const auto& e : rep.variance_trace)
      trace.push_back({{"n", e.n},
                       {"lambda", e.lambda},
                       {"mean_empirical_variance", e.mean_empirical_variance},
                       {"mean_abs_error", e.mean_abs_error}});
    j["variance_trace"] = trace;
    j["reference_variance"] = rep.reference_variance;
  }
  if (include_runtime) j["runtime_seconds"] = rep.runtime_seconds;
  return j;
}

std::string draws_csv(const std::vector<double>& draws) {
  std::string out = "replication,draw\n";
  for (std::size_t b = 0; b < draws.size(); ++b) out += std::to_string(b) + "," + format_double(draws[b]) + "\n";
  return out;
}

double normal_quantile(double p) { return boost::math::quantile(boost::math::normal_distribution<double>(), p); }

std::string qq_csv(const std::vector<double>& draws, double sigma2) {
  std::vector<double> sorted = draws;
  std::sort(sorted.begin(), sorted.end());
  const double sd = std::sqrt(std::max(0.0, sigma2));
  const double n = static_cast<double>(sorted.size());
  std::string out = "i,empirical,theoretical\n";
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    const double q = sd * normal_quantile((static_cast<double>(i) + 0.5) / n);
    out += std::to_string(i + 1) + "," + format_double(sorted[i]) + "," + format_double(q) + "\n";
  }
  return out;
}

std::string variance_trace_csv(const std::vector<VarianceTraceEntry>& trace) {
  std::string out = "n,lambda,mean_empirical_variance,mean_abs_error\n";
  for (const auto& e : trace)
    out += std::to_string(e.n) + "," + format_double(e.lambda) + "," + format_double(e.mean_empirical_variance) +
           "," + format_double(e.mean_abs_error) + "\n";
  return out;
}

}  // namespace erot::io
