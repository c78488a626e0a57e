#include "erot/cli.hpp"

#include "erot/error.hpp"
#include "erot/exact_ot.hpp"
#include "erot/io.hpp"
#include "erot/parallel.hpp"
#include "erot/resampling.hpp"
#include "erot/sensitivity.hpp"

#include <CLI11.hpp>
#include <openssl/evp.h>

#include <algorithm>
#include <cctype>
#include <iostream>
#include <random>

namespace erot::cli {

namespace fs = std::filesystem;
using io::json;

namespace {

struct Options {
  std::string r, s, cost, out, config, function, hx, hy, manifest;
  std::string theorem = "value";
  std::string mode = "one_sample_r";
  std::string normalization = "balanced";
  std::string statistic;
  double lambda = 0.0;
  double delta = 0.5;
  double tol = 1e-10;
  int max_iter = 100000;
  int threads = 0;
  int draws = 0;
  int n = 0;
  int replications = 0;
  std::uint64_t seed = 0;
  std::vector<double> lambdas;
  std::vector<double> steps{1e-2, 1e-3, 1e-4};
  std::vector<int> sample_sizes;
  bool timing = false;
  bool sparse_plan = false;
};

struct Artifact {
  fs::path path;
  std::string text;
};

struct Outcome {
  json main;
  std::vector<Artifact> extra;
  bool seed_used = false;
  std::string seed_source = "default";
};

std::string sha256_hex(const std::string& data) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  if (ctx == nullptr || EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr) != 1 ||
      EVP_DigestUpdate(ctx, data.data(), data.size()) != 1 || EVP_DigestFinal_ex(ctx, digest, &len) != 1) {
    EVP_MD_CTX_free(ctx);
    throw std::runtime_error("SHA-256 digest failed");
  }
  EVP_MD_CTX_free(ctx);
  static const char* hex = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out.push_back(hex[digest[i] >> 4]);
    out.push_back(hex[digest[i] & 0xF]);
  }
  return out;
}

Outcome only(json j) {
  Outcome o;
  o.main = std::move(j);
  return o;
}

fs::path sibling(const fs::path& out, const std::string& suffix) {
  fs::path p = out;
  p.replace_extension();
  return fs::path(p.string() + suffix);
}

std::string env_name(const std::string& flag) {
  std::string name = "EROT_";
  for (char c : flag) name.push_back(c == '-' ? '_' : static_cast<char>(std::toupper(static_cast<unsigned char>(c))));
  return name;
}

SolverConfig solver_config(const Options& o) {
  SolverConfig cfg;
  cfg.tol = o.tol;
  cfg.max_iter = o.max_iter;
  cfg.normalization = io::normalization_from_string(o.normalization);
  return cfg;
}

int threads_of(const Options& o) { return o.threads > 0 ? o.threads : default_threads(); }

struct Instance {
  DiscreteMeasure r, s;
  CostModel model;
  WeightProfile profile;
};

Instance load_instance(const Options& o, double lambda) {
  DiscreteMeasure r = io::load_measure(o.r);
  DiscreteMeasure s = io::load_measure(o.s);
  auto [model, profile] = build_cost(io::load_family_spec(o.cost), r.space(), s.space(), lambda);
  return {std::move(r), std::move(s), std::move(model), std::move(profile)};
}

VarianceMode variance_mode(const Options& o) {
  if (!(o.delta > 0.0 && o.delta < 1.0)) throw Error(ErrorCode::ConfigParse, "--delta must lie in (0, 1)");
  return {io::sample_mode_from_string(o.mode), o.delta};
}

Outcome cmd_solve(const Options& o) {
  const Instance in = load_instance(o, o.lambda);
  const SinkhornSolution sol = solve(in.r, in.s, in.model, o.lambda, solver_config(o));
  return only(io::to_json(sol, o.sparse_plan));
}

Outcome cmd_divergence(const Options& o) {
  const Instance in = load_instance(o, o.lambda);
  require_symmetric(in.r, in.s, in.model);
  const SolverConfig cfg = solver_config(o);
  const double rs = solve(in.r, in.s, in.model, o.lambda, cfg).value;
  const double rr = solve(in.r, in.r, in.model, o.lambda, cfg).value;
  const double ss = solve(in.s, in.s, in.model, o.lambda, cfg).value;
  return only(json{{"lambda", o.lambda},
               {"divergence", sinkhorn_divergence(in.r, in.s, in.model, o.lambda, cfg)},
               {"erot_rs", rs},
               {"erot_rr", rr},
               {"erot_ss", ss}});
}

Outcome cmd_bounds(const Options& o) {
  const Instance in = load_instance(o, o.lambda);
  const SinkhornSolution sol = solve(in.r, in.s, in.model, o.lambda, solver_config(o));
  const BoundReport rep = verify_bounds(sol, in.model, in.r, in.s);
  return only(json{{"lambda", o.lambda},
               {"value", sol.value},
               {"family", to_string(in.model.family)},
               {"setting", in.model.setting},
               {"bounds", io::to_json(rep)}});
}

Outcome cmd_check_conditions(const Options& o) {
  const Instance in = load_instance(o, o.lambda);
  const SampleMode mode = io::sample_mode_from_string(o.mode);
  ConditionReport rep;
  if (o.theorem == "value") {
    rep = check_value_conditions(in.r, in.s, in.profile, mode);
  } else if (o.theorem == "plan") {
    rep = check_plan_conditions(in.r, in.s, in.profile, mode);
  } else if (o.theorem == "divergence") {
    rep = check_divergence_conditions(in.r, in.s, in.profile, mode);
  } else {
    throw Error(ErrorCode::ConfigParse, "--theorem must be value, plan or divergence");
  }
  const FamilySpec spec = io::load_family_spec(o.cost);
  json j = io::to_json(rep);
  j["family"] = to_string(in.model.family);
  j["setting"] = in.model.setting;
  j["lambda"] = o.lambda;
  j["cost_parameters"] = {{"p", spec.p}, {"epsilon", spec.epsilon}, {"gamma", spec.gamma}};
  return only(j);
}

Outcome cmd_variance(const Options& o) {
  const Instance in = load_instance(o, o.lambda);
  const CovarianceReport rep =
      covariance_report(in.r, in.s, in.model, o.lambda, variance_mode(o), {}, solver_config(o), threads_of(o));
  json j = io::to_json(rep);
  j["lambda"] = o.lambda;
  j["mode"] = o.mode;
  return only(j);
}

Outcome cmd_plan_cov(const Options& o) {
  const Instance in = load_instance(o, o.lambda);
  const std::vector<Matrix> fns = io::load_function_tables(o.function);
  const VarianceMode vm = variance_mode(o);
  const SinkhornSolution sol = solve(in.r, in.s, in.model, o.lambda, solver_config(o));
  const DerivativeOperators ops = build_operators(sol, in.r, in.s, in.model.x_variation_bounded);
  const FunctionalJacobian jac = functional_jacobian(ops, fns, threads_of(o));
  const Matrix cov = functional_covariance(ops, fns, vm, threads_of(o));

  Outcome outcome;
  outcome.main = json{{"lambda", o.lambda},
                      {"mode", o.mode},
                      {"delta", o.delta},
                      {"contraction_norm", ops.contraction_norm},
                      {"functional_covariance", io::to_json(cov)}};
  if (!ops.warning.empty()) outcome.main["warning"] = ops.warning;
  if (o.draws > 0) {
    const LimitInputs li{in.r.weights(), in.s.weights(), sol.alpha, sol.beta, jac};
    const LimitDraws d = sample_limit(li, vm, o.draws, o.seed);
    std::string csv = "draw,value";
    for (std::size_t k = 0; k < fns.size(); ++k) csv += ",f" + std::to_string(k);
    csv += "\n";
    for (int b = 0; b < o.draws; ++b) {
      csv += std::to_string(b) + "," + io::format_double(d.value[b]);
      for (Eigen::Index k = 0; k < d.functionals.cols(); ++k) csv += "," + io::format_double(d.functionals(b, k));
      csv += "\n";
    }
    outcome.extra.push_back({sibling(o.out, ".limit.csv"), csv});
    outcome.seed_used = true;
  }
  return outcome;
}

Vector random_tangent(const Vector& base, std::mt19937_64& gen) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Vector q(base.size());
  for (Eigen::Index i = 0; i < q.size(); ++i) q[i] = base[i] > 0.0 ? u(gen) : 0.0;
  q /= q.sum();
  return q - base;
}

Outcome cmd_derivative_check(const Options& o) {
  const Instance in = load_instance(o, o.lambda);
  Outcome outcome;
  Vector hx, hy;
  if (o.hx.empty() != o.hy.empty()) throw Error(ErrorCode::ConfigParse, "--hx and --hy must be given together");
  if (!o.hx.empty()) {
    hx = io::vector_from_json(io::read_json_file(o.hx), "hx");
    hy = io::vector_from_json(io::read_json_file(o.hy), "hy");
  } else {
    std::mt19937_64 gen(stream_seed(o.seed, 0, 4));
    hx = random_tangent(in.r.weights(), gen);
    hy = random_tangent(in.s.weights(), gen);
    outcome.seed_used = true;
  }
  SolverConfig cfg = solver_config(o);
  const FiniteDifferenceCheck fd = finite_difference_check(
      in.r, in.s, in.model, o.lambda, SignedVector(in.r.space(), hx, true), SignedVector(in.s.space(), hy, true),
      o.steps, cfg);
  outcome.main = json{{"lambda", o.lambda},
                      {"steps", fd.steps},
                      {"plan_errors", fd.plan_errors},
                      {"value_errors", fd.value_errors},
                      {"plan_slope", fd.plan_slope},
                      {"value_slope", fd.value_slope},
                      {"marginal_residual", fd.marginal_residual},
                      {"contraction_norm", fd.contraction_norm},
                      {"hx", io::to_json(hx)},
                      {"hy", io::to_json(hy)}};
  return outcome;
}

Outcome cmd_ot_exact(const Options& o) {
  const double lambda = o.lambda > 0.0 ? o.lambda : 1.0;
  const Instance in = load_instance(o, lambda);
  const OTSolution ot = exact_ot_small(in.r, in.s, in.model);
  json j = io::to_json(ot);
  if (!o.lambdas.empty()) j["gap"] = io::to_json(vanishing_reg_gap(in.r, in.s, in.model, o.lambdas, solver_config(o)));
  return only(j);
}

io::ExperimentFile load_experiment_with_overrides(const Options& o, bool seed_given, Outcome& outcome) {
  io::ExperimentFile ef = io::load_experiment(o.config);
  ExperimentConfig& cfg = ef.config;
  if (o.lambda > 0.0 && o.lambda != cfg.lambda) {
    cfg.lambda = o.lambda;
    cfg.schedule.reset();
    cfg.cost = build_cost(ef.cost_spec, cfg.r.space(), cfg.s.space(), o.lambda).first;
  }
  if (o.n > 0) cfg.n = o.n;
  if (o.replications > 0) cfg.replications = o.replications;
  if (!o.statistic.empty()) cfg.statistic = statistic_from_string(o.statistic);
  if (!o.sample_sizes.empty()) cfg.sample_sizes = o.sample_sizes;
  if (seed_given) {
    cfg.seed = o.seed;
    outcome.seed_source = "flag";
  } else if (ef.has_seed) {
    outcome.seed_source = "config";
  }
  cfg.threads = threads_of(o);
  cfg.solver.tol = o.tol;
  cfg.solver.max_iter = o.max_iter;
  cfg.validate();
  outcome.seed_used = true;
  return ef;
}

void add_draw_artifacts(const Options& o, const MCReport& rep, Outcome& outcome) {
  outcome.main = io::to_json(rep, o.timing);
  outcome.extra.push_back({sibling(o.out, ".draws.csv"), io::draws_csv(rep.standardized_draws)});
  outcome.extra.push_back({sibling(o.out, ".qq.csv"), io::qq_csv(rep.standardized_draws, rep.target_sigma2)});
}

Outcome cmd_mc_clt(const Options& o, bool seed_given) {
  Outcome outcome;
  const io::ExperimentFile ef = load_experiment_with_overrides(o, seed_given, outcome);
  const MCReport rep = mc_clt_experiment(ef.config);
  add_draw_artifacts(o, rep, outcome);
  if (rep.statistic == Statistic::VanishingLambda)
    outcome.extra.push_back({sibling(o.out, ".trace.csv"), io::variance_trace_csv(rep.variance_trace)});
  return outcome;
}

Outcome cmd_bootstrap(const Options& o, bool seed_given) {
  Outcome outcome;
  const io::ExperimentFile ef = load_experiment_with_overrides(o, seed_given, outcome);
  const MCReport rep = bootstrap_experiment(ef.config);
  add_draw_artifacts(o, rep, outcome);
  return outcome;
}

Outcome cmd_vanishing_lambda(const Options& o, bool seed_given) {
  Outcome outcome;
  const io::ExperimentFile ef = load_experiment_with_overrides(o, seed_given, outcome);
  const MCReport rep = vanishing_lambda_experiment(ef.config);
  add_draw_artifacts(o, rep, outcome);
  outcome.extra.push_back({sibling(o.out, ".trace.csv"), io::variance_trace_csv(rep.variance_trace)});
  return outcome;
}

void print_error(std::ostream& err, std::string_view code, const std::string& message, int exit_code) {
  err << json{{"error", {{"code", code}, {"message", message}, {"exit_code", exit_code}}}}.dump() << "\n";
}

const std::vector<std::string> kSubcommands{"solve",     "divergence", "bounds",           "check-conditions",
                                            "variance",  "plan-cov",   "derivative-check", "bootstrap",
                                            "mc-clt",    "vanishing-lambda", "ot-exact", "replay"};

json option_value(const CLI::Option* opt) {
  if (opt->get_expected_min() == 0) return opt->as<bool>();
  if (opt->count() == 0) return opt->get_default_str();
  const auto& res = opt->results();
  if (res.size() == 1) return res.front();
  return res;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err, bool use_env) {
  CLI::App app{"Entropic optimal transport: solvers, sensitivities and resampling experiments", "erot"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);
  app.option_defaults()->always_capture_default();
  Options o;

  auto flag_env = [&](CLI::Option* opt, const std::string& name) {
    if (use_env) opt->envname(env_name(name));
    return opt;
  };
  auto add = [&](CLI::App* sub, const std::string& name, auto& target, const std::string& help) {
    return flag_env(sub->add_option("--" + name, target, help), name);
  };
  auto add_flag = [&](CLI::App* sub, const std::string& name, bool& target, const std::string& help) {
    return flag_env(sub->add_flag("--" + name, target, help), name);
  };

  auto common = [&](CLI::App* sub) {
    add(sub, "out", o.out, "Main JSON output path")->required();
    add(sub, "threads", o.threads, "Worker count (0: available parallelism)")->check(CLI::NonNegativeNumber);
    add(sub, "seed", o.seed, "Seed for stochastic subcommands");
    add(sub, "tol", o.tol, "Sinkhorn l1 marginal tolerance")->check(CLI::PositiveNumber);
    add(sub, "max-iter", o.max_iter, "Sinkhorn iteration cap")->check(CLI::PositiveNumber);
    add_flag(sub, "timing", o.timing, "Include wall-clock runtime in Monte Carlo reports");
  };
  auto instance = [&](CLI::App* sub, bool lambda_required) {
    add(sub, "r", o.r, "Measure r (JSON or CSV)")->required();
    add(sub, "s", o.s, "Measure s (JSON or CSV)")->required();
    add(sub, "cost", o.cost, "Cost spec JSON")->required();
    auto* l = add(sub, "lambda", o.lambda, "Regularization strength")->check(CLI::PositiveNumber);
    if (lambda_required) l->required();
    add(sub, "normalization", o.normalization, "Potential normalization: balanced | anchored_at_y1");
  };
  auto experiment = [&](CLI::App* sub) {
    add(sub, "config", o.config, "Experiment config JSON")->required();
    add(sub, "lambda", o.lambda, "Override the fixed regularization")->check(CLI::PositiveNumber);
    add(sub, "n", o.n, "Override the sample size")->check(CLI::PositiveNumber);
    add(sub, "replications", o.replications, "Override replications (bootstrap: B)")->check(CLI::PositiveNumber);
    add(sub, "statistic", o.statistic, "Override the statistic");
    add(sub, "sample-sizes", o.sample_sizes, "Override the sample sizes (vanishing-lambda)")->delimiter(',');
  };

  std::map<std::string, CLI::App*> subs;
  auto make = [&](const std::string& name, const std::string& help) {
    CLI::App* sub = app.add_subcommand(name, help);
    sub->option_defaults()->always_capture_default();
    subs[name] = sub;
    return sub;
  };

  CLI::App* sub = make("solve", "Solve EROT and write potentials, plan and value");
  instance(sub, true);
  common(sub);
  add_flag(sub, "sparse-plan", o.sparse_plan, "Write the plan as (i, j, value) triplets");

  sub = make("divergence", "Sinkhorn divergence");
  instance(sub, true);
  common(sub);

  sub = make("bounds", "Check potential and plan bounds against the dominating functions");
  instance(sub, true);
  common(sub);

  sub = make("check-conditions", "Summability conditions of the limit theorems");
  instance(sub, true);
  common(sub);
  add(sub, "theorem", o.theorem, "value | plan | divergence");
  add(sub, "mode", o.mode, "one_sample_r | one_sample_s | two_sample");

  sub = make("variance", "Limit variances of value, divergence and Sinkhorn cost");
  instance(sub, true);
  common(sub);
  add(sub, "mode", o.mode, "one_sample_r | one_sample_s | two_sample");
  add(sub, "delta", o.delta, "Two-sample ratio m / (n + m)");

  sub = make("plan-cov", "Covariance of plan functionals");
  instance(sub, true);
  common(sub);
  add(sub, "function", o.function, "JSON table, list of tables, or {functions: [...]}")->required();
  add(sub, "mode", o.mode, "one_sample_r | one_sample_s | two_sample");
  add(sub, "delta", o.delta, "Two-sample ratio m / (n + m)");
  add(sub, "draws", o.draws, "Draws from the Gaussian limit written to CSV")->check(CLI::NonNegativeNumber);

  sub = make("derivative-check", "Finite-difference check of the plan and value derivatives");
  instance(sub, true);
  common(sub);
  add(sub, "hx", o.hx, "Direction on X (JSON array summing to zero)");
  add(sub, "hy", o.hy, "Direction on Y (JSON array summing to zero)");
  add(sub, "steps", o.steps, "Finite-difference steps")->delimiter(',');

  sub = make("bootstrap", "Bootstrap of the value statistic from one simulated sample");
  experiment(sub);
  common(sub);

  sub = make("mc-clt", "Monte Carlo check of a limit theorem");
  experiment(sub);
  common(sub);

  sub = make("vanishing-lambda", "Experiment with lambda(n) -> 0");
  experiment(sub);
  common(sub);

  sub = make("ot-exact", "Exact optimal transport for small instances");
  instance(sub, false);
  common(sub);
  add(sub, "lambdas", o.lambdas, "Regularizations for the vanishing-regularization gap report")->delimiter(',');

  sub = make("replay", "Re-run the command recorded in a manifest");
  add(sub, "manifest", o.manifest, "Manifest JSON written by a previous run")->required();

  if (!args.empty() && !args.front().empty() && args.front()[0] != '-' &&
      std::find(kSubcommands.begin(), kSubcommands.end(), args.front()) == kSubcommands.end()) {
    print_error(err, to_string(ErrorCode::UnknownSubcommand), "unknown subcommand '" + args.front() + "'", 2);
    return 2;
  }

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    print_error(err, to_string(ErrorCode::ConfigParse), e.what(), 2);
    return 2;
  }

  std::string name;
  for (const auto& [key, s] : subs)
    if (s->parsed()) name = key;
  CLI::App* chosen = subs.at(name);

  try {
    if (name == "replay") {
      const json m = io::read_json_file(o.manifest);
      if (!m.contains("args") || !m.at("args").is_array())
        throw Error(ErrorCode::ConfigParse, "manifest has no 'args' list");
      return run(m.at("args").get<std::vector<std::string>>(), out, err, false);
    }

    const bool seed_given = chosen->get_option("--seed")->count() > 0;
    Outcome outcome;
    if (name == "solve") outcome = cmd_solve(o);
    else if (name == "divergence") outcome = cmd_divergence(o);
    else if (name == "bounds") outcome = cmd_bounds(o);
    else if (name == "check-conditions") outcome = cmd_check_conditions(o);
    else if (name == "variance") outcome = cmd_variance(o);
    else if (name == "plan-cov") outcome = cmd_plan_cov(o);
    else if (name == "derivative-check") outcome = cmd_derivative_check(o);
    else if (name == "bootstrap") outcome = cmd_bootstrap(o, seed_given);
    else if (name == "mc-clt") outcome = cmd_mc_clt(o, seed_given);
    else if (name == "vanishing-lambda") outcome = cmd_vanishing_lambda(o, seed_given);
    else if (name == "ot-exact") outcome = cmd_ot_exact(o);
    if (seed_given && outcome.seed_used) outcome.seed_source = "flag";

    const fs::path out_path = o.out;
    io::write_json_file(out_path, outcome.main);
    json artifacts = json::array({out_path.string()});
    for (const auto& a : outcome.extra) {
      io::write_text_file(a.path, a.text);
      artifacts.push_back(a.path.string());
    }

    json manifest_args = json::array({name});
    json config = json::object();
    json inputs = json::object();
    for (const CLI::Option* opt : chosen->get_options()) {
      if (opt->get_lnames().empty()) continue;
      const std::string lname = opt->get_lnames().front();
      if (lname == "help") continue;
      config[lname] = option_value(opt);
      if (opt->count() == 0) continue;
      if (opt->get_expected_min() == 0) {
        if (opt->as<bool>()) manifest_args.push_back("--" + lname);
        continue;
      }
      manifest_args.push_back("--" + lname);
      for (const auto& v : opt->results()) manifest_args.push_back(v);
    }
    for (const char* key : {"r", "s", "cost", "config", "function", "hx", "hy"}) {
      const CLI::Option* opt = chosen->get_option_no_throw(std::string("--") + key);
      if (opt == nullptr || opt->count() == 0) continue;
      const std::string path = opt->as<std::string>();
      inputs[key] = {{"path", path}, {"sha256", sha256_hex(io::read_text_file(path))}};
    }
    json seed{{"value", o.seed}, {"used", outcome.seed_used}};
    if (outcome.seed_used) {
      seed["source"] = outcome.seed_source;
      if (outcome.seed_source == "config") seed["value"] = io::read_json_file(o.config).at("seed");
    } else {
      seed["note"] = "deterministic run; seed ignored";
    }
    const json manifest{{"tool", "erot"},
                        {"version", kVersion},
                        {"subcommand", name},
                        {"args", manifest_args},
                        {"config", config},
                        {"inputs", inputs},
                        {"seed", seed},
                        {"artifacts", artifacts}};
    io::write_json_file(fs::path(out_path.string() + ".manifest.json"), manifest);
    return 0;
  } catch (const Error& e) {
    const int code = e.code() == ErrorCode::NonConvergence ? 3 : 2;
    print_error(err, to_string(e.code()), e.what(), code);
    return code;
  } catch (const json::exception& e) {
    print_error(err, to_string(ErrorCode::ConfigParse), e.what(), 2);
    return 2;
  } catch (const std::exception& e) {
    print_error(err, "Internal", e.what(), 1);
    return 1;
  }
}

int run(int argc, const char* const* argv) {
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
  return run(args, std::cout, std::cerr, true);
}

}  // namespace erot::cli
