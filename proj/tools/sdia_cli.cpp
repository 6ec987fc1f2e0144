// Command-line front end: model assembly, attack construction, metrics,
// detection simulation, and the two experiment sweeps.
//
// Exit codes: 0 success, 1 rejected input, 2 numerical failure.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "sdia/sdia.hpp"

namespace {

void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw sdia::validation_error("cannot open '" + path + "' for writing");
  }
  out << content;
  if (!out) {
    throw sdia::validation_error("failed while writing '" + path + "'");
  }
}

sdia::ObservationModel load_model(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw sdia::validation_error("cannot open model file '" + path + "'");
  }
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw sdia::validation_error("model file '" + path +
                                 "' is not valid JSON: " + e.what());
  }
  return sdia::model_from_json(j);
}

sdia::AttackPlan load_attack(const std::string& path, int m) {
  std::ifstream in(path);
  if (!in) {
    throw sdia::validation_error("cannot open attack file '" + path + "'");
  }
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw sdia::validation_error("attack file '" + path +
                                 "' is not valid JSON: " + e.what());
  }
  return sdia::attack_plan_from_json(j, m);
}

std::vector<sdia::Algorithm> parse_algorithms(
    const std::vector<std::string>& names) {
  std::vector<sdia::Algorithm> algs;
  for (const auto& name : names) {
    if (name == "independent") {
      algs.push_back(sdia::Algorithm::independent);
    } else if (name == "correlated") {
      algs.push_back(sdia::Algorithm::correlated);
    } else if (name == "both") {
      algs.push_back(sdia::Algorithm::independent);
      algs.push_back(sdia::Algorithm::correlated);
    } else {
      throw sdia::validation_error(
          "unknown algorithm '" + name +
          "' (expected independent, correlated, or both)");
    }
  }
  return algs;
}

void apply_k_fractions(sdia::ExperimentConfig& cfg,
                       const std::vector<double>& fracs) {
  if (fracs.empty()) return;
  for (double f : fracs) {
    if (!(f > 0.0) || f > 1.0) {
      throw sdia::validation_error("sensor fraction must lie in (0, 1]");
    }
  }
  cfg.k_fractions = fracs;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "Gaussian data-injection attack design against linear state "
      "estimation"};
  app.require_subcommand(1);

  // ---- build ----
  auto* build = app.add_subcommand(
      "build", "Assemble an observation model from a network case");
  std::string build_case = "ieee9";
  double build_rho = 0.9;
  double build_snr = 30.0;
  std::string build_out = "model.json";
  build->add_option("--case", build_case,
                    "Bundled case name (ieee9, ieee14, ieee30) or a case "
                    "file path");
  build->add_option("--rho", build_rho, "State correlation in [0, 1)");
  build->add_option("--snr-db", build_snr, "Signal-to-noise ratio in dB");
  build->add_option("--out", build_out, "Output model JSON path");
  build->callback([&] {
    const sdia::GridCase gc = sdia::resolve_case(build_case);
    const sdia::ObservationModel mod =
        sdia::assemble_model(gc, build_rho, build_snr);
    std::ostringstream os;
    os << sdia::model_to_json(mod).dump(2) << '\n';
    write_text_file(build_out, os.str());
    std::cout << "wrote " << build_out << " (system " << mod.name
              << ", m=" << mod.m << ", n=" << mod.n
              << ", sigma2=" << sdia::detail::csv_double(mod.sigma2) << ")\n";
  });

  // ---- attack ----
  auto* attack = app.add_subcommand(
      "attack", "Construct a sensor-budgeted attack covariance");
  std::string attack_model = "model.json";
  std::string attack_alg = "independent";
  int attack_k = 1;
  double attack_lambda = 8.0;
  double attack_tol = 1e-8;
  int attack_iter_cap = 10000;
  bool attack_project = false;
  std::string attack_out = "attack.json";
  std::string attack_trace;
  attack->add_option("--model", attack_model, "Model JSON path")->required();
  attack->add_option("--algorithm", attack_alg,
                     "independent or correlated")
      ->required();
  attack->add_option("--k", attack_k, "Sensor budget")->required();
  attack->add_option("--lambda", attack_lambda, "Stealth weight (>= 1)")
      ->required();
  attack->add_option("--tol", attack_tol,
                     "Inner solver tolerance (correlated)");
  attack->add_option("--iter-cap", attack_iter_cap,
                     "Inner solver iteration cap (correlated)");
  attack->add_flag("--project-each-epoch", attack_project,
                   "PSD-project the accumulated covariance every epoch");
  attack->add_option("--out", attack_out, "Output attack JSON path");
  attack->add_option("--trace", attack_trace,
                     "Trace CSV path (default: <out stem>_trace.csv)");
  attack->callback([&] {
    const sdia::ObservationModel mod = load_model(attack_model);
    if (attack_trace.empty()) {
      std::filesystem::path p(attack_out);
      p.replace_extension();
      attack_trace = p.string() + "_trace.csv";
    }
    sdia::AttackPlan plan;
    sdia::GreedyTrace trace;
    std::ostringstream trace_csv;
    if (attack_alg == "independent") {
      std::tie(plan, trace) =
          sdia::greedy_independent(mod, attack_k, attack_lambda);
      sdia::write_independent_trace_csv(trace, trace_csv);
    } else if (attack_alg == "correlated") {
      sdia::CorrelatedOptions opts;
      opts.tol = attack_tol;
      opts.iter_cap = attack_iter_cap;
      opts.project_each_epoch = attack_project;
      std::tie(plan, trace) =
          sdia::greedy_correlated(mod, attack_k, attack_lambda, opts);
      sdia::write_correlated_trace_csv(trace, trace_csv);
    } else {
      throw sdia::validation_error("unknown algorithm '" + attack_alg +
                                   "' (expected independent or correlated)");
    }
    std::ostringstream os;
    os << sdia::attack_plan_to_json(plan).dump(2) << '\n';
    write_text_file(attack_out, os.str());
    write_text_file(attack_trace, trace_csv.str());
    const double J = sdia::cost_J(mod, plan.Sigma_AA, plan.lambda);
    std::cout << "wrote " << attack_out << " and " << attack_trace << " ("
              << plan.support.size() << " of " << plan.k
              << " sensors selected, J=" << sdia::detail::csv_double(J)
              << (trace.shortfall ? ", shortfall" : "") << ")\n";
  });

  // ---- metrics ----
  auto* metrics = app.add_subcommand(
      "metrics", "Evaluate cost, information rate, and divergence of a plan");
  std::string metrics_model = "model.json";
  std::string metrics_attack = "attack.json";
  std::string metrics_out;
  metrics->add_option("--model", metrics_model, "Model JSON path")
      ->required();
  metrics->add_option("--attack", metrics_attack, "Attack JSON path")
      ->required();
  metrics->add_option("--out", metrics_out,
                      "Output JSON path (default: stdout)");
  metrics->callback([&] {
    const sdia::ObservationModel mod = load_model(metrics_model);
    const sdia::AttackPlan plan = load_attack(metrics_attack, mod.m);
    nlohmann::json j;
    j["J"] = sdia::cost_J(mod, plan.Sigma_AA, plan.lambda);
    j["mi"] = sdia::mutual_information(mod, plan.Sigma_AA);
    j["kl"] = sdia::kl_divergence(mod, plan.Sigma_AA);
    if (metrics_out.empty()) {
      std::cout << j.dump(2) << '\n';
    } else {
      write_text_file(metrics_out, j.dump(2) + "\n");
      std::cout << "wrote " << metrics_out << '\n';
    }
  });

  // ---- detect ----
  auto* detect = app.add_subcommand(
      "detect", "Monte-Carlo detection and false-alarm rates of a plan");
  std::string detect_model = "model.json";
  std::string detect_attack = "attack.json";
  double detect_tau = 2.0;
  int detect_n = 100000;
  std::uint64_t detect_seed = 0;
  std::string detect_out;
  detect->add_option("--model", detect_model, "Model JSON path")->required();
  detect->add_option("--attack", detect_attack, "Attack JSON path")
      ->required();
  detect->add_option("--tau", detect_tau, "LRT threshold (> 0)");
  detect->add_option("--n-samples", detect_n, "Monte-Carlo sample count");
  detect->add_option("--seed", detect_seed, "Random seed");
  detect->add_option("--out", detect_out,
                     "Output CSV path (default: stdout)");
  detect->callback([&] {
    const sdia::ObservationModel mod = load_model(detect_model);
    const sdia::AttackPlan plan = load_attack(detect_attack, mod.m);
    sdia::DetectionConfig dc;
    dc.tau = detect_tau;
    dc.n_samples = detect_n;
    dc.seed = detect_seed;
    sdia::DetectionRow row;
    row.lambda = plan.lambda;
    row.k = plan.k;
    row.tau = detect_tau;
    row.n_samples = detect_n;
    row.seed = detect_seed;
    row.detect = sdia::detection_probability(mod, plan.Sigma_AA, dc);
    row.false_alarm = sdia::false_alarm_probability(mod, plan.Sigma_AA, dc);
    std::ostringstream os;
    sdia::write_detection_csv(row, os);
    if (detect_out.empty()) {
      std::cout << os.str();
    } else {
      write_text_file(detect_out, os.str());
      std::cout << "wrote " << detect_out << '\n';
    }
  });

  // ---- shared sweep options ----
  auto add_sweep_options = [](CLI::App* sc, std::string& case_ref,
                              double& rho, std::vector<double>& snr,
                              std::vector<double>& lambda,
                              std::vector<int>& ks,
                              std::vector<double>& fracs,
                              std::vector<std::string>& algs,
                              std::string& out_dir, double& tol,
                              int& iter_cap) {
    sc->add_option("--case", case_ref,
                   "Bundled case name or case file path");
    sc->add_option("--rho", rho, "State correlation in [0, 1)");
    sc->add_option("--snr-db", snr, "SNR grid in dB (repeatable)");
    sc->add_option("--lambda", lambda, "Stealth weight grid (repeatable)");
    sc->add_option("--k", ks, "Explicit sensor budgets (repeatable)");
    sc->add_option("--k-frac", fracs,
                   "Sensor budget fractions of m in (0, 1] (repeatable)");
    sc->add_option("--algorithm", algs,
                   "independent, correlated, or both (repeatable)");
    sc->add_option("--out-dir", out_dir, "Output directory");
    sc->add_option("--tol", tol, "Inner solver tolerance (correlated)");
    sc->add_option("--iter-cap", iter_cap,
                   "Inner solver iteration cap (correlated)");
  };

  // ---- sweep-k ----
  auto* sweep_k = app.add_subcommand(
      "sweep-k", "Cost vs sensor budget across the configuration grid");
  std::string sk_case = "ieee9";
  double sk_rho = 0.9;
  std::vector<double> sk_snr = {30.0};
  std::vector<double> sk_lambda = {8.0};
  std::vector<int> sk_k;
  std::vector<double> sk_fracs;
  std::vector<std::string> sk_algs = {"both"};
  std::string sk_out_dir = ".";
  double sk_tol = 1e-8;
  int sk_iter_cap = 10000;
  add_sweep_options(sweep_k, sk_case, sk_rho, sk_snr, sk_lambda, sk_k,
                    sk_fracs, sk_algs, sk_out_dir, sk_tol, sk_iter_cap);
  sweep_k->callback([&] {
    sdia::ExperimentConfig cfg;
    cfg.case_ref = sk_case;
    cfg.rho = sk_rho;
    cfg.snr_db = sk_snr;
    cfg.lambda = sk_lambda;
    cfg.k = sk_k;
    apply_k_fractions(cfg, sk_fracs);
    cfg.algorithms = parse_algorithms(sk_algs);
    cfg.correlated.tol = sk_tol;
    cfg.correlated.iter_cap = sk_iter_cap;
    const auto rows = sdia::run_sweep_k(cfg);
    std::ostringstream os;
    sdia::write_sweep_k_csv(rows, os);
    const std::string path =
        (std::filesystem::path(sk_out_dir) / "sweep_k.csv").string();
    write_text_file(path, os.str());
    std::cout << "wrote " << path << " (" << rows.size() << " rows)\n";
  });

  // ---- sweep-lambda ----
  auto* sweep_lambda = app.add_subcommand(
      "sweep-lambda",
      "Information/detectability vs stealth weight with Monte-Carlo "
      "detection");
  std::string sl_case = "ieee9";
  double sl_rho = 0.9;
  std::vector<double> sl_snr = {30.0};
  std::vector<double> sl_lambda = {1.0, 2.0, 4.0, 8.0, 16.0};
  std::vector<int> sl_k;
  std::vector<double> sl_fracs;
  std::vector<std::string> sl_algs = {"both"};
  std::string sl_out_dir = ".";
  double sl_tol = 1e-8;
  int sl_iter_cap = 10000;
  double sl_tau = 2.0;
  int sl_n = 100000;
  std::uint64_t sl_seed = 12345;
  add_sweep_options(sweep_lambda, sl_case, sl_rho, sl_snr, sl_lambda, sl_k,
                    sl_fracs, sl_algs, sl_out_dir, sl_tol, sl_iter_cap);
  sweep_lambda->add_option("--tau", sl_tau, "LRT threshold (> 0)");
  sweep_lambda->add_option("--n-samples", sl_n, "Monte-Carlo sample count");
  sweep_lambda->add_option("--seed", sl_seed, "Base random seed");
  sweep_lambda->callback([&] {
    sdia::ExperimentConfig cfg;
    cfg.case_ref = sl_case;
    cfg.rho = sl_rho;
    cfg.snr_db = sl_snr;
    cfg.lambda = sl_lambda;
    cfg.k = sl_k;
    apply_k_fractions(cfg, sl_fracs);
    cfg.algorithms = parse_algorithms(sl_algs);
    cfg.correlated.tol = sl_tol;
    cfg.correlated.iter_cap = sl_iter_cap;
    cfg.tau = sl_tau;
    cfg.n_samples = sl_n;
    cfg.seed = sl_seed;
    const auto rows = sdia::run_sweep_lambda(cfg);
    std::ostringstream os;
    sdia::write_sweep_lambda_csv(rows, os);
    const std::string path =
        (std::filesystem::path(sl_out_dir) / "sweep_lambda.csv").string();
    write_text_file(path, os.str());
    std::cout << "wrote " << path << " (" << rows.size() << " rows)\n";
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  } catch (const sdia::validation_error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const sdia::numerical_error& e) {
    std::cerr << "numerical error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
