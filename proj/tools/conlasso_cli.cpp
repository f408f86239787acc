// Batch front end over the C API: generate synthetic instances, solve at a
// fixed lambda, trace paths, cross-validate, run stability selection, and
// reshape saved results into plot-ready CSV. Machine consumers should read
// the files written to --out; the printed report is for humans.

#include "conlasso.h"

#include <CLI11.hpp>
#include <json.hpp>

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

namespace {

using nlohmann::json;

constexpr int kExitOk = 0;
constexpr int kExitUsage = 2;
constexpr int kExitIo = 3;
constexpr int kExitNoConverge = 4;
constexpr int kExitMissingInput = 5;

int exit_code_for(int status) {
  switch (status) {
    case CONLASSO_OK:
      return kExitOk;
    case CONLASSO_ERR_IO:
      return kExitIo;
    case CONLASSO_ERR_MAX_ITER:
      return kExitNoConverge;
    default:
      return kExitUsage;
  }
}

[[noreturn]] void fail(int code, const std::string& msg) {
  std::cerr << "error: " << msg << "\n";
  std::exit(code);
}

struct Settings {
  // dataset source (exactly one)
  std::string x_csv, y_csv, c_csv;
  json dataset;  // from config: {"x","y","c"} | {"features",...} | {"synthetic",...}

  std::string formulation = "R3";
  double rho = 0.0;         // <= 0 keeps default
  double rho_class = 1.0;   // >= 1 keeps default
  std::string method = "auto";
  long max_iter = 0;
  double tol = 0.0;
  double lam_min_ratio = 0.0;

  std::string lam = "";  // number or "theory"
  bool rescaled = false;
  bool rescaled_set = false;

  int folds = 0;
  int grid_size = 0;
  std::string rule;
  std::string mode;
  int q = 0;
  int B = 0;
  double threshold = -1.0;
  double fraction = 0.0;
  int num_grid = 0;

  std::string out = "results";
  std::uint64_t seed = 0;
  int threads = 0;
};

void merge_config_file(Settings& s, const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(kExitIo, "cannot open config " + path);
  json cfg;
  try {
    in >> cfg;
  } catch (const std::exception& e) {
    fail(kExitUsage, std::string("bad config json: ") + e.what());
  }
  if (cfg.contains("formulation")) {
    const auto& f = cfg["formulation"];
    if (f.is_string()) {
      s.formulation = f.get<std::string>();
    } else {
      if (f.contains("kind")) s.formulation = f["kind"].get<std::string>();
      if (f.contains("rho")) s.rho = f["rho"].get<double>();
      if (f.contains("rho_class")) s.rho_class = f["rho_class"].get<double>();
    }
  }
  if (cfg.contains("method")) s.method = cfg["method"].get<std::string>();
  if (cfg.contains("solver")) {
    const auto& sv = cfg["solver"];
    if (sv.contains("max_iter")) s.max_iter = sv["max_iter"].get<long>();
    if (sv.contains("tol")) s.tol = sv["tol"].get<double>();
    if (sv.contains("path_lambda_min_ratio"))
      s.lam_min_ratio = sv["path_lambda_min_ratio"].get<double>();
  }
  if (cfg.contains("fixed_lambda")) {
    const auto& fl = cfg["fixed_lambda"];
    if (fl.contains("lam")) {
      if (fl["lam"].is_string())
        s.lam = fl["lam"].get<std::string>();
      else
        s.lam = std::to_string(fl["lam"].get<double>());
    }
    if (fl.contains("rescaled")) {
      s.rescaled = fl["rescaled"].get<bool>();
      s.rescaled_set = true;
    }
  }
  if (cfg.contains("path")) {
    const auto& pp = cfg["path"];
    if (pp.contains("lambda_min_ratio")) s.lam_min_ratio = pp["lambda_min_ratio"].get<double>();
    if (pp.contains("num_grid")) s.num_grid = pp["num_grid"].get<int>();
  }
  if (cfg.contains("cv")) {
    const auto& cv = cfg["cv"];
    if (cv.contains("folds")) s.folds = cv["folds"].get<int>();
    if (cv.contains("grid_size")) s.grid_size = cv["grid_size"].get<int>();
    if (cv.contains("rule")) s.rule = cv["rule"].get<std::string>();
    if (cv.contains("seed")) s.seed = cv["seed"].get<std::uint64_t>();
    if (cv.contains("lambda_min_ratio")) s.lam_min_ratio = cv["lambda_min_ratio"].get<double>();
  }
  if (cfg.contains("stabsel")) {
    const auto& ss = cfg["stabsel"];
    if (ss.contains("mode")) s.mode = ss["mode"].get<std::string>();
    if (ss.contains("q")) s.q = ss["q"].get<int>();
    if (ss.contains("B")) s.B = ss["B"].get<int>();
    if (ss.contains("subsample_fraction")) s.fraction = ss["subsample_fraction"].get<double>();
    if (ss.contains("threshold")) s.threshold = ss["threshold"].get<double>();
    if (ss.contains("seed")) s.seed = ss["seed"].get<std::uint64_t>();
    if (ss.contains("lam")) s.lam = std::to_string(ss["lam"].get<double>());
    if (ss.contains("rescaled")) {
      s.rescaled = ss["rescaled"].get<bool>();
      s.rescaled_set = true;
    }
  }
  if (cfg.contains("dataset")) s.dataset = cfg["dataset"];
  if (cfg.contains("out")) s.out = cfg["out"].get<std::string>();
  if (cfg.contains("seed")) s.seed = cfg["seed"].get<std::uint64_t>();
  if (cfg.contains("threads")) s.threads = cfg["threads"].get<int>();
}

conlasso_problem* build_problem(const Settings& s) {
  conlasso_problem* p = nullptr;
  const bool have_files = !s.x_csv.empty() || !s.y_csv.empty();
  if (have_files) {
    if (s.x_csv.empty() || s.y_csv.empty()) fail(kExitUsage, "--x and --y must be given together");
    p = conlasso_problem_from_csv(s.x_csv.c_str(), s.y_csv.c_str(),
                                  s.c_csv.empty() ? nullptr : s.c_csv.c_str());
  } else if (!s.dataset.is_null() && s.dataset.contains("x")) {
    const std::string x = s.dataset["x"].get<std::string>();
    const std::string y = s.dataset["y"].get<std::string>();
    const std::string c = s.dataset.value("c", std::string());
    p = conlasso_problem_from_csv(x.c_str(), y.c_str(), c.empty() ? nullptr : c.c_str());
  } else if (!s.dataset.is_null() && s.dataset.contains("features")) {
    const std::string features = s.dataset["features"].get<std::string>();
    const std::string response = s.dataset.value("response", std::string("y"));
    std::vector<std::string> comp;
    if (s.dataset.contains("compositional"))
      comp = s.dataset["compositional"].get<std::vector<std::string>>();
    std::vector<const char*> comp_ptrs;
    for (const auto& c : comp) comp_ptrs.push_back(c.c_str());
    const bool all_comp = s.dataset.value("all_compositional", comp.empty());
    const double pc = s.dataset.value("pseudocount", 0.5);
    const bool closure = s.dataset.value("closure", true);
    const bool logt = s.dataset.value("log", true);
    const bool zs = s.dataset.value("zero_sum", true);
    const std::string ccsv = s.dataset.value("constraints", std::string());
    p = conlasso_problem_from_dataset(features.c_str(), response.c_str(),
                                      comp_ptrs.empty() ? nullptr : comp_ptrs.data(),
                                      conlasso_index(comp_ptrs.size()), all_comp ? 1 : 0, pc,
                                      closure ? 1 : 0, logt ? 1 : 0, zs ? 1 : 0,
                                      ccsv.empty() ? nullptr : ccsv.c_str());
  } else if (!s.dataset.is_null() && s.dataset.contains("synthetic")) {
    const auto& sy = s.dataset["synthetic"];
    p = conlasso_problem_from_synthetic(
        sy.value("n", 100), sy.value("d", 100), sy.value("d_nonzero", 5), sy.value("k", 1),
        sy.value("sigma", 0.5), sy.value("zerosum", true) ? 1 : 0, sy.value("seed", 0));
  } else {
    fail(kExitUsage, "no dataset source: pass --x/--y/--c or a config with a dataset entry");
  }
  if (!p) fail(kExitIo, conlasso_last_error());

  int rc = conlasso_problem_set_formulation(p, s.formulation.c_str(), s.rho, s.rho_class);
  if (rc != CONLASSO_OK) fail(kExitUsage, conlasso_last_error());
  rc = conlasso_problem_set_solver(p, s.method.c_str(), s.max_iter, s.tol, s.lam_min_ratio);
  if (rc != CONLASSO_OK) fail(kExitUsage, conlasso_last_error());
  conlasso_problem_set_threads(p, s.threads);
  rc = conlasso_problem_validate(p);
  if (rc != CONLASSO_OK) fail(kExitUsage, conlasso_last_error());
  return p;
}

void print_report(const char* title, const json& summary) {
  std::cout << "\n " << title << " : \n";
  if (summary.contains("selected") && summary["selected"].is_array() &&
      std::string(title) != "PATH COMPUTATION") {
    std::cout << "   Selected variables :  ";
    for (const auto& j : summary["selected"]) std::cout << j.get<long long>() << "    ";
    std::cout << "\n";
  }
  if (summary.value("converged", true) == false)
    std::cout << "   Converged :  false\n";
  const double secs = summary.value("runtime_seconds", 0.0);
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.3gs", secs);
  std::cout << "   Running time :  " << buf << "\n";
}

int run_task(const Settings& s, const std::string& task) {
  conlasso_problem* p = build_problem(s);
  conlasso_result* r = nullptr;
  int rc = CONLASSO_OK;

  double lam_value = 0.1;
  bool theory = false;
  bool rescaled = s.rescaled_set ? s.rescaled : true;
  if (!s.lam.empty()) {
    if (s.lam == "theory") {
      theory = true;
    } else {
      try {
        lam_value = std::stod(s.lam);
      } catch (...) {
        fail(kExitUsage, "--lam expects a number or 'theory'");
      }
      if (!s.rescaled_set) rescaled = false;
    }
  }

  if (task == "fixed") {
    rc = conlasso_solve_fixed(p, lam_value, rescaled ? 1 : 0, theory ? 1 : 0, s.seed, &r);
  } else if (task == "path") {
    rc = conlasso_solve_path(p, s.lam_min_ratio, s.num_grid, s.seed, &r);
  } else if (task == "cv") {
    rc = conlasso_run_cv(p, s.folds, s.grid_size, s.rule.empty() ? "min" : s.rule.c_str(),
                         s.lam_min_ratio, s.seed, &r);
  } else {
    rc = conlasso_run_stabsel(p, s.mode.empty() ? "first-q" : s.mode.c_str(), s.q, s.B,
                              s.fraction, s.threshold, s.lam.empty() ? 0.1 : lam_value,
                              rescaled ? 1 : 0, s.lam_min_ratio, s.seed, &r);
  }

  if (!r) {
    const std::string msg = conlasso_last_error();
    conlasso_problem_free(p);
    fail(exit_code_for(rc), msg);
  }

  int save_rc = conlasso_result_save(r, s.out.c_str());
  if (save_rc != CONLASSO_OK) {
    const std::string msg = conlasso_last_error();
    conlasso_result_free(r);
    conlasso_problem_free(p);
    fail(kExitIo, msg);
  }

  char* js = conlasso_result_summary_json(r);
  json summary = json::parse(js);
  conlasso_string_free(js);

  const char* title = task == "fixed"  ? "LAMBDA FIXED"
                      : task == "path" ? "PATH COMPUTATION"
                      : task == "cv"   ? "CROSS VALIDATION"
                                       : "STABILITY SELECTION";
  print_report(title, summary);

  conlasso_result_free(r);
  conlasso_problem_free(p);
  return rc == CONLASSO_ERR_MAX_ITER ? kExitNoConverge : kExitOk;
}

void add_shared_options(CLI::App* cmd, Settings& s, std::string& config_path) {
  cmd->add_option("--x", s.x_csv, "design matrix csv");
  cmd->add_option("--y", s.y_csv, "response csv (single column)");
  cmd->add_option("--c", s.c_csv, "constraint matrix csv");
  cmd->add_option("--config", config_path, "json config file (flags override it)");
  cmd->add_option("--out", s.out, "output directory");
  cmd->add_option("--seed", s.seed, "seed for randomized procedures");
  cmd->add_option("--threads", s.threads, "worker threads (0 = machine parallelism)");
  cmd->add_option("--formulation", s.formulation, "R1 R2 R3 R4 C1 C2");
  cmd->add_option("--rho", s.rho, "huber threshold (R2/R4)");
  cmd->add_option("--rho-class", s.rho_class, "huberization knee (C2)");
  cmd->add_option("--method", s.method, "auto path-alg dr p-pds pf-pds");
  cmd->add_option("--max-iter", s.max_iter, "iteration cap for splitting schemes");
  cmd->add_option("--tol", s.tol, "iterate-change stopping tolerance");
  cmd->add_option("--lam-min-ratio", s.lam_min_ratio, "lambda_min / lambda_max for paths");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"constrained sparse regression and classification toolkit"};
  app.require_subcommand(1);

  // synth
  long long sy_n = 100, sy_d = 100, sy_nonzero = 5, sy_k = 1;
  double sy_sigma = 0.5;
  bool sy_zerosum = false;
  std::uint64_t sy_seed = 0;
  std::string sy_out = "synth";
  auto* synth = app.add_subcommand("synth", "generate a synthetic problem instance");
  synth->add_option("--n", sy_n, "samples");
  synth->add_option("--d", sy_d, "features");
  synth->add_option("--nonzero", sy_nonzero, "planted support size");
  synth->add_option("--k", sy_k, "constraint rows");
  synth->add_option("--sigma", sy_sigma, "noise scale");
  synth->add_flag("--zerosum", sy_zerosum, "zero-sum planted coefficients and ones row");
  synth->add_option("--seed", sy_seed, "generator seed");
  synth->add_option("--out", sy_out, "output directory");

  Settings s_solve, s_path, s_cv, s_stab;
  std::string cfg_solve, cfg_path, cfg_cv, cfg_stab;
  std::string lam_solve, lam_stab;
  bool rescaled_solve = false, rescaled_stab = false;

  auto* solve = app.add_subcommand("solve", "solve at a fixed lambda");
  add_shared_options(solve, s_solve, cfg_solve);
  solve->add_option("--lam", lam_solve, "lambda value, proportion of lambda_max, or 'theory'");
  solve->add_flag("--rescaled", rescaled_solve, "treat --lam as a proportion of lambda_max");

  auto* path = app.add_subcommand("path", "trace the solution path");
  add_shared_options(path, s_path, cfg_path);
  path->add_option("--num-grid", s_path.num_grid, "grid size for formulations without a homotopy");

  auto* cv = app.add_subcommand("cv", "k-fold cross validation over the lambda grid");
  add_shared_options(cv, s_cv, cfg_cv);
  cv->add_option("--folds", s_cv.folds, "number of folds");
  cv->add_option("--grid-size", s_cv.grid_size, "lambda grid size");
  cv->add_option("--rule", s_cv.rule, "min or 1se");

  auto* stab = app.add_subcommand("stabsel", "stability selection over subsamples");
  add_shared_options(stab, s_stab, cfg_stab);
  stab->add_option("--mode", s_stab.mode, "fixed-lam first-q max-coef");
  stab->add_option("--q", s_stab.q, "variables per subsample (first-q / max-coef)");
  stab->add_option("--B", s_stab.B, "number of subsamples");
  stab->add_option("--threshold", s_stab.threshold, "selection frequency threshold");
  stab->add_option("--fraction", s_stab.fraction, "subsample fraction");
  stab->add_option("--lam", lam_stab, "lambda for fixed-lam mode");
  stab->add_flag("--rescaled", rescaled_stab, "treat --lam as a proportion of lambda_max");

  std::string pd_dir, pd_kind, pd_out = "plot.csv";
  auto* plot = app.add_subcommand("plotdata", "reshape saved results into tidy plot CSV");
  plot->add_option("dir", pd_dir, "result directory")->required();
  plot->add_option("--kind", pd_kind, "coefficients path stabsel-profile cv-curve")->required();
  plot->add_option("--out", pd_out, "output csv");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    std::cout << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  }

  if (synth->parsed()) {
    const int rc = conlasso_synth_write(sy_n, sy_d, sy_nonzero, sy_k, sy_sigma,
                                        sy_zerosum ? 1 : 0, sy_seed, sy_out.c_str());
    if (rc != CONLASSO_OK) fail(exit_code_for(rc), conlasso_last_error());
    std::cout << "wrote X.csv, y.csv, C.csv, truth.json to " << sy_out << "\n";
    return kExitOk;
  }

  if (plot->parsed()) {
    const int rc = conlasso_plotdata(pd_dir.c_str(), pd_kind.c_str(), pd_out.c_str());
    if (rc == CONLASSO_ERR_IO) fail(kExitMissingInput, conlasso_last_error());
    if (rc != CONLASSO_OK) fail(exit_code_for(rc), conlasso_last_error());
    return kExitOk;
  }

  auto finish_settings = [&](Settings& s, CLI::App* cmd, const std::string& cfg,
                             const std::string& lam_flag, bool rescaled_flag) {
    Settings flags = s;  // values as parsed (flags or defaults)
    if (!cfg.empty()) {
      Settings from_file;
      merge_config_file(from_file, cfg);
      // start from the file, then re-apply every flag the user passed
      Settings merged = from_file;
      auto passed = [&](const std::string& name) {
        const CLI::Option* o = cmd->get_option_no_throw(name);
        return o && o->count() > 0;
      };
      if (passed("--x")) merged.x_csv = flags.x_csv;
      if (passed("--y")) merged.y_csv = flags.y_csv;
      if (passed("--c")) merged.c_csv = flags.c_csv;
      if (passed("--out")) merged.out = flags.out;
      if (passed("--seed")) merged.seed = flags.seed;
      if (passed("--threads")) merged.threads = flags.threads;
      if (passed("--formulation")) merged.formulation = flags.formulation;
      if (passed("--rho")) merged.rho = flags.rho;
      if (passed("--rho-class")) merged.rho_class = flags.rho_class;
      if (passed("--method")) merged.method = flags.method;
      if (passed("--max-iter")) merged.max_iter = flags.max_iter;
      if (passed("--tol")) merged.tol = flags.tol;
      if (passed("--lam-min-ratio")) merged.lam_min_ratio = flags.lam_min_ratio;
      if (passed("--folds")) merged.folds = flags.folds;
      if (passed("--grid-size")) merged.grid_size = flags.grid_size;
      if (passed("--rule")) merged.rule = flags.rule;
      if (passed("--mode")) merged.mode = flags.mode;
      if (passed("--q")) merged.q = flags.q;
      if (passed("--B")) merged.B = flags.B;
      if (passed("--threshold")) merged.threshold = flags.threshold;
      if (passed("--fraction")) merged.fraction = flags.fraction;
      if (passed("--num-grid")) merged.num_grid = flags.num_grid;
      s = merged;
    }
    if (!lam_flag.empty()) {
      s.lam = lam_flag;
      if (rescaled_flag) {
        s.rescaled = true;
        s.rescaled_set = true;
      }
    } else if (rescaled_flag) {
      s.rescaled = true;
      s.rescaled_set = true;
    }
  };

  if (solve->parsed()) {
    finish_settings(s_solve, solve, cfg_solve, lam_solve, rescaled_solve);
    return run_task(s_solve, "fixed");
  }
  if (path->parsed()) {
    finish_settings(s_path, path, cfg_path, "", false);
    return run_task(s_path, "path");
  }
  if (cv->parsed()) {
    finish_settings(s_cv, cv, cfg_cv, "", false);
    return run_task(s_cv, "cv");
  }
  if (stab->parsed()) {
    finish_settings(s_stab, stab, cfg_stab, lam_stab, rescaled_stab);
    return run_task(s_stab, "stabsel");
  }
  return kExitUsage;
}
