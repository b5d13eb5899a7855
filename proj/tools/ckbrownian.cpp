// ckbrownian: simulate, ensemble and verify subcommands.

#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include "ckb/ensemble.hpp"
#include "ckb/io.hpp"
#include "ckb/kernels.hpp"
#include "ckb/noise.hpp"
#include "ckb/tdse_solver.hpp"
#include "ckb/validate.hpp"
#include "ckb/verify.hpp"

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace {

struct CommonArgs {
  std::string config;
  std::string out = ".";
  std::optional<std::uint64_t> seed;
  std::string engine;
};

unsigned worker_count() {
  if (const char* env = std::getenv("CKBROWNIAN_THREADS")) {
    try {
      const long v = std::stol(env);
      if (v > 0) return static_cast<unsigned>(v);
    } catch (const std::exception&) {
    }
    std::cerr << "warning: ignoring invalid CKBROWNIAN_THREADS='" << env << "'\n";
  }
  return 0;
}

std::string utc_timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::ostringstream os;
  os << std::put_time(std::gmtime(&now), "%Y-%m-%dT%H:%M:%SZ");
  return os.str();
}

ckb::RunConfig load(const CommonArgs& args) {
  ckb::RunConfig cfg = ckb::load_config(args.config);
  if (args.seed) cfg.seed = *args.seed;
  if (!args.engine.empty()) cfg.engine = args.engine;
  return cfg;
}

json config_json(const ckb::RunConfig& c) {
  const ckb::PhysicalParams p = c.params();
  return {{"params", {{"m", c.m}, {"eta", c.eta}, {"gamma", p.gamma()}, {"D", c.D}}},
          {"packet", {{"sigma0", c.sigma0}, {"x0", c.x0}}},
          {"time_grid", {{"t_end", c.t_end}, {"n_steps", c.n_steps}, {"dt", c.tgrid().dt()}}},
          {"spatial_grid", {{"x_min", c.x_min}, {"x_max", c.x_max}, {"n_points", c.n_points}}},
          {"engine", c.engine},
          {"seed", c.seed}};
}

json check_json(const std::string& name, double value, double tol, bool pass) {
  return {{"name", name}, {"value", value}, {"tolerance", tol}, {"pass", pass}};
}

void write_file(const fs::path& path, const std::string& content) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write '" + path.string() + "'");
  f << content;
}

std::string csv_string(const ckb::CsvTable& t) {
  std::ostringstream os;
  t.write(os);
  return os.str();
}

// Domain excursion is fatal whenever the solver runs on the grid.
bool check_domain(const ckb::ValidatedConfig& v, bool uses_solver) {
  for (const auto& w : v.warnings) std::cerr << "warning: " << w << '\n';
  if (uses_solver && !v.warnings.empty()) {
    std::cerr << "error: domain-excursion guard failed for the solver engine; widen x_min/x_max\n";
    return false;
  }
  return true;
}

ckb::CsvTable analytic_table(const ckb::RunConfig& c, const ckb::NoisePath& path) {
  const ckb::PhysicalParams p = c.params();
  const ckb::GaussianPacket pk(c.sigma0, c.x0);
  const ckb::SpatialGrid xg = c.xgrid();
  const ckb::PathIntegrals in = ckb::compute_path_integrals(path, p);
  ckb::CsvTable t(ckb::simulate_csv_columns());
  for (std::size_t j = 0; j < path.grid().n_nodes(); ++j) {
    const ckb::Observables o = ckb::observables(ckb::evolve_gaussian(pk, in, p, j, xg));
    t.add_row({path.grid().node(j), in.tau[j], o.norm, o.mean_x, o.var_x,
               ckb::gaussian_width(c.sigma0, c.m, in.tau[j]), in.drift[j], in.impulse[j], in.phase[j]});
  }
  return t;
}

ckb::CsvTable solver_table(const ckb::RunConfig& c, const ckb::NoisePath& path, double& max_drift) {
  const ckb::PhysicalParams p = c.params();
  const ckb::GaussianPacket pk(c.sigma0, c.x0);
  const ckb::PathIntegrals in = ckb::compute_path_integrals(path, p);
  const ckb::SolverRun r =
      ckb::run(pk, path, p, ckb::SolverConfig{c.xgrid(), path.grid(), ckb::SplittingScheme::strang, c.norm_tol, {}});
  max_drift = r.max_norm_drift;
  ckb::CsvTable t(ckb::simulate_csv_columns());
  for (std::size_t j = 0; j < path.grid().n_nodes(); ++j) {
    const auto& o = r.obs[j];
    t.add_row({path.grid().node(j), in.tau[j], o.norm, o.mean_x, o.var_x,
               ckb::gaussian_width(c.sigma0, c.m, in.tau[j]), in.drift[j], in.impulse[j], in.phase[j]});
  }
  return t;
}

int cmd_simulate(const CommonArgs& args) {
  const ckb::RunConfig c = load(args);
  const ckb::PhysicalParams p = c.params();
  const ckb::GaussianPacket pk(c.sigma0, c.x0);
  const ckb::TimeGrid tg = c.tgrid();
  const auto v = ckb::validate(p, pk, tg, c.xgrid());
  const bool run_analytic = c.engine != "solver";
  const bool run_solver = c.engine != "analytic";
  if (!check_domain(v, run_solver)) return 2;

  const ckb::NoisePath path = c.force == "white"      ? ckb::make_white_noise(p, tg, c.seed)
                              : c.force == "constant" ? ckb::make_constant_force(c.F0, tg)
                                                      : ckb::make_zero_force(tg);

  fs::create_directories(args.out);
  json manifest;
  manifest["command"] = "simulate";
  manifest["timestamp"] = utc_timestamp();
  manifest["config"] = config_json(c);
  manifest["force"] = {{"kind", ckb::to_string(path.meta().kind)}, {"F0", c.F0}, {"seed", c.seed}};
  manifest["warnings"] = v.warnings;
  manifest["outputs"] = json::array();
  manifest["checks"] = json::array();

  std::optional<ckb::CsvTable> analytic;
  std::optional<ckb::CsvTable> solver;
  if (run_analytic) {
    analytic = analytic_table(c, path);
    write_file(fs::path(args.out) / "simulate_analytic.csv", csv_string(*analytic));
    manifest["outputs"].push_back("simulate_analytic.csv");
  }
  bool ok = true;
  if (run_solver) {
    double drift = 0.0;
    solver = solver_table(c, path, drift);
    write_file(fs::path(args.out) / "simulate_solver.csv", csv_string(*solver));
    manifest["outputs"].push_back("simulate_solver.csv");
    manifest["checks"].push_back(check_json("solver max norm drift", drift, c.norm_tol, drift <= c.norm_tol));
  }
  if (analytic && solver) {
    double dmean = 0.0;
    double dwidth = 0.0;
    for (std::size_t j = 0; j < analytic->rows().size(); ++j) {
      const auto& a = analytic->rows()[j];
      const auto& s = solver->rows()[j];
      dmean = std::max(dmean, std::abs(a[3] - s[3]));
      dwidth = std::max(dwidth, std::abs(std::sqrt(a[4]) - std::sqrt(s[4])));
    }
    const bool pass_mean = dmean <= c.engine_tol;
    const bool pass_width = dwidth <= c.engine_tol;
    manifest["checks"].push_back(check_json("max |mean_x analytic - solver|", dmean, c.engine_tol, pass_mean));
    manifest["checks"].push_back(check_json("max |width analytic - solver|", dwidth, c.engine_tol, pass_width));
    ok = pass_mean && pass_width;
  }
  write_file(fs::path(args.out) / "simulate_manifest.json", manifest.dump(2) + "\n");
  std::cout << "simulate: wrote " << manifest["outputs"].size() << " CSV file(s) to " << args.out << '\n';
  return ok ? 0 : 1;
}

ckb::CsvTable ensemble_table(const ckb::EnsembleReport& rep) {
  ckb::CsvTable t(ckb::ensemble_csv_columns());
  for (std::size_t j = 0; j < rep.times.size(); ++j) {
    const ckb::Decomposition d = ckb::decompose_uncertainty(rep, j);
    t.add_row({rep.times[j], rep.tau[j], rep.center_mean[j], rep.center_var[j], d.dx_qu, d.dx_cl_sample,
               d.dx_cl_analytic, d.dx_total});
  }
  return t;
}

json probe_checks(const ckb::RunConfig& c, const ckb::EnsembleReport& rep) {
  const ckb::PhysicalParams p = c.params();
  const ckb::TimeGrid tg = c.tgrid();
  const double n = static_cast<double>(rep.n_paths);
  const double var_tol = 3.0 * std::sqrt(2.0 / (n - 1.0));
  const auto probes = c.probe_times.empty() ? ckb::default_probe_times(p) : c.probe_times;
  json out = json::array();
  for (double t : probes) {
    if (t > tg.t_end()) continue;
    const std::size_t j = tg.nearest(t);
    const double node_t = tg.node(j);
    json probe = {{"t", node_t}, {"center_var", rep.center_var[j]}, {"center_mean", rep.center_mean[j]}};
    const double rest = ckb::center_variance_from_rest(p, node_t);
    probe["var_from_rest"] = rest;
    if (rest > 0.0) {
      const double dev = std::abs(rep.center_var[j] / rest - 1.0);
      probe["from_rest_check"] = check_json("|var/var_from_rest - 1|", dev, var_tol, dev <= var_tol);
    }
    if (p.eta() > 0.0 && rep.dx_cl_analytic[j] > 0.0) {
      const double target = rep.dx_cl_analytic[j] * rep.dx_cl_analytic[j];
      const double dev = std::abs(rep.center_var[j] / target - 1.0);
      probe["dx_cl_analytic_sq"] = target;
      probe["statistical_check"] = check_json("|var/dx_cl_analytic^2 - 1|", dev, var_tol, dev <= var_tol);
      const double mean_tol = 3.0 * rep.dx_cl_analytic[j] / std::sqrt(n);
      const double mdev = std::abs(rep.center_mean[j] - c.x0);
      probe["center_mean_check"] = check_json("|center_mean - x0|", mdev, mean_tol, mdev <= mean_tol);
    }
    out.push_back(probe);
  }
  return out;
}

int cmd_ensemble(const CommonArgs& args) {
  const ckb::RunConfig c = load(args);
  const ckb::PhysicalParams p = c.params();
  const ckb::GaussianPacket pk(c.sigma0, c.x0);
  const ckb::TimeGrid tg = c.tgrid();
  const auto v = ckb::validate(p, pk, tg, c.xgrid());
  const bool run_analytic = c.engine != "solver";
  const bool run_solver = c.engine != "analytic";
  if (!check_domain(v, run_solver)) return 2;

  ckb::EnsembleOptions opt;
  opt.workers = worker_count();
  opt.width_tol = c.width_tol;
  opt.norm_tol = c.norm_tol;
  if (run_solver) opt.xgrid = c.xgrid();

  const auto seeds = ckb::ensemble_seeds(c.seed, c.n_paths);
  fs::create_directories(args.out);
  json report;
  report["command"] = "ensemble";
  report["timestamp"] = utc_timestamp();
  report["config"] = config_json(c);
  report["n_paths"] = c.n_paths;
  report["base_seed"] = c.seed;
  report["seeds"] = seeds;
  report["tolerances"] = {{"norm_tol", c.norm_tol}, {"width_tol", c.width_tol}, {"engine_tol", c.engine_tol},
                          {"statistical", 3.0 * std::sqrt(2.0 / (static_cast<double>(c.n_paths) - 1.0))}};
  report["warnings"] = v.warnings;
  report["engines"] = json::object();

  std::vector<std::vector<ckb::PathResult>> per_engine;
  for (ckb::Engine e : {ckb::Engine::analytic, ckb::Engine::solver}) {
    if ((e == ckb::Engine::analytic && !run_analytic) || (e == ckb::Engine::solver && !run_solver)) continue;
    auto results = ckb::run_paths(p, pk, tg, seeds, e, opt);
    const ckb::EnsembleReport rep = ckb::aggregate(p, tg, results, e, opt, c.seed, seeds);
    const std::string name = std::string("ensemble_") + ckb::to_string(e) + ".csv";
    write_file(fs::path(args.out) / name, csv_string(ensemble_table(rep)));
    report["engines"][ckb::to_string(e)] = {{"csv", name}, {"probes", probe_checks(c, rep)}};
    per_engine.push_back(std::move(results));
  }

  bool ok = true;
  if (per_engine.size() == 2) {
    double gap = 0.0;
    for (std::size_t i = 0; i < seeds.size(); ++i)
      for (std::size_t j = 0; j < tg.n_nodes(); ++j)
        gap = std::max(gap, std::abs(per_engine[0][i].center[j] - per_engine[1][i].center[j]));
    ok = gap <= c.engine_tol;
    report["engine_equivalence"] = check_json("max per-seed |center analytic - solver|", gap, c.engine_tol, ok);
  }
  write_file(fs::path(args.out) / "ensemble_report.json", report.dump(2) + "\n");
  std::cout << "ensemble: " << c.n_paths << " paths, wrote results to " << args.out << '\n';
  return ok ? 0 : 1;
}

int cmd_verify(const CommonArgs& args) {
  ckb::verify::Options opt;
  opt.workers = worker_count();
  if (!args.config.empty()) opt.seed = load(args).seed;
  if (args.seed) opt.seed = *args.seed;

  json report;
  report["command"] = "verify";
  report["timestamp"] = utc_timestamp();
  report["seed"] = opt.seed;
  report["criteria"] = json::array();

  bool all = true;
  const auto checks = ckb::verify::all_checks();
  std::cout << std::left;
  for (std::size_t i = 0; i < checks.size(); ++i) {
    const auto t0 = std::chrono::steady_clock::now();
    const ckb::verify::CheckResult r = ckb::verify::run_check(checks[i], opt, static_cast<int>(i + 1));
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    all = all && r.pass();
    std::cout << (r.pass() ? "PASS" : "FAIL") << "  [" << r.id << "] " << r.name << "  (" << std::fixed
              << std::setprecision(1) << secs << " s)\n";
    json cj = {{"id", r.id}, {"name", r.name}, {"pass", r.pass()}, {"seconds", secs}, {"metrics", json::array()}};
    for (const auto& m : r.metrics) {
      std::cout << "      " << (m.pass ? "ok  " : "FAIL") << "  " << std::setw(62) << m.name << std::scientific
                << std::setprecision(3) << m.value << "  (limit " << m.threshold << ")\n";
      cj["metrics"].push_back(check_json(m.name, m.value, m.threshold, m.pass));
    }
    for (const auto& m : r.diagnostics) {
      std::cout << "      info  " << std::setw(62) << m.name << std::scientific << std::setprecision(3) << m.value
                << "  (ref " << m.threshold << ")\n";
      cj["diagnostics"].push_back(check_json(m.name, m.value, m.threshold, m.pass));
    }
    if (!r.error.empty()) {
      std::cout << "      error: " << r.error << '\n';
      cj["error"] = r.error;
    }
    report["criteria"].push_back(cj);
  }
  report["pass"] = all;
  if (!args.out.empty() && args.out != ".") {
    fs::create_directories(args.out);
    write_file(fs::path(args.out) / "verify_report.json", report.dump(2) + "\n");
  }
  std::cout << (all ? "verify: all criteria passed\n" : "verify: FAILED\n");
  return all ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Quantum Brownian motion under the Caldirola-Kanai Hamiltonian"};
  app.require_subcommand(1);

  CommonArgs sim_args;
  CommonArgs ens_args;
  CommonArgs ver_args;
  auto add_common = [](CLI::App* sub, CommonArgs& a, bool config_required) {
    auto* opt = sub->add_option("--config", a.config, "key=value configuration file");
    if (config_required) opt->required();
    opt->check(CLI::ExistingFile);
    sub->add_option("--out", a.out, "output directory")->capture_default_str();
    sub->add_option("--seed", a.seed, "base seed (overrides the config)");
    sub->add_option("--engine", a.engine, "analytic, solver or both")
        ->check(CLI::IsMember({"analytic", "solver", "both"}));
  };
  auto* sim = app.add_subcommand("simulate", "evolve one force realization and write a per-time CSV");
  add_common(sim, sim_args, true);
  auto* ens = app.add_subcommand("ensemble", "average over white-noise realizations");
  add_common(ens, ens_args, true);
  auto* ver = app.add_subcommand("verify", "run the acceptance criteria at desk scale");
  add_common(ver, ver_args, false);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*sim) return cmd_simulate(sim_args);
    if (*ens) return cmd_ensemble(ens_args);
    if (*ver) return cmd_verify(ver_args);
  } catch (const ckb::ParseError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const ckb::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
