#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <initializer_list>
#include <ostream>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "kscontrol/cli.hpp"
#include "kscontrol/diagnostics.hpp"
#include "kscontrol/errors.hpp"
#include "kscontrol/fixedpoint.hpp"
#include "kscontrol/hum.hpp"

namespace ksc {
namespace {

using Json = nlohmann::ordered_json;

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

class Csv {
 public:
  explicit Csv(std::string_view header) : text_(header) { text_ += '\n'; }

  void row(std::initializer_list<double> values) {
    bool first = true;
    for (const double v : values) {
      if (!first) text_ += ',';
      text_ += fmt(v);
      first = false;
    }
    text_ += '\n';
  }
  std::string str() && { return std::move(text_); }

 private:
  std::string text_;
};

std::string dump(const Json& j) { return j.dump(2) + "\n"; }

Json optional_number(const std::optional<double>& v) { return v ? Json(*v) : Json(nullptr); }

struct Mesh {
  Grid grid;
  TimeGrid tgrid;
};

Mesh mesh_of(const RunConfig& cfg) {
  return {Grid(cfg.domain.x_lo, cfg.domain.x_hi, cfg.n), TimeGrid(cfg.domain.T, cfg.m)};
}

CarlemanWeights weights_for(const RunConfig& cfg, const Mesh& mesh, double a_norm,
                            double B_norm) {
  const auto beta = build_beta(cfg.domain, mesh.grid);
  ParameterRequest req;
  req.a_norm = a_norm;
  req.B_norm = B_norm;
  req.T = cfg.domain.T;
  req.mode = cfg.weight_mode;
  req.c_lambda = cfg.c_lambda;
  req.c_s = cfg.c_s;
  req.lambda = cfg.lambda;
  req.s = cfg.s;
  req.exponent_budget = cfg.exponent_budget;
  const auto p = select_parameters(req, beta, mesh.tgrid);
  return weight_fields(beta, p.lambda, p.s, mesh.tgrid, cfg.control_exponent);
}

HUMConfig hum_config(const RunConfig& cfg, CarlemanWeights weights) {
  HUMConfig h;
  h.epsilon = cfg.epsilon;
  h.cg_tol = cfg.cg_tol;
  h.cg_max_iter = cfg.cg_max_iter;
  h.jacobi = cfg.jacobi;
  h.stagnation_window = cfg.stagnation_window;
  h.omega = cfg.domain.omega;
  h.weights = std::move(weights);
  h.solver.blowup_guard = cfg.blowup_guard;
  return h;
}

Coefficients linear_coefficients(const RunConfig& cfg, const Mesh& mesh) {
  return constant_coefficients(mesh.grid, mesh.tgrid, cfg.a_const, cfg.b_const, cfg.physics);
}

std::string trajectory_csv(const StateTrajectory& traj, const Mesh& mesh) {
  Csv csv("x,t,y,z");
  for (std::size_t k = 0; k < mesh.tgrid.levels(); ++k) {
    for (std::size_t i = 0; i < mesh.grid.size(); ++i) {
      csv.row({mesh.grid.x(i), mesh.tgrid.t(k), traj.first(i, k), traj.second(i, k)});
    }
  }
  return std::move(csv).str();
}

std::string control_csv(const Control& f, const Mesh& mesh) {
  Csv csv("x,t,f");
  for (std::size_t k = 0; k < mesh.tgrid.levels(); ++k) {
    for (std::size_t i = 0; i < mesh.grid.size(); ++i) {
      csv.row({mesh.grid.x(i), mesh.tgrid.t(k), f.f(i, k)});
    }
  }
  return std::move(csv).str();
}

std::string weights_csv(const CarlemanWeights& w, const Mesh& mesh) {
  Csv csv("x,t,beta,alpha,phi_w,log_e2sa");
  for (std::size_t k = 0; k < mesh.tgrid.levels(); ++k) {
    for (std::size_t i = 0; i < mesh.grid.size(); ++i) {
      csv.row({mesh.grid.x(i), mesh.tgrid.t(k), w.beta[i], w.alpha(i, k), w.phi_w(i, k),
               w.log_e2sa(i, k)});
    }
  }
  return std::move(csv).str();
}

Json run_header(std::string_view command, const RunConfig& cfg, const CarlemanWeights* w) {
  Json j;
  j["command"] = command;
  j["n"] = cfg.n;
  j["m"] = cfg.m;
  j["horizon"] = cfg.domain.T;
  if (w) {
    j["lambda"] = w->lambda;
    j["s"] = w->s;
    j["control_exponent"] = w->control_exponent;
  }
  return j;
}

std::vector<Artifact> simulate(const RunConfig& cfg) {
  const Mesh mesh = mesh_of(cfg);
  const auto u0 = cfg.u0.sample(mesh.grid);
  const auto v0 = cfg.v0.sample(mesh.grid);
  const Control none = Control::zero(mesh.grid, mesh.tgrid, cfg.domain.omega);
  const auto traj = solve_forward_nonlinear(u0, v0, none, cfg.physics, mesh.grid, mesh.tgrid,
                                            SolverOptions{cfg.blowup_guard});

  const std::size_t m = mesh.tgrid.steps();
  const double mass0 = mass(mesh.grid, traj.first_at(0));
  double drift = 0.0, variation = 0.0;
  for (std::size_t k = 1; k <= m; ++k) {
    const double prev = mass(mesh.grid, traj.first_at(k - 1));
    const double cur = mass(mesh.grid, traj.first_at(k));
    if (prev != 0.0) drift = std::max(drift, std::abs(cur - prev) / std::abs(prev));
    for (std::size_t i = 0; i < mesh.grid.size(); ++i) {
      variation = std::max({variation, std::abs(traj.first(i, k) - traj.first(i, 0)),
                            std::abs(traj.second(i, k) - traj.second(i, 0))});
    }
  }
  const auto norms = state_norms(traj, mesh.grid, mesh.tgrid);

  Json j = run_header("simulate", cfg, nullptr);
  j["initial_mass"] = mass0;
  j["final_mass"] = mass(mesh.grid, traj.first_at(m));
  j["max_step_mass_drift"] = drift;
  j["max_time_variation"] = variation;
  j["u_linf"] = norms.first.linf_q;
  j["v_linf"] = norms.second.linf_q;
  j["terminal_l2"] = norms.terminal_pair_l2;
  return {{"trajectory.csv", trajectory_csv(traj, mesh)}, {"diagnostics.json", dump(j)}};
}

std::vector<Artifact> control_linear(const RunConfig& cfg) {
  const Mesh mesh = mesh_of(cfg);
  const auto coeffs = linear_coefficients(cfg, mesh);
  const HUMConfig hum =
      hum_config(cfg, weights_for(cfg, mesh, coeffs.a_norm(), coeffs.B_norm()));
  const auto y0 = cfg.y0.sample(mesh.grid);
  const auto z0 = cfg.z0.sample(mesh.grid);
  const HUMResult r = hum_solve(y0, z0, hum, coeffs, mesh.grid, mesh.tgrid);
  const auto bound = control_bound_report(r, coeffs.a_norm(), coeffs.B_norm(), cfg.domain.T);

  const double initial_pair = std::hypot(l2_norm(mesh.grid, y0), l2_norm(mesh.grid, z0));
  const double eps_p = r.epsilon * l2_norm(mesh.grid, r.phiT_thetaT);

  Json j = run_header("control-linear", cfg, &hum.weights);
  j["epsilon"] = r.epsilon;
  j["cg_tol"] = r.cg_tol;
  j["cg_iterations"] = r.cg_iterations;
  j["terminal_l2"] = r.terminal_l2;
  j["free_terminal_l2"] = r.free_terminal_l2;
  j["initial_l2"] = initial_pair;
  j["initial_l2_sum"] = r.initial_l2_sum;
  j["epsilon_adjoint_l2"] = eps_p;
  j["optimality_gap"] = r.terminal_l2 > 0.0 ? std::abs(r.terminal_l2 - eps_p) / r.terminal_l2 : 0.0;
  j["f_linf"] = r.f_linf;
  j["f_l2"] = r.f_l2;
  j["f_weighted_l2"] = r.f_weighted_l2;
  j["kappa"] = r.kappa;
  j["c_hat"] = optional_number(bound.c_hat);

  Csv conv("iteration,residual,dual_value");
  for (std::size_t k = 0; k < r.residual_history.size(); ++k) {
    conv.row({static_cast<double>(k), r.residual_history[k], r.dual_value_history[k]});
  }
  return {{"trajectory.csv", trajectory_csv(r.traj, mesh)},
          {"control.csv", control_csv(r.f, mesh)},
          {"weights.csv", weights_csv(hum.weights, mesh)},
          {"convergence.csv", std::move(conv).str()},
          {"diagnostics.json", dump(j)}};
}

std::vector<double> bump(const Grid& grid, int mode) {
  return CosineProfile{0.5, 0.5, mode}.sample(grid);
}

std::vector<Artifact> control_nonlinear(const RunConfig& cfg) {
  const Mesh mesh = mesh_of(cfg);
  const SolverOptions opts{cfg.blowup_guard};
  const auto ubar0 = cfg.u0.sample(mesh.grid);
  const auto vbar0 = cfg.v0.sample(mesh.grid);
  const auto target = make_trajectory(ubar0, vbar0, cfg.physics, mesh.grid, mesh.tgrid, opts);

  auto u0 = ubar0, v0 = vbar0;
  const auto bu = bump(mesh.grid, 1), bv = bump(mesh.grid, 2);
  for (std::size_t i = 0; i < u0.size(); ++i) {
    u0[i] += cfg.perturbation * bu[i];
    v0[i] += cfg.perturbation * bv[i];
  }

  // Every admissible eta has |eta| <= 1, which bounds |a| on K.
  const double a_bound = cfg.physics.chi * (target.ubar_sup + 1.0);
  const double B_bound = cfg.physics.chi * target.grad_vbar_sup;
  const HUMConfig hum = hum_config(cfg, weights_for(cfg, mesh, a_bound, B_bound));
  FixedPointConfig fp;
  fp.fp_tol = cfg.fp_tol;
  fp.fp_max_outer = cfg.fp_max_outer;
  fp.c0 = cfg.c0;
  fp.c1 = cfg.c1;
  fp.keep_iterates = cfg.verbose;
  const auto rep = solve_local_exact(u0, v0, target, hum, fp, mesh.grid, mesh.tgrid);

  Json j = run_header("control-nonlinear", cfg, &hum.weights);
  j["perturbation"] = cfg.perturbation;
  j["converged"] = rep.converged;
  j["outer_iterations"] = rep.outer_iterations;
  j["final_eta_delta"] = rep.eta_delta_history.empty() ? 0.0 : rep.eta_delta_history.back();
  j["terminal_error_u"] = rep.terminal_error_u;
  j["terminal_error_v"] = rep.terminal_error_v;
  j["uncontrolled_error_u"] = rep.uncontrolled_error_u;
  j["uncontrolled_error_v"] = rep.uncontrolled_error_v;
  j["closed_loop_ratio"] = rep.closed_loop_ratio;
  j["f_linf"] = rep.f.f.sup_norm();
  j["f_l2"] = std::sqrt(control_pairing(mesh.grid, mesh.tgrid, rep.f.f, rep.f.f, rep.f.mask));
  j["kappa"] = kappa(a_bound, B_bound, cfg.domain.T);
  j["kappa0"] = rep.kappa0;
  j["radius"] = rep.radius;
  j["initial_size"] = rep.initial_size;
  j["within_radius"] = rep.within_radius;

  Csv conv("outer_iteration,eta_delta,y_sup,cg_iterations");
  for (std::size_t k = 0; k < rep.eta_delta_history.size(); ++k) {
    conv.row({static_cast<double>(k + 1), rep.eta_delta_history[k], rep.y_sup_history[k],
              static_cast<double>(rep.cg_iterations[k])});
  }
  std::vector<Artifact> out{{"trajectory.csv", trajectory_csv(rep.closed_loop, mesh)},
                            {"control.csv", control_csv(rep.f, mesh)},
                            {"convergence.csv", std::move(conv).str()},
                            {"diagnostics.json", dump(j)}};
  for (std::size_t k = 0; k < rep.iterates.size(); ++k) {
    char name[32];
    std::snprintf(name, sizeof name, "iterate_%03zu.csv", k + 1);
    out.push_back({name, trajectory_csv(rep.iterates[k], mesh)});
  }
  return out;
}

std::vector<Artifact> inequality_check(const RunConfig& cfg, bool carleman) {
  const Mesh mesh = mesh_of(cfg);
  const auto coeffs = linear_coefficients(cfg, mesh);
  const auto w = weights_for(cfg, mesh, coeffs.a_norm(), coeffs.B_norm());
  const auto rep = carleman ? carleman_ratio(cfg.samples, cfg.seed, coeffs, w, cfg.domain.omega,
                                             mesh.grid, mesh.tgrid)
                            : observability_ratio(cfg.samples, cfg.seed, coeffs, w,
                                                  cfg.domain.omega, mesh.grid, mesh.tgrid);

  Json j = run_header(carleman ? "check-carleman" : "check-observability", cfg, &w);
  j["seed"] = cfg.seed;
  j["samples"] = cfg.samples;
  j["sample_count"] = rep.sample_count;
  j["excluded"] = rep.excluded;
  j["max_ratio"] = rep.max_ratio;
  j["median_ratio"] = rep.median_ratio;
  j["empirical_constant"] = rep.empirical_constant;
  j["log_max_over_kappa"] = rep.log_max_over_kappa;
  j["kappa"] = rep.kappa;

  Csv csv("sample,lhs,rhs,ratio");
  for (std::size_t k = 0; k < rep.ratios.size(); ++k) {
    csv.row({static_cast<double>(k), rep.lhs[k], rep.rhs[k], rep.ratios[k]});
  }
  return {{"samples.csv", std::move(csv).str()},
          {"weights.csv", weights_csv(w, mesh)},
          {"diagnostics.json", dump(j)}};
}

std::vector<Artifact> decay(const RunConfig& cfg) {
  const Mesh mesh = mesh_of(cfg);
  const auto coeffs = linear_coefficients(cfg, mesh);
  const HUMConfig base =
      hum_config(cfg, weights_for(cfg, mesh, coeffs.a_norm(), coeffs.B_norm()));
  const auto y0 = cfg.y0.sample(mesh.grid);
  const auto z0 = cfg.z0.sample(mesh.grid);
  const auto table = decay_study(cfg.epsilons, y0, z0, coeffs, base, mesh.grid, mesh.tgrid);

  Json j = run_header("decay-study", cfg, &base.weights);
  j["rows"] = table.rows.size();
  j["slope"] = optional_number(table.slope);
  j["c_hat_max"] = optional_number(table.c_hat_max);
  j["kappa"] = table.kappa;
  j["initial_l2_sum"] = table.initial_l2_sum;

  Csv csv("epsilon,terminal_l2,f_linf,f_l2,cg_iterations,c_hat");
  for (const auto& row : table.rows) {
    csv.row({row.epsilon, row.terminal_l2, row.f_linf, row.f_l2,
             static_cast<double>(row.cg_iterations), row.c_hat.value_or(std::nan(""))});
  }
  return {{"decay.csv", std::move(csv).str()}, {"diagnostics.json", dump(j)}};
}

void report_error(std::ostream& err, std::string_view kind, int code, std::string_view message,
                  Json extra = Json::object()) {
  Json j;
  j["error"] = kind;
  j["exit_code"] = code;
  j["message"] = message;
  for (auto it = extra.begin(); it != extra.end(); ++it) j[it.key()] = it.value();
  err << j.dump() << "\n";
}

void write_file(const std::filesystem::path& path, std::string_view content) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  f.write(content.data(), static_cast<std::streamsize>(content.size()));
  f.close();
  if (!f) throw std::filesystem::filesystem_error("cannot write", path, std::make_error_code(std::errc::io_error));
}

}  // namespace

const std::vector<std::string>& subcommands() {
  static const std::vector<std::string> names{"simulate",           "control-linear",
                                              "control-nonlinear",  "check-observability",
                                              "check-carleman",     "decay-study"};
  return names;
}

std::uint64_t fnv1a64(std::string_view bytes) noexcept {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::vector<Artifact> compute_artifacts(std::string_view command, const RunConfig& cfg) {
  if (command == "simulate") return simulate(cfg);
  if (command == "control-linear") return control_linear(cfg);
  if (command == "control-nonlinear") return control_nonlinear(cfg);
  if (command == "check-observability") return inequality_check(cfg, false);
  if (command == "check-carleman") return inequality_check(cfg, true);
  if (command == "decay-study") return decay(cfg);
  throw InvalidArgument("unknown subcommand '" + std::string(command) + "'");
}

std::string render_manifest(std::string_view command, const RunConfig& cfg,
                            const std::vector<Artifact>& artifacts, double wall_time_seconds) {
  const std::string text = serialize(cfg);
  Json j;
  j["command"] = command;
  j["version"] = kVersion;
  j["config_hash"] = hex64(fnv1a64(text));
  Json params = Json::object();
  for (const auto& key : config_keys()) params[key] = nullptr;
  std::istringstream lines(text);
  for (std::string line; std::getline(lines, line);) {
    const auto eq = line.find(" = ");
    params[line.substr(0, eq)] = line.substr(eq + 3);
  }
  j["config"] = params;
  Json outputs = Json::array();
  for (const auto& a : artifacts) {
    outputs.push_back({{"file", a.file}, {"bytes", a.content.size()},
                       {"fnv1a64", hex64(fnv1a64(a.content))}});
  }
  j["outputs"] = outputs;
  j["wall_time_seconds"] = wall_time_seconds;
  return dump(j);
}

std::filesystem::path resolve_output_dir(const RunConfig& cfg) {
  const char* env = std::getenv(kOutputDirEnv);
  if (env && *env) return env;
  return cfg.output_dir;
}

int run_subcommand(std::string_view command, const RunConfig& cfg, std::ostream& out,
                   std::ostream& err) {
  const auto start = std::chrono::steady_clock::now();
  std::vector<Artifact> artifacts;
  try {
    artifacts = compute_artifacts(command, cfg);
  } catch (const BlowUpDetected& e) {
    report_error(err, "blow_up", kExitBlowUp, e.what(),
                 {{"time_index", e.time_index()}, {"magnitude", e.magnitude()}});
    return kExitBlowUp;
  } catch (const CgStagnation& e) {
    report_error(err, "cg_stagnation", kExitCg, e.what(), {{"iterations", e.history().size() - 1}});
    return kExitCg;
  } catch (const CgNotConverged& e) {
    report_error(err, "cg_not_converged", kExitCg, e.what(),
                 {{"iterations", e.partial().cg_iterations},
                  {"terminal_l2", e.partial().terminal_l2}});
    return kExitCg;
  } catch (const ParseError& e) {
    report_error(err, "parse", kExitUsage, e.what(), {{"line", e.line()}, {"key", e.key()}});
    return kExitUsage;
  } catch (const NumericalFailure& e) {
    report_error(err, "numerical_failure", kExitNumerical, e.what(), {{"stage", e.stage()}});
    return kExitNumerical;
  } catch (const DegenerateWeight& e) {
    report_error(err, "degenerate_weight", kExitNumerical, e.what());
    return kExitNumerical;
  } catch (const InvalidIterate& e) {
    report_error(err, "invalid_iterate", kExitNumerical, e.what());
    return kExitNumerical;
  } catch (const std::exception& e) {
    report_error(err, "error", kExitNumerical, e.what());
    return kExitNumerical;
  }
  const double wall =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

  const auto dir = resolve_output_dir(cfg);
  try {
    std::filesystem::create_directories(dir);
    for (const auto& a : artifacts) write_file(dir / a.file, a.content);
    write_file(dir / "manifest.json", render_manifest(command, cfg, artifacts, wall));
  } catch (const std::exception& e) {
    report_error(err, "io", kExitIo, e.what(), {{"output_dir", dir.string()}});
    return kExitIo;
  }
  out << "ksctl " << command << ": wrote " << artifacts.size() + 1 << " files to "
      << dir.string() << "\n";
  return kExitOk;
}

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Null and local exact controllability experiments", "ksctl"};
  std::string command;
  std::string config_path;
  std::vector<std::string> sets;
  app.add_option("subcommand", command, "One of: simulate, control-linear, control-nonlinear, "
                                        "check-observability, check-carleman, decay-study")
      ->required()
      ->check(CLI::IsMember(subcommands()));
  app.add_option("--config", config_path, "Flat key = value configuration file");
  app.add_option("--set", sets, "Override one key, e.g. --set epsilon=1e-8")->take_all();
  app.set_version_flag("--version", std::string(kVersion));
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) {
      out << (dynamic_cast<const CLI::CallForVersion*>(&e) ? std::string(kVersion) + "\n"
                                                             : app.help());
      return kExitOk;
    }
    report_error(err, "usage", kExitUsage, e.what());
    return kExitUsage;
  }

  std::string text;
  if (!config_path.empty()) {
    std::ifstream f(config_path, std::ios::binary);
    if (!f) {
      report_error(err, "io", kExitIo, "cannot read config file", {{"path", config_path}});
      return kExitIo;
    }
    std::ostringstream buf;
    buf << f.rdbuf();
    text = buf.str();
  }
  RunConfig cfg;
  try {
    cfg = parse_config(text, sets);
  } catch (const ParseError& e) {
    report_error(err, "parse", kExitUsage, e.what(), {{"line", e.line()}, {"key", e.key()}});
    return kExitUsage;
  }
  return run_subcommand(command, cfg, out, err);
}

}  // namespace ksc
