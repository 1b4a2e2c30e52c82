#include "meso/cli.hpp"

#include <chrono>
#include <cstdlib>
#include <thread>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "meso/harness.hpp"
#include "meso/io.hpp"
#include "meso/limit.hpp"
#include "meso/reaction.hpp"
#include "meso/simulator.hpp"
#include "meso/spectral.hpp"

namespace meso::cli {

namespace fs = std::filesystem;
using model::ReactionNetwork;

namespace {

constexpr int kOk = 0;
constexpr int kValidationFailure = 1;
constexpr int kRuntimeError = 2;
constexpr int kUsage = 64;

std::string now_iso() {
  auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

ReactionNetwork load_model(const std::string& spec) {
  if (spec.rfind("builtin:", 0) == 0) return model::builtin_network(spec.substr(8));
  if (fs::exists(spec)) return ReactionNetwork::load_file(spec);
  return model::builtin_network(spec);
}

int default_jobs() {
  unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

std::uint64_t env_seed() {
  const char* env = std::getenv("MESOSCALE_SEED");
  if (!env) return 0;
  return std::strtoull(env, nullptr, 10);
}

std::vector<int> parse_int_list(const std::string& s) {
  std::vector<int> out;
  std::stringstream ss(s);
  std::string tok;
  while (std::getline(ss, tok, ',')) out.push_back(std::stoi(tok));
  return out;
}

std::vector<double> parse_double_list(const std::string& s) {
  std::vector<double> out;
  std::stringstream ss(s);
  std::string tok;
  while (std::getline(ss, tok, ',')) out.push_back(std::stod(tok));
  return out;
}

/// Runs `body` against an output directory, records every produced file and
/// always writes a manifest, also on failure.
int run_with_manifest(const std::string& command, const std::string& config_text,
                      std::uint64_t seed, const std::string& out_dir,
                      const std::function<int(const fs::path&, std::vector<std::string>&)>& body) {
  fs::path out(out_dir);
  io::RunManifest man;
  man.command = command;
  man.started_at = now_iso();
  man.master_seed = seed;
  {
    std::ostringstream hex;
    hex << std::hex << io::fnv1a_64(config_text.data(), config_text.size());
    man.config_hash = hex.str();
  }
  std::error_code ec;
  fs::create_directories(out, ec);
  if (ec) {
    std::cerr << "cannot create output directory " << out << ": " << ec.message() << "\n";
    return kRuntimeError;
  }
  int rc = kOk;
  std::vector<std::string> outputs;
  try {
    rc = body(out, outputs);
  } catch (const std::invalid_argument& e) {
    man.error = e.what();
    rc = kValidationFailure;
  } catch (const std::exception& e) {
    man.error = e.what();
    rc = kRuntimeError;
  }
  man.finished_at = now_iso();
  for (const std::string& p : outputs) man.outputs.push_back({p, 0, 0});
  io::write_manifest(out, std::move(man));
  if (!man.error.empty()) std::cerr << "error: " << man.error << "\n";
  return rc;
}

void write_text(const fs::path& p, const std::string& text) {
  std::ofstream out(p);
  if (!out) throw std::runtime_error("cannot write " + p.string());
  out << text;
  if (text.empty() || text.back() != '\n') out << "\n";
}

// -- subcommand bodies ----------------------------------------------------

int cmd_validate(const std::string& model_path, const std::string& out_dir) {
  ReactionNetwork net = ReactionNetwork::load_file(model_path);
  model::ValidationReport rep = net.validate();
  std::cout << rep.to_string();
  if (!out_dir.empty()) {
    run_with_manifest("validate-model", net.to_json(), 0, out_dir,
                      [&](const fs::path& out, std::vector<std::string>& outputs) {
                        write_text(out / "validation.txt", rep.to_string());
                        outputs.push_back("validation.txt");
                        return kOk;
                      });
  }
  return rep.ok() ? kOk : kValidationFailure;
}

struct SimulateArgs {
  std::string model, out;
  int n = 31;
  double l = 100.0;
  double T = 1.0;
  int samples = 50;
  std::uint64_t seed = 0;
  bool log_events = false;
  std::string mode = "exact";
  double u0_const = 0.5;
  double v0_const = 0.0;
  std::string u0_csv, v0_csv;
  double alpha_trunc = 0.25;
};

int cmd_simulate(const SimulateArgs& a) {
  ReactionNetwork net = load_model(a.model);
  model::ValidationReport vrep = net.validate();
  if (!vrep.ok()) {
    std::cerr << vrep.to_string();
    return kValidationFailure;
  }
  GridFunction u0 = a.u0_csv.empty() ? GridFunction(a.n, a.u0_const) : io::read_grid_csv(a.u0_csv);
  GridFunction v0 = a.v0_csv.empty() ? GridFunction(a.n, a.v0_const) : io::read_grid_csv(a.v0_csv);

  sim::SimConfig cfg;
  cfg.n = a.n;
  cfg.l = a.l;
  cfg.T = a.T;
  cfg.sample_times = sim::SimConfig::uniform_samples(a.T, a.samples);
  cfg.seed = a.seed;
  cfg.M = net.M();
  cfg.alpha_trunc = a.alpha_trunc;
  cfg.mode = a.mode == "tau-leap" ? sim::SimMode::TauLeap : sim::SimMode::Exact;

  return run_with_manifest(
      "simulate", net.to_json() + std::to_string(a.seed), a.seed, a.out,
      [&](const fs::path& out, std::vector<std::string>& outputs) {
        sim::MemoryEventLog log;
        sim::Trajectory traj;
        if (a.log_events && cfg.mode == sim::SimMode::Exact) {
          sim::EventObserver* obs[] = {&log};
          traj = sim::simulate(net, u0, v0, cfg, obs);
        } else {
          traj = sim::simulate(net, u0, v0, cfg);
        }
        io::write_trajectory(out / "trajectory.bin", traj);
        outputs.push_back("trajectory.bin");
        if (a.log_events && cfg.mode == sim::SimMode::Exact) {
          io::write_event_log(out / "events.bin", log.events);
          outputs.push_back("events.bin");
        }
        nlohmann::json j;
        j["n"] = traj.n;
        j["l"] = traj.l;
        j["T"] = traj.T;
        j["seed"] = traj.seed;
        j["events"] = traj.event_count;
        j["truncated"] = traj.truncated_at.has_value();
        if (traj.truncated_at) {
          j["truncated_at"] = *traj.truncated_at;
          j["trunc_window"] = traj.trunc_window;
        }
        j["approximate"] = traj.approximate;
        j["network_hash"] = traj.network_hash;
        write_text(out / "summary.json", j.dump(2));
        outputs.push_back("summary.json");
        return kOk;
      });
}

struct SolveLimitArgs {
  std::string model, u0_json, v0_csv, out;
  double T = 1.0;
  double dt = 1e-4;
  int m_ref = 511;
  int samples = 20;
  double v0_const = 0.0;
  bool estimate_order = false;
};

int cmd_solve_limit(const SolveLimitArgs& a) {
  ReactionNetwork net = load_model(a.model);
  SpectralCoeffs u0 =
      a.u0_json.empty() ? SpectralCoeffs(a.m_ref) : io::read_coeffs_json(a.u0_json);
  if (a.u0_json.empty()) u0.a[0] = 0.5;
  GridFunction v0 =
      a.v0_csv.empty() ? GridFunction(a.m_ref, a.v0_const) : io::read_grid_csv(a.v0_csv);

  return run_with_manifest(
      "solve-limit", net.to_json() + a.u0_json + a.v0_csv, 0, a.out,
      [&](const fs::path& out, std::vector<std::string>& outputs) {
        auto samples = sim::SimConfig::uniform_samples(a.T, a.samples);
        pde::LimitSolution sol =
            pde::solve_limit(net, u0, v0, a.T, a.dt, a.m_ref, samples);
        std::ostringstream csv;
        csv << "t,x,u,v\n";
        for (std::size_t k = 0; k < sol.times.size(); ++k) {
          GridFunction uvals = spectral::synthesize(sol.u[k]);
          for (int j = 0; j < sol.m_ref; ++j) {
            csv << io::format_double(sol.times[k]) << ","
                << io::format_double(static_cast<double>(j) / sol.m_ref) << ","
                << io::format_double(uvals[j]) << "," << io::format_double(sol.v[k][j])
                << "\n";
          }
        }
        write_text(out / "solution.csv", csv.str());
        outputs.push_back("solution.csv");

        nlohmann::json meta;
        meta["method"] = sol.method;
        meta["dt"] = sol.dt;
        meta["m_ref"] = sol.m_ref;
        meta["max_principle_margin"] = sol.max_principle_margin;
        if (a.estimate_order) {
          // Richardson triplet dt, dt/2, dt/4 on the final-time state
          auto run = [&](double dt) {
            return pde::solve_limit(net, u0, v0, a.T, dt, a.m_ref, {0.0, a.T});
          };
          pde::LimitSolution s1 = run(a.dt), s2 = run(a.dt / 2), s4 = run(a.dt / 4);
          GridFunction u1 = spectral::synthesize(s1.u.back());
          GridFunction u2 = spectral::synthesize(s2.u.back());
          GridFunction u4 = spectral::synthesize(s4.u.back());
          double e12 = linf_norm(u1 - u2);
          double e24 = linf_norm(u2 - u4);
          meta["order_estimate"] = std::log2(e12 / e24);
        } else {
          meta["order_estimate"] = nullptr;
        }
        write_text(out / "metadata.json", meta.dump(2));
        outputs.push_back("metadata.json");
        return kOk;
      });
}

int cmd_converge(const std::string& plan_path, const std::string& out_dir, int jobs,
                 std::uint64_t seed, bool seed_given) {
  std::ifstream in(plan_path);
  if (!in) throw std::runtime_error("cannot open plan: " + plan_path);
  std::ostringstream buf;
  buf << in.rdbuf();
  harness::ExperimentPlan plan = harness::ExperimentPlan::from_json(buf.str());
  plan.jobs = jobs > 0 ? jobs : default_jobs();
  if (seed_given) plan.master_seed = seed;
  std::string err = plan.validate();
  if (!err.empty()) {
    std::cerr << "invalid plan: " << err << "\n";
    return kValidationFailure;
  }
  return run_with_manifest(
      "converge", plan.to_json(), plan.master_seed, out_dir,
      [&](const fs::path& out, std::vector<std::string>& outputs) {
        harness::ErrorReport rep = harness::run_lln(plan);
        write_text(out / "report.json", io::lln_report_json(plan, rep));
        outputs.push_back("report.json");
        write_text(out / "report.csv", io::lln_report_csv(rep));
        outputs.push_back("report.csv");
        fs::create_directories(out / "plots");
        write_text(out / "plots" / "medians.csv", io::lln_plot_csv(rep));
        outputs.push_back("plots/medians.csv");
        return kOk;
      });
}

struct ProbesArgs {
  std::string kind = "inequality";
  std::string model = "birth-death-C";
  std::string out;
  std::string n_list = "31,63,127,255,501";
  std::string l_list = "50,200,800";
  std::string eps_list = "0.1";
  int n = 31;
  double l = 100.0;
  int replicas = 200;
  int trials = 1000;
  double alpha_tilde = 0.4;
  double beta = 0.2;
  double T = 0.25;
  int samples = 20;
  std::uint64_t seed = 1;
  int jobs = 0;  // 0 = logical cores
};

int cmd_probes(const ProbesArgs& in) {
  ProbesArgs a = in;
  if (a.jobs <= 0) a.jobs = default_jobs();
  return run_with_manifest(
      "probes:" + a.kind, a.kind + a.model + a.n_list + std::to_string(a.seed), a.seed, a.out,
      [&](const fs::path& out, std::vector<std::string>& outputs) {
        if (a.kind == "inequality") {
          harness::ProbeReport rep =
              harness::inequality_probes(parse_int_list(a.n_list), a.trials, a.seed);
          write_text(out / "report.json", io::probe_report_json(rep));
          outputs.push_back("report.json");
          return rep.all_pass() ? kOk : kValidationFailure;
        }
        ReactionNetwork net = load_model(a.model);
        if (a.kind == "compensator") {
          harness::AuditReport rep = harness::compensator_study(
              net, a.n, a.l, a.replicas, a.T, a.samples, a.seed, a.jobs);
          write_text(out / "report.json", io::audit_report_json(rep));
          outputs.push_back("report.json");
          return rep.all_pass() ? kOk : kValidationFailure;
        }
        if (a.kind == "zd-decay") {
          harness::SlopeReport rep =
              harness::zd_decay_study(net, parse_int_list(a.n_list), a.replicas, a.alpha_tilde,
                                      a.T, a.samples, a.seed, a.jobs);
          write_text(out / "report.json", io::slope_report_json(rep));
          outputs.push_back("report.json");
          return rep.passes() ? kOk : kValidationFailure;
        }
        if (a.kind == "yn-tail") {
          harness::TailReport rep = harness::yn_tail_study(
              net, a.n, parse_double_list(a.l_list), parse_double_list(a.eps_list), a.replicas,
              a.beta, a.T, a.samples, a.seed, a.jobs);
          write_text(out / "report.json", io::tail_report_json(rep));
          outputs.push_back("report.json");
          return (rep.monotone_inf && rep.monotone_beta) ? kOk : kValidationFailure;
        }
        throw std::invalid_argument("unknown probes kind: " + a.kind);
      });
}

}  // namespace

int dispatch(const std::vector<std::string>& args) {
  CLI::App app{"two-scale spatial gene network simulator and analysis toolkit"};
  app.require_subcommand(1);

  // validate-model
  auto* val = app.add_subcommand("validate-model", "check a model file against the rate rules");
  std::string val_model, val_out;
  val->add_option("model", val_model, "model JSON file")->required();
  val->add_option("--out", val_out, "optional output directory");

  // simulate
  SimulateArgs sa;
  sa.seed = env_seed();
  auto* simc = app.add_subcommand("simulate", "run the jump-process simulator");
  simc->add_option("--model", sa.model, "model file or builtin name")->required();
  simc->add_option("--n", sa.n, "lattice cells (odd)");
  simc->add_option("--l", sa.l, "population scale");
  simc->add_option("--T", sa.T, "time horizon");
  simc->add_option("--samples", sa.samples, "number of sample intervals");
  simc->add_option("--seed", sa.seed, "RNG seed (overrides MESOSCALE_SEED)");
  simc->add_option("--out", sa.out, "output directory")->required();
  simc->add_option("--mode", sa.mode, "exact | tau-leap")
      ->check(CLI::IsMember({"exact", "tau-leap"}));
  simc->add_flag("--log-events", sa.log_events, "write the binary event log");
  simc->add_option("--u0-const", sa.u0_const, "constant initial concentration");
  simc->add_option("--v0-const", sa.v0_const, "constant initial discrete count");
  simc->add_option("--u0", sa.u0_csv, "initial concentration CSV");
  simc->add_option("--v0", sa.v0_csv, "initial discrete counts CSV");
  simc->add_option("--alpha-trunc", sa.alpha_trunc, "truncation norm index");

  // solve-limit
  SolveLimitArgs la;
  auto* lim = app.add_subcommand("solve-limit", "solve the limit PDE-ODE system");
  lim->add_option("--model", la.model, "model file or builtin name")->required();
  lim->add_option("--u0", la.u0_json, "initial u coefficients (JSON)");
  lim->add_option("--v0", la.v0_csv, "initial v grid CSV (m_ref cells)");
  lim->add_option("--v0-const", la.v0_const, "constant initial v");
  lim->add_option("--T", la.T, "time horizon");
  lim->add_option("--dt", la.dt, "time step");
  lim->add_option("--mref", la.m_ref, "collocation resolution (odd)");
  lim->add_option("--samples", la.samples, "number of sample intervals");
  lim->add_option("--out", la.out, "output directory")->required();
  lim->add_flag("--estimate-order", la.estimate_order, "run the Richardson triplet");

  // converge
  std::string cv_plan, cv_out;
  int cv_jobs = 0;
  std::uint64_t cv_seed = env_seed();
  auto* conv = app.add_subcommand("converge", "run a law-of-large-numbers plan");
  conv->add_option("--plan", cv_plan, "plan JSON file")->required();
  conv->add_option("--out", cv_out, "output directory")->required();
  conv->add_option("--jobs", cv_jobs, "worker pool size");
  auto* conv_seed_opt = conv->add_option("--seed", cv_seed, "master seed");

  // probes
  ProbesArgs pa;
  pa.seed = env_seed() ? env_seed() : 1;
  auto* pr = app.add_subcommand("probes", "inequality / compensator / decay / tail studies");
  pr->add_option("--kind", pa.kind, "inequality | compensator | zd-decay | yn-tail")
      ->check(CLI::IsMember({"inequality", "compensator", "zd-decay", "yn-tail"}));
  pr->add_option("--model", pa.model, "model file or builtin name");
  pr->add_option("--out", pa.out, "output directory")->required();
  pr->add_option("--n-list", pa.n_list, "comma-separated lattice sizes");
  pr->add_option("--l-list", pa.l_list, "comma-separated population scales");
  pr->add_option("--eps-list", pa.eps_list, "comma-separated thresholds");
  pr->add_option("--n", pa.n, "lattice size");
  pr->add_option("--l", pa.l, "population scale");
  pr->add_option("--replicas", pa.replicas, "ensemble size");
  pr->add_option("--trials", pa.trials, "random trials per probe");
  pr->add_option("--alpha-tilde", pa.alpha_tilde, "decay norm index");
  pr->add_option("--beta", pa.beta, "tail norm index");
  pr->add_option("--T", pa.T, "time horizon");
  pr->add_option("--samples", pa.samples, "number of sample intervals");
  pr->add_option("--seed", pa.seed, "master seed");
  pr->add_option("--jobs", pa.jobs, "worker pool size");

  std::vector<std::string> argv_rev(args.rbegin(), args.rend());
  try {
    app.parse(argv_rev);
  } catch (const CLI::ParseError& e) {
    std::cerr << app.help();
    if (e.get_exit_code() == 0) return kOk;  // --help
    return kUsage;
  }

  try {
    if (*val) return cmd_validate(val_model, val_out);
    if (*simc) return cmd_simulate(sa);
    if (*lim) return cmd_solve_limit(la);
    if (*conv) return cmd_converge(cv_plan, cv_out, cv_jobs, cv_seed, conv_seed_opt->count() > 0 || env_seed() != 0);
    if (*pr) return cmd_probes(pa);
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kValidationFailure;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kRuntimeError;
  }
  return kUsage;
}

}  // namespace meso::cli
