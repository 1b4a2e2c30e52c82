#include "meso/io.hpp"

#include <charconv>
#include <chrono>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace meso::io {

using nlohmann::json;

static_assert(std::endian::native == std::endian::little,
              "binary formats assume a little-endian host");

std::string code_version() { return "mesoscale 0.1.0"; }

std::string format_double(double x) {
  char buf[32];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), x);
  if (ec != std::errc()) throw std::runtime_error("format_double failed");
  return std::string(buf, ptr);
}

std::uint64_t fnv1a_64(const void* data, std::size_t size) {
  const auto* p = static_cast<const unsigned char*>(data);
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (std::size_t i = 0; i < size; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ull;
  }
  return h;
}

std::uint64_t file_checksum(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open for checksum: " + path.string());
  std::uint64_t h = 0xcbf29ce484222325ull;
  char buf[1 << 16];
  while (in) {
    in.read(buf, sizeof(buf));
    std::streamsize got = in.gcount();
    for (std::streamsize i = 0; i < got; ++i) {
      h ^= static_cast<unsigned char>(buf[i]);
      h *= 0x100000001b3ull;
    }
  }
  return h;
}

// -- grid CSV ------------------------------------------------------------

void write_grid_csv(const std::filesystem::path& path, const GridFunction& g) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "index,value\n";
  for (int j = 0; j < g.n; ++j) out << j << "," << format_double(g[j]) << "\n";
}

GridFunction read_grid_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::string line;
  std::vector<double> vals;
  bool first = true;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (first && line.find("index") != std::string::npos) {
      first = false;
      continue;
    }
    first = false;
    auto comma = line.find(',');
    if (comma == std::string::npos) throw std::runtime_error("bad grid csv line: " + line);
    vals.push_back(std::stod(line.substr(comma + 1)));
  }
  const int n = static_cast<int>(vals.size());
  return GridFunction(n, std::move(vals));
}

void write_coeffs_json(const std::filesystem::path& path, const SpectralCoeffs& c) {
  json j;
  j["n"] = c.n;
  j["a"] = c.a;
  j["b"] = c.b;
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << j.dump(2) << "\n";
}

SpectralCoeffs read_coeffs_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  json j = json::parse(in);
  SpectralCoeffs c(j.at("n").get<int>());
  auto a = j.at("a").get<std::vector<double>>();
  auto b = j.value("b", std::vector<double>{});
  for (std::size_t m = 0; m < a.size() && m < c.a.size(); ++m) c.a[m] = a[m];
  for (std::size_t m = 1; m < b.size() && m < c.b.size(); ++m) c.b[m] = b[m];
  return c;
}

// -- binary formats ---------------------------------------------------------

namespace {

constexpr std::uint32_t kTrajectoryMagic = 0x4A525453u;  // "STRJ"
constexpr std::uint32_t kEventMagic = 0x54564553u;       // "SEVT"
constexpr std::uint32_t kFormatVersion = 1;

template <class T>
void put(std::ofstream& out, const T& v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
T get(std::ifstream& in) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) throw std::runtime_error("truncated binary file");
  return v;
}

void put_block(std::ofstream& out, const std::vector<double>& xs) {
  put<std::uint64_t>(out, xs.size());
  out.write(reinterpret_cast<const char*>(xs.data()),
            static_cast<std::streamsize>(xs.size() * sizeof(double)));
}

std::vector<double> get_block(std::ifstream& in) {
  auto count = get<std::uint64_t>(in);
  std::vector<double> xs(count);
  in.read(reinterpret_cast<char*>(xs.data()),
          static_cast<std::streamsize>(count * sizeof(double)));
  if (!in) throw std::runtime_error("truncated binary block");
  return xs;
}

void put_counts(std::ofstream& out, const std::vector<std::int64_t>& xs) {
  put<std::uint64_t>(out, xs.size());
  out.write(reinterpret_cast<const char*>(xs.data()),
            static_cast<std::streamsize>(xs.size() * sizeof(std::int64_t)));
}

std::vector<std::int64_t> get_counts(std::ifstream& in) {
  auto count = get<std::uint64_t>(in);
  std::vector<std::int64_t> xs(count);
  in.read(reinterpret_cast<char*>(xs.data()),
          static_cast<std::streamsize>(count * sizeof(std::int64_t)));
  if (!in) throw std::runtime_error("truncated binary block");
  return xs;
}

}  // namespace

void write_trajectory(const std::filesystem::path& path, const sim::Trajectory& traj) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  put(out, kTrajectoryMagic);
  put(out, kFormatVersion);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(traj.n));
  put(out, traj.l);
  put(out, traj.T);
  put(out, traj.seed);
  put(out, traj.network_hash);
  put<std::uint8_t>(out, traj.truncated_at ? 1 : 0);
  put<double>(out, traj.truncated_at.value_or(0.0));
  put(out, traj.trunc_window);
  put(out, traj.event_count);
  put<std::uint8_t>(out, traj.approximate ? 1 : 0);
  put_counts(out, traj.counts0C);
  put_counts(out, traj.counts0D);
  put_block(out, traj.u0.values);
  put_block(out, traj.v0.values);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(traj.samples.size()));
  for (const sim::TrajectorySample& s : traj.samples) {
    put(out, s.t);
    put_block(out, s.u.values);
    put_block(out, s.v.values);
    put_block(out, s.int_rc.values);
    put_block(out, s.int_rd.values);
    put_block(out, s.int_lap.values);
  }
}

sim::Trajectory read_trajectory(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  if (get<std::uint32_t>(in) != kTrajectoryMagic)
    throw std::runtime_error("not a trajectory file: " + path.string());
  if (get<std::uint32_t>(in) != kFormatVersion)
    throw std::runtime_error("unsupported trajectory version");
  sim::Trajectory traj;
  traj.n = static_cast<int>(get<std::uint32_t>(in));
  traj.l = get<double>(in);
  traj.T = get<double>(in);
  traj.seed = get<std::uint64_t>(in);
  traj.network_hash = get<std::uint64_t>(in);
  bool truncated = get<std::uint8_t>(in) != 0;
  double tau = get<double>(in);
  if (truncated) traj.truncated_at = tau;
  traj.trunc_window = get<double>(in);
  traj.event_count = get<std::uint64_t>(in);
  traj.approximate = get<std::uint8_t>(in) != 0;
  traj.counts0C = get_counts(in);
  traj.counts0D = get_counts(in);
  traj.u0 = GridFunction(traj.n, get_block(in));
  traj.v0 = GridFunction(traj.n, get_block(in));
  auto count = get<std::uint32_t>(in);
  for (std::uint32_t k = 0; k < count; ++k) {
    sim::TrajectorySample s;
    s.t = get<double>(in);
    s.u = GridFunction(traj.n, get_block(in));
    s.v = GridFunction(traj.n, get_block(in));
    s.int_rc = GridFunction(traj.n, get_block(in));
    s.int_rd = GridFunction(traj.n, get_block(in));
    s.int_lap = GridFunction(traj.n, get_block(in));
    traj.samples.push_back(std::move(s));
  }
  return traj;
}

void write_event_log(const std::filesystem::path& path,
                     const std::vector<sim::EventRecord>& log) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  put(out, kEventMagic);
  put(out, kFormatVersion);
  put<std::uint64_t>(out, log.size());
  for (const sim::EventRecord& r : log) {
    put(out, r.t);
    put(out, r.channel);
  }
}

std::vector<sim::EventRecord> read_event_log(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  if (get<std::uint32_t>(in) != kEventMagic)
    throw std::runtime_error("not an event log: " + path.string());
  if (get<std::uint32_t>(in) != kFormatVersion)
    throw std::runtime_error("unsupported event log version");
  auto count = get<std::uint64_t>(in);
  std::vector<sim::EventRecord> log;
  log.reserve(count);
  for (std::uint64_t i = 0; i < count; ++i) {
    sim::EventRecord r;
    r.t = get<double>(in);
    r.channel = get<std::uint32_t>(in);
    log.push_back(r);
  }
  return log;
}

// -- reports -------------------------------------------------------------------

namespace {

json interval_json(const stats::Interval& iv) { return {{"lo", iv.lo}, {"hi", iv.hi}}; }

json metric_json(const harness::MetricSummary& m) {
  return {{"median", m.median},
          {"mean", m.mean},
          {"p90", m.p90},
          {"median_ci", interval_json(m.median_ci)}};
}

json fit_json(const stats::LineFit& f) {
  return {{"slope", f.slope}, {"intercept", f.intercept}, {"r2", f.r2}};
}

}  // namespace

std::string lln_report_json(const harness::ExperimentPlan& plan,
                            const harness::ErrorReport& rep) {
  json j;
  j["plan"] = json::parse(plan.to_json());
  j["rows"] = json::array();
  for (const harness::LlnRow& r : rep.rows) {
    j["rows"].push_back({{"n", r.n},
                         {"l", r.l},
                         {"replicas", r.replicas},
                         {"aborted", r.aborted},
                         {"trunc_frequency", r.trunc_frequency},
                         {"err_u_beta", metric_json(r.err_u_beta)},
                         {"err_u_inf", metric_json(r.err_u_inf)},
                         {"err_v_alpha", metric_json(r.err_v_alpha)}});
  }
  j["slopes"] = {{"u_beta", fit_json(rep.slope_u_beta)},
                 {"u_inf", fit_json(rep.slope_u_inf)},
                 {"v_alpha", fit_json(rep.slope_v_alpha)}};
  j["slope_cis"] = {{"u_beta", interval_json(rep.slope_u_beta_ci)},
                    {"u_inf", interval_json(rep.slope_u_inf_ci)},
                    {"v_alpha", interval_json(rep.slope_v_alpha_ci)}};
  return j.dump(2);
}

std::string lln_report_csv(const harness::ErrorReport& rep) {
  std::ostringstream os;
  os << "n,l,replicas,aborted,trunc_frequency,"
        "u_beta_median,u_beta_mean,u_beta_p90,"
        "u_inf_median,u_inf_mean,u_inf_p90,"
        "v_alpha_median,v_alpha_mean,v_alpha_p90\n";
  for (const harness::LlnRow& r : rep.rows) {
    os << r.n << "," << format_double(r.l) << "," << r.replicas << "," << r.aborted << ","
       << format_double(r.trunc_frequency) << "," << format_double(r.err_u_beta.median) << ","
       << format_double(r.err_u_beta.mean) << "," << format_double(r.err_u_beta.p90) << ","
       << format_double(r.err_u_inf.median) << "," << format_double(r.err_u_inf.mean) << ","
       << format_double(r.err_u_inf.p90) << "," << format_double(r.err_v_alpha.median) << ","
       << format_double(r.err_v_alpha.mean) << "," << format_double(r.err_v_alpha.p90) << "\n";
  }
  return os.str();
}

std::string lln_plot_csv(const harness::ErrorReport& rep) {
  std::ostringstream os;
  os << "n,l,metric,median,lo,hi\n";
  auto emit = [&os](const harness::LlnRow& r, const char* name,
                    const harness::MetricSummary& m) {
    os << r.n << "," << format_double(r.l) << "," << name << "," << format_double(m.median)
       << "," << format_double(m.median_ci.lo) << "," << format_double(m.median_ci.hi) << "\n";
  };
  for (const harness::LlnRow& r : rep.rows) {
    emit(r, "u_beta", r.err_u_beta);
    emit(r, "u_inf", r.err_u_inf);
    emit(r, "v_alpha", r.err_v_alpha);
  }
  return os.str();
}

std::string slope_report_json(const harness::SlopeReport& rep) {
  json j;
  j["alpha_tilde"] = rep.alpha_tilde;
  j["degenerate"] = rep.degenerate;
  j["n"] = rep.ns;
  j["mean_sup_sq"] = rep.mean_sq;
  j["fit"] = fit_json(rep.fit);
  j["slope_ci"] = interval_json(rep.slope_ci);
  j["pass"] = rep.passes();
  return j.dump(2);
}

std::string tail_report_json(const harness::TailReport& rep) {
  json j;
  j["n"] = rep.n;
  j["beta"] = rep.beta;
  j["monotone_inf"] = rep.monotone_inf;
  j["monotone_beta"] = rep.monotone_beta;
  j["cells"] = json::array();
  for (const harness::TailCell& c : rep.cells)
    j["cells"].push_back({{"l", c.l},
                          {"eps", c.eps},
                          {"freq_inf", c.freq_inf},
                          {"freq_beta", c.freq_beta},
                          {"ci_inf", interval_json(c.ci_inf)},
                          {"ci_beta", interval_json(c.ci_beta)}});
  return j.dump(2);
}

std::string probe_report_json(const harness::ProbeReport& rep) {
  json j;
  j["all_pass"] = rep.all_pass();
  j["probes"] = json::array();
  for (const harness::ProbeResult& r : rep.results) {
    j["probes"].push_back({{"name", r.name},
                           {"n", r.ns},
                           {"max_ratio", r.max_ratio},
                           {"slope", r.slope},
                           {"pass", r.pass},
                           {"note", r.note}});
  }
  return j.dump(2);
}

std::string audit_report_json(const harness::AuditReport& rep) {
  json j;
  j["network"] = rep.network;
  j["all_pass"] = rep.all_pass();
  j["rows"] = json::array();
  for (const harness::AuditRow& r : rep.rows) {
    j["rows"].push_back({{"probe", r.probe},
                         {"mean_diff", r.mean_diff},
                         {"ci", interval_json(r.ci)},
                         {"mean_S", r.mean_S},
                         {"mean_G", r.mean_G},
                         {"pass", r.pass}});
  }
  return j.dump(2);
}

// -- run manifest ------------------------------------------------------------------

void write_manifest(const std::filesystem::path& out_dir, RunManifest manifest) {
  json j;
  j["command"] = manifest.command;
  j["config_hash"] = manifest.config_hash;
  j["master_seed"] = manifest.master_seed;
  j["code_version"] = manifest.code_version.empty() ? code_version() : manifest.code_version;
  j["started_at"] = manifest.started_at;
  j["finished_at"] = manifest.finished_at;
  j["error"] = manifest.error;
  j["outputs"] = json::array();
  for (auto& o : manifest.outputs) {
    auto full = out_dir / o.path;
    if (std::filesystem::exists(full)) {
      o.bytes = std::filesystem::file_size(full);
      o.checksum = file_checksum(full);
    }
    std::ostringstream hex;
    hex << std::hex << o.checksum;
    j["outputs"].push_back({{"path", o.path}, {"bytes", o.bytes}, {"fnv64", hex.str()}});
  }
  std::ofstream out(out_dir / "manifest.json");
  if (!out) throw std::runtime_error("cannot write manifest in " + out_dir.string());
  out << j.dump(2) << "\n";
}

}  // namespace meso::io
