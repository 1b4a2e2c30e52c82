#pragma once

// File formats: CSV for grids and tabular reports, little-endian binary for
// trajectories and event logs (versioned magic numbers), JSON for reports
// and run manifests. Numeric text output uses a fixed shortest-roundtrip
// format so reruns are byte-identical.

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "meso/grid.hpp"
#include "meso/harness.hpp"
#include "meso/simulator.hpp"

namespace meso::io {

/// Shortest decimal form that round-trips a double (stable across runs).
std::string format_double(double x);

std::uint64_t fnv1a_64(const void* data, std::size_t size);
std::uint64_t file_checksum(const std::filesystem::path& path);

// -- grid CSV ------------------------------------------------------------

void write_grid_csv(const std::filesystem::path& path, const GridFunction& g);
GridFunction read_grid_csv(const std::filesystem::path& path);

void write_coeffs_json(const std::filesystem::path& path, const SpectralCoeffs& c);
SpectralCoeffs read_coeffs_json(const std::filesystem::path& path);

// -- binary trajectory / event log ----------------------------------------

void write_trajectory(const std::filesystem::path& path, const sim::Trajectory& traj);
sim::Trajectory read_trajectory(const std::filesystem::path& path);

void write_event_log(const std::filesystem::path& path, const std::vector<sim::EventRecord>& log);
std::vector<sim::EventRecord> read_event_log(const std::filesystem::path& path);

// -- reports ---------------------------------------------------------------

std::string lln_report_json(const harness::ExperimentPlan& plan, const harness::ErrorReport& rep);
std::string lln_report_csv(const harness::ErrorReport& rep);
std::string slope_report_json(const harness::SlopeReport& rep);
std::string tail_report_json(const harness::TailReport& rep);
std::string probe_report_json(const harness::ProbeReport& rep);
std::string audit_report_json(const harness::AuditReport& rep);

/// Plot-ready columns (n, l, metric, median, lo, hi).
std::string lln_plot_csv(const harness::ErrorReport& rep);

// -- run manifest -------------------------------------------------------------

struct RunManifest {
  std::string command;
  std::string config_hash;
  std::uint64_t master_seed = 0;
  std::string code_version;
  std::string started_at;   // ISO-8601, UTC
  std::string finished_at;
  std::string error;        // empty on success
  struct Output {
    std::string path;       // relative to the output directory
    std::uint64_t bytes = 0;
    std::uint64_t checksum = 0;
  };
  std::vector<Output> outputs;
};

/// Writes manifest.json into `out_dir`, checksumming every listed file.
void write_manifest(const std::filesystem::path& out_dir, RunManifest manifest);

std::string code_version();

}  // namespace meso::io
