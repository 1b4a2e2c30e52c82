#pragma once

// Two-scale reaction networks: jump sizes, rate laws, confinement threshold,
// and the drift aggregates R_C, R_D and the squared-weight variant used by
// the quadratic-variation accounting.
//
// Rate laws by case:
//   C-species, gamma > 0 : a u v + b(u) + d v
//   C-species, gamma = -1: a u v + b(u),   b(0) = 0
//   D-species, gamma > 0 : d v + b(u)
//   D-species, gamma = -1: d v
// with a, d >= 0 and b a nonnegative C^1 coefficient function.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace meso::model {

/// Nonnegative C^1 coefficient function: polynomial sum c_k u^k or a Hill
/// term vmax u^h / (K^h + u^h).
struct SmoothCoefficient {
  enum class Kind { Polynomial, Hill };
  Kind kind = Kind::Polynomial;
  std::vector<double> coeffs;  // polynomial
  double vmax = 0.0, K = 1.0, h = 1.0;  // hill
  double kh = 1.0;   // K^h, precomputed
  int h_int = 0;     // h when it is a small integer, else 0 (pow fallback)

  static SmoothCoefficient zero() { return constant(0.0); }
  static SmoothCoefficient constant(double c);
  static SmoothCoefficient polynomial(std::vector<double> cs);
  static SmoothCoefficient hill(double vmax, double K, double h);

  double operator()(double u) const;
  bool is_zero() const;
};

enum class Species : std::uint8_t { C, D };

struct Reaction {
  Species species = Species::C;
  int gamma = 1;               // jump size, -1 or a positive integer
  double a = 0.0;              // u*v coefficient (C-reactions only)
  double d = 0.0;              // v coefficient
  SmoothCoefficient b;         // u-only coefficient

  double rate(double u, double v) const { return a * u * v + b(u) + d * v; }
};

struct Violation {
  int reaction_index = -1;     // -1 for network-level violations
  std::string message;
  std::optional<double> sample_u;
};

struct ValidationReport {
  std::vector<Violation> violations;
  bool ok() const { return violations.empty(); }
  std::string to_string() const;
};

enum class DriftKind { RC, RD, RCTilde };

class ReactionNetwork {
 public:
  ReactionNetwork() = default;
  ReactionNetwork(std::vector<Reaction> reactions, double M, std::string name = "");

  const std::vector<Reaction>& reactions() const { return reactions_; }
  double M() const { return M_; }
  int gamma_max() const { return gamma_max_; }
  const std::string& name() const { return name_; }

  // Linear drift aggregates: R_C(u,v) = a_C u v + b_C(u) + d_C v and
  // likewise for R_D (a_D structurally absent) and the squared-weight
  // aggregate. b_* sums are evaluated reaction-by-reaction.
  double a_C() const { return aC_; }
  double d_C() const { return dC_; }
  double d_D() const { return dD_; }
  double a_tilde() const { return aT_; }
  double d_tilde() const { return dT_; }

  double b_C(double u) const;
  double b_D(double u) const;
  double b_tilde(double u) const;

  double drift(DriftKind which, double u, double v) const;
  double drift_C(double u, double v) const { return aC_ * u * v + b_C(u) + dC_ * v; }
  double drift_D(double u, double v) const { return b_D(u) + dD_ * v; }
  double drift_C_tilde(double u, double v) const { return aT_ * u * v + b_tilde(u) + dT_ * v; }

  /// Per-reaction rate with the case-table law. Negative u, v are rejected.
  double eval_rate(std::size_t r, double u, double v) const;

  ValidationReport validate() const;

  /// FNV-1a hash of the canonical serialization; identifies the model in
  /// trajectory headers and manifests.
  std::uint64_t hash() const;

  std::string to_json() const;
  static ReactionNetwork from_json(const std::string& text);
  static ReactionNetwork load_file(const std::string& path);

 private:
  std::vector<Reaction> reactions_;
  double M_ = 1.0;
  std::string name_;
  int gamma_max_ = 1;
  double aC_ = 0.0, dC_ = 0.0, dD_ = 0.0, aT_ = 0.0, dT_ = 0.0;
};

/// Named ready-made networks; every entry passes validate().
/// Includes "birth-death-C", "coupled-gene", "gene-toggle", "d-birth",
/// "d-birth-death" and "pure-diffusion".
std::vector<std::pair<std::string, ReactionNetwork>> builtin_networks();

/// Lookup by name in builtin_networks(); throws if absent.
ReactionNetwork builtin_network(const std::string& name);

}  // namespace meso::model
