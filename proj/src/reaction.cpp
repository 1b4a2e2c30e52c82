#include "meso/reaction.hpp"

#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace meso::model {

using nlohmann::json;

SmoothCoefficient SmoothCoefficient::constant(double c) {
  SmoothCoefficient out;
  out.kind = Kind::Polynomial;
  out.coeffs = {c};
  return out;
}

SmoothCoefficient SmoothCoefficient::polynomial(std::vector<double> cs) {
  SmoothCoefficient out;
  out.kind = Kind::Polynomial;
  out.coeffs = std::move(cs);
  if (out.coeffs.empty()) out.coeffs = {0.0};
  return out;
}

SmoothCoefficient SmoothCoefficient::hill(double vmax, double K, double h) {
  if (!(K > 0.0) || !(h >= 1.0))
    throw std::invalid_argument("hill coefficient requires K > 0 and h >= 1");
  SmoothCoefficient out;
  out.kind = Kind::Hill;
  out.vmax = vmax;
  out.K = K;
  out.h = h;
  out.kh = std::pow(K, h);
  if (h == std::round(h) && h <= 8.0) out.h_int = static_cast<int>(h);
  return out;
}

double SmoothCoefficient::operator()(double u) const {
  if (kind == Kind::Polynomial) {
    double acc = 0.0;
    for (std::size_t k = coeffs.size(); k-- > 0;) acc = acc * u + coeffs[k];
    return acc;
  }
  double up;
  if (h_int > 0) {
    up = u;
    for (int k = 1; k < h_int; ++k) up *= u;
  } else {
    up = std::pow(u, h);
  }
  return vmax * up / (kh + up);
}

bool SmoothCoefficient::is_zero() const {
  if (kind == Kind::Hill) return vmax == 0.0;
  for (double c : coeffs)
    if (c != 0.0) return false;
  return true;
}

ReactionNetwork::ReactionNetwork(std::vector<Reaction> reactions, double M, std::string name)
    : reactions_(std::move(reactions)), M_(M), name_(std::move(name)) {
  if (!(M_ > 0.0)) throw std::invalid_argument("ReactionNetwork: M must be positive");
  gamma_max_ = 1;
  for (const Reaction& r : reactions_) {
    gamma_max_ = std::max(gamma_max_, std::abs(r.gamma));
    double g = static_cast<double>(r.gamma);
    if (r.species == Species::C) {
      aC_ += g * r.a;
      dC_ += g * r.d;
      aT_ += g * g * r.a;
      dT_ += g * g * r.d;
    } else {
      dD_ += g * r.d;
    }
  }
}

double ReactionNetwork::b_C(double u) const {
  double acc = 0.0;
  for (const Reaction& r : reactions_)
    if (r.species == Species::C) acc += static_cast<double>(r.gamma) * r.b(u);
  return acc;
}

double ReactionNetwork::b_D(double u) const {
  double acc = 0.0;
  for (const Reaction& r : reactions_)
    if (r.species == Species::D) acc += static_cast<double>(r.gamma) * r.b(u);
  return acc;
}

double ReactionNetwork::b_tilde(double u) const {
  double acc = 0.0;
  for (const Reaction& r : reactions_)
    if (r.species == Species::C)
      acc += static_cast<double>(r.gamma) * static_cast<double>(r.gamma) * r.b(u);
  return acc;
}

double ReactionNetwork::drift(DriftKind which, double u, double v) const {
  switch (which) {
    case DriftKind::RC: return drift_C(u, v);
    case DriftKind::RD: return drift_D(u, v);
    case DriftKind::RCTilde: return drift_C_tilde(u, v);
  }
  return 0.0;
}

double ReactionNetwork::eval_rate(std::size_t r, double u, double v) const {
  if (u < 0.0 || v < 0.0) throw std::invalid_argument("eval_rate: negative state");
  return reactions_.at(r).rate(u, v);
}

namespace {

constexpr int kSamples = 10000;

std::string species_name(Species s) { return s == Species::C ? "C" : "D"; }

}  // namespace

ValidationReport ReactionNetwork::validate() const {
  ValidationReport rep;
  auto add = [&rep](int idx, std::string msg, std::optional<double> u = std::nullopt) {
    rep.violations.push_back({idx, std::move(msg), u});
  };

  const double ucap = M_ + 2.0;
  for (std::size_t i = 0; i < reactions_.size(); ++i) {
    const Reaction& r = reactions_[i];
    const int idx = static_cast<int>(i);
    if (r.gamma == 0 || r.gamma < -1) {
      add(idx, "jump size must be -1 or a positive integer");
      continue;
    }
    if (r.a < 0.0) add(idx, "coefficient a must be nonnegative");
    if (r.d < 0.0) add(idx, "coefficient d must be nonnegative");
    if (r.species == Species::C) {
      if (r.gamma == -1 && r.d != 0.0)
        add(idx, "C-reaction with gamma = -1 admits no v term");
      if (r.gamma == -1 && r.b(0.0) != 0.0)
        add(idx, "C-reaction with gamma = -1 requires b(0) = 0");
    } else {
      if (r.a != 0.0) add(idx, "D-reaction admits no u*v term");
      if (r.gamma == -1 && !r.b.is_zero())
        add(idx, "D-reaction with gamma = -1 has rate d*v only");
    }
    // b must be nonnegative on [0, M+2]; checked by dense sampling.
    for (int k = 0; k <= kSamples; ++k) {
      double u = ucap * static_cast<double>(k) / kSamples;
      if (r.b(u) < 0.0) {
        add(idx, "coefficient function b is negative", u);
        break;
      }
    }
  }

  // Confining-field certificate: the scalar sufficient conditions
  // a_C u + d_C <= 0 and b_C(u) < 0 on (M, M+2]. A network with no
  // C-reactions is accepted: the drift is identically zero and the
  // maximum principle holds by the semigroup contraction alone.
  bool has_c = false;
  for (const Reaction& r : reactions_)
    if (r.species == Species::C) has_c = true;
  if (has_c) {
    for (int k = 1; k <= kSamples; ++k) {
      double u = M_ + 2.0 * static_cast<double>(k) / kSamples;
      if (aC_ * u + dC_ > 0.0) {
        add(-1, "confinement fails: a_C u + d_C > 0 beyond the threshold", u);
        break;
      }
    }
    for (int k = 1; k <= kSamples; ++k) {
      double u = M_ + 2.0 * static_cast<double>(k) / kSamples;
      if (!(b_C(u) < 0.0)) {
        add(-1, "confinement fails: b_C not negative beyond the threshold", u);
        break;
      }
    }
  }
  return rep;
}

std::string ValidationReport::to_string() const {
  if (ok()) return "valid";
  std::ostringstream os;
  for (const Violation& v : violations) {
    if (v.reaction_index >= 0)
      os << "reaction " << v.reaction_index << ": ";
    else
      os << "network: ";
    os << v.message;
    if (v.sample_u) os << " (at u = " << *v.sample_u << ")";
    os << "\n";
  }
  return os.str();
}

namespace {

json coeff_to_json(const SmoothCoefficient& b) {
  json j;
  if (b.kind == SmoothCoefficient::Kind::Polynomial) {
    j["kind"] = "polynomial";
    j["coeffs"] = b.coeffs;
  } else {
    j["kind"] = "hill";
    j["vmax"] = b.vmax;
    j["K"] = b.K;
    j["h"] = b.h;
  }
  return j;
}

SmoothCoefficient coeff_from_json(const json& j) {
  if (!j.contains("kind")) throw std::invalid_argument("coefficient: missing kind");
  std::string kind = j.at("kind").get<std::string>();
  if (kind == "polynomial")
    return SmoothCoefficient::polynomial(j.at("coeffs").get<std::vector<double>>());
  if (kind == "hill")
    return SmoothCoefficient::hill(j.at("vmax").get<double>(), j.at("K").get<double>(),
                                   j.at("h").get<double>());
  throw std::invalid_argument("coefficient: unknown kind '" + kind + "'");
}

}  // namespace

std::string ReactionNetwork::to_json() const {
  json j;
  j["name"] = name_;
  j["M"] = M_;
  j["reactions"] = json::array();
  for (const Reaction& r : reactions_) {
    json jr;
    jr["species"] = species_name(r.species);
    jr["gamma"] = r.gamma;
    jr["a"] = r.a;
    jr["d"] = r.d;
    jr["b"] = coeff_to_json(r.b);
    j["reactions"].push_back(jr);
  }
  return j.dump(2);
}

ReactionNetwork ReactionNetwork::from_json(const std::string& text) {
  json j = json::parse(text);
  std::vector<Reaction> rs;
  for (const json& jr : j.at("reactions")) {
    Reaction r;
    std::string sp = jr.at("species").get<std::string>();
    if (sp == "C")
      r.species = Species::C;
    else if (sp == "D")
      r.species = Species::D;
    else
      throw std::invalid_argument("reaction: species must be C or D");
    r.gamma = jr.at("gamma").get<int>();
    r.a = jr.value("a", 0.0);
    r.d = jr.value("d", 0.0);
    r.b = jr.contains("b") ? coeff_from_json(jr.at("b")) : SmoothCoefficient::zero();
    rs.push_back(std::move(r));
  }
  return ReactionNetwork(std::move(rs), j.at("M").get<double>(), j.value("name", ""));
}

ReactionNetwork ReactionNetwork::load_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open model file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return from_json(buf.str());
}

std::uint64_t ReactionNetwork::hash() const {
  std::string s = to_json();
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

std::vector<std::pair<std::string, ReactionNetwork>> builtin_networks() {
  std::vector<std::pair<std::string, ReactionNetwork>> out;

  // Constant production, linear degradation of the abundant species.
  // R_C(u, v) = k0 - k1 u, confined for M > k0/k1.
  {
    std::vector<Reaction> rs;
    rs.push_back({Species::C, +1, 0.0, 0.0, SmoothCoefficient::constant(0.8)});
    rs.push_back({Species::C, -1, 0.0, 0.0, SmoothCoefficient::polynomial({0.0, 1.0})});
    out.emplace_back("birth-death-C", ReactionNetwork(std::move(rs), 1.8, "birth-death-C"));
  }

  // Discrete species promotes production of the abundant one, the abundant
  // one promotes the discrete one through a Hill term; a u*v repression
  // keeps the continuous drift confined (a_C < 0 dominates d_C > 0 beyond
  // the threshold).
  {
    std::vector<Reaction> rs;
    rs.push_back({Species::C, +1, 0.0, 0.4, SmoothCoefficient::constant(0.3)});
    rs.push_back({Species::C, -1, 0.0, 0.0, SmoothCoefficient::polynomial({0.0, 1.0})});
    rs.push_back({Species::C, -1, 0.5, 0.0, SmoothCoefficient::zero()});
    rs.push_back({Species::D, +1, 0.0, 0.0, SmoothCoefficient::hill(1.5, 0.5, 2.0)});
    rs.push_back({Species::D, -1, 0.0, 1.0, SmoothCoefficient::zero()});
    out.emplace_back("coupled-gene", ReactionNetwork(std::move(rs), 1.5, "coupled-gene"));
  }

  // Negative feedback loop: u is produced at a constant rate, degraded both
  // linearly and proportionally to u*v, and u activates production of the
  // discrete repressor.
  {
    std::vector<Reaction> rs;
    rs.push_back({Species::C, +1, 0.0, 0.0, SmoothCoefficient::constant(1.0)});
    rs.push_back({Species::C, -1, 1.0, 0.0, SmoothCoefficient::polynomial({0.0, 0.5})});
    rs.push_back({Species::D, +1, 0.0, 0.0, SmoothCoefficient::hill(2.0, 1.0, 4.0)});
    rs.push_back({Species::D, -1, 0.0, 0.8, SmoothCoefficient::zero()});
    out.emplace_back("gene-toggle", ReactionNetwork(std::move(rs), 2.5, "gene-toggle"));
  }

  // Discrete-scale-only references used by the oracle studies. M sits well
  // above the stationary level of v so the truncation clause stays quiet.
  {
    std::vector<Reaction> rs;
    rs.push_back({Species::D, +1, 0.0, 0.0, SmoothCoefficient::constant(2.0)});
    out.emplace_back("d-birth", ReactionNetwork(std::move(rs), 10.0, "d-birth"));
  }
  {
    std::vector<Reaction> rs;
    rs.push_back({Species::D, +1, 0.0, 0.0, SmoothCoefficient::constant(2.0)});
    rs.push_back({Species::D, -1, 0.0, 1.0, SmoothCoefficient::zero()});
    out.emplace_back("d-birth-death", ReactionNetwork(std::move(rs), 10.0, "d-birth-death"));
  }

  // No reactions at all: only the diffusion clocks run.
  out.emplace_back("pure-diffusion", ReactionNetwork({}, 2.0, "pure-diffusion"));

  return out;
}

ReactionNetwork builtin_network(const std::string& name) {
  for (auto& [nm, net] : builtin_networks())
    if (nm == name) return net;
  throw std::invalid_argument("unknown builtin network: " + name);
}

}  // namespace meso::model
