#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "meso/reaction.hpp"

using namespace meso::model;

namespace {

Reaction make(Species s, int gamma, double a, double d, SmoothCoefficient b) {
  Reaction r;
  r.species = s;
  r.gamma = gamma;
  r.a = a;
  r.d = d;
  r.b = std::move(b);
  return r;
}

}  // namespace

TEST_CASE("validate: degradation-only model is confined") {
  // single C-reaction, gamma = -1, rate u; M = 1
  ReactionNetwork net({make(Species::C, -1, 0.0, 0.0, SmoothCoefficient::polynomial({0.0, 1.0}))},
                      1.0);
  CHECK(net.validate().ok());
}

TEST_CASE("validate: b(0) != 0 with gamma = -1 is rejected") {
  ReactionNetwork net({make(Species::C, -1, 0.0, 0.0, SmoothCoefficient::polynomial({1.0, 1.0}))},
                      1.0);
  ValidationReport rep = net.validate();
  CHECK(!rep.ok());
  CHECK(rep.violations[0].reaction_index == 0);
}

TEST_CASE("validate: D-reactions admit no u*v term") {
  ReactionNetwork net({make(Species::D, 2, 1.0, 0.0, SmoothCoefficient::zero())}, 1.0);
  CHECK(!net.validate().ok());
}

TEST_CASE("validate: jump sizes are -1 or positive") {
  ReactionNetwork net({make(Species::C, -2, 0.0, 0.0, SmoothCoefficient::zero())}, 1.0);
  CHECK(!net.validate().ok());
  ReactionNetwork net0({make(Species::C, 0, 0.0, 0.0, SmoothCoefficient::zero())}, 1.0);
  CHECK(!net0.validate().ok());
}

TEST_CASE("validate: unconfined continuous drift is rejected") {
  // pure C-birth at a constant rate: b_C = 1 > 0 everywhere
  ReactionNetwork net({make(Species::C, +1, 0.0, 0.0, SmoothCoefficient::constant(1.0))}, 1.0);
  ValidationReport rep = net.validate();
  CHECK(!rep.ok());
  CHECK(rep.violations[0].reaction_index == -1);
  CHECK(rep.violations[0].sample_u.has_value());
}

TEST_CASE("validate: positive d_C needs a dominating u*v repression") {
  // d_C > 0 with a_C = 0 cannot satisfy the scalar certificate
  ReactionNetwork bad(
      {make(Species::C, +1, 0.0, 0.5, SmoothCoefficient::zero()),
       make(Species::C, -1, 0.0, 0.0, SmoothCoefficient::polynomial({0.0, 1.0}))},
      2.0);
  CHECK(!bad.validate().ok());
  // adding the repression restores it for M >= d_C / a_C
  ReactionNetwork good(
      {make(Species::C, +1, 0.0, 0.5, SmoothCoefficient::zero()),
       make(Species::C, -1, 0.0, 0.0, SmoothCoefficient::polynomial({0.0, 1.0})),
       make(Species::C, -1, 1.0, 0.0, SmoothCoefficient::zero())},
      2.0);
  CHECK(good.validate().ok());
}

TEST_CASE("eval_rate follows the case table") {
  // D-death: rate d v
  ReactionNetwork net1({make(Species::D, -1, 0.0, 3.0, SmoothCoefficient::zero())}, 1.0);
  CHECK(net1.eval_rate(0, 0.0, 2.0) == doctest::Approx(6.0));

  // C-birth: a u v + b(u) + d v at (1, 2) with a=1, d=0.5, b(u)=2u
  ReactionNetwork net2(
      {make(Species::C, +1, 1.0, 0.5, SmoothCoefficient::polynomial({0.0, 2.0}))}, 5.0);
  CHECK(net2.eval_rate(0, 1.0, 2.0) == doctest::Approx(5.0));

  // absorbing at the origin when b(0) = 0
  ReactionNetwork net3({make(Species::C, -1, 2.0, 0.0, SmoothCoefficient::polynomial({0.0, 1.0}))},
                       1.0);
  CHECK(net3.eval_rate(0, 0.0, 0.0) == 0.0);

  CHECK_THROWS(net3.eval_rate(0, -1.0, 0.0));
  CHECK_THROWS(net3.eval_rate(0, 0.0, -1.0));
}

TEST_CASE("drift aggregates match per-reaction sums") {
  ReactionNetwork net = builtin_network("gene-toggle");
  for (double u : {0.0, 0.3, 1.0, 2.2}) {
    for (double v : {0.0, 1.0, 4.0}) {
      double rc = 0.0, rd = 0.0, rt = 0.0;
      for (std::size_t r = 0; r < net.reactions().size(); ++r) {
        const Reaction& rx = net.reactions()[r];
        double g = rx.gamma;
        double lam = net.eval_rate(r, u, v);
        if (rx.species == Species::C) {
          rc += g * lam;
          rt += g * g * lam;
        } else {
          rd += g * lam;
        }
      }
      CHECK(net.drift(DriftKind::RC, u, v) == doctest::Approx(rc).epsilon(1e-14));
      CHECK(net.drift(DriftKind::RD, u, v) == doctest::Approx(rd).epsilon(1e-14));
      CHECK(net.drift(DriftKind::RCTilde, u, v) == doctest::Approx(rt).epsilon(1e-14));
    }
  }
}

TEST_CASE("drift: degenerate cases") {
  // no D-reactions: R_D identically zero
  ReactionNetwork net({make(Species::C, -1, 0.0, 0.0, SmoothCoefficient::polynomial({0.0, 1.0}))},
                      1.0);
  CHECK(net.drift_D(1.0, 5.0) == 0.0);
  // single C-reaction gamma=-1, b(u)=u: R_C = -u, R~_C = u
  CHECK(net.drift_C(0.7, 9.0) == doctest::Approx(-0.7));
  CHECK(net.drift_C_tilde(0.7, 9.0) == doctest::Approx(0.7));
}

TEST_CASE("builtin networks all validate; drift shapes as declared") {
  auto all = builtin_networks();
  CHECK(all.size() >= 6);
  for (const auto& [name, net] : all) {
    INFO("builtin ", name);
    CHECK(net.validate().ok());
  }

  // coupled-gene: R_D(u, v) = b_D(u) - d v
  ReactionNetwork cg = builtin_network("coupled-gene");
  for (double u : {0.1, 0.5, 1.0}) {
    for (double v : {0.0, 2.0}) {
      CHECK(cg.drift_D(u, v) == doctest::Approx(cg.b_D(u) + cg.d_D() * v).epsilon(1e-14));
    }
  }
  CHECK(cg.d_D() == doctest::Approx(-1.0));

  // birth-death-C: R_C = k0 - k1 u with confinement beyond M
  ReactionNetwork bd = builtin_network("birth-death-C");
  double k0 = bd.drift_C(0.0, 0.0);
  CHECK(k0 > 0.0);
  for (double u = bd.M() + 1e-6; u <= bd.M() + 2.0; u += 0.1)
    CHECK(bd.drift_C(u, 17.0) < 0.0);

  CHECK_THROWS(builtin_network("no-such-network"));
}

TEST_CASE("rate nonnegativity and confinement on a dense grid") {
  for (const char* name : {"coupled-gene", "gene-toggle", "birth-death-C"}) {
    ReactionNetwork net = builtin_network(name);
    const int nu = 100, nv = 100;
    for (int i = 0; i <= nu; ++i) {
      double u = (net.M() + 2.0) * i / nu;
      for (int k = 0; k <= nv; ++k) {
        double v = 50.0 * k / nv;
        for (std::size_t r = 0; r < net.reactions().size(); ++r)
          CHECK(net.eval_rate(r, u, v) >= 0.0);
        if (u > net.M()) CHECK(net.drift_C(u, v) < 0.0);
      }
    }
  }
}

TEST_CASE("discrete drift is structurally linear in v with no u*v term") {
  ReactionNetwork net = builtin_network("coupled-gene");
  // mixed second difference in (u, v) vanishes identically
  for (double u : {0.2, 0.9}) {
    for (double v : {1.0, 3.0}) {
      double cross = net.drift_D(u + 0.5, v + 2.0) - net.drift_D(u + 0.5, v) -
                     net.drift_D(u, v + 2.0) + net.drift_D(u, v);
      CHECK(std::abs(cross) < 1e-12);
    }
  }
}

TEST_CASE("hill coefficients: C1, nonnegative, zero at origin") {
  SmoothCoefficient h = SmoothCoefficient::hill(2.0, 0.5, 2.0);
  CHECK(h(0.0) == 0.0);
  CHECK(h(0.5) == doctest::Approx(1.0));  // half saturation
  CHECK(h(1e9) == doctest::Approx(2.0).epsilon(1e-6));
  CHECK_THROWS(SmoothCoefficient::hill(1.0, 0.0, 2.0));
  CHECK_THROWS(SmoothCoefficient::hill(1.0, 1.0, 0.5));
}

TEST_CASE("JSON model files round-trip") {
  ReactionNetwork net = builtin_network("coupled-gene");
  ReactionNetwork back = ReactionNetwork::from_json(net.to_json());
  CHECK(back.reactions().size() == net.reactions().size());
  CHECK(back.M() == net.M());
  for (double u : {0.1, 0.7}) {
    for (double v : {0.0, 2.5}) {
      CHECK(back.drift_C(u, v) == doctest::Approx(net.drift_C(u, v)).epsilon(1e-15));
      CHECK(back.drift_D(u, v) == doctest::Approx(net.drift_D(u, v)).epsilon(1e-15));
    }
  }
  CHECK(back.hash() == net.hash());

  const char* doc = R"({
    "M": 1.5,
    "reactions": [
      {"species": "C", "gamma": 1, "d": 0.25, "b": {"kind": "polynomial", "coeffs": [0.4]}},
      {"species": "C", "gamma": -1, "a": 0.5, "b": {"kind": "polynomial", "coeffs": [0, 1]}},
      {"species": "D", "gamma": 1, "b": {"kind": "hill", "vmax": 1.0, "K": 0.5, "h": 2}},
      {"species": "D", "gamma": -1, "d": 1.0}
    ]
  })";
  ReactionNetwork parsed = ReactionNetwork::from_json(doc);
  CHECK(parsed.reactions().size() == 4);
  CHECK(parsed.validate().ok());
  CHECK(parsed.a_C() == doctest::Approx(-0.5));
  CHECK(parsed.d_C() == doctest::Approx(0.25));

  CHECK_THROWS(ReactionNetwork::from_json("{\"reactions\": []}"));  // missing M
  CHECK_THROWS(ReactionNetwork::from_json(
      R"({"M": 1, "reactions": [{"species": "X", "gamma": 1}]})"));
}
