#include "doctest.h"
#include "certify.hpp"
#include "plants.hpp"

#include <cmath>

using namespace safeguard;

TEST_CASE("two-tank candidate certifies on the published box") {
  LipschitzOverrides lip;
  lip.ld = 5.42e-5;
  const auto b = make_plant("two_tank", {}, lip, 20);
  const CertReport r = certify_grid(b.model, b.candidate, 20, b.ld, b.cert_grid, b.cert_ks);
  CHECK(r.grid_points >= 10000);
  CHECK(r.points_in_C > 0);
  CHECK(r.pass());
  CHECK(r.verdict() == "pass (sampled)");
  CHECK(r.threshold == doctest::Approx(1.331 * 5.42e-5 * std::pow(1.205, 19)));
}

TEST_CASE("shrunk input box fails and every listed failure re-evaluates negative") {
  LipschitzOverrides lip;
  lip.ld = 5.42e-5;
  const auto b = make_plant("two_tank", {{"u_max", "0.3"}}, lip, 20);
  const CertReport r = certify_grid(b.model, b.candidate, 20, b.ld, b.cert_grid, b.cert_ks);
  CHECK_FALSE(r.pass());
  REQUIRE_FALSE(r.failures.empty());
  const double thr = 1.331 * 5.42e-5 * std::pow(1.205, 19);
  for (const auto& f : r.failures) {
    const Vec u = b.candidate(f.x, f.k);
    const Vec next = b.model.plant.step(f.x, u, f.k);
    const double e1 = next[0] - 0.63, e2 = next[1] - 0.63;
    const double slack = 0.12 - e1 * e1 - 2.69 * e2 * e2 - thr;
    CHECK(slack < 0.0);
    CHECK(slack == doctest::Approx(f.slack).epsilon(1e-9));
  }
}

TEST_CASE("integrator candidate certifies with bounded inputs") {
  const auto b = make_plant("integrator", {}, {}, 1);
  const CertReport r = certify_grid(b.model, b.candidate, 1, b.ld, b.cert_grid, b.cert_ks);
  CHECK(r.pass());
  CHECK(r.max_abs_input <= 9.28);
  CHECK(r.threshold == doctest::Approx(0.894 * 0.02));
}

TEST_CASE("candidate outside the box is an error") {
  const auto b = make_plant("integrator", {}, {}, 1);
  const ControlMap bad = [](const Vec&, long) { return Vec::Constant(1, 11.0); };
  CHECK_THROWS_AS(certify_grid(b.model, bad, 1, b.ld, b.cert_grid, {0}), Error);
}

TEST_CASE("Lipschitz estimate of a linear map") {
  Mat a(2, 2);
  a << 2.0, 0.0, 0.0, 0.5;
  const StateMap g = [&](const Vec& x, long) { return Vec(a * x); };
  const double est = estimate_lipschitz(g, Vec::Zero(2), Vec::Ones(2), {0}, 5000, 3);
  CHECK(est <= 2.0 + 1e-9);
  CHECK(est > 1.95);
}
