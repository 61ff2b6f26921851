#include "doctest.h"
#include "margins.hpp"
#include "plants.hpp"

#include <cmath>

using namespace safeguard;

namespace {

// plain loop sums, no closed form
double stage_oracle(double lb, double ld, double lf, int l) {
  double s = 0.0, p = 1.0;
  for (int j = 0; j < l; ++j) {
    s += p;
    p *= lf;
  }
  return lb * ld * s;
}

double terminal_oracle(double lh, double ld, double lf, int n) {
  double p = 1.0;
  for (int j = 0; j < n - 1; ++j) p *= lf;
  return lh * ld * p;
}

}  // namespace

TEST_CASE("terminal margin matches the loop oracle") {
  CHECK(terminal_margin(1.331, 5.42e-5, 1.205, 20) == doctest::Approx(terminal_oracle(1.331, 5.42e-5, 1.205, 20)).epsilon(1e-13));
  CHECK(std::abs(terminal_margin(1.331, 5.42e-5, 1.205, 20) - 2.494e-3) < 1e-6);
  CHECK(std::abs(terminal_margin(100, 0.005, 0.9998, 6) - 0.49950) < 1e-5);
  CHECK(terminal_margin(100, 0.005, 0.9998, 6) == doctest::Approx(terminal_oracle(100, 0.005, 0.9998, 6)).epsilon(1e-13));
  CHECK(terminal_margin(2.0, 0.1, 3.0, 1) == doctest::Approx(0.2));
}

TEST_CASE("stage margin matches the loop oracle") {
  CHECK(std::abs(stage_margin(1.0, 0.00145, 1.205, 6) - 0.014581) < 1e-6);
  for (double lf : {0.5, 0.9998, 1.0, 1.0 + 1e-12, 1.205, 2.0}) {
    for (int l : {0, 1, 2, 6, 20}) {
      CAPTURE(lf);
      CAPTURE(l);
      CHECK(stage_margin(1.3, 0.002, lf, l) == doctest::Approx(stage_oracle(1.3, 0.002, lf, l)).epsilon(1e-11));
    }
  }
  CHECK(stage_margin(1.0, 5.42e-5, 1.205, 0) == 0.0);
}

TEST_CASE("stage margin at l = 20 for the first two-tank setting") {
  CHECK(stage_margin(1.0, 5.42e-5, 1.205, 20) == doctest::Approx(1.0751e-2).epsilon(1e-4));
}

TEST_CASE("margin arguments are validated") {
  CHECK_THROWS_AS(stage_margin(1.0, -1.0, 1.2, 3), Error);
  CHECK_THROWS_AS(terminal_margin(1.0, 0.1, 1.2, 0), Error);
  CHECK_THROWS_AS(stage_margin(1.0, 0.1, 1.2, -1), Error);
}

TEST_CASE("boundary layer formula") {
  const double a = compute_boundary_layer(0.894, 0.11, 0.02, 0.072);
  CHECK(a == doctest::Approx(0.894 * (0.11 + 0.02) + 0.072).epsilon(1e-15));
  CHECK(std::abs(a - 0.18822) < 1e-12);
}

TEST_CASE("nominal margin mode gives zeros") {
  const auto b = make_plant("two_tank", {}, {}, 20);
  FilterConfig cfg;
  cfg.horizon_n = 20;
  cfg.margin_mode = MarginMode::nominal;
  const Margins m = build_margins(b.model, b.ld, cfg);
  CHECK(m.terminal == 0.0);
  for (const auto& row : m.stage) {
    for (double v : row) CHECK(v == 0.0);
  }
  CHECK(one_step_margins(b.model, b.ld, MarginMode::nominal).terminal == 0.0);
}

TEST_CASE("robust margins table") {
  LipschitzOverrides lip;
  lip.ld = 5.42e-5;
  const auto b = make_plant("two_tank", {}, lip, 20);
  FilterConfig cfg;
  cfg.horizon_n = 20;
  const Margins m = build_margins(b.model, b.ld, cfg);
  REQUIRE(m.stage.size() == 4);
  REQUIRE(m.stage[0].size() == 21);
  for (int l = 0; l <= 20; ++l) CHECK(m.at(2, l) == doctest::Approx(stage_oracle(1.0, 5.42e-5, 1.205, l)).epsilon(1e-12));
  CHECK(m.terminal == doctest::Approx(terminal_oracle(1.331, 5.42e-5, 1.205, 20)).epsilon(1e-12));
  CHECK(one_step_margins(b.model, b.ld, MarginMode::robust).terminal == doctest::Approx(1.331 * 5.42e-5));
}

TEST_CASE("grid box enumerates corners and interior") {
  GridBox g{Vec{{0.0, 1.0}}, Vec{{1.0, 3.0}}, {3, 2}};
  CHECK(g.size() == 6);
  CHECK(same(g.point(0), Vec{{0.0, 1.0}}));
  CHECK(same(g.point(5), Vec{{1.0, 3.0}}));
  CHECK(g.point(1)[0] == doctest::Approx(0.5));
}

TEST_CASE("set check for the building: terminal tightening below eps, nonempty terminal set") {
  LipschitzOverrides lip;
  const auto b = make_plant("building", {}, lip, 6);
  FilterConfig cfg;
  cfg.horizon_n = 6;
  const Margins m = build_margins(b.model, b.ld, cfg);
  CHECK(m.terminal == doctest::Approx(0.4995).epsilon(1e-4));
  const auto rep = check_tightened_sets(b.model, m, b.cert_grid, b.cert_ks);
  CHECK(rep.all_nonempty());
  CHECK(rep.inclusion_failure_count == 0);
  CHECK(rep.pass());
  CHECK(m.terminal < 0.9);
}

TEST_CASE("set check flags an empty terminal set") {
  LipschitzOverrides lip;
  lip.lh_x = 1000;  // terminal tightening above eps
  const auto b = make_plant("building", {}, lip, 6);
  FilterConfig cfg;
  cfg.horizon_n = 6;
  const Margins m = build_margins(b.model, b.ld, cfg);
  CHECK(m.terminal > 0.9);
  CHECK_FALSE(check_tightened_sets(b.model, m, b.cert_grid, b.cert_ks).pass());
}
