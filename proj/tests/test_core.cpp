#include "doctest.h"
#include "core.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

using namespace safeguard;

namespace {

PlantModel box_plant(int n, int m, double lo, double hi) {
  PlantModel p;
  p.name = "box";
  p.n_states = n;
  p.n_inputs = m;
  p.input_lower = Vec::Constant(m, lo);
  p.input_upper = Vec::Constant(m, hi);
  p.step = [](const Vec& x, const Vec&, long) { return x; };
  p.lf_x = 1.0;
  return p;
}

std::string temp_file(const std::string& name, const std::string& text) {
  const auto path = std::filesystem::temp_directory_path() / name;
  std::ofstream(path) << text;
  return path.string();
}

}  // namespace

TEST_CASE("every disturbance kind respects its bound") {
  for (auto norm : {NormConvention::euclidean, NormConvention::componentwise}) {
    for (auto kind : {DisturbanceKind::uniform_random, DisturbanceKind::extreme_corner,
                      DisturbanceKind::adversarial, DisturbanceKind::sinusoid}) {
      DisturbanceSpec s;
      s.kind = kind;
      s.norm = norm;
      s.ld = 0.00145;
      s.seed = 11;
      s.random_fraction = 0.5;
      s.amplitude = norm == NormConvention::euclidean ? 0.00145 / std::sqrt(3.0) : 0.00145;
      s.frequency = 0.3;
      const Disturbance d(s, 3);
      const auto score = [](const Vec& v) { return v.sum() + 0.1 * v[0]; };
      for (long k = 0; k < 400; ++k) {
        const Vec v = d.realize(Vec::Zero(3), Vec::Zero(1), k, score);
        REQUIRE(v.size() == 3);
        CHECK(vector_norm(v, norm) <= s.ld);
      }
    }
  }
}

TEST_CASE("random disturbances are a pure function of seed and step") {
  DisturbanceSpec s;
  s.kind = DisturbanceKind::uniform_random;
  s.ld = 0.1;
  s.seed = 5;
  const Disturbance a(s, 2), b(s, 2);
  CHECK(same(a.realize(Vec::Zero(2), Vec::Zero(1), 17), b.realize(Vec::Ones(2), Vec::Ones(1), 17)));
  CHECK_FALSE(same(a.realize(Vec::Zero(2), Vec::Zero(1), 17), a.realize(Vec::Zero(2), Vec::Zero(1), 18)));
  s.seed = 6;
  const Disturbance c(s, 2);
  CHECK_FALSE(same(a.realize(Vec::Zero(2), Vec::Zero(1), 17), c.realize(Vec::Zero(2), Vec::Zero(1), 17)));
}

TEST_CASE("uniform draws fill the ball") {
  DisturbanceSpec s;
  s.kind = DisturbanceKind::uniform_random;
  s.ld = 1.0;
  const Disturbance d(s, 2);
  double biggest = 0.0;
  int positive = 0;
  for (long k = 0; k < 2000; ++k) {
    const Vec v = d.realize(Vec::Zero(2), Vec::Zero(1), k);
    biggest = std::max(biggest, v.norm());
    positive += v[0] > 0;
  }
  CHECK(biggest > 0.95);
  CHECK(positive > 850);
  CHECK(positive < 1150);
}

TEST_CASE("extreme corner sits on the bound") {
  DisturbanceSpec s;
  s.kind = DisturbanceKind::extreme_corner;
  s.ld = 0.002;
  s.signs = {1, -1};
  const Vec v = Disturbance(s, 2).realize(Vec::Zero(2), Vec::Zero(1), 0);
  CHECK(v.norm() == doctest::Approx(0.002).epsilon(1e-12));
  CHECK(v[0] > 0);
  CHECK(v[1] < 0);
}

TEST_CASE("adversarial picks the lowest-scoring corner") {
  DisturbanceSpec s;
  s.kind = DisturbanceKind::adversarial;
  s.ld = 1.0;
  s.norm = NormConvention::componentwise;
  const Vec v = Disturbance(s, 3).realize(Vec::Zero(3), Vec::Zero(1), 0,
                                          [](const Vec& d) { return d[0] - d[1] + 2 * d[2]; });
  CHECK(same(v, Vec{{-1.0, 1.0, -1.0}}));
  CHECK_THROWS_AS(Disturbance(s, 3).realize(Vec::Zero(3), Vec::Zero(1), 0), Error);
}

TEST_CASE("oversized sinusoid is rejected up front") {
  DisturbanceSpec s;
  s.kind = DisturbanceKind::sinusoid;
  s.ld = 0.01;
  s.amplitude = 0.01;
  CHECK_THROWS_AS(Disturbance(s, 2), Error);  // peak euclidean norm 0.0141
  s.axes = {1};
  CHECK_NOTHROW(Disturbance(s, 2));
}

TEST_CASE("file disturbance replays rows and checks the bound") {
  const auto ok = temp_file("sg_dist_ok.csv", "k,d0,d1\n0,0.001,0\n1,0,-0.001\n");
  DisturbanceSpec s;
  s.kind = DisturbanceKind::file;
  s.ld = 0.001;
  s.path = ok;
  const Disturbance d(s, 2);
  CHECK(same(d.realize(Vec::Zero(2), Vec::Zero(1), 1), Vec{{0.0, -0.001}}));
  CHECK_THROWS_AS(d.realize(Vec::Zero(2), Vec::Zero(1), 2), Error);
  s.ld = 0.0009;
  CHECK_THROWS_AS(Disturbance(s, 2), Error);
  s.path = temp_file("sg_dist_bad.csv", "k,d0\n0,0.001\n");
  s.ld = 1.0;
  CHECK_THROWS_AS(Disturbance(s, 2), Error);
}

TEST_CASE("nominal policy clamps into the box") {
  const PlantModel p = box_plant(2, 1, -1.0, 1.0);
  PolicySpec s;
  s.kind = PolicyKind::proportional_tracker;
  s.gain = Mat::Constant(1, 2, 10.0);
  s.reference.steps = {{0, Vec{{1.0, 1.0}}}};
  const NominalPolicy pol(s, p);
  CHECK(pol(Vec::Zero(2), 0)[0] == 1.0);
  CHECK(pol(Vec::Constant(2, 1.02), 0)[0] == doctest::Approx(-0.4));
  CHECK(pol(Vec::Constant(2, 5.0), 0)[0] == -1.0);
}

TEST_CASE("schedule lookup is piecewise constant") {
  const PlantModel p = box_plant(1, 1, 0.0, 10.0);
  PolicySpec s;
  s.kind = PolicyKind::schedule;
  s.table = {{0, Vec::Constant(1, 1.0)}, {10, Vec::Constant(1, 2.0)}, {20, Vec::Constant(1, 3.0)}};
  const NominalPolicy pol(s, p);
  CHECK(pol(Vec::Zero(1), 0)[0] == 1.0);
  CHECK(pol(Vec::Zero(1), 9)[0] == 1.0);
  CHECK(pol(Vec::Zero(1), 10)[0] == 2.0);
  CHECK(pol(Vec::Zero(1), 500)[0] == 3.0);
}

TEST_CASE("sinusoidal reference with lead") {
  ReferenceSchedule r;
  r.sinusoidal = true;
  r.offset = Vec::Constant(1, 0.1);
  r.amplitude = 0.5;
  r.omega = 0.05;
  r.lead = 1;
  CHECK(r.at(3)[0] == doctest::Approx(0.1 + 0.5 * std::sin(0.2)));
}

TEST_CASE("callback policy errors on non-finite output") {
  const PlantModel p = box_plant(1, 1, 0.0, 1.0);
  const auto pol = NominalPolicy::from_callback([](const Vec&, long) { return Vec::Constant(1, NAN); }, p);
  CHECK_THROWS_AS(pol(Vec::Zero(1), 0), Error);
}

TEST_CASE("finite-difference Jacobian of a bilinear map") {
  PlantModel p = box_plant(2, 1, 0.0, 1.0);
  p.step = [](const Vec& x, const Vec& u, long) { return Vec{{x[0] * u[0], x[0] + x[1] * x[1]}}; };
  const auto j = finite_difference_jacobian(p, Vec{{2.0, 3.0}}, Vec::Constant(1, 0.5), 0);
  CHECK(j.dx(0, 0) == doctest::Approx(0.5).epsilon(1e-5));
  CHECK(j.dx(1, 1) == doctest::Approx(6.0).epsilon(1e-5));
  CHECK(j.du(0, 0) == doctest::Approx(2.0).epsilon(1e-5));
  CHECK(std::abs(j.dx(0, 1)) < 1e-8);
}

TEST_CASE("seed mixing separates nearby inputs") {
  CHECK(mix_seed(1, 2) != mix_seed(2, 1));
  CHECK(mix_seed(1, 2) == mix_seed(1, 2));
  CHECK(mix_seed(0, 0) != 0);
}

TEST_CASE("keyed csv reader") {
  const auto path = temp_file("sg_keyed.csv", "k,a,b\n3,1.5,2\n7,-1,0.25\n");
  const auto rows = read_keyed_csv(path, 2);
  REQUIRE(rows.size() == 2);
  CHECK(rows[1].first == 7);
  CHECK(rows[1].second[1] == 0.25);
  CHECK_THROWS_AS(read_keyed_csv(path, 3), Error);
  CHECK_THROWS_AS(read_keyed_csv("/nonexistent/sg.csv", 2), Error);
}
