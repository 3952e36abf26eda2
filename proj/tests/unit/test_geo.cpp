// SPDX-License-Identifier: Apache-2.0
#include <cmath>
#include <random>
#include <sstream>

#include "doctest.h"
#include "tc/error.hpp"
#include "tc/geo.hpp"
#include "test_util.hpp"

using namespace tc;

namespace {

std::vector<Trajectory> parse(const std::string& text) {
  std::istringstream in(text);
  return parse_trajectories(in);
}

ErrorKind kind_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("no error raised");
  return ErrorKind::kState;
}

}  // namespace

TEST_CASE("two rows make one trajectory") {
  auto trajs = parse("a,0,1.0,1.0\na,10,2.0,2.0\n");
  REQUIRE(trajs.size() == 1);
  CHECK(trajs[0].id == "a");
  CHECK(trajs[0].points.size() == 2);
  CHECK(trajs[0].points[1] == RawPoint{10, 2.0, 2.0});
}

TEST_CASE("header optional and rows regrouped by id") {
  auto trajs = parse("traj_id,t,x,y\nb,20,0,0\na,5,1,1\nb,10,1,1\na,0,0,0\n");
  REQUIRE(trajs.size() == 2);
  CHECK(trajs[0].id == "a");
  CHECK(trajs[1].id == "b");
  CHECK(trajs[1].points[0].t == 10);
  CHECK(trajs[1].points[1].t == 20);
}

TEST_CASE("duplicate timestamp is a validation error naming the id") {
  try {
    parse("a,5,0,0\na,5,1,1\n");
    FAIL("expected failure");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::kValidation);
    CHECK(std::string(e.what()).find("'a'") != std::string::npos);
  }
}

TEST_CASE("malformed rows report the line") {
  try {
    parse("a,0,0,0\na,x,1,1\n");
    FAIL("expected failure");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::kParse);
    CHECK(std::string(e.what()).find("2") != std::string::npos);
  }
  CHECK(kind_of([] { parse("a,0,0\n"); }) == ErrorKind::kParse);
  CHECK(kind_of([] { parse("a,-3,0,0\n"); }) == ErrorKind::kParse);
  CHECK(kind_of([] { parse("a,0,nan,0\n"); }) == ErrorKind::kParse);
}

TEST_CASE("write then parse is exact") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-1e3, 1e3);
  std::vector<Trajectory> trajs(3);
  for (std::size_t i = 0; i < trajs.size(); ++i) {
    trajs[i].id = "t" + std::to_string(i);
    for (Timestamp t = 0; t < 50; t += 10) trajs[i].points.push_back({t, u(rng), u(rng)});
  }
  std::ostringstream out;
  write_trajectories(out, trajs);
  auto back = parse(out.str());
  REQUIRE(back.size() == trajs.size());
  for (std::size_t i = 0; i < trajs.size(); ++i) CHECK(back[i].points == trajs[i].points);
}

TEST_CASE("grid extents") {
  std::vector<Trajectory> one{{"a", {{0, 0.0, 0.0}}}};
  auto g1 = build_grid(one, 5.0);
  CHECK(g1.n_cols == 1);
  CHECK(g1.n_rows == 1);

  std::vector<Trajectory> span{{"a", {{0, 0.0, 0.0}, {10, 99.9, 49.9}}}};
  auto g2 = build_grid(span, 5.0);
  CHECK(g2.n_cols == 20);
  CHECK(g2.n_rows == 10);
  CHECK(g2.cell_count() == 200);

  std::vector<Trajectory> shifted{{"a", {{0, -7.0, 3.0}, {10, 12.0, 4.0}}}};
  auto g3 = build_grid(shifted, 5.0);
  CHECK(g3.origin_x == -10.0);
  CHECK(g3.origin_y == 0.0);

  std::vector<Trajectory> none;
  CHECK_THROWS_AS(build_grid(none, 5.0), Error);
  CHECK_THROWS_AS(build_grid(one, 0.0), Error);
}

TEST_CASE("cell ids use half-open floors") {
  Grid g{0.0, 0.0, 5.0, 20, 20};
  CHECK(cell_of(g, 0.0, 0.0) == 0);
  CHECK(cell_of(g, 7.5, 12.0) == 41);
  CHECK(cell_of(g, 5.0, 0.0) == 1);
  CHECK(cell_of(g, 4.999999, 0.0) == 0);
  CHECK(cell_of(g, 100.0, 0.0) == -1);
  CHECK(cell_of(g, -0.1, 0.0) == -1);
  Trajectory outside{"o", {{0, 1.0, 1.0}, {10, 101.0, 1.0}}};
  try {
    tokenize(outside, g);
    FAIL("expected failure");
  } catch (const Error& e) {
    CHECK(std::string(e.what()).find("point 1") != std::string::npos);
  }
}

TEST_CASE("tokenize keeps cardinality and centers stay close") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(0.0, 200.0);
  Trajectory tr{"x", {}};
  for (Timestamp t = 0; t < 500; t += 5) tr.points.push_back({t, u(rng), u(rng)});
  std::vector<Trajectory> all{tr};
  auto grid = build_grid(all, 5.0);
  auto seq = tokenize(tr, grid);
  REQUIRE(seq.tokens.size() == tr.points.size());
  for (std::size_t i = 0; i < seq.tokens.size(); ++i) {
    CHECK(seq.tokens[i].t == tr.points[i].t);
    auto c = grid.center(seq.tokens[i].cell);
    CHECK(std::hypot(c.x - tr.points[i].x, c.y - tr.points[i].y) <=
          5.0 * std::sqrt(2.0) / 2.0 + 1e-12);
  }
}

TEST_CASE("uniform interpolation") {
  Trajectory line{"a", {{0, 0.0, 0.0}, {20, 20.0, 0.0}}};
  auto r = interpolate_uniform(line, 10);
  REQUIRE(r.trajectory.points.size() == 3);
  CHECK_FALSE(r.degenerate);
  for (int i = 0; i < 3; ++i) {
    CHECK(r.trajectory.points[i].t == 10 * i);
    CHECK(r.trajectory.points[i].x == doctest::Approx(10.0 * i));
  }

  Trajectory short_one{"b", {{0, 0.0, 0.0}, {7, 1.0, 1.0}}};
  auto s = interpolate_uniform(short_one, 10);
  CHECK(s.trajectory.points.size() == 1);
  CHECK(s.degenerate);
}

TEST_CASE("interpolation matches a pointwise oracle") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-50.0, 50.0);
  std::uniform_int_distribution<Timestamp> gap(1, 25);
  for (int trial = 0; trial < 50; ++trial) {
    Trajectory tr{"r", {}};
    Timestamp t = gap(rng);
    for (int i = 0; i < 5; ++i) {
      tr.points.push_back({t, u(rng), u(rng)});
      t += gap(rng);
    }
    auto r = interpolate_uniform(tr, 10).trajectory;
    Timestamp expect_t = tr.points.front().t;
    for (std::size_t k = 0; k < r.points.size(); ++k, expect_t += 10) {
      const auto& p = r.points[k];
      CHECK(p.t == expect_t);
      // oracle: scan for the bracketing pair
      std::size_t j = 0;
      while (j + 1 < tr.points.size() && tr.points[j + 1].t < p.t) ++j;
      const auto& a = tr.points[j];
      const auto& b = tr.points[std::min(j + 1, tr.points.size() - 1)];
      double w = b.t == a.t ? 0.0 : double(p.t - a.t) / double(b.t - a.t);
      CHECK(p.x == doctest::Approx(a.x + w * (b.x - a.x)).epsilon(1e-12));
      CHECK(p.y == doctest::Approx(a.y + w * (b.y - a.y)).epsilon(1e-12));
    }
    CHECK(r.points.back().t <= tr.points.back().t);
    CHECK(r.points.back().t + 10 > tr.points.back().t);
  }
}

TEST_CASE("anchored lattice") {
  Trajectory tr{"a", {{3, 0.0, 0.0}, {33, 30.0, 0.0}}};
  auto r = interpolate_uniform(tr, 10, Timestamp{0}).trajectory;
  REQUIRE(r.points.size() == 3);
  CHECK(r.points[0].t == 10);
  CHECK(r.points[0].x == doctest::Approx(7.0));
  CHECK(r.points[2].t == 30);
}

TEST_CASE("file round trip and missing file") {
  testing::TempDir dir("geo");
  std::vector<Trajectory> trajs{{"a", {{0, 1.0, 1.0}, {10, 2.0, 2.0}}}};
  save_trajectories(dir.path() / "t.csv", trajs);
  auto back = load_trajectories(dir.path() / "t.csv");
  REQUIRE(back.size() == 1);
  CHECK(back[0].points == trajs[0].points);
  CHECK(kind_of([&] { load_trajectories(dir.path() / "none.csv"); }) == ErrorKind::kIo);
}

TEST_CASE("length warnings are reported, not fatal") {
  std::vector<std::string> warnings;
  std::istringstream in("a,0,0,0\na,10,1,1\n");
  auto trajs = parse_trajectories(in, [&](const std::string& w) { warnings.push_back(w); });
  CHECK(trajs.size() == 1);
  CHECK(warnings.size() == 1);
}
