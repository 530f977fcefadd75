#include <cmath>

#include "doctest.h"
#include "gf/error.hpp"
#include "gf/tpe.hpp"
#include "support/planted.hpp"

using namespace gf;

TEST_CASE("tpe finds the quadratic optimum") {
  const auto out = testing::tpe_quadratic(30, 200);
  INFO("seeds within 0.3 of the optimum: " << out.located);
  CHECK(out.located >= 28);
  CHECK(out.beats_warmup);
  CHECK(out.strictly_improved >= 28);
}

TEST_CASE("tpe trial logs are seeded") {
  const std::vector<TpeDim> space = {TpeDim::real("x", -1.0, 1.0), TpeDim::integer("n", 1, 9),
                                     TpeDim::categorical("c", {"a", "b", "c"})};
  auto f = [](const TpePoint& p) { return p[0] * p[0] + std::fabs(p[1] - 4.0) + (p[2] == 1.0 ? 0.0 : 1.0); };
  TpeOptions o;
  o.n_trials = 60;
  o.seed = 3;
  const TpeResult a = tpe_optimize(space, f, o);
  const TpeResult b = tpe_optimize(space, f, o);
  REQUIRE(a.trials.size() == 60);
  for (std::size_t i = 0; i < a.trials.size(); ++i) {
    CHECK(a.trials[i].point == b.trials[i].point);
    CHECK(a.trials[i].number == i);
    CHECK(a.trials[i].warmup == (i < 20));
    const auto& p = a.trials[i].point;
    CHECK(p[0] >= -1.0);
    CHECK(p[0] <= 1.0);
    CHECK(p[1] == std::round(p[1]));
    CHECK(p[1] >= 1.0);
    CHECK(p[1] <= 9.0);
    CHECK((p[2] == 0.0 || p[2] == 1.0 || p[2] == 2.0));
  }
  o.seed = 4;
  CHECK_FALSE(tpe_optimize(space, f, o).trials[0].point == a.trials[0].point);
  for (const auto& t : a.trials) CHECK(a.best_trial().objective <= t.objective);
}

TEST_CASE("enqueued points run first") {
  const std::vector<TpeDim> space = {TpeDim::real("x", 0.0, 10.0)};
  TpeOptions o;
  o.n_trials = 20;
  o.enqueued = {{7.5}, {1.25}};
  const TpeResult r = tpe_optimize(space, [](const TpePoint& p) { return p[0]; }, o);
  CHECK(r.trials[0].point == TpePoint{7.5});
  CHECK(r.trials[1].point == TpePoint{1.25});
  CHECK(r.trials[0].warmup);
}

TEST_CASE("random search flag") {
  const std::vector<TpeDim> space = {TpeDim::real("x", 0.0, 10.0)};
  TpeOptions o;
  o.n_trials = 40;
  o.random_search = true;
  const TpeResult r = tpe_optimize(space, [](const TpePoint& p) { return p[0]; }, o);
  CHECK(r.trials.size() == 40);
}

TEST_CASE("tpe preconditions") {
  const std::vector<TpeDim> space = {TpeDim::real("x", 0.0, 1.0)};
  TpeOptions o;
  o.n_trials = 19;
  CHECK_THROWS_AS(tpe_optimize(space, [](const TpePoint&) { return 0.0; }, o), ContractError);
  o.n_trials = 20;
  CHECK_THROWS_AS(tpe_optimize({}, [](const TpePoint&) { return 0.0; }, o), ContractError);
}

TEST_CASE("forest search space conversions") {
  const auto space = forest_search_space();
  REQUIRE(space.size() == 6);
  for (const HyperParams& hp : {HyperParams{}, HyperParams{968, MaxFeatures::of(8), 3, 1, 38, false},
                                HyperParams{10, MaxFeatures::log2(), 32, 32, 100, true}})
    CHECK(hyperparams_from_point(point_from_hyperparams(hp)) == hp);
  // Every point of a random run maps into the tuning ranges.
  TpeOptions o;
  o.n_trials = 30;
  o.random_search = true;
  const TpeResult r = tpe_optimize(space, [](const TpePoint&) { return 1.0; }, o);
  for (const auto& t : r.trials) CHECK_NOTHROW(validate_tuning_ranges(hyperparams_from_point(t.point)));
}
