#include <cmath>
#include <limits>
#include <random>

#include "doctest.h"
#include "test_util.hpp"

#include "cmap/checkpoint.hpp"
#include "cmap/error.hpp"
#include "cmap/optim.hpp"

using namespace cmap;
using namespace cmap::ad;

TEST_CASE("adam first step moves by lr times the gradient sign") {
  ParamSet ps;
  Parameter& p = ps.add("p", Matrix::Ones(1, 1));
  AdamState st = AdamState::for_params(ps, {0.1, 0.9, 0.999, 1e-8});
  p.grad(0, 0) = 1.0;
  adam_step(ps, st);
  CHECK(p.value(0, 0) == doctest::Approx(0.9).epsilon(1e-6));
  CHECK(st.step == 1);
}

TEST_CASE("adam with zero gradient leaves parameters unchanged") {
  std::mt19937_64 rng(1);
  ParamSet ps;
  const Matrix init = testing::random_matrix(3, 4, rng);
  Parameter& p = ps.add("p", init);
  AdamState st = AdamState::for_params(ps);
  for (int i = 0; i < 5; ++i) adam_step(ps, st);
  CHECK(p.value == init);
}

TEST_CASE("adam defaults") {
  AdamOptions o;
  CHECK(o.lr == 3e-4);
  CHECK(o.beta1 == 0.9);
  CHECK(o.beta2 == 0.999);
  CHECK(o.eps == 1e-8);
}

TEST_CASE("adam is deterministic") {
  auto run = [] {
    std::mt19937_64 rng(4);
    ParamSet ps;
    ps.add("a", testing::random_matrix(2, 3, rng));
    ps.add("b", testing::random_matrix(1, 3, rng));
    AdamState st = AdamState::for_params(ps);
    for (int i = 0; i < 10; ++i) {
      for (std::size_t k = 0; k < ps.size(); ++k) ps[k].grad = testing::random_matrix(ps[k].value.rows(), ps[k].value.cols(), rng);
      adam_step(ps, st);
    }
    return std::make_pair(ps[0].value, ps[1].value);
  };
  CHECK(run() == run());
}

TEST_CASE("non-finite gradient raises a numeric fault naming the parameter") {
  ParamSet ps;
  Parameter& good = ps.add("good", Matrix::Ones(1, 2));
  Parameter& bad = ps.add("encoder.w0", Matrix::Ones(1, 2));
  good.grad.setConstant(0.5);
  bad.grad(0, 1) = std::numeric_limits<double>::quiet_NaN();
  AdamState st = AdamState::for_params(ps);
  try {
    adam_step(ps, st);
    FAIL("expected NumericFault");
  } catch (const NumericFault& e) {
    CHECK(std::string(e.what()).find("encoder.w0") != std::string::npos);
  }
  CHECK(good.value == Matrix::Ones(1, 2));
  CHECK(bad.value == Matrix::Ones(1, 2));
}

TEST_CASE("gradient clipping bounds the global norm") {
  ParamSet ps;
  Parameter& a = ps.add("a", Matrix::Zero(1, 2));
  Parameter& b = ps.add("b", Matrix::Zero(1, 1));
  a.grad << 3.0, 0.0;
  b.grad << 4.0;
  CHECK(clip_grad_norm(ps, 10.0) == doctest::Approx(5.0));
  CHECK(a.grad(0, 0) == 3.0);
  CHECK(clip_grad_norm(ps, 1.0) == doctest::Approx(5.0));
  CHECK(a.grad(0, 0) == doctest::Approx(0.6));
  CHECK(b.grad(0, 0) == doctest::Approx(0.8));
}

TEST_CASE("parameter manifests round-trip exactly") {
  std::mt19937_64 rng(9);
  ParamSet ps;
  ps.add("x", testing::random_matrix(3, 5, rng));
  ps.add("y.z", testing::random_matrix(1, 7, rng, -1e6, 1e6));
  ps[0].value(0, 0) = 1.0 / 3.0;
  const nlohmann::json j = params_to_json(ps);
  ParamSet back = params_from_json(nlohmann::json::parse(j.dump()));
  REQUIRE(back.size() == 2);
  CHECK(back.at("x").value == ps.at("x").value);
  CHECK(back.at("y.z").value == ps.at("y.z").value);

  ParamSet other;
  other.add("x", Matrix::Zero(3, 5));
  other.add("y.z", Matrix::Zero(1, 7));
  load_params_into(j, other);
  CHECK(other.at("x").value == ps.at("x").value);

  ParamSet wrong_shape;
  wrong_shape.add("x", Matrix::Zero(5, 3));
  wrong_shape.add("y.z", Matrix::Zero(1, 7));
  CHECK_THROWS_AS(load_params_into(j, wrong_shape), ValidationError);
  ParamSet missing;
  missing.add("x", Matrix::Zero(3, 5));
  CHECK_THROWS_AS(load_params_into(j, missing), ValidationError);
}
