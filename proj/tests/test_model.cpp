#include <cmath>
#include <filesystem>
#include <numeric>
#include <random>

#include "doctest.h"
#include "test_util.hpp"

#include "cmap/encoder.hpp"
#include "cmap/error.hpp"
#include "cmap/experiments.hpp"
#include "cmap/model.hpp"
#include "cmap/predictor.hpp"

using namespace cmap;
using ad::Matrix;
using ad::Tape;

namespace {

std::vector<std::size_t> random_perm(std::size_t n, std::mt19937_64& rng) {
  std::vector<std::size_t> p(n);
  std::iota(p.begin(), p.end(), 0);
  std::shuffle(p.begin(), p.end(), rng);
  return p;
}

}  // namespace

TEST_CASE("encoder") {
  std::mt19937_64 rng(1);
  ad::ParamSet ps;
  EncoderParams enc = EncoderParams::create(ps, "encoder", 6, 8, 2, rng);
  CHECK(ps.contains("encoder.w0"));
  CHECK(ps.contains("encoder.w1"));

  SUBCASE("zero weights give zeros") {
    for (std::size_t i = 0; i < ps.size(); ++i) ps[i].value.setZero();
    Tape tape;
    EncodedGraph e = encode(tape, testing::random_matrix(4, 6, rng), testing::random_adjacency(4, rng), enc);
    CHECK(e.node_embeddings.value().isZero());
    CHECK(e.graph_embedding.value().isZero());
  }
  SUBCASE("single node readout is that node") {
    Tape tape;
    EncodedGraph e = encode(tape, testing::random_matrix(1, 6, rng), Matrix::Zero(1, 1), enc);
    CHECK(e.graph_embedding.value() == e.node_embeddings.value());
  }
  SUBCASE("permutation equivariance") {
    for (Eigen::Index n = 1; n <= 12; ++n) {
      const Matrix x = testing::random_matrix(n, 6, rng);
      const Matrix a = testing::random_adjacency(n, rng);
      const Matrix p = testing::permutation_matrix(random_perm(static_cast<std::size_t>(n), rng));
      Tape tape;
      EncodedGraph e1 = encode(tape, x, a, enc);
      EncodedGraph e2 = encode(tape, p * x, p * a * p.transpose(), enc);
      CHECK((p * e1.node_embeddings.value() - e2.node_embeddings.value()).cwiseAbs().maxCoeff() < 1e-10);
      CHECK((e1.graph_embedding.value() - e2.graph_embedding.value()).cwiseAbs().maxCoeff() < 1e-10);
    }
  }
  SUBCASE("gradients") {
    const Matrix x = testing::random_matrix(5, 6, rng);
    const Matrix a = testing::random_adjacency(5, rng);
    const Matrix w = testing::random_matrix(5, 8, rng);
    ad::GradCheckReport r = ad::grad_check(
        [&](Tape& t) { return ad::sum(ad::mul(encode(t, x, a, enc).node_embeddings, t.constant(w))); }, ps);
    CHECK(r.passed);
  }
  SUBCASE("width mismatch") {
    Tape tape;
    CHECK_THROWS_AS(encode(tape, Matrix::Zero(3, 5), Matrix::Zero(3, 3), enc), ContractError);
  }
}

TEST_CASE("predictor") {
  std::mt19937_64 rng(2);
  ad::ParamSet ps;
  PredictorParams pred = PredictorParams::create(ps, "predictor", 8, 16, 2, 5, rng);
  CHECK(pred.num_classes() == 5);

  SUBCASE("zero weights give uniform probabilities") {
    for (std::size_t i = 0; i < ps.size(); ++i) ps[i].value.setZero();
    Tape tape;
    auto logits = predict(tape, tape.constant(testing::random_matrix(4, 8, rng)),
                          tape.constant(testing::random_adjacency(4, rng)), pred);
    CHECK(logits.value().isZero());
    CHECK(std::abs(classification_loss(logits, 3).scalar() - std::log(5.0)) < 1e-9);
  }
  SUBCASE("permutation invariance") {
    for (Eigen::Index n = 1; n <= 8; ++n) {
      const Matrix x = testing::random_matrix(n, 8, rng);
      const Matrix a = testing::random_adjacency(n, rng);
      const Matrix p = testing::permutation_matrix(random_perm(static_cast<std::size_t>(n), rng));
      Tape tape;
      const Matrix l1 = predict(tape, tape.constant(x), tape.constant(a), pred).value();
      const Matrix l2 = predict(tape, tape.constant(p * x), tape.constant(p * a * p.transpose()), pred).value();
      CHECK((l1 - l2).cwiseAbs().maxCoeff() < 1e-10);
    }
  }
  SUBCASE("confident logits drive the loss to zero") {
    Tape tape;
    Matrix l = Matrix::Zero(1, 5);
    l(0, 2) = 60.0;
    CHECK(classification_loss(tape.constant(l), 2).scalar() < 1e-20);
  }
  SUBCASE("cross entropy gradient") {
    ad::ParamSet lp;
    ad::Parameter& logits = lp.add("l", testing::random_matrix(1, 5, rng));
    ad::GradCheckReport r = ad::grad_check([&](Tape& t) { return classification_loss(t.param(logits), 1); }, lp);
    CHECK(r.max_rel_error < 1e-6);
  }
  CHECK_THROWS_AS(PredictorParams::create(ps, "other", 8, 4, 2, 1, rng), ParameterError);
}

TEST_CASE("loss breakdown") {
  LossBreakdown b = total_loss(1.0, 2.0, 3.0, 0.5, 0.1);
  CHECK(b.total == doctest::Approx(2.3).epsilon(1e-15));
  CHECK(total_loss(0.7, 2.0, 3.0, 0.0, 0.0).total == 0.7);
  CHECK_THROWS_AS(total_loss(1.0, 1.0, 1.0, -0.1, 0.0), ParameterError);
  CHECK_THROWS_AS(total_loss(1.0, 1.0, 1.0, 0.0, -1.0), ParameterError);
  b.cls = 1.0 / 3.0;
  CHECK(loss_breakdown_from_json(nlohmann::json::parse(to_json(b).dump())) == b);

  Tape tape;
  auto c = [&](double v) { return tape.constant(Matrix::Constant(1, 1, v)); };
  CHECK(total_loss(c(1.0), c(2.0), c(3.0), 0.5, 0.1).scalar() == total_loss(1.0, 2.0, 3.0, 0.5, 0.1).total);
}

TEST_CASE("model forward") {
  for (Variant v : {Variant::Neigh, Variant::Path, Variant::Init, Variant::Var}) {
    CAPTURE(to_string(v));
    ModelConfig cfg;
    cfg.feature_dim = 5;
    cfg.hidden = 8;
    cfg.max_size = 4;
    cfg.num_classes = 3;
    cfg.variant = v;
    Model m = Model::create(cfg, 7);
    const Example ex = toy_example(9, 5, 2, 1);
    Tape tape;
    ad::GumbelNoise noise(1);
    ForwardResult r = m.forward(tape, ex, {Mode::Train, 1.0, &noise, true});
    CHECK(std::abs(r.losses.total - (r.losses.cls + cfg.lambda1 * r.losses.cov + cfg.lambda2 * r.losses.len)) < 1e-12);
    CHECK(r.logits.cols() == 3);
    if (v == Variant::Init) CHECK(r.graph.size() == 9);
    else CHECK(r.graph.size() <= 4);
    if (v == Variant::Neigh || v == Variant::Path) CHECK(r.losses.len == 0.0);

    const Inference a = m.infer(ex), b = m.infer(ex);
    CHECK(a.logits == b.logits);
    CHECK(a.graph.selected == b.graph.selected);
    CHECK(parse_variant(to_string(v)) == v);
  }
  CHECK_THROWS_AS(parse_variant("gin"), ParameterError);
}

TEST_CASE("full pipeline gradient check on a 4-candidate document") {
  for (Variant v : {Variant::Neigh, Variant::Path, Variant::Var, Variant::Init}) {
    CAPTURE(to_string(v));
    ModelConfig cfg;
    cfg.feature_dim = 5;
    cfg.hidden = 4;
    cfg.max_size = 3;
    cfg.num_classes = 3;
    cfg.variant = v;
    const Example ex = toy_example(4, 5, 1, 11);
    ad::GradCheckReport r = pipeline_grad_check(cfg, ex, 3, 1e-5, 1e-4);
    CHECK(r.passed);
    CHECK(r.max_rel_error < 1e-4);
  }
}

TEST_CASE("checkpoint round-trip") {
  ModelConfig cfg;
  cfg.feature_dim = 5;
  cfg.hidden = 6;
  cfg.max_size = 3;
  cfg.num_classes = 2;
  cfg.variant = Variant::Path;
  cfg.lambda2 = 0.25;
  Model m = Model::create(cfg, 4);
  const auto path = std::filesystem::temp_directory_path() / "cmap_test_model.json";
  m.save(path, {"a", "b"});
  std::vector<std::string> names;
  Model back = Model::load(path, &names);
  std::filesystem::remove(path);
  CHECK(names == std::vector<std::string>{"a", "b"});
  CHECK(back.config().to_json() == cfg.to_json());
  REQUIRE(back.params().size() == m.params().size());
  for (std::size_t i = 0; i < m.params().size(); ++i) {
    CHECK(back.params()[i].name == m.params()[i].name);
    CHECK(back.params()[i].value == m.params()[i].value);
  }
  const Example ex = toy_example(6, 5, 0, 2);
  CHECK(back.infer(ex).logits == m.infer(ex).logits);

  Model copy = m;
  copy.params()[0].value.setZero();
  CHECK_FALSE(m.params()[0].value.isZero());
}
