#include <doctest.h>

#include "bae/oracle.hpp"
#include "bae/topk.hpp"
#include "test_util.hpp"

using namespace bae;

TEST_CASE("product-space error from input-space error") {
  CHECK(quadratic_error(0.0, 1.0) == 0.0);
  CHECK(quadratic_error(0.1, 1.0) == doctest::Approx(0.195));
  CHECK_THROWS_AS(quadratic_error(-0.1, 1.0), std::invalid_argument);

  std::mt19937_64 rng(1);
  for (int t = 0; t < 1000; ++t) {
    const Eigen::Index d = 2 + t % 7;
    const VectorD x = bae::testing::unit_rows(rng, 1, d).transpose();
    const VectorD y = bae::testing::gaussian(rng, d, 1, 0.6);
    const double got = quadratic_error((x - y).squaredNorm(), y.norm());
    CHECK(bae::testing::rel_err(got, oracle::product_error(x, y)) < 1e-9);
  }
}

TEST_CASE("small-error approximation") {
  CHECK(quadratic_error_approx(1e-4) / 1e-4 == doctest::Approx(2.0).epsilon(0.01));
  for (double s : {1e-4, 1e-3, 1e-2}) {
    CHECK(quadratic_error_approx(s) == doctest::Approx(quadratic_error(s, 1.0)).epsilon(1e-12));
  }
}

TEST_CASE("topk forward") {
  TopKModel m = TopKModel::init(3, 3, 1, 0);
  m.encoder = MatrixF::Identity(3, 3);
  m.decoder = MatrixF::Identity(3, 3);
  MatrixD x(2, 3);
  x << 0.2, 0.9, 0.1, 0.5, 0.5, 0.0;
  const TopKOutput out = topk_forward(m, x);
  CHECK(out.codes(0, 1) == doctest::Approx(0.9));
  CHECK(out.codes.row(0).cwiseAbs().sum() == doctest::Approx(0.9));
  // Ties go to the lower index.
  CHECK(out.codes(1, 0) == doctest::Approx(0.5));
  CHECK(out.codes(1, 1) == 0.0);
  CHECK(out.sse(0) == doctest::Approx(0.05));

  m.k = 4;
  CHECK_THROWS_AS(topk_forward(m, x), ConfigError);
  CHECK_THROWS_AS(TopKModel::init(3, 2, 5, 0), ConfigError);
}

TEST_CASE("topk gradient matches central differences") {
  std::mt19937_64 rng(2);
  TopKModel m = TopKModel::init(5, 8, 3, 7);
  m.encoder += bae::testing::gaussian(rng, 8, 5, 0.2).cast<float>();
  const MatrixD x = bae::testing::unit_rows(rng, 6, 5);
  const TopKGradient g = topk_loss_and_gradient(m, x);
  CHECK(g.loss == doctest::Approx(topk_forward(m, x).sse.mean()));

  // Perturb in double on a copy of the decoder; the loss is smooth there.
  const double h = 1e-3;
  const MatrixD dec = m.decoder.cast<double>();
  double worst = 0.0;
  for (Eigen::Index e = 0; e < dec.size(); ++e) {
    MatrixD up = dec, down = dec;
    up.data()[e] += h;
    down.data()[e] -= h;
    const auto loss = [&](const MatrixD& d) {
      const MatrixD codes = topk_forward(m, x).codes;
      return (x - codes * d.transpose()).rowwise().squaredNorm().mean();
    };
    worst = std::max(worst, std::abs((loss(up) - loss(down)) / (2 * h) - g.d_decoder.data()[e]));
  }
  CHECK(worst < 1e-6);
}

TEST_CASE("topk training and checkpoints") {
  const auto dir = bae::testing::scratch_dir("topk");
  TrainConfig c;
  c.variant = Variant::topk;
  c.dims = {8, 16, std::nullopt};
  c.topk = 2;
  c.optim.steps = 40;
  c.optim.alpha_warmup_steps = 0;
  SyntheticSpec s;
  s.d_in = 8;
  s.n_features = 10;
  c.data.synthetic = s;
  c.data.n_samples = 2048;
  c.checkpoint = dir / "t.bae";
  const TopKTrainResult r = train_topk(c);
  CHECK(!r.report.records.empty());
  CHECK(r.report.records.back().error < r.report.records.front().error);
  const TopKModel loaded = load_topk_checkpoint(c.checkpoint);
  CHECK(loaded == r.model);
  CHECK(loaded.k == 2);
  CHECK_THROWS_AS(load_checkpoint(c.checkpoint), VariantError);
  CHECK((r.model.decoder.colwise().norm().array() - 1.0f).abs().maxCoeff() < 1e-5f);

  std::vector<ActivationBatch> batches{generate(s, 200).batch};
  const TopKEvaluation ev = evaluate_topk(r.model, batches);
  CHECK(ev.product_error >= 0.0);
  CHECK(ev.density >= 0.0);
  CHECK(ev.density <= 1.0);
}
