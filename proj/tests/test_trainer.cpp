#include <doctest.h>

#include "bae/trainer.hpp"
#include "test_util.hpp"

using namespace bae;

namespace {

TrainConfig small_config(Variant v = Variant::vanilla) {
  TrainConfig c;
  c.variant = v;
  c.dims = {8, 12, has_mixer(v) ? std::optional<std::size_t>(4) : std::nullopt};
  c.optim.steps = 60;
  c.optim.alpha_warmup_steps = 16;
  c.log_every = 10;
  c.batch_size = 64;
  SyntheticSpec s;
  s.d_in = 8;
  s.n_features = 10;
  c.data.synthetic = s;
  c.data.n_samples = 2048;
  return c;
}

}  // namespace

TEST_CASE("zero steps leaves the initial model") {
  TrainConfig c = small_config();
  c.optim.steps = 0;
  const TrainResult r = train(c);
  CHECK(r.report.records.empty());
  CHECK(r.model == BilinearModel::orthogonal(c.dims, c.variant, c.seed));
}

TEST_CASE("zero model has unit error") {
  std::mt19937_64 rng(1);
  const BilinearModel m(Variant::vanilla, MatrixF::Zero(3, 5), MatrixF::Zero(3, 5));
  const std::vector<ActivationBatch> b{normalize(bae::testing::gaussian(rng, 20, 5))};
  CHECK(evaluate(m, b).error == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("evaluate agrees with the training loss") {
  std::mt19937_64 rng(2);
  for (Variant v : {Variant::vanilla, Variant::ordered, Variant::mixed, Variant::combined}) {
    const Factors f = bae::testing::random_factors(rng, 6, 9, has_mixer(v) ? 3 : 0);
    const BilinearModel m = bae::testing::to_model(f, v);
    const ActivationBatch all = normalize(bae::testing::gaussian(rng, 40, 6));
    const LossBreakdown direct = total_loss(m, all.rows, 0.0);
    // Same rows split unevenly across batches.
    std::vector<ActivationBatch> parts{normalize(all.rows.topRows(7)), normalize(all.rows.bottomRows(33))};
    const LossBreakdown ev = evaluate(m, parts);
    CHECK(ev.error == doctest::Approx(direct.error).epsilon(1e-6));
    CHECK(ev.density == doctest::Approx(direct.density).epsilon(1e-6));
  }
}

TEST_CASE("training lowers the loss for every variant") {
  for (Variant v : {Variant::vanilla, Variant::ordered, Variant::mixed, Variant::combined}) {
    TrainConfig c = small_config(v);
    c.alpha = 0.0;
    const TrainResult r = train(c);
    REQUIRE(r.report.records.size() == 6);
    CHECK(r.report.records.back().error < r.report.records.front().error);
    CHECK(r.report.final_eval.error < 1.0);
    CHECK(r.report.records[0].lr == c.optim.lr);
  }
}

TEST_CASE("training is deterministic and checkpoints") {
  const auto dir = bae::testing::scratch_dir("trainer");
  TrainConfig c = small_config(Variant::mixed);
  c.checkpoint = dir / "a.bae";
  const TrainResult a = train(c);
  c.checkpoint = dir / "b.bae";
  const TrainResult b = train(c);
  CHECK(a.model == b.model);
  CHECK(load_checkpoint(dir / "a.bae") == a.model);
  CHECK(metrics_csv(a.report) == metrics_csv(b.report));
  c.seed = 1;
  c.checkpoint.clear();
  CHECK(!(train(c).model == a.model));
}

TEST_CASE("training from a dump") {
  const auto dir = bae::testing::scratch_dir("trainer_dump");
  SyntheticSpec s;
  s.d_in = 8;
  write_dump(dir / "d.bact", generate(s, 1000).raw);
  TrainConfig c = small_config();
  c.data.synthetic.reset();
  c.data.dump = dir / "d.bact";
  const PreparedData p = prepare_data(c);
  std::size_t held = 0;
  for (const auto& b : p.holdout) held += b.size();
  CHECK(held == 50);
  CHECK(p.train->next().rows() == 64);
  CHECK(train(c).report.final_eval.error < 1.0);

  c.dims.d_in = 9;
  CHECK_THROWS_AS(train(c), DumpError);
}

TEST_CASE("invalid configs") {
  TrainConfig c = small_config();
  c.batch_size = 1;
  CHECK_THROWS_AS(train(c), ConfigError);
  c = small_config();
  c.data.synthetic.reset();
  CHECK_THROWS_AS(train(c), ConfigError);
  c = small_config();
  c.alpha = -1;
  CHECK_THROWS_AS(train(c), ConfigError);
  c = small_config(Variant::mixed);
  c.dims.d_mix.reset();
  CHECK_THROWS_AS(train(c), ConfigError);
}

TEST_CASE("csv output") {
  TrainReport r;
  r.records.push_back({0, 0.5, 0.25, 0.6, 0.01, 0.0});
  CHECK(metrics_csv(r) == "step,error,density,total,lr,alpha\n0,0.5,0.25,0.6,0.01,0\n");
  const std::vector<ParetoRow> rows{{0.0, 0.3, 0.5}, {1.0, 0.4, 0.2}};
  CHECK(pareto_csv(rows) == "alpha,error,density\n0,0.3,0.5\n1,0.4,0.2\n");
}

TEST_CASE("pareto sweep runs once per alpha") {
  TrainConfig c = small_config();
  c.optim.steps = 10;
  const auto rows = pareto_sweep(c, {0.0, 0.5});
  CHECK(rows.size() == 2);
  CHECK(rows[1].alpha == 0.5);
  CHECK_THROWS_AS(pareto_sweep(c, {}), ConfigError);
}
