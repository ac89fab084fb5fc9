#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numeric>
#include <sstream>

#include "psearch/error.hpp"
#include "psearch/trainer.hpp"

using namespace psearch;

namespace {
WorldParams world_params(int classes) {
  WorldParams p;
  p.num_identities = classes;
  p.test_identities = 10;
  return p;
}

double mean_total(const std::vector<TrainLogRow>& log, std::size_t from, std::size_t to) {
  double s = 0;
  for (std::size_t i = from; i < to; ++i) s += log[i].loss.total;
  return s / static_cast<double>(to - from);
}
}  // namespace

TEST_CASE("loss choice names") {
  for (LossChoice c : all_loss_choices()) CHECK(parse_loss_choice(to_string(c)) == c);
  CHECK_THROWS_AS(parse_loss_choice("softmax"), Error);
}

TEST_CASE("learning-rate schedule and dictionary size") {
  TrainerParams tp;
  tp.iters = 100;
  CHECK(tp.lr_at(0) == 0.01);
  CHECK(tp.lr_at(59) == 0.01);
  CHECK(tp.lr_at(60) == 0.001);
  CHECK(tp.dictionary_capacity() == 40u * 8 * 2);
  tp.images_per_iter = 3;
  CHECK_THROWS_AS(tp.validate(), Error);
}

TEST_CASE("zero learning rate leaves the weights alone") {
  const SyntheticWorld w(world_params(20), 1);
  Rng init(2);
  const Encoder enc(128, 32, 0, init);
  TrainerParams tp;
  tp.lr_high = tp.lr_low = 0;
  tp.iters = 15;
  for (LossChoice c : {LossChoice::kOlpC2hep, LossChoice::kOlpHep, LossChoice::kContrastive}) {
    Trainer t(w, enc, HyperParams{}, tp, c, 3);
    t.run();
    CHECK(t.encoder().params() == enc.params());
  }
}

TEST_CASE("dictionary contents during training") {
  const SyntheticWorld w(world_params(20), 1);
  Rng init(2);
  TrainerParams tp;
  tp.iters = 30;
  tp.dict_multiplier = 1;
  Trainer t(w, Encoder(128, 32, 0, init), HyperParams{}, tp, LossChoice::kOlpC2hep, 4);
  for (int i = 0; i < 30; ++i) {
    t.step();
    CHECK(t.dictionary().size() <= tp.dictionary_capacity());
    for (const auto& e : t.dictionary().entries()) {
      CHECK(e.label != kBackground);
      CHECK(std::abs(norm2(e.feature.values()) - 1) < 1e-6);
    }
  }
  // Once the dictionary holds anything, every subgroup gets negatives.
  const IterationPlan plan = t.plan();
  const ObjectiveResult r = t.objective(plan);
  CHECK(r.subgroups > 0);
  for (const auto& p : r.proposals) CHECK(std::abs(norm2(p.trace.feature.values()) - 1) < 1e-6);
}

TEST_CASE("total-loss gradient matches finite differences") {
  const SyntheticWorld w(world_params(20), 7);
  for (LossChoice c : all_loss_choices()) {
    Rng init(8);
    TrainerParams tp;
    Trainer t(w, Encoder(128, 16, 0, init), HyperParams{}, tp, c, 9);
    for (int i = 0; i < 10; ++i) t.step();
    IterationPlan plan = t.plan();
    const ObjectiveResult base = t.objective(plan);
    plan.pool = base.pool;
    Rng pick(10);
    double worst = 0;
    for (int k = 0; k < 10; ++k) {
      const std::size_t i = pick.below(t.encoder().params().size());
      Vec& p = t.mutable_encoder().mutable_params();
      const double x = p[i];
      p[i] = x + 1e-6;
      const double up = t.objective(plan).loss.total;
      p[i] = x - 1e-6;
      const double down = t.objective(plan).loss.total;
      p[i] = x;
      const double fd = (up - down) / 2e-6;
      worst = std::max(worst, std::abs(fd - base.encoder_grad[i]) / std::max(1.0, std::abs(base.encoder_grad[i])));
    }
    INFO(to_string(c));
    CHECK(worst < 1e-4);
  }
}

TEST_CASE("training descends") {
  const SyntheticWorld w(world_params(50), 1);
  Rng init(2);
  TrainerParams tp;
  tp.iters = 200;
  Trainer t(w, Encoder(128, 256, 0, init), HyperParams{}, tp, LossChoice::kOlpC2hep, 3);
  t.run();
  REQUIRE(t.log().size() == 200);
  CHECK(mean_total(t.log(), 150, 200) < mean_total(t.log(), 0, 50));
}

TEST_CASE("divergence is reported") {
  const SyntheticWorld w(world_params(20), 1);
  Rng init(2);
  Trainer t(w, Encoder(128, 16, 0, init), HyperParams{}, TrainerParams{}, LossChoice::kOlpHep, 3);
  for (double& p : t.mutable_head()->mutable_params()) p = NAN;
  try {
    t.step();
    FAIL("expected divergence");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::kDivergenceDetected);
  }
}

TEST_CASE("same seed, same run; checkpoints restore state") {
  const SyntheticWorld w(world_params(20), 1);
  TrainerParams tp;
  tp.iters = 20;
  Rng i1(2), i2(2);
  Trainer a(w, Encoder(128, 16, 0, i1), HyperParams{}, tp, LossChoice::kOlpC2hep, 5);
  Trainer b(w, Encoder(128, 16, 0, i2), HyperParams{}, tp, LossChoice::kOlpC2hep, 5);
  a.run();
  b.run();
  std::ostringstream la, lb;
  a.write_log_csv(la);
  b.write_log_csv(lb);
  CHECK(la.str() == lb.str());
  CHECK(la.str().rfind("iteration,olp_loss,id_loss,total,dictionary_size,pool_size,lr\n", 0) == 0);

  std::stringstream ck;
  a.save_checkpoint(ck);
  Rng i3(99);
  Trainer c(w, Encoder(128, 16, 0, i3), HyperParams{}, tp, LossChoice::kOlpC2hep, 5);
  c.load_checkpoint(ck);
  CHECK(c.encoder().params() == a.encoder().params());
  CHECK(c.dictionary().size() == a.dictionary().size());
  CHECK(c.iteration() == a.iteration());
}
