#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

#include "psearch/error.hpp"
#include "psearch/simulator.hpp"

using namespace psearch;

namespace {
WorldParams small_world() {
  WorldParams p;
  p.num_identities = 30;
  p.test_identities = 10;
  return p;
}
}  // namespace

TEST_CASE("tiny world") {
  WorldParams p;
  p.num_identities = 2;
  p.test_identities = 1;
  p.latent_dim = 2;
  p.ids_per_image = 1;
  const SyntheticWorld w(p, 3);
  REQUIRE(w.prototypes().size() == 2);
  for (const auto& v : w.prototypes()) CHECK(std::abs(norm2(v) - 1) < 1e-12);
  CHECK(dot(w.prototypes()[0], w.prototypes()[1]) < 1 - 1e-9);
}

TEST_CASE("world validation and determinism") {
  WorldParams p = small_world();
  p.num_identities = 1;
  CHECK_THROWS_AS(generate_world(p, 1), Error);
  const SyntheticWorld a(small_world(), 11), b(small_world(), 11), c(small_world(), 12);
  CHECK(a.prototypes() == b.prototypes());
  CHECK(a.lift_map() == b.lift_map());
  CHECK(a.prototypes() != c.prototypes());
}

TEST_CASE("image pairs") {
  const SyntheticWorld w(small_world(), 5);
  Rng rng(2);
  for (int t = 0; t < 100; ++t) {
    const auto [a, b] = sample_image_pair(w, 8, rng);
    REQUIRE(a.proposals.size() == 8);
    REQUIRE(b.proposals.size() == 8);
    std::set<Label> la, lb;
    for (const auto& p : a.proposals) {
      if (p.label >= 0) la.insert(p.label);
      CHECK(p.observation.size() == 128);
    }
    for (const auto& p : b.proposals) {
      if (p.label >= 0) lb.insert(p.label);
    }
    CHECK(!la.empty());
    CHECK(!lb.empty());
    std::vector<Label> shared;
    std::set_intersection(la.begin(), la.end(), lb.begin(), lb.end(), std::back_inserter(shared));
    CHECK(shared.size() >= 1);
  }
  CHECK_THROWS_AS(sample_image_pair(w, 0, rng), Error);
}

TEST_CASE("no unlabeled persons when the fraction is zero") {
  WorldParams p = small_world();
  p.unlabeled_fraction = 0;
  const SyntheticWorld w(p, 5);
  Rng rng(3);
  for (int t = 0; t < 50; ++t) {
    const auto pair = sample_image_pair(w, 8, rng);
    for (const auto* img : {&pair.first, &pair.second}) {
      for (const auto& q : img->proposals) CHECK(q.label != kUnlabeled);
    }
  }
}

TEST_CASE("eval scene") {
  const SyntheticWorld w(small_world(), 5);
  Rng rng(4);
  EvalParams ep;
  ep.distractors = 7;
  const EvalScene s = sample_eval_scene(w, ep, rng);
  CHECK(s.query_obs.size() == 10);
  CHECK(s.gallery_obs.size() == 10 * 2 + 7);
  CHECK(std::count(s.gallery_ids.begin(), s.gallery_ids.end(), kUnlabeled) == 7);
}

TEST_CASE("encoder output is unit norm and its gradient is exact") {
  for (int hidden : {0, 16}) {
    Rng rng(9);
    Encoder enc(12, 6, hidden, rng);
    Vec x(12);
    for (double& v : x) v = rng.normal();
    const auto t = enc.forward(x);
    CHECK(std::abs(norm2(t.feature.values()) - 1) < 1e-12);

    Vec w(6);
    for (double& v : w) v = rng.normal();
    auto f = [&](const Encoder& e) {
      const auto y = e.encode(x);
      return dot(y.values(), w);
    };
    Vec grad(enc.params().size(), 0.0);
    enc.backward(t, w, grad);
    double worst = 0;
    for (std::size_t i = 0; i < grad.size(); i += 7) {
      Encoder p = enc, m = enc;
      p.mutable_params()[i] += 1e-6;
      m.mutable_params()[i] -= 1e-6;
      const double fd = (f(p) - f(m)) / 2e-6;
      worst = std::max(worst, std::abs(fd - grad[i]) / std::max(1.0, std::abs(grad[i])));
    }
    CHECK(worst < 1e-6);
  }
}

TEST_CASE("encoder and head serialize exactly") {
  Rng rng(1);
  const Encoder enc(5, 4, 3, rng);
  std::stringstream s;
  enc.write(s);
  const Encoder back = Encoder::read(s);
  CHECK(back.params() == enc.params());

  ClassifierHead head(3, 4);
  head.mutable_params()[2] = 0.1234567890123;
  std::stringstream h;
  head.write(h);
  CHECK(ClassifierHead::read(h).params() == head.params());
}
