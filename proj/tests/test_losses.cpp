#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numeric>

#include "psearch/error.hpp"
#include "psearch/losses.hpp"
#include "psearch/rng.hpp"

using namespace psearch;

namespace {
Embedding e(double x, double y) { return l2_normalize(Vec{x, y}); }

Subgroup subgroup(const Embedding& a, const Embedding& p, const std::vector<Embedding>& negs) {
  Subgroup s;
  s.anchor = a;
  s.positive = p;
  for (const auto& n : negs) {
    s.negatives.push_back(&n);
    s.negative_labels.push_back(1);
  }
  return s;
}

PriorityPool all_of(int n) {
  std::vector<Label> l(n);
  std::iota(l.begin(), l.end(), 0);
  return PriorityPool(l, n);
}
}  // namespace

TEST_CASE("olp single negative") {
  const std::vector<Embedding> negs{e(0, 1)};
  const Subgroup s = subgroup(e(1, 0), e(1, 0), negs);
  const OlpResult r = olp_loss(std::span<const Subgroup>(&s, 1));
  CHECK(std::abs(r.loss - std::log1p(std::exp(-1.0))) < 1e-9);
  CHECK(std::abs(r.loss - 0.31326168751822283) < 1e-12);
  CHECK(std::abs(r.anchor_gradients[0][0] + 0.26894142136999512) < 1e-8);
  CHECK(std::abs(r.anchor_gradients[0][1] - 0.26894142136999512) < 1e-8);
  CHECK(std::abs(r.q[0] + r.q_negatives[0][0] - 1.0) < 1e-12);
}

TEST_CASE("olp without negatives and averaging") {
  const std::vector<Embedding> none;
  const Subgroup s = subgroup(e(1, 0), e(0.3, 1), none);
  const OlpResult r = olp_loss(std::span<const Subgroup>(&s, 1));
  CHECK(r.loss == 0.0);
  CHECK(r.anchor_gradients[0] == Vec{0, 0});

  const std::vector<Embedding> negs{e(0, 1), e(-1, 1)};
  const Subgroup t = subgroup(e(1, 0.5), e(1, 0), negs);
  const std::vector<Subgroup> one{t}, two{t, t};
  CHECK(olp_loss(two).loss == doctest::Approx(olp_loss(one).loss).epsilon(1e-15));
  CHECK_THROWS_AS(olp_loss(std::span<const Subgroup>{}), Error);
}

TEST_CASE("hep") {
  const PriorityPool pool2({0, 1}, 2);
  const ClassifierScores s{{2, 0}, 0};
  CHECK(std::abs(hep_loss(std::span<const ClassifierScores>(&s, 1), pool2).loss - 0.12692801104297250) < 1e-8);

  const PriorityPool pool({0, 2, 3}, 3);
  const ClassifierScores flat{{1.5, 9, 1.5, 1.5}, 2};
  CHECK(hep_loss(std::span<const ClassifierScores>(&flat, 1), pool).loss == doctest::Approx(std::log(3.0)));

  const std::vector<ClassifierScores> mixed{{{2, 0, 1, 1}, 1}, {{1, 1, 1, 1}, 0}};
  const HepResult r = hep_loss(mixed, pool);
  CHECK(r.contributing == 1);
  CHECK(r.score_gradients[0] == Vec{0, 0, 0, 0});
  CHECK(r.loss == doctest::Approx(std::log(3.0) / 2));
  CHECK(hep_loss(mixed, pool, HepNormalization::kContributing).loss == doctest::Approx(std::log(3.0)));
  CHECK_THROWS_AS(hep_loss(mixed, PriorityPool{}), Error);
}

TEST_CASE("c2hep") {
  ClassCenterTable t(2, 0.5);
  t.update(0, e(1, 0));
  t.update(1, e(0, 1));
  const PriorityPool pool = all_of(2);
  const CenterSample x{{1, 0}, 0};
  const double loss = c2hep_loss(std::span<const CenterSample>(&x, 1), pool, t, 10.0).loss;
  CHECK(std::abs(loss - std::log1p(std::exp(-10.0))) < 1e-12);
  CHECK(std::abs(loss - 4.5398899216864647e-5) < 1e-15);

  const std::vector<Vec> same{{1, 1}, {2, 2}, {0.5, 0.5}};
  const CenterSample y{{0.3, -1}, 1};
  CHECK(c2hep_loss(std::span<const CenterSample>(&y, 1), all_of(3), same, 10.0).loss ==
        doctest::Approx(std::log(3.0)).epsilon(1e-12));

  std::vector<Vec> centers{{1, 0.2}, {0.1, 1}, {-1, 0.4}};
  const double base = c2hep_loss(std::span<const CenterSample>(&y, 1), all_of(3), centers, 10.0).loss;
  centers[2] = {-3, 1.2};
  CHECK(std::abs(c2hep_loss(std::span<const CenterSample>(&y, 1), all_of(3), centers, 10.0).loss - base) < 1e-9);

  ClassCenterTable empty(3, 0.5);
  CHECK_THROWS_AS(c2hep_loss(std::span<const CenterSample>(&x, 1), all_of(3), empty, 10.0), Error);
}

TEST_CASE("c2hep skips pool members without a center") {
  ClassCenterTable t(5, 0.5);
  t.update(0, e(1, 0));
  t.update(1, e(0, 1));
  const CenterSample x{{1, 0}, 0};
  const auto r = c2hep_loss(std::span<const CenterSample>(&x, 1), all_of(5), t, 10.0);
  CHECK(r.pooled_centers == 2);
  CHECK(std::abs(r.loss - std::log1p(std::exp(-10.0))) < 1e-12);
}

TEST_CASE("triplet and contrastive") {
  const Embedding x = e(1, 0), y = e(0, 1), d = l2_normalize(Vec{0.5, std::sqrt(0.75)});
  CHECK(triplet_loss(x, x, y, 0.3) == 0.0);
  CHECK(triplet_loss(x, y, d, 0.3) == doctest::Approx(0.8));
  CHECK(triplet_loss(x, d, d, 0.3) == doctest::Approx(0.3));
  CHECK(contrastive_loss(x, x, true) == 0.0);
  const Embedding c9 = l2_normalize(Vec{0.9, std::sqrt(1 - 0.81)});
  CHECK(contrastive_loss(x, c9, false, 0.5) == doctest::Approx(0.4));
  const Embedding c4 = l2_normalize(Vec{0.4, std::sqrt(1 - 0.16)});
  CHECK(contrastive_loss(x, c4, false, 0.5) == 0.0);
  CHECK(contrastive_loss(x, y, false, 0.5) == 0.0);
}

TEST_CASE("combined loss") {
  HyperParams hp;
  const auto a = combined_loss(0.0, 0.3, 0.2, hp);
  CHECK(a.total == doctest::Approx(0.5).epsilon(1e-12));
  hp.alpha = 0;
  CHECK(combined_loss(0.1, 0.3, 0.2, hp).total == doctest::Approx(0.3).epsilon(1e-12));
  CHECK(combined_loss(0, 0, 0, HyperParams{}).total == 0.0);
}

TEST_CASE("baseline term gradients match finite differences") {
  Rng rng(8);
  for (int t = 0; t < 20; ++t) {
    Vec a(6), p(6), n(6);
    for (int i = 0; i < 6; ++i) a[i] = rng.normal(), p[i] = rng.normal(), n[i] = rng.normal();
    const Embedding A = l2_normalize(a), P = l2_normalize(p), N = l2_normalize(n);
    const TripletGrad g = triplet_term(A, P, N, 0.3);
    if (g.loss > 1e-3) {
      auto f = [&](std::span<const double> x) {
        double s = 0.3;
        for (int i = 0; i < 6; ++i) s += x[i] * (N[i] - P[i]);
        return std::max(0.0, s);
      };
      CHECK(check_gradient(f, A.values(), g.anchor) < 1e-6);
    }
    const PairGrad c = contrastive_term(A, P, true, 0.5);
    auto h = [&](std::span<const double> x) {
      double s = 0;
      for (int i = 0; i < 6; ++i) s += x[i] * P[i];
      return 1 - s;
    };
    CHECK(check_gradient(h, A.values(), c.first) < 1e-6);
  }
}
