#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <set>

#include "psearch/error.hpp"
#include "psearch/pairing.hpp"
#include "psearch/rng.hpp"

using namespace psearch;

namespace {
Proposal prop(double x, double y, Label l) { return {l2_normalize(Vec{x, y}), l}; }
}  // namespace

TEST_CASE("subgroups from one shared identity") {
  FeatureDictionary dict(16);
  const std::vector<Proposal> a{prop(1, 0, 4), prop(0, 1, 9), prop(1, 1, kBackground)};
  const std::vector<Proposal> b{prop(1, 0.1, 4), prop(-1, 1, kUnlabeled)};
  const auto sg = build_subgroups(a, b, dict);
  REQUIRE(sg.size() == 2);
  CHECK(sg[0].anchor_index == 0);
  CHECK(sg[0].positive_index == 3);
  CHECK(sg[1].anchor_index == 3);
  CHECK(sg[1].positive_index == 0);
  CHECK(sg[0].negatives.empty());
}

TEST_CASE("no shared identity gives no subgroups") {
  FeatureDictionary dict(4);
  const std::vector<Proposal> a{prop(1, 0, 1)};
  const std::vector<Proposal> b{prop(0, 1, 2), prop(1, 1, kUnlabeled)};
  CHECK(build_subgroups(a, b, dict).empty());
}

TEST_CASE("every subgroup sees all eligible negatives") {
  FeatureDictionary dict(8);
  dict.push(l2_normalize(Vec{1, 2}), 3);
  dict.push(l2_normalize(Vec{2, 1}), kUnlabeled);
  dict.push(l2_normalize(Vec{0, 1}), 8);
  dict.push(l2_normalize(Vec{1, 0}), 4);  // the anchor's own identity
  const std::vector<Proposal> a{prop(1, 0, 4)};
  const std::vector<Proposal> b{prop(1, 0.2, 4)};
  const auto sg = build_subgroups(a, b, dict);
  REQUIRE(sg.size() == 2);
  for (const auto& s : sg) {
    CHECK(s.negatives.size() == 3);
    CHECK(std::find(s.negative_labels.begin(), s.negative_labels.end(), 4) == s.negative_labels.end());
  }
  CHECK(build_subgroups(a, b, dict, 1)[0].negatives.size() == 1);
}

TEST_CASE("pool with ground truth, hard negatives and random fill") {
  Rng rng(1);
  const std::vector<Label> gt{3, 7};
  const std::vector<Label> hard{9};
  const auto pool = select_priority_pool(gt, hard, 5, 10, 20, rng);
  CHECK(pool.size() == 5);
  CHECK(pool.contains(3));
  CHECK(pool.contains(7));
  CHECK(pool.contains(9));
  const std::set<Label> uniq(pool.labels().begin(), pool.labels().end());
  CHECK(uniq.size() == 5);
}

TEST_CASE("pool clamps to the class count") {
  Rng rng(2);
  const std::vector<Label> gt{1};
  const auto pool = select_priority_pool(gt, {}, 100, 10, 4, rng);
  CHECK(pool.size() == 4);
  for (Label l = 0; l < 4; ++l) CHECK(pool.contains(l));
}

TEST_CASE("hard label already in ground truth is not duplicated") {
  Rng rng(3);
  const std::vector<Label> gt{3, 7};
  const std::vector<Label> hard{7, kUnlabeled};
  const auto pool = select_priority_pool(gt, hard, 5, 10, 20, rng);
  CHECK(pool.size() == 5);
  const std::set<Label> uniq(pool.labels().begin(), pool.labels().end());
  CHECK(uniq.size() == 5);
  CHECK_FALSE(pool.contains(kUnlabeled));
}

TEST_CASE("only the first r hard labels are forced") {
  Rng rng(4);
  const std::vector<Label> gt{0};
  const std::vector<Label> hard{5, 6, 7};
  const auto pool = select_priority_pool(gt, hard, 3, 1, 50, rng);
  CHECK(pool.labels()[0] == 0);
  CHECK(pool.labels()[1] == 5);
}

TEST_CASE("ground truth larger than T is kept whole") {
  Rng rng(5);
  const std::vector<Label> gt{0, 1, 2, 3};
  const auto pool = select_priority_pool(gt, {}, 2, 10, 10, rng);
  CHECK(pool.size() == 4);
  CHECK(pool.exceeded_target());
}

TEST_CASE("pool rejects duplicates") {
  CHECK_THROWS_AS(PriorityPool({1, 2, 1}, 3), Error);
}
