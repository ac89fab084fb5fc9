#include "psearch/pairing.hpp"

#include <algorithm>

#include "psearch/error.hpp"

namespace psearch {

std::vector<Subgroup> build_subgroups(std::span<const Proposal> image_a,
                                      std::span<const Proposal> image_b,
                                      const FeatureDictionary& dict,
                                      std::optional<std::size_t> k_cap) {
  std::vector<const Proposal*> all;
  all.reserve(image_a.size() + image_b.size());
  for (const auto& p : image_a) all.push_back(&p);
  for (const auto& p : image_b) all.push_back(&p);
  for (const auto* p : all) {
    if (p->label < kBackground) {
      throw Error(Errc::kInvalidLabel, "proposal label " + std::to_string(p->label));
    }
  }

  std::vector<Subgroup> out;
  auto emit = [&](std::size_t a, std::size_t p) {
    Subgroup s;
    s.anchor = all[a]->feature;
    s.positive = all[p]->feature;
    s.anchor_label = all[a]->label;
    s.anchor_index = a;
    s.positive_index = p;
    for (const auto* e : dict.negatives(s.anchor_label, k_cap)) {
      s.negatives.push_back(&e->feature);
      s.negative_labels.push_back(e->label);
    }
    out.push_back(std::move(s));
  };
  for (std::size_t i = 0; i < all.size(); ++i) {
    if (all[i]->label < 0) continue;
    for (std::size_t j = i + 1; j < all.size(); ++j) {
      if (all[j]->label != all[i]->label) continue;
      emit(i, j);
      emit(j, i);
    }
  }
  return out;
}

PriorityPool::PriorityPool(std::vector<Label> labels, int target)
    : labels_(std::move(labels)), sorted_(labels_), target_(target) {
  std::sort(sorted_.begin(), sorted_.end());
  if (std::adjacent_find(sorted_.begin(), sorted_.end()) != sorted_.end()) {
    throw Error(Errc::kInvalidParams, "duplicate label in priority pool");
  }
}

bool PriorityPool::contains(Label label) const {
  return std::binary_search(sorted_.begin(), sorted_.end(), label);
}

void PriorityPool::add(Label label) {
  if (contains(label)) return;
  labels_.push_back(label);
  sorted_.insert(std::upper_bound(sorted_.begin(), sorted_.end(), label), label);
}

PriorityPool select_priority_pool(std::span<const Label> gt_labels,
                                  std::span<const Label> hard_negative_labels,
                                  int target, int top_r, int num_classes, Rng& rng) {
  if (target < 1) throw Error(Errc::kInvalidParams, "pool target T must be >= 1");
  if (top_r < 0) throw Error(Errc::kInvalidParams, "top negative count r must be >= 0");
  if (num_classes < 1) throw Error(Errc::kInvalidParams, "need at least one class");

  std::vector<char> taken(num_classes, 0);
  std::vector<Label> labels;
  auto check = [&](Label l) {
    if (l < 0 || l >= num_classes) {
      throw Error(Errc::kInvalidLabel, "pool label " + std::to_string(l) + " out of range");
    }
  };
  for (Label l : gt_labels) {
    check(l);
    if (!taken[l]) {
      taken[l] = 1;
      labels.push_back(l);
    }
  }
  const std::size_t want = std::min(target, num_classes);

  int hard_taken = 0;
  for (Label l : hard_negative_labels) {
    if (hard_taken >= top_r || labels.size() >= want) break;
    if (l == kUnlabeled) continue;
    check(l);
    if (taken[l]) continue;
    taken[l] = 1;
    labels.push_back(l);
    ++hard_taken;
  }

  if (labels.size() < want) {
    std::vector<Label> rest;
    rest.reserve(num_classes - labels.size());
    for (Label l = 0; l < num_classes; ++l) {
      if (!taken[l]) rest.push_back(l);
    }
    const auto picks = rng.sample_distinct(static_cast<int>(rest.size()),
                                           static_cast<int>(want - labels.size()));
    for (int i : picks) labels.push_back(rest[i]);
  }
  return PriorityPool(std::move(labels), target);
}

}  // namespace psearch
