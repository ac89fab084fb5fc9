#ifndef PSEARCH_PAIRING_HPP_
#define PSEARCH_PAIRING_HPP_

#include <optional>
#include <span>
#include <vector>

#include "psearch/dictionaries.hpp"
#include "psearch/rng.hpp"

namespace psearch {

struct Proposal {
  Embedding feature;
  Label label = kBackground;
};

// One anchor, its positive partner, and every eligible dictionary negative.
// Negatives point into the FeatureDictionary the subgroup was built from and
// are valid until that dictionary is next mutated.
struct Subgroup {
  Embedding anchor;
  Embedding positive;
  std::vector<const Embedding*> negatives;
  Label anchor_label = 0;
  std::vector<Label> negative_labels;
  // Position of the anchor / positive in the concatenated (image a, image b)
  // proposal list, used to route gradients back to their source.
  std::size_t anchor_index = 0;
  std::size_t positive_index = 0;
};

// Every ordered pair of proposals sharing a label >= 0 across the two images
// (and within one image, for repeated identities) becomes a subgroup.
std::vector<Subgroup> build_subgroups(std::span<const Proposal> image_a,
                                      std::span<const Proposal> image_b,
                                      const FeatureDictionary& dict,
                                      std::optional<std::size_t> k_cap = std::nullopt);

class PriorityPool {
 public:
  PriorityPool() = default;
  PriorityPool(std::vector<Label> labels, int target);

  bool contains(Label label) const;
  // Adds a label outside the identity range (the background class).
  void add(Label label);

  // Selection order: ground truth, hard negatives, random fill.
  const std::vector<Label>& labels() const { return labels_; }
  std::size_t size() const { return labels_.size(); }
  bool empty() const { return labels_.empty(); }
  int target() const { return target_; }
  // Ground truth alone outnumbered the target; all of it was kept.
  bool exceeded_target() const { return labels_.size() > static_cast<std::size_t>(target_); }

 private:
  std::vector<Label> labels_;
  std::vector<Label> sorted_;
  int target_ = 0;
};

// gt_labels: identities present in the batch. hard_negative_labels: negative
// labels ranked by descending similarity to their anchors; -1 entries are
// skipped.
PriorityPool select_priority_pool(std::span<const Label> gt_labels,
                                  std::span<const Label> hard_negative_labels,
                                  int target, int top_r, int num_classes, Rng& rng);

}  // namespace psearch

#endif  // PSEARCH_PAIRING_HPP_
