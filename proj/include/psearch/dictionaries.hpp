#ifndef PSEARCH_DICTIONARIES_HPP_
#define PSEARCH_DICTIONARIES_HPP_

#include <cstdint>
#include <deque>
#include <iosfwd>
#include <optional>
#include <vector>

#include "psearch/numerics.hpp"

namespace psearch {

using Label = int;
// Person without identity annotation.
inline constexpr Label kUnlabeled = -1;
// Background proposal; never stored in any dictionary.
inline constexpr Label kBackground = -2;

struct HyperParams {
  double alpha = 1.0;
  double beta = 1.0;
  double lambda = 10.0;
  double phi = 0.5;
  std::optional<std::size_t> k_cap;  // max negatives per subgroup; unset = all
  int pool_size = 100;               // T
  int top_negatives = 10;            // r
  double triplet_margin = 0.3;
  double contrastive_margin = 0.5;

  void validate() const;  // throws Error(kInvalidParams)
};

struct DictionaryEntry {
  Embedding feature;
  Label label = kUnlabeled;
  std::uint64_t insertion_index = 0;
};

// Fixed-capacity FIFO of labeled features supplying negatives across
// iterations. Pointers returned by negatives() stay valid until the next
// push().
class FeatureDictionary {
 public:
  explicit FeatureDictionary(std::size_t capacity);

  void push(Embedding feature, Label label);

  // Entries whose label differs from anchor_label, oldest first. With k_cap
  // set, only the k_cap most recent qualifying entries.
  std::vector<const DictionaryEntry*> negatives(
      Label anchor_label, std::optional<std::size_t> k_cap = std::nullopt) const;

  std::size_t capacity() const { return capacity_; }
  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }
  std::uint64_t next_index() const { return next_index_; }
  const std::deque<DictionaryEntry>& entries() const { return entries_; }

  void write_snapshot(std::ostream& out) const;
  static FeatureDictionary read_snapshot(std::istream& in);

 private:
  std::size_t capacity_;
  std::uint64_t next_index_ = 0;
  std::deque<DictionaryEntry> entries_;
};

enum class CenterUpdate { kInitialized, kUpdated, kDegenerate };

// Per-identity running centers, c <- normalize(phi * c + (1 - phi) * x).
class ClassCenterTable {
 public:
  ClassCenterTable(int num_classes, double phi = 0.5);

  // kDegenerate: the blend vanished (x = -c, phi = 0.5); the old center is kept.
  CenterUpdate update(Label label, const Embedding& x);

  bool has(Label label) const;
  const Embedding& center(Label label) const;  // throws kUninitializedCenter
  int num_classes() const { return static_cast<int>(centers_.size()); }
  double phi() const { return phi_; }
  std::size_t observed() const { return observed_; }

  void write_snapshot(std::ostream& out) const;
  static ClassCenterTable read_snapshot(std::istream& in);

 private:
  void check_label(Label label) const;

  double phi_;
  std::size_t observed_ = 0;
  std::vector<std::optional<Embedding>> centers_;
};

}  // namespace psearch

#endif  // PSEARCH_DICTIONARIES_HPP_
