#ifndef PSEARCH_TRAINER_HPP_
#define PSEARCH_TRAINER_HPP_

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "psearch/dictionaries.hpp"
#include "psearch/losses.hpp"
#include "psearch/pairing.hpp"
#include "psearch/simulator.hpp"

namespace psearch {

enum class LossChoice { kOlpC2hep, kOlpHep, kOlpOnly, kC2hepOnly, kTripletHep, kContrastive };

std::string to_string(LossChoice c);
LossChoice parse_loss_choice(const std::string& name);  // throws kConfigError
const std::vector<LossChoice>& all_loss_choices();

struct TrainerParams {
  int images_per_iter = 2;  // even, images come in pairs
  int proposals_per_image = 8;
  int iters = 2000;
  int dict_multiplier = 40;  // dictionary holds this many minibatches
  double lr_high = 0.01;
  double lr_low = 0.001;
  double lr_drop_fraction = 0.6;
  double momentum = 0.0;
  HepNormalization hep_norm = HepNormalization::kAllSamples;

  double lr_at(int iteration) const;
  std::size_t dictionary_capacity() const;
  void validate() const;
};

struct TrainLogRow {
  int iteration = 0;
  LossBreakdown loss;
  std::size_t dictionary_size = 0;
  std::size_t pool_size = 0;
  double lr = 0;
};

struct IterationPlan {
  std::vector<SceneImage> images;  // consecutive pairs
  std::optional<PriorityPool> pool;  // chosen by the first objective() call when unset
};

struct EncodedProposal {
  Encoder::Trace trace;
  Label label = kBackground;
  std::size_t image = 0;
};

struct ObjectiveResult {
  LossBreakdown loss;
  Vec encoder_grad;
  Vec head_grad;
  std::vector<EncodedProposal> proposals;
  std::optional<PriorityPool> pool;
  std::size_t subgroups = 0;
};

// Desk-scale trainer: sample image pairs, encode proposals, compute the chosen
// losses (detection term fixed at zero), back-propagate through the
// normalization, take an SGD step, then refresh the feature dictionary and
// class centers. Single-threaded; bit-reproducible for a fixed seed.
class Trainer {
 public:
  Trainer(const SyntheticWorld& world, Encoder encoder, HyperParams hp, TrainerParams tp,
          LossChoice choice, std::uint64_t seed);

  // Samples the iteration's images and seeds centers for unseen labels.
  IterationPlan plan();
  // Loss and parameter gradients at the current weights. Selects the
  // priority pool (consuming rng) if the plan has none.
  ObjectiveResult objective(const IterationPlan& plan);
  void apply(const ObjectiveResult& result, double lr);
  const TrainLogRow& step();
  void run();

  int iteration() const { return iteration_; }
  const Encoder& encoder() const { return encoder_; }
  Encoder& mutable_encoder() { return encoder_; }
  const std::optional<ClassifierHead>& head() const { return head_; }
  std::optional<ClassifierHead>& mutable_head() { return head_; }
  const FeatureDictionary& dictionary() const { return dictionary_; }
  const ClassCenterTable& centers() const { return centers_; }
  const std::vector<TrainLogRow>& log() const { return log_; }
  std::size_t pool_overflows() const { return pool_overflows_; }
  std::size_t degenerate_center_updates() const { return degenerate_updates_; }
  LossChoice choice() const { return choice_; }

  void write_log_csv(std::ostream& out) const;
  // PSCKPT1: encoder, optional head, then the two PSDICT1 snapshots.
  void save_checkpoint(std::ostream& out) const;
  void load_checkpoint(std::istream& in);

 private:
  bool uses_dictionary() const;
  bool uses_head() const;
  bool uses_centers() const;

  const SyntheticWorld& world_;
  Encoder encoder_;
  std::optional<ClassifierHead> head_;
  HyperParams hp_;
  TrainerParams tp_;
  LossChoice choice_;
  Rng rng_;
  FeatureDictionary dictionary_;
  ClassCenterTable centers_;
  Vec encoder_velocity_, head_velocity_;
  std::vector<TrainLogRow> log_;
  int iteration_ = 0;
  std::size_t pool_overflows_ = 0;
  std::size_t degenerate_updates_ = 0;
};

}  // namespace psearch

#endif  // PSEARCH_TRAINER_HPP_
