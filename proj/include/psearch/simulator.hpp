#ifndef PSEARCH_SIMULATOR_HPP_
#define PSEARCH_SIMULATOR_HPP_

#include <cstdint>
#include <iosfwd>
#include <span>
#include <utility>
#include <vector>

#include "psearch/dictionaries.hpp"
#include "psearch/eval.hpp"
#include "psearch/numerics.hpp"
#include "psearch/rng.hpp"

namespace psearch {

struct WorldParams {
  int num_identities = 200;   // labeled training identities
  int test_identities = 100;  // disjoint identities used only for retrieval tests
  int latent_dim = 32;
  int obs_dim = 128;
  double sigma_view = 0.4;
  double sigma_noise = 0.1;
  double unlabeled_fraction = 0.2;  // share of person proposals without identity
  double background_fraction = 0.25;
  // Identities come in families of look-alikes around a shared center.
  int family_size = 10;
  double family_spread = 0.5;
  // Latent subspaces: camera offsets, family centers, within-family detail.
  int view_rank = 8;
  int family_rank = 8;
  int detail_rank = 8;
  int ids_per_image = 3;
  int shared_ids = 1;  // identities common to both images of a pair

  void validate() const;  // throws kInvalidParams
};

// Matrices are row-major.
class SyntheticWorld {
 public:
  SyntheticWorld(WorldParams params, std::uint64_t seed);

  const WorldParams& params() const { return params_; }
  const std::vector<Vec>& prototypes() const { return prototypes_; }
  const std::vector<Vec>& test_prototypes() const { return test_prototypes_; }
  const Vec& lift_map() const { return lift_; }  // obs_dim x latent_dim

  Vec camera_offset(Rng& rng) const;
  // Prototype of a person outside the labeled set (p-w/o-id or distractor).
  Vec stranger(Rng& rng) const;
  Vec observe_person(const Vec& prototype, const Vec& camera, Rng& rng) const;
  Vec observe_background(Rng& rng) const;

 private:
  Vec family_member(int family, Rng& rng) const;
  Vec in_span(const std::vector<Vec>& basis, double scale, Rng& rng) const;
  Vec lift(const Vec& latent) const;

  WorldParams params_;
  std::vector<Vec> family_centers_;
  std::vector<Vec> prototypes_;
  std::vector<Vec> test_prototypes_;
  std::vector<Vec> view_basis_;
  std::vector<Vec> family_basis_;
  std::vector<Vec> detail_basis_;
  Vec lift_;
};

SyntheticWorld generate_world(const WorldParams& params, std::uint64_t seed);

struct SceneProposal {
  Vec observation;
  Label label = kBackground;
};

struct SceneImage {
  std::vector<SceneProposal> proposals;
  Vec camera_offset;
};

// Two images sharing at least one labeled identity.
std::pair<SceneImage, SceneImage> sample_image_pair(const SyntheticWorld& world,
                                                    int proposals_per_image, Rng& rng);

struct EvalParams {
  int views_per_identity = 3;  // one query view, the rest go to the gallery
  int distractors = 300;       // strangers added to the gallery
};

// Raw observations of the test identities; encode with an Encoder to evaluate.
struct EvalScene {
  std::vector<Vec> query_obs;
  std::vector<Label> query_ids;
  std::vector<Vec> gallery_obs;
  std::vector<Label> gallery_ids;
};

EvalScene sample_eval_scene(const SyntheticWorld& world, const EvalParams& params, Rng& rng);

// ---------------------------------------------------------------------------
// Affine map (optionally through one tanh hidden layer) followed by L2
// normalization.
class Encoder {
 public:
  // Weights ~ N(0, (init_scale)^2 / fan_in), biases zero.
  Encoder(int in_dim, int out_dim, int hidden, Rng& rng, double init_scale = 0.1);

  struct Trace {
    Vec input;
    Vec hidden;  // activations, empty without a hidden layer
    Vec raw;
    double raw_norm = 0;
    Embedding feature;
  };

  Trace forward(std::span<const double> obs) const;
  Embedding encode(std::span<const double> obs) const { return forward(obs).feature; }
  // param_grad += d loss / d params for the given d loss / d feature.
  void backward(const Trace& t, std::span<const double> feature_grad,
                std::span<double> param_grad) const;

  int in_dim() const { return in_; }
  int out_dim() const { return out_; }
  int hidden() const { return hidden_; }
  const Vec& params() const { return params_; }
  Vec& mutable_params() { return params_; }

  void write(std::ostream& out) const;
  static Encoder read(std::istream& in);

 private:
  Encoder(int in_dim, int out_dim, int hidden);
  int in_, out_, hidden_;
  Vec params_;
};

// Linear classifier over identities plus a trailing background class.
class ClassifierHead {
 public:
  ClassifierHead(int classes, int dim);

  Vec scores(const Embedding& f) const;
  void backward(const Embedding& f, std::span<const double> score_grad,
                std::span<double> param_grad, std::span<double> feature_grad) const;

  int classes() const { return classes_; }
  int dim() const { return dim_; }
  const Vec& params() const { return params_; }
  Vec& mutable_params() { return params_; }

  void write(std::ostream& out) const;
  static ClassifierHead read(std::istream& in);

 private:
  int classes_, dim_;
  Vec params_;  // weights (classes x dim) then biases
};

RetrievalSet encode_eval_scene(const EvalScene& scene, const Encoder& encoder);

}  // namespace psearch

#endif  // PSEARCH_SIMULATOR_HPP_
