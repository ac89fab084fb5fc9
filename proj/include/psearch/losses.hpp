#ifndef PSEARCH_LOSSES_HPP_
#define PSEARCH_LOSSES_HPP_

#include <span>
#include <vector>

#include "psearch/dictionaries.hpp"
#include "psearch/numerics.hpp"
#include "psearch/pairing.hpp"

namespace psearch {

// ---------------------------------------------------------------------------
// On-line pairing loss. Each subgroup contributes
//   -log( e^{a.p} / (e^{a.p} + sum_k e^{a.n_k}) )
// and the loss is the mean over subgroups. Similarities are plain inner
// products of unit vectors.
struct OlpResult {
  double loss = 0;
  Vec q;                          // per subgroup, positive probability
  std::vector<Vec> q_negatives;   // per subgroup, one entry per negative
  std::vector<Vec> negative_similarities;
  // Per subgroup: gradient of that subgroup's own term with respect to the
  // anchor, (q - 1) p + sum_k q_k n_k. The mean loss has this over m.
  std::vector<Vec> anchor_gradients;
};

OlpResult olp_loss(std::span<const Subgroup> subgroups);

// Term of a single subgroup for an arbitrary (not necessarily unit) anchor.
double olp_term(std::span<const double> anchor, std::span<const double> positive,
                std::span<const Embedding* const> negatives);

// ---------------------------------------------------------------------------
// Hard example priority loss: softmax cross-entropy restricted to the pool.
struct ClassifierScores {
  Vec scores;       // one per class, background class last
  Label label = 0;  // class index into scores
};

enum class HepNormalization {
  kAllSamples,    // divide by every sample, pooled or not
  kContributing,  // divide by samples whose label is in the pool
};

struct HepResult {
  double loss = 0;
  std::size_t contributing = 0;
  // d loss / d scores per sample; zero outside the pool.
  std::vector<Vec> score_gradients;
};

HepResult hep_loss(std::span<const ClassifierScores> samples, const PriorityPool& pool,
                   HepNormalization norm = HepNormalization::kAllSamples);

// ---------------------------------------------------------------------------
// Class-center guided HEP: p_j = softmax over pool of lambda * cos(x, c_j).
struct CenterSample {
  Vec feature;  // any positive scale; cosine is taken
  Label label = 0;
};

struct C2hepResult {
  double loss = 0;
  std::size_t contributing = 0;
  std::size_t pooled_centers = 0;  // pool members that had a center
  // d loss / d x at the normalized-feature level (centers held constant).
  std::vector<Vec> feature_gradients;
};

// Pool members with no center yet are left out of the softmax; a sample whose
// own label has no center is an error.
C2hepResult c2hep_loss(std::span<const CenterSample> samples, const PriorityPool& pool,
                       const ClassCenterTable& table, double lambda,
                       HepNormalization norm = HepNormalization::kAllSamples);

// Same loss against explicit center vectors (any positive scale), indexed by
// label. Used to check scale invariance of the centers.
C2hepResult c2hep_loss(std::span<const CenterSample> samples, const PriorityPool& pool,
                       std::span<const Vec> centers, double lambda,
                       HepNormalization norm = HepNormalization::kAllSamples);

// ---------------------------------------------------------------------------
// Baselines.
double triplet_loss(const Embedding& a, const Embedding& p, const Embedding& n,
                    double margin = 0.3);
double contrastive_loss(const Embedding& x1, const Embedding& x2, bool same_identity,
                        double margin = 0.5);

// Value and inner-product-level gradients of one triplet / pair term.
struct TripletGrad {
  double loss = 0;
  Vec anchor, positive, negative;
};
TripletGrad triplet_term(const Embedding& a, const Embedding& p, const Embedding& n,
                         double margin);

struct PairGrad {
  double loss = 0;
  Vec first, second;
};
PairGrad contrastive_term(const Embedding& x1, const Embedding& x2, bool same_identity,
                          double margin);

// ---------------------------------------------------------------------------
struct LossBreakdown {
  double det = 0;
  double olp = 0;
  double id_loss = 0;
  double total = 0;
};

LossBreakdown combined_loss(double det, double olp, double id_loss, const HyperParams& hp);

}  // namespace psearch

#endif  // PSEARCH_LOSSES_HPP_
