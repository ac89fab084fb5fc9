#include "psearch/losses.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "psearch/error.hpp"

namespace psearch {

namespace {

// Neumaier-compensated running sum.
class Accumulator {
 public:
  void add(double x) {
    const double t = sum_ + x;
    comp_ += std::abs(sum_) >= std::abs(x) ? (sum_ - t) + x : (x - t) + sum_;
    sum_ = t;
  }
  double value() const { return sum_ + comp_; }

 private:
  double sum_ = 0;
  double comp_ = 0;
};

double divisor(std::size_t all, std::size_t contributing, HepNormalization norm) {
  const std::size_t n = norm == HepNormalization::kAllSamples ? all : contributing;
  return n == 0 ? 1.0 : static_cast<double>(n);
}

}  // namespace

// ---------------------------------------------------------------------------

double olp_term(std::span<const double> anchor, std::span<const double> positive,
                std::span<const Embedding* const> negatives) {
  Vec sims;
  sims.reserve(negatives.size() + 1);
  sims.push_back(dot(anchor, positive));
  for (const Embedding* n : negatives) sims.push_back(dot(anchor, n->values()));
  return log_sum_exp(sims) - sims[0];
}

namespace {

// Anchor-only part of a subgroup: negative scores and the exp-weighted sum of
// negatives, both relative to the largest negative score.
struct NegativeSide {
  Vec scores;
  double max = 0;
  double sum_exp = 0;
  Vec weighted;
};

NegativeSide negative_side(const Subgroup& s) {
  NegativeSide n;
  const std::size_t k = s.negatives.size();
  n.scores.resize(k);
  n.weighted.assign(s.anchor.dim(), 0.0);
  if (k == 0) return n;
  for (std::size_t j = 0; j < k; ++j) n.scores[j] = dot(s.anchor.values(), s.negatives[j]->values());
  n.max = *std::max_element(n.scores.begin(), n.scores.end());
  Accumulator z;
  for (std::size_t j = 0; j < k; ++j) {
    const double w = std::exp(n.scores[j] - n.max);
    z.add(w);
    axpy(w, s.negatives[j]->values(), n.weighted);
  }
  n.sum_exp = z.value();
  return n;
}

}  // namespace

OlpResult olp_loss(std::span<const Subgroup> subgroups) {
  if (subgroups.empty()) throw Error(Errc::kEmptySubgroups, "no subgroups this iteration");
  OlpResult r;
  const std::size_t m = subgroups.size();
  r.q.resize(m);
  r.q_negatives.resize(m);
  r.negative_similarities.resize(m);
  r.anchor_gradients.resize(m);
  // An anchor paired with several positives shares its negative side.
  std::map<std::pair<Vec, std::vector<const Embedding*>>, NegativeSide> cache;
  Accumulator total;
  for (std::size_t i = 0; i < m; ++i) {
    const Subgroup& s = subgroups[i];
    if (s.negatives.size() != s.negative_labels.size()) {
      throw Error(Errc::kInvalidParams, "negative/label count mismatch");
    }
    auto key = std::make_pair(s.anchor.vec(), s.negatives);
    auto it = cache.find(key);
    if (it == cache.end()) it = cache.emplace(std::move(key), negative_side(s)).first;
    const NegativeSide& neg = it->second;

    const double sp = dot(s.anchor.values(), s.positive.values());
    const bool any = !s.negatives.empty();
    const double top = any ? std::max(sp, neg.max) : sp;
    const double ep = std::exp(sp - top);
    const double shift = any ? std::exp(neg.max - top) : 0.0;
    const double z = ep + neg.sum_exp * shift;
    total.add(std::log(z) + top - sp);

    r.q[i] = ep / z;
    r.negative_similarities[i] = neg.scores;
    r.q_negatives[i].resize(neg.scores.size());
    for (std::size_t j = 0; j < neg.scores.size(); ++j) r.q_negatives[i][j] = std::exp(neg.scores[j] - top) / z;

    Vec g(s.anchor.dim(), 0.0);
    axpy(r.q[i] - 1.0, s.positive.values(), g);
    if (any) axpy(shift / z, neg.weighted, g);
    r.anchor_gradients[i] = std::move(g);
  }
  r.loss = total.value() / static_cast<double>(m);
  return r;
}

// ---------------------------------------------------------------------------

HepResult hep_loss(std::span<const ClassifierScores> samples, const PriorityPool& pool,
                   HepNormalization norm) {
  if (pool.empty()) throw Error(Errc::kEmptyPool, "HEP needs a nonempty pool");
  HepResult r;
  r.score_gradients.resize(samples.size());
  const auto& labels = pool.labels();
  Vec pooled(labels.size());
  Accumulator total;
  std::vector<double> terms(samples.size(), 0.0);
  std::vector<Vec> probs(samples.size());

  for (std::size_t i = 0; i < samples.size(); ++i) {
    const auto& s = samples[i];
    r.score_gradients[i].assign(s.scores.size(), 0.0);
    if (s.label < 0 || static_cast<std::size_t>(s.label) >= s.scores.size()) {
      throw Error(Errc::kInvalidLabel, "sample label " + std::to_string(s.label));
    }
    if (!pool.contains(s.label)) continue;
    std::size_t own = 0;
    for (std::size_t j = 0; j < labels.size(); ++j) {
      if (labels[j] < 0 || static_cast<std::size_t>(labels[j]) >= s.scores.size()) {
        throw Error(Errc::kInvalidLabel, "pool label outside score vector");
      }
      pooled[j] = s.scores[labels[j]];
      if (labels[j] == s.label) own = j;
    }
    terms[i] = log_sum_exp(pooled) - pooled[own];
    probs[i] = softmax(pooled);
    probs[i][own] -= 1.0;
    total.add(terms[i]);
    ++r.contributing;
  }
  const double n = divisor(samples.size(), r.contributing, norm);
  r.loss = total.value() / n;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    if (probs[i].empty()) continue;
    for (std::size_t j = 0; j < labels.size(); ++j) {
      r.score_gradients[i][labels[j]] = probs[i][j] / n;
    }
  }
  return r;
}

// ---------------------------------------------------------------------------

C2hepResult c2hep_loss(std::span<const CenterSample> samples, const PriorityPool& pool,
                       std::span<const Vec> centers, double lambda, HepNormalization norm) {
  if (pool.empty()) throw Error(Errc::kEmptyPool, "C2HEP needs a nonempty pool");
  if (!(lambda > 0)) throw Error(Errc::kInvalidParams, "lambda must be > 0");

  // Unit copies of the pooled centers that exist.
  std::vector<Label> pooled;
  std::vector<Vec> unit;
  for (Label l : pool.labels()) {
    if (l < 0 || static_cast<std::size_t>(l) >= centers.size() || centers[l].empty()) continue;
    const double n = norm2(centers[l]);
    if (n < kZeroNorm) throw Error(Errc::kZeroVector, "zero class center");
    Vec c = centers[l];
    for (double& x : c) x /= n;
    pooled.push_back(l);
    unit.push_back(std::move(c));
  }

  C2hepResult r;
  r.pooled_centers = pooled.size();
  r.feature_gradients.resize(samples.size());
  Accumulator total;
  std::vector<Vec> coef(samples.size());
  Vec logits(pooled.size());

  for (std::size_t i = 0; i < samples.size(); ++i) {
    const auto& s = samples[i];
    r.feature_gradients[i].assign(s.feature.size(), 0.0);
    if (s.label < 0 || static_cast<std::size_t>(s.label) >= centers.size() ||
        centers[s.label].empty()) {
      throw Error(Errc::kUninitializedCenter, "class " + std::to_string(s.label) + " has no center");
    }
    if (!pool.contains(s.label)) continue;
    const double xn = norm2(s.feature);
    if (xn < kZeroNorm) throw Error(Errc::kZeroVector, "zero feature");
    std::size_t own = 0;
    for (std::size_t j = 0; j < pooled.size(); ++j) {
      logits[j] = lambda * std::clamp(dot(s.feature, unit[j]) / xn, -1.0, 1.0);
      if (pooled[j] == s.label) own = j;
    }
    total.add(log_sum_exp(logits) - logits[own]);
    coef[i] = softmax(logits);
    coef[i][own] -= 1.0;
    ++r.contributing;
  }
  const double n = divisor(samples.size(), r.contributing, norm);
  r.loss = total.value() / n;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    if (coef[i].empty()) continue;
    for (std::size_t j = 0; j < pooled.size(); ++j) {
      axpy(lambda * coef[i][j] / n, unit[j], r.feature_gradients[i]);
    }
  }
  return r;
}

C2hepResult c2hep_loss(std::span<const CenterSample> samples, const PriorityPool& pool,
                       const ClassCenterTable& table, double lambda, HepNormalization norm) {
  std::vector<Vec> centers(table.num_classes());
  for (Label l : pool.labels()) {
    if (table.has(l)) centers[l] = table.center(l).vec();
  }
  for (const auto& s : samples) {
    if (!table.has(s.label)) {
      throw Error(Errc::kUninitializedCenter, "class " + std::to_string(s.label) + " has no center");
    }
    if (centers[s.label].empty()) centers[s.label] = table.center(s.label).vec();
  }
  return c2hep_loss(samples, pool, centers, lambda, norm);
}

// ---------------------------------------------------------------------------

double triplet_loss(const Embedding& a, const Embedding& p, const Embedding& n, double margin) {
  return std::max(0.0, margin - cosine_sim(a, p) + cosine_sim(a, n));
}

double contrastive_loss(const Embedding& x1, const Embedding& x2, bool same_identity,
                        double margin) {
  const double d = cosine_sim(x1, x2);
  return same_identity ? 1.0 - d : std::max(0.0, d - margin);
}

TripletGrad triplet_term(const Embedding& a, const Embedding& p, const Embedding& n,
                         double margin) {
  TripletGrad g;
  g.loss = triplet_loss(a, p, n, margin);
  g.anchor.assign(a.dim(), 0.0);
  g.positive.assign(a.dim(), 0.0);
  g.negative.assign(a.dim(), 0.0);
  if (g.loss > 0) {
    axpy(1.0, n.values(), g.anchor);
    axpy(-1.0, p.values(), g.anchor);
    axpy(-1.0, a.values(), g.positive);
    axpy(1.0, a.values(), g.negative);
  }
  return g;
}

PairGrad contrastive_term(const Embedding& x1, const Embedding& x2, bool same_identity,
                          double margin) {
  PairGrad g;
  g.loss = contrastive_loss(x1, x2, same_identity, margin);
  g.first.assign(x1.dim(), 0.0);
  g.second.assign(x1.dim(), 0.0);
  const double sign = same_identity ? -1.0 : (g.loss > 0 ? 1.0 : 0.0);
  if (sign != 0.0) {
    axpy(sign, x2.values(), g.first);
    axpy(sign, x1.values(), g.second);
  }
  return g;
}

// ---------------------------------------------------------------------------

LossBreakdown combined_loss(double det, double olp, double id_loss, const HyperParams& hp) {
  if (!(hp.alpha >= 0 && hp.beta >= 0)) throw Error(Errc::kInvalidParams, "negative loss weight");
  return {det, olp, id_loss, det + hp.alpha * olp + hp.beta * id_loss};
}

}  // namespace psearch
