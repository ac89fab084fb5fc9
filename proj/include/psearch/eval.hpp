#ifndef PSEARCH_EVAL_HPP_
#define PSEARCH_EVAL_HPP_

#include <iosfwd>
#include <span>
#include <vector>

#include "psearch/dictionaries.hpp"
#include "psearch/numerics.hpp"
#include "psearch/rng.hpp"

namespace psearch {

struct LabeledFeature {
  Embedding feature;
  Label identity = kUnlabeled;  // -1 never matches anything
};

struct RetrievalSet {
  std::vector<LabeledFeature> queries;
  std::vector<LabeledFeature> gallery;
};

// Gallery indices by descending similarity; ties by ascending index.
using RankedList = std::vector<std::size_t>;

RankedList rank_gallery(const Embedding& query, std::span<const Embedding> gallery);
RankedList rank_gallery(const Embedding& query, std::span<const LabeledFeature> gallery);

// relevant: mask over gallery indices.
double average_precision(std::span<const std::size_t> ranked, std::span<const char> relevant);
double average_precision(std::span<const std::size_t> ranked,
                         std::span<const std::size_t> relevant_indices);
bool cmc_topk(std::span<const std::size_t> ranked, std::span<const char> relevant, std::size_t k);

struct RetrievalMetrics {
  double map = 0;
  double top1 = 0, top5 = 0, top10 = 0;
  std::size_t evaluated = 0;  // queries with at least one relevant item
  std::size_t excluded = 0;   // queries with none, left out of every mean
};

// Evaluates every query against gallery[subset] (all items when empty).
RetrievalMetrics evaluate(const RetrievalSet& set, std::span<const std::size_t> subset = {});

struct GallerySweepRow {
  std::size_t size = 0;
  RetrievalMetrics metrics;
};

// Nested galleries: items relevant to some query are kept first, then
// distractors are added in one fixed random order, so each smaller gallery is
// a subset of every larger one.
std::vector<GallerySweepRow> gallery_sweep(const RetrievalSet& set,
                                           std::span<const std::size_t> sizes, Rng& rng);

struct QueryScores {
  Vec scores;                 // similarity per gallery item
  std::vector<char> relevant;
};

struct PrPoint {
  double recall = 0;
  double precision = 0;
};

// Micro-averaged over all (query, item) pairs, one point per distinct
// threshold from the highest score down to the first threshold reaching full
// recall.
std::vector<PrPoint> pr_curve(std::span<const QueryScores> queries);

std::vector<QueryScores> score_queries(const RetrievalSet& set);

void write_gallery_csv(std::ostream& out, std::span<const GallerySweepRow> rows);
void write_pr_csv(std::ostream& out, std::span<const PrPoint> points);

}  // namespace psearch

#endif  // PSEARCH_EVAL_HPP_
