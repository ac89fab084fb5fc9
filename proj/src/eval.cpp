#include "psearch/eval.hpp"

#include <algorithm>
#include <numeric>
#include <ostream>

#include "psearch/error.hpp"
#include "psearch/textio.hpp"

namespace psearch {

namespace {

RankedList rank_by_scores(const Vec& scores) {
  RankedList order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  return order;
}

std::vector<char> relevance_mask(const LabeledFeature& query,
                                 std::span<const LabeledFeature> gallery,
                                 std::span<const std::size_t> subset) {
  std::vector<char> mask(subset.size(), 0);
  if (query.identity < 0) return mask;
  for (std::size_t i = 0; i < subset.size(); ++i) {
    mask[i] = gallery[subset[i]].identity == query.identity;
  }
  return mask;
}

}  // namespace

RankedList rank_gallery(const Embedding& query, std::span<const Embedding> gallery) {
  if (gallery.empty()) throw Error(Errc::kEmptyGallery, "nothing to rank");
  Vec scores(gallery.size());
  for (std::size_t i = 0; i < gallery.size(); ++i) scores[i] = cosine_sim(query, gallery[i]);
  return rank_by_scores(scores);
}

RankedList rank_gallery(const Embedding& query, std::span<const LabeledFeature> gallery) {
  if (gallery.empty()) throw Error(Errc::kEmptyGallery, "nothing to rank");
  Vec scores(gallery.size());
  for (std::size_t i = 0; i < gallery.size(); ++i) scores[i] = cosine_sim(query, gallery[i].feature);
  return rank_by_scores(scores);
}

double average_precision(std::span<const std::size_t> ranked, std::span<const char> relevant) {
  std::size_t total = 0;
  for (std::size_t idx : ranked) total += relevant[idx] ? 1 : 0;
  if (total == 0) throw Error(Errc::kNoRelevant, "query has no relevant gallery item");
  double sum = 0;
  std::size_t hits = 0;
  for (std::size_t rank = 0; rank < ranked.size(); ++rank) {
    if (!relevant[ranked[rank]]) continue;
    ++hits;
    sum += static_cast<double>(hits) / static_cast<double>(rank + 1);
  }
  return sum / static_cast<double>(total);
}

double average_precision(std::span<const std::size_t> ranked,
                         std::span<const std::size_t> relevant_indices) {
  std::vector<char> mask(ranked.size(), 0);
  for (std::size_t i : relevant_indices) {
    if (i >= mask.size()) throw Error(Errc::kInvalidParams, "relevant index outside gallery");
    mask[i] = 1;
  }
  return average_precision(ranked, mask);
}

bool cmc_topk(std::span<const std::size_t> ranked, std::span<const char> relevant, std::size_t k) {
  if (k < 1) throw Error(Errc::kInvalidParams, "k must be >= 1");
  bool any = false;
  for (std::size_t idx : ranked) any = any || relevant[idx];
  if (!any) throw Error(Errc::kNoRelevant, "query has no relevant gallery item");
  const std::size_t window = std::min(k, ranked.size());
  for (std::size_t r = 0; r < window; ++r) {
    if (relevant[ranked[r]]) return true;
  }
  return false;
}

RetrievalMetrics evaluate(const RetrievalSet& set, std::span<const std::size_t> subset) {
  std::vector<std::size_t> all;
  if (subset.empty()) {
    all.resize(set.gallery.size());
    std::iota(all.begin(), all.end(), std::size_t{0});
    subset = all;
  }
  if (subset.empty()) throw Error(Errc::kEmptyGallery, "empty gallery");

  RetrievalMetrics m;
  double ap_sum = 0, t1 = 0, t5 = 0, t10 = 0;
  Vec scores(subset.size());
  for (const auto& q : set.queries) {
    const auto mask = relevance_mask(q, set.gallery, subset);
    if (std::none_of(mask.begin(), mask.end(), [](char c) { return c != 0; })) {
      ++m.excluded;
      continue;
    }
    for (std::size_t i = 0; i < subset.size(); ++i) {
      scores[i] = cosine_sim(q.feature, set.gallery[subset[i]].feature);
    }
    const RankedList ranked = rank_by_scores(scores);
    ap_sum += average_precision(ranked, mask);
    t1 += cmc_topk(ranked, mask, 1);
    t5 += cmc_topk(ranked, mask, 5);
    t10 += cmc_topk(ranked, mask, 10);
    ++m.evaluated;
  }
  if (m.evaluated > 0) {
    const double n = static_cast<double>(m.evaluated);
    m.map = ap_sum / n;
    m.top1 = t1 / n;
    m.top5 = t5 / n;
    m.top10 = t10 / n;
  }
  return m;
}

std::vector<GallerySweepRow> gallery_sweep(const RetrievalSet& set,
                                           std::span<const std::size_t> sizes, Rng& rng) {
  std::vector<char> wanted(set.gallery.size(), 0);
  for (const auto& q : set.queries) {
    if (q.identity < 0) continue;
    for (std::size_t i = 0; i < set.gallery.size(); ++i) {
      if (set.gallery[i].identity == q.identity) wanted[i] = 1;
    }
  }
  std::vector<std::size_t> keep, distractors;
  for (std::size_t i = 0; i < set.gallery.size(); ++i) {
    (wanted[i] ? keep : distractors).push_back(i);
  }
  rng.shuffle(keep);
  rng.shuffle(distractors);
  std::vector<std::size_t> order = keep;
  order.insert(order.end(), distractors.begin(), distractors.end());

  std::vector<GallerySweepRow> rows;
  for (std::size_t s : sizes) {
    if (s > order.size()) {
      throw Error(Errc::kSizeTooLarge, std::to_string(s) + " > gallery of " +
                                           std::to_string(order.size()));
    }
    if (s == 0) throw Error(Errc::kInvalidParams, "gallery size must be positive");
    std::vector<std::size_t> subset(order.begin(), order.begin() + static_cast<long>(s));
    std::sort(subset.begin(), subset.end());
    rows.push_back({s, evaluate(set, subset)});
  }
  return rows;
}

std::vector<QueryScores> score_queries(const RetrievalSet& set) {
  std::vector<QueryScores> out;
  out.reserve(set.queries.size());
  for (const auto& q : set.queries) {
    QueryScores qs;
    qs.scores.resize(set.gallery.size());
    qs.relevant.resize(set.gallery.size());
    for (std::size_t i = 0; i < set.gallery.size(); ++i) {
      qs.scores[i] = cosine_sim(q.feature, set.gallery[i].feature);
      qs.relevant[i] = q.identity >= 0 && set.gallery[i].identity == q.identity;
    }
    out.push_back(std::move(qs));
  }
  return out;
}

std::vector<PrPoint> pr_curve(std::span<const QueryScores> queries) {
  struct Pair {
    double score;
    bool relevant;
  };
  std::vector<Pair> pairs;
  std::size_t total_relevant = 0;
  for (const auto& q : queries) {
    if (q.scores.size() != q.relevant.size()) {
      throw Error(Errc::kDimensionMismatch, "scores and relevance differ in length");
    }
    for (std::size_t i = 0; i < q.scores.size(); ++i) {
      pairs.push_back({q.scores[i], q.relevant[i] != 0});
      total_relevant += q.relevant[i] ? 1 : 0;
    }
  }
  std::vector<PrPoint> points;
  if (total_relevant == 0) return points;
  std::stable_sort(pairs.begin(), pairs.end(),
                   [](const Pair& a, const Pair& b) { return a.score > b.score; });
  std::size_t tp = 0, retrieved = 0;
  for (std::size_t i = 0; i < pairs.size();) {
    const double t = pairs[i].score;
    for (; i < pairs.size() && pairs[i].score == t; ++i) {
      ++retrieved;
      tp += pairs[i].relevant ? 1 : 0;
    }
    points.push_back({static_cast<double>(tp) / static_cast<double>(total_relevant),
                      static_cast<double>(tp) / static_cast<double>(retrieved)});
    if (tp == total_relevant) break;
  }
  return points;
}

void write_gallery_csv(std::ostream& out, std::span<const GallerySweepRow> rows) {
  out << "gallery_size,mAP,top1,top5,top10\n";
  for (const auto& r : rows) {
    out << r.size << ',' << textio::fixed(r.metrics.map, 6) << ','
        << textio::fixed(r.metrics.top1, 6) << ',' << textio::fixed(r.metrics.top5, 6) << ','
        << textio::fixed(r.metrics.top10, 6) << '\n';
  }
}

void write_pr_csv(std::ostream& out, std::span<const PrPoint> points) {
  out << "recall,precision\n";
  for (const auto& p : points) {
    out << textio::fixed(p.recall, 6) << ',' << textio::fixed(p.precision, 6) << '\n';
  }
}

}  // namespace psearch
