#include "psearch/checks.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <numeric>
#include <ostream>
#include <set>
#include <sstream>

#include "psearch/dictionaries.hpp"
#include "psearch/error.hpp"
#include "psearch/eval.hpp"
#include "psearch/losses.hpp"
#include "psearch/rng.hpp"
#include "psearch/simulator.hpp"
#include "psearch/trainer.hpp"

namespace psearch::checks {

namespace {

Vec random_unit(int dim, Rng& rng) {
  Vec v(dim);
  for (double& x : v) x = rng.normal();
  return l2_normalize(v).vec();
}

std::string fmt(double x) {
  std::ostringstream s;
  s << std::setprecision(3) << std::scientific << x;
  return s.str();
}

CheckResult make(std::string name, bool ok, std::string detail) {
  return {std::move(name), ok, std::move(detail)};
}

// ---------------------------------------------------------------------------
// Gradient suite

CheckResult olp_gradient_check(std::uint64_t seed, const AnchorGradientFn& grad, int configs) {
  Rng rng(seed);
  double worst = 0;
  for (int c = 0; c < configs; ++c) {
    const int dim = 8 + static_cast<int>(rng.below(249));  // 8..256
    const int k = 1 + static_cast<int>(rng.below(64));     // 1..64
    std::vector<Vec> negs;
    std::vector<Embedding> neg_emb;
    for (int j = 0; j < k; ++j) {
      negs.push_back(random_unit(dim, rng));
      neg_emb.push_back(Embedding::from_unit(negs.back()));
    }
    Subgroup s;
    s.anchor = Embedding::from_unit(random_unit(dim, rng));
    s.positive = Embedding::from_unit(random_unit(dim, rng));
    s.anchor_label = 0;
    for (const auto& e : neg_emb) {
      s.negatives.push_back(&e);
      s.negative_labels.push_back(1);
    }
    const Vec analytic = grad(s);
    const Vec p = s.positive.vec();
    const double err = check_gradient(
        [&](std::span<const double> a) { return reference_olp_term(a, p, negs); }, s.anchor.values(),
        analytic, 1e-6);
    worst = std::max(worst, err);
  }
  return make("olp anchor gradient vs central differences (" + std::to_string(configs) + " configs)",
              worst < 1e-6, "max rel err " + fmt(worst) + " (< 1e-6)");
}

CheckResult hep_gradient_check(std::uint64_t seed) {
  Rng rng(seed);
  double worst = 0;
  for (int t = 0; t < 20; ++t) {
    const int classes = 3 + static_cast<int>(rng.below(20));
    std::vector<Label> labels = rng.sample_distinct(classes, 2 + static_cast<int>(rng.below(classes - 1)));
    PriorityPool pool(labels, static_cast<int>(labels.size()));
    ClassifierScores s;
    s.scores.resize(classes);
    for (double& x : s.scores) x = 3 * rng.normal();
    s.label = labels[rng.below(labels.size())];
    const HepResult r = hep_loss(std::span<const ClassifierScores>(&s, 1), pool);
    const double err = check_gradient(
        [&](std::span<const double> sc) {
          ClassifierScores c{Vec(sc.begin(), sc.end()), s.label};
          return hep_loss(std::span<const ClassifierScores>(&c, 1), pool).loss;
        },
        s.scores, r.score_gradients[0], 1e-6);
    worst = std::max(worst, err);
  }
  return make("hep score gradient vs central differences", worst < 1e-6, "max rel err " + fmt(worst));
}

CheckResult c2hep_gradient_check(std::uint64_t seed) {
  Rng rng(seed);
  double worst = 0;
  for (int t = 0; t < 20; ++t) {
    const int classes = 3 + static_cast<int>(rng.below(10));
    const int dim = 4 + static_cast<int>(rng.below(30));
    std::vector<Vec> centers;
    for (int j = 0; j < classes; ++j) centers.push_back(random_unit(dim, rng));
    std::vector<Label> labels(classes);
    std::iota(labels.begin(), labels.end(), 0);
    PriorityPool pool(labels, classes);
    CenterSample s{random_unit(dim, rng), static_cast<Label>(rng.below(classes))};
    const C2hepResult r = c2hep_loss(std::span<const CenterSample>(&s, 1), pool, centers, 10.0);
    // The loss sees x only through x/|x|, so at unit x its gradient is the
    // tangential part of the reported one.
    Vec g = r.feature_gradients[0];
    axpy(-dot(g, s.feature), s.feature, g);
    const double err = check_gradient(
        [&](std::span<const double> x) {
          CenterSample c{Vec(x.begin(), x.end()), s.label};
          return c2hep_loss(std::span<const CenterSample>(&c, 1), pool, centers, 10.0).loss;
        },
        s.feature, g, 1e-6);
    worst = std::max(worst, err);
  }
  return make("c2hep feature gradient vs central differences", worst < 1e-6, "max rel err " + fmt(worst));
}

CheckResult trainer_gradient_check(std::uint64_t seed, LossChoice choice) {
  WorldParams wp;
  wp.num_identities = 12;
  wp.test_identities = 4;
  wp.latent_dim = 6;
  wp.obs_dim = 12;
  wp.family_size = 3;
  wp.view_rank = 2;
  const SyntheticWorld world(wp, seed);
  Rng init(seed + 1);
  TrainerParams tp;
  tp.images_per_iter = 4;
  tp.proposals_per_image = 6;
  tp.dict_multiplier = 4;
  HyperParams hp;
  hp.pool_size = 6;
  hp.top_negatives = 2;
  Trainer trainer(world, Encoder(wp.obs_dim, 8, 0, init), hp, tp, choice, seed + 2);
  for (int i = 0; i < 5; ++i) trainer.step();

  IterationPlan plan = trainer.plan();
  const ObjectiveResult base = trainer.objective(plan);
  plan.pool = base.pool;
  Rng pick(seed + 3);
  Vec& params = trainer.mutable_encoder().mutable_params();
  double worst = 0;
  const double h = 1e-6;
  for (int t = 0; t < 25; ++t) {
    const std::size_t i = pick.below(params.size());
    const double saved = params[i];
    params[i] = saved + h;
    const double fp = trainer.objective(plan).loss.total;
    params[i] = saved - h;
    const double fm = trainer.objective(plan).loss.total;
    params[i] = saved;
    const double fd = (fp - fm) / (2 * h);
    worst = std::max(worst, std::abs(fd - base.encoder_grad[i]) /
                                std::max(1.0, std::abs(base.encoder_grad[i])));
  }
  return make("end-to-end encoder gradient vs central differences (" + to_string(choice) + ")",
              worst < 1e-4, "max rel err " + fmt(worst) + " (< 1e-4)");
}

// ---------------------------------------------------------------------------
// Oracle suite

CheckResult exhaustive_ap_cmc(int max_gallery) {
  std::size_t patterns = 0, mismatches = 0;
  for (int n = 1; n <= max_gallery; ++n) {
    std::vector<std::size_t> ranked(n);
    std::iota(ranked.begin(), ranked.end(), std::size_t{0});
    for (int mask = 1; mask < (1 << n); ++mask) {
      std::vector<char> rel(n);
      for (int i = 0; i < n; ++i) rel[i] = (mask >> i) & 1;
      ++patterns;
      if (std::abs(average_precision(ranked, rel) - brute_force_ap(ranked, rel)) > 1e-12) ++mismatches;
      for (int k = 1; k <= n + 1; ++k) {
        if (cmc_topk(ranked, rel, k) != brute_force_topk(ranked, rel, k)) ++mismatches;
      }
    }
  }
  return make("AP/CMC fast path vs brute force, all relevance patterns, gallery <= " +
                  std::to_string(max_gallery),
              mismatches == 0, std::to_string(patterns) + " patterns, " + std::to_string(mismatches) +
                                   " mismatches");
}

CheckResult exhaustive_evaluate(int max_gallery) {
  std::size_t patterns = 0, mismatches = 0;
  for (int n = 1; n <= max_gallery; ++n) {
    for (int mask = 1; mask < (1 << n); ++mask) {
      // Rank position r gets angle r * 0.3; storage order is a rotation of rank
      // order so the ranking has to do real work.
      RetrievalSet set;
      set.queries.push_back({Embedding::from_unit({1.0, 0.0}), 7});
      std::vector<std::size_t> ranked(n);
      std::vector<char> rel(n);
      set.gallery.resize(n);
      for (int r = 0; r < n; ++r) {
        const std::size_t slot = (static_cast<std::size_t>(r) + 2) % n;
        const double a = 0.3 * r;
        set.gallery[slot] = {l2_normalize(Vec{std::cos(a), std::sin(a)}), ((mask >> r) & 1) ? 7 : -1};
        ranked[r] = slot;
        rel[slot] = (mask >> r) & 1;
      }
      ++patterns;
      const RetrievalMetrics m = evaluate(set);
      const bool ok = std::abs(m.map - brute_force_ap(ranked, rel)) < 1e-12 &&
                      m.top1 == brute_force_topk(ranked, rel, 1) &&
                      m.top5 == brute_force_topk(ranked, rel, 5) &&
                      m.top10 == brute_force_topk(ranked, rel, 10);
      if (!ok) ++mismatches;
    }
  }
  return make("ranked evaluation vs brute force, all relevance patterns, gallery <= " +
                  std::to_string(max_gallery),
              mismatches == 0, std::to_string(patterns) + " patterns, " + std::to_string(mismatches) +
                                   " mismatches");
}

std::vector<PrPoint> brute_force_pr(const std::vector<QueryScores>& qs) {
  std::set<double, std::greater<>> thresholds;
  std::size_t total = 0;
  for (const auto& q : qs) {
    thresholds.insert(q.scores.begin(), q.scores.end());
    total += static_cast<std::size_t>(std::count(q.relevant.begin(), q.relevant.end(), 1));
  }
  std::vector<PrPoint> pts;
  if (total == 0) return pts;
  for (double t : thresholds) {
    std::size_t tp = 0, ret = 0;
    for (const auto& q : qs) {
      for (std::size_t i = 0; i < q.scores.size(); ++i) {
        if (q.scores[i] >= t) {
          ++ret;
          tp += q.relevant[i] ? 1 : 0;
        }
      }
    }
    pts.push_back({static_cast<double>(tp) / total, static_cast<double>(tp) / ret});
    if (tp == total) break;
  }
  return pts;
}

CheckResult pr_curve_oracle(std::uint64_t seed) {
  Rng rng(seed);
  std::size_t bad = 0;
  const int trials = 200;
  for (int t = 0; t < trials; ++t) {
    std::vector<QueryScores> qs(1 + rng.below(3));
    for (auto& q : qs) {
      const std::size_t n = 1 + rng.below(6);
      for (std::size_t i = 0; i < n; ++i) {
        // Coarse grid so exact ties occur.
        q.scores.push_back(static_cast<double>(rng.below(5)) / 4.0);
        q.relevant.push_back(rng.below(3) == 0);
      }
    }
    const auto fast = pr_curve(qs);
    const auto slow = brute_force_pr(qs);
    bool same = fast.size() == slow.size();
    for (std::size_t i = 0; same && i < fast.size(); ++i) {
      same = std::abs(fast[i].recall - slow[i].recall) < 1e-12 &&
             std::abs(fast[i].precision - slow[i].precision) < 1e-12;
    }
    if (!same) ++bad;
  }
  return make("P-R curve vs brute-force threshold enumeration", bad == 0,
              std::to_string(trials) + " instances, " + std::to_string(bad) + " mismatches");
}

// ---------------------------------------------------------------------------
// Invariant suite

CheckResult olp_normalization(Rng& rng, int trials) {
  double worst = 0;
  for (int t = 0; t < trials; ++t) {
    const int dim = 2 + static_cast<int>(rng.below(30));
    const int k = static_cast<int>(rng.below(20));
    std::vector<Embedding> negs;
    for (int j = 0; j < k; ++j) negs.push_back(Embedding::from_unit(random_unit(dim, rng)));
    Subgroup s;
    s.anchor = Embedding::from_unit(random_unit(dim, rng));
    s.positive = Embedding::from_unit(random_unit(dim, rng));
    for (const auto& e : negs) {
      s.negatives.push_back(&e);
      s.negative_labels.push_back(1);
    }
    const OlpResult r = olp_loss(std::span<const Subgroup>(&s, 1));
    double sum = r.q[0];
    for (double x : r.q_negatives[0]) sum += x;
    worst = std::max(worst, std::abs(sum - 1.0));
    if (!(r.loss >= 0)) worst = 1;
  }
  return make("olp q + sum q_k = 1, loss >= 0", worst <= 1e-12, "max |sum - 1| " + fmt(worst));
}

CheckResult softmax_range(Rng& rng, int trials) {
  bool ok = true;
  double worst = 0;
  for (int t = 0; t < trials && ok; ++t) {
    const std::size_t n = 1 + rng.below(12);
    Vec wide(n), narrow(n);
    for (std::size_t i = 0; i < n; ++i) {
      wide[i] = 1400 * rng.uniform() - 700;
      narrow[i] = 700 * rng.uniform() - 350;
    }
    const Vec pw = softmax(wide), pn = softmax(narrow);
    const double sw = std::accumulate(pw.begin(), pw.end(), 0.0);
    const double sn = std::accumulate(pn.begin(), pn.end(), 0.0);
    worst = std::max({worst, std::abs(sw - 1), std::abs(sn - 1)});
    for (double p : pw) ok = ok && p >= 0 && p <= 1;
    // Spread <= 700 keeps every exponent representable, so nothing underflows;
    // the top component can still round to exactly 1.
    for (double p : pn) ok = ok && p > 0 && p <= 1;
  }
  return make("softmax sums to 1, components in range for |score| <= 700", ok && worst <= 1e-12,
              "max |sum - 1| " + fmt(worst));
}

CheckResult fifo_capacity(Rng& rng, int trials) {
  bool ok = true;
  for (int t = 0; t < trials && ok; ++t) {
    const std::size_t cap = 1 + rng.below(20);
    const std::size_t pushes = rng.below(60);
    FeatureDictionary dict(cap);
    for (std::size_t i = 0; i < pushes; ++i) {
      dict.push(Embedding::from_unit(random_unit(3, rng)), static_cast<Label>(rng.below(5)) - 1);
      ok = ok && dict.size() <= cap;
    }
    ok = ok && dict.size() == std::min(cap, pushes);
    std::uint64_t expect = pushes - dict.size();
    for (const auto& e : dict.entries()) ok = ok && e.insertion_index == expect++;
    const Label anchor = static_cast<Label>(rng.below(4));
    for (const auto* e : dict.negatives(anchor)) ok = ok && e->label != anchor;
  }
  return make("dictionary keeps the min(capacity, n) newest, negatives exclude anchor label", ok,
              std::to_string(trials) + " push sequences");
}

CheckResult pool_rules(Rng& rng, int trials) {
  bool ok = true;
  std::string why;
  for (int t = 0; t < trials && ok; ++t) {
    const int classes = 1 + static_cast<int>(rng.below(60));
    const int target = 1 + static_cast<int>(rng.below(40));
    const int r = static_cast<int>(rng.below(12));
    const int gt_count = static_cast<int>(rng.below(std::min(classes, target) + 1));
    const auto gt = rng.sample_distinct(classes, gt_count);
    std::vector<Label> hard;
    for (std::size_t i = rng.below(15); i > 0; --i) {
      hard.push_back(rng.below(5) == 0 ? kUnlabeled : static_cast<Label>(rng.below(classes)));
    }
    const PriorityPool pool = select_priority_pool(gt, hard, target, r, classes, rng);
    std::set<Label> uniq(pool.labels().begin(), pool.labels().end());
    ok = ok && uniq.size() == pool.size();
    ok = ok && pool.size() == static_cast<std::size_t>(std::min(target, classes));
    for (Label g : gt) ok = ok && pool.contains(g);
    // The first r distinct new hard labels are in, space permitting.
    std::set<Label> seen(gt.begin(), gt.end());
    int taken = 0;
    for (Label h : hard) {
      if (h < 0 || seen.count(h) || taken >= r) continue;
      if (seen.size() >= static_cast<std::size_t>(std::min(target, classes))) break;
      seen.insert(h);
      ++taken;
      ok = ok && pool.contains(h);
    }
    if (!ok) why = "trial " + std::to_string(t);
  }
  return make("priority pool size, ground-truth and hard-negative membership, no duplicates", ok,
              ok ? std::to_string(trials) + " random selections" : why);
}

CheckResult c2hep_scale_invariance(Rng& rng, int trials) {
  double worst = 0;
  for (int t = 0; t < trials; ++t) {
    const int classes = 2 + static_cast<int>(rng.below(8));
    const int dim = 2 + static_cast<int>(rng.below(16));
    std::vector<Vec> centers, scaled;
    ClassCenterTable table(classes, 0.5);
    for (int j = 0; j < classes; ++j) {
      centers.push_back(random_unit(dim, rng));
      table.update(j, Embedding::from_unit(centers.back()));
      Vec s = centers.back();
      const double f = 0.1 + 5 * rng.uniform();
      for (double& x : s) x *= f;
      scaled.push_back(std::move(s));
    }
    // One center blended without renormalizing.
    const Label moved = static_cast<Label>(rng.below(classes));
    const Embedding x = Embedding::from_unit(random_unit(dim, rng));
    Vec raw(dim);
    for (int i = 0; i < dim; ++i) raw[i] = 0.5 * centers[moved][i] + 0.5 * x[i];
    if (norm2(raw) < 1e-6) continue;
    table.update(moved, x);
    std::vector<Vec> raw_centers = centers;
    raw_centers[moved] = raw;

    std::vector<Label> labels(classes);
    std::iota(labels.begin(), labels.end(), 0);
    PriorityPool pool(labels, classes);
    std::vector<CenterSample> samples;
    for (int i = 0; i < 3; ++i) {
      Vec f = random_unit(dim, rng);
      for (double& v : f) v *= 0.5 + 2 * rng.uniform();
      samples.push_back({f, static_cast<Label>(rng.below(classes))});
    }
    const double a = c2hep_loss(samples, pool, centers, 10.0).loss;
    const double b = c2hep_loss(samples, pool, scaled, 10.0).loss;
    worst = std::max(worst, std::abs(a - b));
    const double c = c2hep_loss(samples, pool, table, 10.0).loss;
    const double d = c2hep_loss(samples, pool, raw_centers, 10.0).loss;
    worst = std::max(worst, std::abs(c - d));
  }
  return make("c2hep loss invariant to center scale and to skipping renormalization", worst <= 1e-9,
              "max |diff| " + fmt(worst));
}

CheckResult ap_distractor_monotone(Rng& rng, int trials) {
  bool ok = true;
  for (int t = 0; t < trials && ok; ++t) {
    const std::size_t n = 1 + rng.below(15);
    std::vector<char> rel(n);
    for (auto& r : rel) r = rng.below(3) == 0;
    rel[rng.below(n)] = 1;
    std::vector<std::size_t> ranked(n);
    std::iota(ranked.begin(), ranked.end(), std::size_t{0});
    rng.shuffle(ranked);
    const double before = average_precision(ranked, rel);
    std::vector<char> rel2 = rel;
    rel2.push_back(0);
    std::vector<std::size_t> ranked2 = ranked;
    ranked2.insert(ranked2.begin() + static_cast<long>(rng.below(n + 1)), n);
    ok = average_precision(ranked2, rel2) <= before + 1e-15;
  }
  return make("inserting a non-relevant item never raises AP", ok, std::to_string(trials) + " insertions");
}

CheckResult vector_basics(Rng& rng, int trials) {
  double worst = 0;
  bool symmetric = true;
  for (int t = 0; t < trials; ++t) {
    const int dim = 1 + static_cast<int>(rng.below(64));
    Vec v(dim);
    for (double& x : v) x = 10 * rng.normal();
    if (norm2(v) < 1e-9) continue;
    const Embedding a = l2_normalize(v);
    const Embedding b = l2_normalize(a.values());
    for (int i = 0; i < dim; ++i) worst = std::max(worst, std::abs(a[i] - b[i]));
    worst = std::max(worst, std::abs(norm2(a.values()) - 1));
    const Embedding c = Embedding::from_unit(random_unit(dim, rng));
    symmetric = symmetric && cosine_sim(a, c) == cosine_sim(c, a);
  }
  return make("normalize is idempotent and unit, cosine is symmetric", symmetric && worst <= 1e-9,
              "max deviation " + fmt(worst));
}

}  // namespace

Vec library_anchor_gradient(const Subgroup& s) {
  return olp_loss(std::span<const Subgroup>(&s, 1)).anchor_gradients[0];
}

double reference_olp_term(std::span<const double> anchor, std::span<const double> positive,
                          const std::vector<Vec>& negatives) {
  auto ip = [](std::span<const double> x, const Vec& y) {
    double s = 0;
    for (std::size_t i = 0; i < y.size(); ++i) s += x[i] * y[i];
    return s;
  };
  const double pos = std::exp(ip(anchor, Vec(positive.begin(), positive.end())));
  double den = pos;
  for (const auto& n : negatives) den += std::exp(ip(anchor, n));
  return -std::log(pos / den);
}

double brute_force_ap(const std::vector<std::size_t>& ranked, const std::vector<char>& relevant) {
  // For every relevant item: find its rank, then count relevant items at or
  // above that rank from scratch.
  double sum = 0;
  std::size_t count = 0;
  for (std::size_t item = 0; item < relevant.size(); ++item) {
    if (!relevant[item]) continue;
    ++count;
    const auto pos = static_cast<std::size_t>(std::find(ranked.begin(), ranked.end(), item) - ranked.begin());
    std::size_t above = 0;
    for (std::size_t r = 0; r <= pos; ++r) above += relevant[ranked[r]] ? 1 : 0;
    sum += static_cast<double>(above) / static_cast<double>(pos + 1);
  }
  return count == 0 ? 0.0 : sum / static_cast<double>(count);
}

bool brute_force_topk(const std::vector<std::size_t>& ranked, const std::vector<char>& relevant,
                      std::size_t k) {
  std::size_t best = ranked.size();
  for (std::size_t item = 0; item < relevant.size(); ++item) {
    if (!relevant[item]) continue;
    const auto pos = static_cast<std::size_t>(std::find(ranked.begin(), ranked.end(), item) - ranked.begin());
    best = std::min(best, pos);
  }
  return best < k;
}

std::vector<CheckResult> gradient_suite(std::uint64_t seed, const AnchorGradientFn& grad,
                                        int configurations) {
  std::vector<CheckResult> out;
  out.push_back(olp_gradient_check(seed, grad, configurations));
  out.push_back(hep_gradient_check(seed + 1));
  out.push_back(c2hep_gradient_check(seed + 2));
  for (LossChoice c : all_loss_choices()) out.push_back(trainer_gradient_check(seed + 3, c));
  return out;
}

std::vector<CheckResult> oracle_suite(int max_gallery) {
  return {exhaustive_ap_cmc(max_gallery), exhaustive_evaluate(max_gallery), pr_curve_oracle(17)};
}

std::vector<CheckResult> invariant_suite(std::uint64_t seed, int trials) {
  Rng rng(seed);
  std::vector<CheckResult> out;
  out.push_back(olp_normalization(rng, trials));
  out.push_back(softmax_range(rng, trials));
  out.push_back(fifo_capacity(rng, trials));
  out.push_back(pool_rules(rng, trials));
  out.push_back(c2hep_scale_invariance(rng, trials));
  out.push_back(ap_distractor_monotone(rng, trials));
  out.push_back(vector_basics(rng, trials));
  return out;
}

bool all_passed(const std::vector<CheckResult>& results) {
  return std::all_of(results.begin(), results.end(), [](const CheckResult& r) { return r.passed; });
}

void print_report(std::ostream& out, const std::vector<CheckResult>& results) {
  for (const auto& r : results) {
    out << (r.passed ? "PASS  " : "FAIL  ") << r.name << "  [" << r.detail << "]\n";
  }
}

}  // namespace psearch::checks
