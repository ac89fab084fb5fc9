#include "psearch/trainer.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <istream>
#include <limits>
#include <ostream>

#include "psearch/error.hpp"
#include "psearch/textio.hpp"

namespace psearch {

namespace {

constexpr const char* kCheckpointMagic = "PSCKPT1";

struct NamedChoice {
  LossChoice choice;
  const char* name;
};

constexpr NamedChoice kChoices[] = {
    {LossChoice::kOlpC2hep, "olp+c2hep"}, {LossChoice::kOlpHep, "olp+hep"},
    {LossChoice::kOlpOnly, "olp"},        {LossChoice::kC2hepOnly, "c2hep"},
    {LossChoice::kTripletHep, "triplet+hep"}, {LossChoice::kContrastive, "contrastive"},
};

}  // namespace

std::string to_string(LossChoice c) {
  for (const auto& nc : kChoices) {
    if (nc.choice == c) return nc.name;
  }
  return "unknown";
}

LossChoice parse_loss_choice(const std::string& name) {
  for (const auto& nc : kChoices) {
    if (name == nc.name) return nc.choice;
  }
  throw Error(Errc::kConfigError, "loss_choice: unknown value '" + name + "'");
}

const std::vector<LossChoice>& all_loss_choices() {
  static const std::vector<LossChoice> all = [] {
    std::vector<LossChoice> v;
    for (const auto& nc : kChoices) v.push_back(nc.choice);
    return v;
  }();
  return all;
}

double TrainerParams::lr_at(int iteration) const {
  return iteration < static_cast<int>(std::lround(lr_drop_fraction * iters)) ? lr_high : lr_low;
}

std::size_t TrainerParams::dictionary_capacity() const {
  return static_cast<std::size_t>(dict_multiplier) * proposals_per_image * images_per_iter;
}

void TrainerParams::validate() const {
  auto fail = [](const std::string& what) { throw Error(Errc::kInvalidParams, what); };
  if (images_per_iter < 2 || images_per_iter % 2 != 0) fail("images_per_iter must be even and >= 2");
  if (proposals_per_image < 1) fail("proposals_per_image must be >= 1");
  if (iters < 0) fail("iters must be >= 0");
  if (dict_multiplier < 1) fail("dict_multiplier must be >= 1");
  if (!(lr_high >= 0) || !(lr_low >= 0)) fail("learning rates must be >= 0");
  if (!(lr_drop_fraction >= 0 && lr_drop_fraction <= 1)) fail("lr_drop_fraction in [0, 1]");
  if (!(momentum >= 0 && momentum < 1)) fail("momentum in [0, 1)");
}

Trainer::Trainer(const SyntheticWorld& world, Encoder encoder, HyperParams hp, TrainerParams tp,
                 LossChoice choice, std::uint64_t seed)
    : world_(world),
      encoder_(std::move(encoder)),
      hp_(hp),
      tp_(tp),
      choice_(choice),
      rng_(seed),
      dictionary_((tp.validate(), tp.dictionary_capacity())),
      centers_(world.params().num_identities, hp.phi) {
  hp_.validate();
  if (encoder_.in_dim() != world.params().obs_dim) {
    throw Error(Errc::kInvalidParams, "encoder input does not match world obs_dim");
  }
  if (uses_head()) head_.emplace(world.params().num_identities + 1, encoder_.out_dim());
  encoder_velocity_.assign(encoder_.params().size(), 0.0);
  if (head_) head_velocity_.assign(head_->params().size(), 0.0);
}

bool Trainer::uses_dictionary() const {
  return choice_ == LossChoice::kOlpC2hep || choice_ == LossChoice::kOlpHep ||
         choice_ == LossChoice::kOlpOnly || choice_ == LossChoice::kC2hepOnly;
}

bool Trainer::uses_head() const {
  return choice_ == LossChoice::kOlpHep || choice_ == LossChoice::kTripletHep;
}

bool Trainer::uses_centers() const {
  return choice_ == LossChoice::kOlpC2hep || choice_ == LossChoice::kC2hepOnly;
}

IterationPlan Trainer::plan() {
  IterationPlan p;
  for (int i = 0; i < tp_.images_per_iter / 2; ++i) {
    auto [a, b] = sample_image_pair(world_, tp_.proposals_per_image, rng_);
    p.images.push_back(std::move(a));
    p.images.push_back(std::move(b));
  }
  if (uses_centers()) {
    for (const auto& img : p.images) {
      for (const auto& prop : img.proposals) {
        if (prop.label >= 0 && !centers_.has(prop.label)) {
          centers_.update(prop.label, encoder_.encode(prop.observation));
        }
      }
    }
  }
  return p;
}

ObjectiveResult Trainer::objective(const IterationPlan& plan) {
  ObjectiveResult r;
  r.encoder_grad.assign(encoder_.params().size(), 0.0);
  if (head_) r.head_grad.assign(head_->params().size(), 0.0);

  std::vector<std::size_t> image_start;
  for (std::size_t i = 0; i < plan.images.size(); ++i) {
    image_start.push_back(r.proposals.size());
    for (const auto& prop : plan.images[i].proposals) {
      r.proposals.push_back({encoder_.forward(prop.observation), prop.label, i});
    }
  }
  image_start.push_back(r.proposals.size());
  const std::size_t n = r.proposals.size();
  const int dim = encoder_.out_dim();
  std::vector<Vec> grads(n, Vec(dim, 0.0));
  auto feature = [&](std::size_t i) -> const Embedding& { return r.proposals[i].trace.feature; };
  auto label = [&](std::size_t i) { return r.proposals[i].label; };

  const int classes = world_.params().num_identities;
  // Highest similarity at which each identity showed up as a negative.
  Vec hardest(classes, -std::numeric_limits<double>::infinity());
  auto note_negative = [&](Label l, double sim) {
    if (l >= 0 && sim > hardest[l]) hardest[l] = sim;
  };

  double metric = 0;
  if (uses_dictionary()) {
    std::vector<Subgroup> subgroups;
    std::vector<std::size_t> anchor_global, positive_global;
    for (std::size_t pair = 0; pair + 1 < plan.images.size(); pair += 2) {
      std::vector<Proposal> a, b;
      for (std::size_t i = image_start[pair]; i < image_start[pair + 1]; ++i) a.push_back({feature(i), label(i)});
      for (std::size_t i = image_start[pair + 1]; i < image_start[pair + 2]; ++i) b.push_back({feature(i), label(i)});
      auto sg = build_subgroups(a, b, dictionary_, hp_.k_cap);
      for (auto& s : sg) {
        anchor_global.push_back(image_start[pair] + s.anchor_index);
        positive_global.push_back(image_start[pair] + s.positive_index);
        subgroups.push_back(std::move(s));
      }
    }
    r.subgroups = subgroups.size();
    if (!subgroups.empty()) {
      const OlpResult olp = olp_loss(subgroups);
      for (std::size_t i = 0; i < subgroups.size(); ++i) {
        for (std::size_t k = 0; k < subgroups[i].negative_labels.size(); ++k) {
          note_negative(subgroups[i].negative_labels[k], olp.negative_similarities[i][k]);
        }
      }
      if (choice_ != LossChoice::kC2hepOnly) {
        metric = olp.loss;
        const double w = hp_.alpha / static_cast<double>(subgroups.size());
        for (std::size_t i = 0; i < subgroups.size(); ++i) {
          axpy(w, olp.anchor_gradients[i], grads[anchor_global[i]]);
          // The positive is a live feature too; dictionary negatives are not.
          axpy(w * (olp.q[i] - 1.0), subgroups[i].anchor.values(), grads[positive_global[i]]);
        }
      }
    }
  } else {
    // Pairwise baselines mine within the iteration: each labeled anchor takes
    // its least similar positive and most similar negative in the batch.
    std::size_t anchors = 0;
    std::vector<std::array<std::size_t, 3>> terms3;
    std::vector<TripletGrad> grads3;
    std::vector<std::pair<std::size_t, std::size_t>> pairs;
    std::vector<PairGrad> pair_grads;
    double sum = 0;
    for (std::size_t a = 0; a < n; ++a) {
      if (label(a) < 0) continue;
      std::size_t pos = n, neg = n;
      double pos_sim = 2, neg_sim = -2;
      for (std::size_t j = 0; j < n; ++j) {
        if (j == a || label(j) == kBackground) continue;
        const double sim = dot(feature(a).values(), feature(j).values());
        if (label(j) == label(a)) {
          if (sim < pos_sim) pos_sim = sim, pos = j;
        } else {
          note_negative(label(j), sim);
          if (sim > neg_sim) neg_sim = sim, neg = j;
        }
      }
      if (pos == n) continue;
      if (choice_ == LossChoice::kTripletHep) {
        if (neg == n) continue;
        ++anchors;
        TripletGrad g = triplet_term(feature(a), feature(pos), feature(neg), hp_.triplet_margin);
        sum += g.loss;
        terms3.push_back({a, pos, neg});
        grads3.push_back(std::move(g));
      } else {
        ++anchors;
        PairGrad gp = contrastive_term(feature(a), feature(pos), true, hp_.contrastive_margin);
        sum += gp.loss;
        pairs.emplace_back(a, pos);
        pair_grads.push_back(std::move(gp));
        if (neg != n) {
          PairGrad gn = contrastive_term(feature(a), feature(neg), false, hp_.contrastive_margin);
          sum += gn.loss;
          pairs.emplace_back(a, neg);
          pair_grads.push_back(std::move(gn));
        }
      }
    }
    if (anchors > 0) {
      metric = sum / static_cast<double>(anchors);
      const double w = hp_.alpha / static_cast<double>(anchors);
      for (std::size_t t = 0; t < grads3.size(); ++t) {
        axpy(w, grads3[t].anchor, grads[terms3[t][0]]);
        axpy(w, grads3[t].positive, grads[terms3[t][1]]);
        axpy(w, grads3[t].negative, grads[terms3[t][2]]);
      }
      for (std::size_t t = 0; t < pair_grads.size(); ++t) {
        axpy(w, pair_grads[t].first, grads[pairs[t].first]);
        axpy(w, pair_grads[t].second, grads[pairs[t].second]);
      }
    }
  }

  double id_loss = 0;
  if (uses_head() || uses_centers()) {
    if (plan.pool) {
      r.pool = plan.pool;
    } else {
      std::vector<Label> gt;
      std::vector<char> seen(classes, 0);
      for (std::size_t i = 0; i < n; ++i) {
        if (label(i) >= 0 && !seen[label(i)]) {
          seen[label(i)] = 1;
          gt.push_back(label(i));
        }
      }
      std::vector<Label> ranked;
      for (Label l = 0; l < classes; ++l) {
        if (std::isfinite(hardest[l])) ranked.push_back(l);
      }
      std::stable_sort(ranked.begin(), ranked.end(),
                       [&](Label x, Label y) { return hardest[x] > hardest[y]; });
      r.pool = select_priority_pool(gt, ranked, hp_.pool_size, hp_.top_negatives, classes, rng_);
      if (r.pool->exceeded_target()) ++pool_overflows_;
      if (uses_head()) r.pool->add(classes);  // background class
    }

    if (uses_head()) {
      std::vector<ClassifierScores> samples;
      std::vector<std::size_t> source;
      for (std::size_t i = 0; i < n; ++i) {
        if (label(i) == kUnlabeled) continue;
        samples.push_back({head_->scores(feature(i)), label(i) == kBackground ? classes : label(i)});
        source.push_back(i);
      }
      const HepResult hep = hep_loss(samples, *r.pool, tp_.hep_norm);
      id_loss = hep.loss;
      for (std::size_t s = 0; s < samples.size(); ++s) {
        Vec sg = hep.score_gradients[s];
        for (double& x : sg) x *= hp_.beta;
        head_->backward(feature(source[s]), sg, r.head_grad, grads[source[s]]);
      }
    } else {
      std::vector<CenterSample> samples;
      std::vector<std::size_t> source;
      for (std::size_t i = 0; i < n; ++i) {
        if (label(i) < 0) continue;
        samples.push_back({feature(i).vec(), label(i)});
        source.push_back(i);
      }
      if (!samples.empty()) {
        const C2hepResult c2 = c2hep_loss(samples, *r.pool, centers_, hp_.lambda, tp_.hep_norm);
        id_loss = c2.loss;
        for (std::size_t s = 0; s < samples.size(); ++s) axpy(hp_.beta, c2.feature_gradients[s], grads[source[s]]);
      }
    }
  }

  for (std::size_t i = 0; i < n; ++i) {
    if (std::all_of(grads[i].begin(), grads[i].end(), [](double g) { return g == 0.0; })) continue;
    encoder_.backward(r.proposals[i].trace, grads[i], r.encoder_grad);
  }
  r.loss = combined_loss(0.0, metric, id_loss, hp_);
  return r;
}

void Trainer::apply(const ObjectiveResult& result, double lr) {
  auto sgd = [&](Vec& params, Vec& velocity, const Vec& grad) {
    for (std::size_t i = 0; i < params.size(); ++i) {
      velocity[i] = tp_.momentum * velocity[i] + grad[i];
      params[i] -= lr * velocity[i];
    }
  };
  sgd(encoder_.mutable_params(), encoder_velocity_, result.encoder_grad);
  if (head_) sgd(head_->mutable_params(), head_velocity_, result.head_grad);

  // Features enter the stores only after the loss that used the old stores.
  if (uses_dictionary()) {
    for (const auto& p : result.proposals) {
      if (p.label >= kUnlabeled) dictionary_.push(p.trace.feature, p.label);
    }
  }
  if (uses_centers()) {
    for (const auto& p : result.proposals) {
      if (p.label < 0) continue;
      if (centers_.update(p.label, p.trace.feature) == CenterUpdate::kDegenerate) ++degenerate_updates_;
    }
  }
}

const TrainLogRow& Trainer::step() {
  const double lr = tp_.lr_at(iteration_);
  const IterationPlan p = plan();
  const ObjectiveResult r = objective(p);
  TrainLogRow row;
  row.iteration = iteration_;
  row.loss = r.loss;
  row.pool_size = r.pool ? r.pool->size() : 0;
  row.lr = lr;
  if (!std::isfinite(r.loss.total)) {
    row.dictionary_size = dictionary_.size();
    log_.push_back(row);
    throw Error(Errc::kDivergenceDetected, "non-finite loss at iteration " + std::to_string(iteration_));
  }
  apply(r, lr);
  row.dictionary_size = dictionary_.size();
  log_.push_back(row);
  ++iteration_;
  return log_.back();
}

void Trainer::run() {
  while (iteration_ < tp_.iters) step();
}

void Trainer::write_log_csv(std::ostream& out) const {
  out << "iteration,olp_loss,id_loss,total,dictionary_size,pool_size,lr\n";
  for (const auto& row : log_) {
    out << row.iteration << ',' << textio::fixed(row.loss.olp, 9) << ','
        << textio::fixed(row.loss.id_loss, 9) << ',' << textio::fixed(row.loss.total, 9) << ','
        << row.dictionary_size << ',' << row.pool_size << ',' << textio::fixed(row.lr, 6) << '\n';
  }
}

void Trainer::save_checkpoint(std::ostream& out) const {
  out << kCheckpointMagic << '\n' << "iteration " << iteration_ << '\n';
  encoder_.write(out);
  if (head_) {
    head_->write(out);
  } else {
    out << "head none\n";
  }
  dictionary_.write_snapshot(out);
  centers_.write_snapshot(out);
}

void Trainer::load_checkpoint(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || textio::trim(line) != kCheckpointMagic) {
    throw Error(Errc::kFormatError, "missing PSCKPT1 header");
  }
  const auto iteration = static_cast<int>(textio::parse_int(textio::expect_key(in, "iteration")));
  Encoder enc = Encoder::read(in);
  if (enc.in_dim() != encoder_.in_dim() || enc.out_dim() != encoder_.out_dim() ||
      enc.hidden() != encoder_.hidden()) {
    throw Error(Errc::kFormatError, "checkpoint encoder shape differs");
  }
  std::optional<ClassifierHead> head;
  const std::streampos mark = in.tellg();
  std::getline(in, line);
  if (textio::trim(line) != "head none") {
    in.seekg(mark);
    head = ClassifierHead::read(in);
  }
  if (head.has_value() != head_.has_value()) throw Error(Errc::kFormatError, "checkpoint head mismatch");
  FeatureDictionary dict = FeatureDictionary::read_snapshot(in);
  ClassCenterTable centers = ClassCenterTable::read_snapshot(in);
  if (centers.num_classes() != centers_.num_classes()) {
    throw Error(Errc::kFormatError, "checkpoint class count differs");
  }
  encoder_ = std::move(enc);
  head_ = std::move(head);
  dictionary_ = std::move(dict);
  centers_ = std::move(centers);
  iteration_ = iteration;
  encoder_velocity_.assign(encoder_.params().size(), 0.0);
  if (head_) head_velocity_.assign(head_->params().size(), 0.0);
}

}  // namespace psearch
