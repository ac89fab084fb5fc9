#include "psearch/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>

#include "psearch/error.hpp"
#include "psearch/textio.hpp"

namespace psearch {

namespace {

Vec gaussian(int n, double scale, Rng& rng) {
  Vec v(n);
  for (double& x : v) x = scale * rng.normal();
  return v;
}

void check_distinct(const std::vector<Vec>& protos) {
  for (std::size_t i = 0; i < protos.size(); ++i) {
    for (std::size_t j = i + 1; j < protos.size(); ++j) {
      if (dot(protos[i], protos[j]) > 1.0 - 1e-9) {
        throw Error(Errc::kInvalidParams, "prototypes " + std::to_string(i) + " and " +
                                              std::to_string(j) + " coincide");
      }
    }
  }
}

}  // namespace

void WorldParams::validate() const {
  auto fail = [](const std::string& what) { throw Error(Errc::kInvalidParams, what); };
  if (num_identities < 2) fail("need at least two identities");
  if (test_identities < 1) fail("need at least one test identity");
  if (latent_dim < 2 || obs_dim < 2) fail("dimensions must be >= 2");
  if (!(sigma_view >= 0) || !(sigma_noise >= 0)) fail("noise levels must be >= 0");
  if (!(unlabeled_fraction >= 0 && unlabeled_fraction <= 1)) fail("unlabeled_fraction in [0,1]");
  if (!(background_fraction >= 0 && background_fraction < 1)) fail("background_fraction in [0,1)");
  if (family_size < 1) fail("family_size must be >= 1");
  if (!(family_spread > 0)) fail("family_spread must be > 0");
  if (view_rank < 0) fail("view_rank must be >= 0");
  if (family_rank < 1 || detail_rank < 1) fail("family_rank and detail_rank must be >= 1");
  if (ids_per_image < 1) fail("ids_per_image must be >= 1");
  if (shared_ids < 1 || shared_ids > ids_per_image) fail("shared_ids must lie in [1, ids_per_image]");
  if (2 * ids_per_image - shared_ids > num_identities) fail("too few identities for one image pair");
}

SyntheticWorld::SyntheticWorld(WorldParams params, std::uint64_t seed) : params_(params) {
  params_.validate();
  Rng rng(seed);
  const int L = params_.latent_dim;

  // Random orthonormal latent basis, split into camera, family and detail
  // blocks. Too small a latent space falls back to isotropic identities.
  std::vector<Vec> basis;
  while (static_cast<int>(basis.size()) < L) {
    Vec v = gaussian(L, 1.0, rng);
    for (int pass = 0; pass < 2; ++pass) {
      for (const auto& b : basis) axpy(-dot(v, b), b, v);
    }
    const double nv = norm2(v);
    if (nv < 1e-6) continue;
    for (double& x : v) x /= nv;
    basis.push_back(std::move(v));
  }
  const int view = std::clamp(params_.view_rank, 0, L - 1);
  view_basis_.assign(basis.begin(), basis.begin() + view);
  if (view + params_.family_rank + params_.detail_rank <= L) {
    family_basis_.assign(basis.begin() + view, basis.begin() + view + params_.family_rank);
    detail_basis_.assign(basis.begin() + view + params_.family_rank,
                         basis.begin() + view + params_.family_rank + params_.detail_rank);
  } else {
    family_basis_ = basis;
    detail_basis_ = basis;
  }

  const int families =
      std::max(1, (params_.num_identities + params_.family_size - 1) / params_.family_size);
  for (int f = 0; f < families; ++f) family_centers_.push_back(in_span(family_basis_, 1.0, rng));
  for (auto& c : family_centers_) {
    const double nc = norm2(c);
    for (double& x : c) x /= nc;
  }
  for (int i = 0; i < params_.num_identities; ++i) {
    prototypes_.push_back(family_member(i % families, rng));
  }
  for (int i = 0; i < params_.test_identities; ++i) {
    test_prototypes_.push_back(family_member(i % families, rng));
  }
  check_distinct(prototypes_);
  check_distinct(test_prototypes_);

  lift_ = gaussian(params_.obs_dim * L, 1.0 / std::sqrt(static_cast<double>(L)), rng);
}

Vec SyntheticWorld::in_span(const std::vector<Vec>& basis, double scale, Rng& rng) const {
  Vec v(params_.latent_dim, 0.0);
  if (basis.empty()) return v;
  const double s = scale / std::sqrt(static_cast<double>(basis.size()));
  for (const auto& b : basis) axpy(s * rng.normal(), b, v);
  return v;
}

Vec SyntheticWorld::family_member(int family, Rng& rng) const {
  Vec v = family_centers_[family];
  axpy(1.0, in_span(detail_basis_, params_.family_spread, rng), v);
  const double nv = norm2(v);
  for (double& x : v) x /= nv;
  return v;
}

Vec SyntheticWorld::lift(const Vec& latent) const {
  const int L = params_.latent_dim;
  Vec obs(params_.obs_dim);
  for (int r = 0; r < params_.obs_dim; ++r) {
    obs[r] = dot(std::span<const double>(lift_).subspan(static_cast<std::size_t>(r) * L, L), latent);
  }
  return obs;
}

Vec SyntheticWorld::camera_offset(Rng& rng) const { return in_span(view_basis_, 1.0, rng); }

Vec SyntheticWorld::stranger(Rng& rng) const {
  return family_member(static_cast<int>(rng.below(family_centers_.size())), rng);
}

Vec SyntheticWorld::observe_person(const Vec& prototype, const Vec& camera, Rng& rng) const {
  const int L = params_.latent_dim;
  Vec latent = prototype;
  axpy(params_.sigma_view, camera, latent);
  axpy(params_.sigma_noise / std::sqrt(static_cast<double>(L)), gaussian(L, 1.0, rng), latent);
  return lift(latent);
}

Vec SyntheticWorld::observe_background(Rng& rng) const {
  const int L = params_.latent_dim;
  return lift(gaussian(L, 1.0 / std::sqrt(static_cast<double>(L)), rng));
}

SyntheticWorld generate_world(const WorldParams& params, std::uint64_t seed) {
  return SyntheticWorld(params, seed);
}

namespace {

SceneImage render_image(const SyntheticWorld& world, const std::vector<Label>& ids,
                        int proposals, Rng& rng) {
  const auto& p = world.params();
  SceneImage img;
  img.camera_offset = world.camera_offset(rng);
  const int backgrounds =
      std::min(proposals - 1, static_cast<int>(std::lround(p.background_fraction * proposals)));
  const int persons = proposals - backgrounds;
  const int unlabeled = std::min(persons - 1, static_cast<int>(std::lround(p.unlabeled_fraction * persons)));
  const int labeled_slots = persons - unlabeled;
  const int n_ids = std::min<int>(labeled_slots, static_cast<int>(ids.size()));
  for (int s = 0; s < labeled_slots; ++s) {
    const Label id = ids[s % n_ids];
    img.proposals.push_back({world.observe_person(world.prototypes()[id], img.camera_offset, rng), id});
  }
  for (int s = 0; s < unlabeled; ++s) {
    img.proposals.push_back({world.observe_person(world.stranger(rng), img.camera_offset, rng), kUnlabeled});
  }
  for (int s = 0; s < backgrounds; ++s) {
    img.proposals.push_back({world.observe_background(rng), kBackground});
  }
  return img;
}

}  // namespace

std::pair<SceneImage, SceneImage> sample_image_pair(const SyntheticWorld& world,
                                                    int proposals_per_image, Rng& rng) {
  if (proposals_per_image < 1) throw Error(Errc::kInvalidParams, "proposals_per_image must be >= 1");
  const auto& p = world.params();
  const auto picks = rng.sample_distinct(p.num_identities, 2 * p.ids_per_image - p.shared_ids);
  // Shared identities lead both lists so they get proposals even when slots
  // are scarce.
  std::vector<Label> a(picks.begin(), picks.begin() + p.ids_per_image);
  std::vector<Label> b(picks.begin(), picks.begin() + p.shared_ids);
  b.insert(b.end(), picks.begin() + p.ids_per_image, picks.end());
  SceneImage first = render_image(world, a, proposals_per_image, rng);
  SceneImage second = render_image(world, b, proposals_per_image, rng);
  return {std::move(first), std::move(second)};
}

EvalScene sample_eval_scene(const SyntheticWorld& world, const EvalParams& params, Rng& rng) {
  if (params.views_per_identity < 2) throw Error(Errc::kInvalidParams, "need >= 2 views per identity");
  if (params.distractors < 0) throw Error(Errc::kInvalidParams, "negative distractor count");
  EvalScene scene;
  const auto& protos = world.test_prototypes();
  for (std::size_t id = 0; id < protos.size(); ++id) {
    for (int v = 0; v < params.views_per_identity; ++v) {
      Vec obs = world.observe_person(protos[id], world.camera_offset(rng), rng);
      if (v == 0) {
        scene.query_obs.push_back(std::move(obs));
        scene.query_ids.push_back(static_cast<Label>(id));
      } else {
        scene.gallery_obs.push_back(std::move(obs));
        scene.gallery_ids.push_back(static_cast<Label>(id));
      }
    }
  }
  for (int d = 0; d < params.distractors; ++d) {
    scene.gallery_obs.push_back(world.observe_person(world.stranger(rng), world.camera_offset(rng), rng));
    scene.gallery_ids.push_back(kUnlabeled);
  }
  std::vector<std::size_t> order(scene.gallery_obs.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  rng.shuffle(order);
  EvalScene shuffled = scene;
  for (std::size_t i = 0; i < order.size(); ++i) {
    shuffled.gallery_obs[i] = scene.gallery_obs[order[i]];
    shuffled.gallery_ids[i] = scene.gallery_ids[order[i]];
  }
  return shuffled;
}

RetrievalSet encode_eval_scene(const EvalScene& scene, const Encoder& encoder) {
  RetrievalSet set;
  for (std::size_t i = 0; i < scene.query_obs.size(); ++i) {
    set.queries.push_back({encoder.encode(scene.query_obs[i]), scene.query_ids[i]});
  }
  for (std::size_t i = 0; i < scene.gallery_obs.size(); ++i) {
    set.gallery.push_back({encoder.encode(scene.gallery_obs[i]), scene.gallery_ids[i]});
  }
  return set;
}

// ---------------------------------------------------------------------------

Encoder::Encoder(int in_dim, int out_dim, int hidden) : in_(in_dim), out_(out_dim), hidden_(hidden) {
  if (in_dim < 1 || out_dim < 2 || hidden < 0) throw Error(Errc::kInvalidParams, "encoder shape");
  const std::size_t n = hidden == 0
                            ? static_cast<std::size_t>(out_dim) * (in_dim + 1)
                            : static_cast<std::size_t>(hidden) * (in_dim + 1) +
                                  static_cast<std::size_t>(out_dim) * (hidden + 1);
  params_.assign(n, 0.0);
}

Encoder::Encoder(int in_dim, int out_dim, int hidden, Rng& rng, double init_scale)
    : Encoder(in_dim, out_dim, hidden) {
  if (!(init_scale > 0)) throw Error(Errc::kInvalidParams, "init_scale must be > 0");
  auto fill = [&](std::size_t offset, int rows, int cols) {
    const double s = init_scale / std::sqrt(static_cast<double>(cols));
    for (std::size_t i = 0; i < static_cast<std::size_t>(rows) * cols; ++i) {
      params_[offset + i] = s * rng.normal();
    }
  };
  if (hidden_ == 0) {
    fill(0, out_, in_);
  } else {
    fill(0, hidden_, in_);
    fill(static_cast<std::size_t>(hidden_) * (in_ + 1), out_, hidden_);
  }
}

namespace {

// y = W x + b with W (rows x cols) at params[offset], b right after it.
void affine(std::span<const double> params, std::size_t offset, int rows, int cols,
            std::span<const double> x, Vec& y) {
  y.resize(rows);
  const std::size_t bias = offset + static_cast<std::size_t>(rows) * cols;
  for (int r = 0; r < rows; ++r) {
    y[r] = dot(params.subspan(offset + static_cast<std::size_t>(r) * cols, cols), x) + params[bias + r];
  }
}

void affine_backward(std::span<const double> params, std::size_t offset, int rows, int cols,
                     std::span<const double> x, std::span<const double> dy, std::span<double> grad,
                     Vec* dx) {
  const std::size_t bias = offset + static_cast<std::size_t>(rows) * cols;
  if (dx) dx->assign(cols, 0.0);
  for (int r = 0; r < rows; ++r) {
    if (dy[r] == 0.0) continue;
    const std::size_t row = offset + static_cast<std::size_t>(r) * cols;
    axpy(dy[r], x, grad.subspan(row, cols));
    grad[bias + r] += dy[r];
    if (dx) axpy(dy[r], params.subspan(row, cols), *dx);
  }
}

}  // namespace

Encoder::Trace Encoder::forward(std::span<const double> obs) const {
  if (static_cast<int>(obs.size()) != in_) throw Error(Errc::kDimensionMismatch, "encoder input");
  Trace t;
  t.input.assign(obs.begin(), obs.end());
  if (hidden_ == 0) {
    affine(params_, 0, out_, in_, obs, t.raw);
  } else {
    affine(params_, 0, hidden_, in_, obs, t.hidden);
    for (double& h : t.hidden) h = std::tanh(h);
    affine(params_, static_cast<std::size_t>(hidden_) * (in_ + 1), out_, hidden_, t.hidden, t.raw);
  }
  t.raw_norm = norm2(t.raw);
  t.feature = Embedding::normalized(t.raw);
  return t;
}

void Encoder::backward(const Trace& t, std::span<const double> feature_grad,
                       std::span<double> param_grad) const {
  if (param_grad.size() != params_.size()) throw Error(Errc::kDimensionMismatch, "encoder grad");
  // Jacobian of v -> v/|v| is (I - f f^T)/|v|.
  const double along = dot(t.feature.values(), feature_grad);
  Vec draw(out_);
  for (int i = 0; i < out_; ++i) draw[i] = (feature_grad[i] - along * t.feature[i]) / t.raw_norm;
  if (hidden_ == 0) {
    affine_backward(params_, 0, out_, in_, t.input, draw, param_grad, nullptr);
    return;
  }
  Vec dh;
  affine_backward(params_, static_cast<std::size_t>(hidden_) * (in_ + 1), out_, hidden_, t.hidden,
                  draw, param_grad, &dh);
  for (int i = 0; i < hidden_; ++i) dh[i] *= 1.0 - t.hidden[i] * t.hidden[i];
  affine_backward(params_, 0, hidden_, in_, t.input, dh, param_grad, nullptr);
}

namespace {

void write_vec(std::ostream& out, const Vec& v) {
  out << "params " << v.size();
  for (double x : v) out << ' ' << textio::exact(x);
  out << '\n';
}

Vec read_vec(std::istream& in, std::size_t expected) {
  std::istringstream fields(textio::expect_key(in, "params"));
  std::string tok;
  fields >> tok;
  if (static_cast<std::size_t>(textio::parse_int(tok)) != expected) {
    throw Error(Errc::kFormatError, "parameter count mismatch");
  }
  Vec v(expected);
  for (double& x : v) {
    if (!(fields >> tok)) throw Error(Errc::kFormatError, "truncated parameters");
    x = textio::parse_double(tok);
  }
  return v;
}

}  // namespace

void Encoder::write(std::ostream& out) const {
  out << "encoder " << in_ << ' ' << out_ << ' ' << hidden_ << '\n';
  write_vec(out, params_);
}

Encoder Encoder::read(std::istream& in) {
  std::istringstream shape(textio::expect_key(in, "encoder"));
  int i = 0, o = 0, h = 0;
  if (!(shape >> i >> o >> h)) throw Error(Errc::kFormatError, "bad encoder shape");
  Encoder e(i, o, h);
  e.params_ = read_vec(in, e.params_.size());
  return e;
}

ClassifierHead::ClassifierHead(int classes, int dim)
    : classes_(classes), dim_(dim), params_(static_cast<std::size_t>(classes) * (dim + 1), 0.0) {
  if (classes < 2 || dim < 1) throw Error(Errc::kInvalidParams, "classifier shape");
}

Vec ClassifierHead::scores(const Embedding& f) const {
  Vec s;
  affine(params_, 0, classes_, dim_, f.values(), s);
  return s;
}

void ClassifierHead::backward(const Embedding& f, std::span<const double> score_grad,
                              std::span<double> param_grad, std::span<double> feature_grad) const {
  Vec df;
  affine_backward(params_, 0, classes_, dim_, f.values(), score_grad, param_grad, &df);
  axpy(1.0, df, feature_grad);
}

void ClassifierHead::write(std::ostream& out) const {
  out << "head " << classes_ << ' ' << dim_ << '\n';
  write_vec(out, params_);
}

ClassifierHead ClassifierHead::read(std::istream& in) {
  std::istringstream shape(textio::expect_key(in, "head"));
  int c = 0, d = 0;
  if (!(shape >> c >> d)) throw Error(Errc::kFormatError, "bad head shape");
  ClassifierHead h(c, d);
  h.params_ = read_vec(in, h.params_.size());
  return h;
}

}  // namespace psearch
