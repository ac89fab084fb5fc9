#include "psearch/experiment.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "psearch/error.hpp"
#include "psearch/simulator.hpp"
#include "psearch/textio.hpp"
#include "psearch/trainer.hpp"

namespace psearch {

namespace {

// Sub-stream ids for mix_seed.
enum Stream : std::uint64_t { kWorld = 1, kEncoderInit = 2, kTraining = 3, kEvalScene = 4, kSweep = 5 };

double window_mean(const std::vector<TrainLogRow>& log, std::size_t begin, std::size_t end) {
  if (begin >= end) return 0;
  double s = 0;
  for (std::size_t i = begin; i < end; ++i) s += log[i].loss.total;
  return s / static_cast<double>(end - begin);
}

std::string metrics_columns(const RetrievalMetrics& m) {
  return textio::fixed(m.map, 6) + ',' + textio::fixed(m.top1, 6) + ',' + textio::fixed(m.top5, 6) +
         ',' + textio::fixed(m.top10, 6);
}

struct NamedKind {
  AblationKind kind;
  const char* name;
};

constexpr NamedKind kKinds[] = {
    {AblationKind::kDictSize, "dict-size"},       {AblationKind::kPriorityT, "priority-T"},
    {AblationKind::kLossWeights, "loss-weights"}, {AblationKind::kInputCount, "input-count"},
    {AblationKind::kGallerySize, "gallery-size"}, {AblationKind::kLossChoice, "loss-choice"},
};

std::vector<std::size_t> default_gallery_grid(const ExperimentConfig& cfg) {
  if (!cfg.gallery_sizes.empty()) return cfg.gallery_sizes;
  const std::size_t relevant =
      static_cast<std::size_t>(cfg.world.test_identities) * (cfg.eval.views_per_identity - 1);
  const std::size_t d = static_cast<std::size_t>(cfg.eval.distractors);
  std::vector<std::size_t> sizes;
  for (std::size_t q = 0; q <= 4; ++q) {
    const std::size_t s = relevant + d * q / 4;
    if (sizes.empty() || sizes.back() != s) sizes.push_back(s);
  }
  return sizes;
}

}  // namespace

RunOutcome run_experiment(const ExperimentConfig& cfg) {
  validate_config(cfg);
  const SyntheticWorld world = generate_world(cfg.world, mix_seed(cfg.seed, kWorld));
  Rng init(mix_seed(cfg.seed, kEncoderInit));
  Encoder encoder(cfg.world.obs_dim, cfg.feature_dim, cfg.encoder_hidden, init, cfg.encoder_init_scale);
  Trainer trainer(world, std::move(encoder), cfg.hp, cfg.trainer, cfg.loss_choice,
                  mix_seed(cfg.seed, kTraining));
  trainer.run();

  RunOutcome out;
  std::ostringstream train_csv;
  trainer.write_log_csv(train_csv);
  out.train_csv = train_csv.str();
  std::ostringstream ckpt;
  trainer.save_checkpoint(ckpt);
  out.checkpoint = ckpt.str();
  const auto& log = trainer.log();
  const std::size_t w = std::min<std::size_t>(50, log.size());
  out.first_window_loss = window_mean(log, 0, w);
  out.last_window_loss = window_mean(log, log.size() - w, log.size());

  Rng scene_rng(mix_seed(cfg.seed, kEvalScene));
  const EvalScene scene = sample_eval_scene(world, cfg.eval, scene_rng);
  const RetrievalSet set = encode_eval_scene(scene, trainer.encoder());
  out.full = evaluate(set);
  std::vector<std::size_t> sizes = cfg.gallery_sizes;
  if (sizes.empty()) sizes.push_back(set.gallery.size());
  Rng sweep_rng(mix_seed(cfg.seed, kSweep));
  out.sweep = gallery_sweep(set, sizes, sweep_rng);
  std::ostringstream eval_csv;
  write_gallery_csv(eval_csv, out.sweep);
  out.eval_csv = eval_csv.str();
  std::ostringstream pr_csv;
  write_pr_csv(pr_csv, pr_curve(score_queries(set)));
  out.pr_csv = pr_csv.str();
  return out;
}

std::string to_string(AblationKind kind) {
  for (const auto& k : kKinds) {
    if (k.kind == kind) return k.name;
  }
  return "unknown";
}

AblationKind parse_ablation_kind(const std::string& name) {
  for (const auto& k : kKinds) {
    if (name == k.name) return k.kind;
  }
  throw Error(Errc::kConfigError, "ablate: unknown kind '" + name + "'");
}

const std::vector<AblationKind>& all_ablation_kinds() {
  static const std::vector<AblationKind> all = [] {
    std::vector<AblationKind> v;
    for (const auto& k : kKinds) v.push_back(k.kind);
    return v;
  }();
  return all;
}

std::vector<AblationPoint> ablation_points(AblationKind kind, const ExperimentConfig& base) {
  std::vector<AblationPoint> pts;
  auto add = [&](const std::string& param, const std::string& value) {
    ExperimentConfig c = base;
    set_config_value(c, param, value);
    pts.push_back({param, value, std::move(c)});
  };
  switch (kind) {
    case AblationKind::kDictSize:
      for (int m : {20, 40, 60}) add("dict_multiplier", std::to_string(m));
      break;
    case AblationKind::kPriorityT: {
      const int classes = base.world.num_identities;
      const int t = std::min(base.hp.pool_size, classes);
      std::vector<int> grid = {std::max(1, t / 2), t, (t + classes) / 2, classes};
      grid.erase(std::unique(grid.begin(), grid.end()), grid.end());
      for (int v : grid) add("pool_size", std::to_string(v));
      break;
    }
    case AblationKind::kLossWeights:
      for (const char* param : {"alpha", "beta"}) {
        for (const char* v : {"0.25", "0.5", "0.75", "1", "1.25", "1.5"}) {
          ExperimentConfig c = base;
          set_config_value(c, "alpha", "1");
          set_config_value(c, "beta", "1");
          set_config_value(c, param, v);
          pts.push_back({param, v, std::move(c)});
        }
      }
      break;
    case AblationKind::kInputCount:
      for (int n : {2, 4, 8}) add("images_per_iter", std::to_string(n));
      break;
    case AblationKind::kGallerySize: {
      ExperimentConfig c = base;
      c.gallery_sizes = default_gallery_grid(base);
      pts.push_back({"gallery_size", get_config_value(c, "gallery_sizes"), std::move(c)});
      break;
    }
    case AblationKind::kLossChoice:
      for (LossChoice lc : all_loss_choices()) add("loss_choice", to_string(lc));
      break;
  }
  return pts;
}

std::string run_ablation(AblationKind kind, const ExperimentConfig& base) {
  const auto points = ablation_points(kind, base);
  for (const auto& p : points) validate_config(p.config);
  std::string csv = "kind,param,value,mAP,top1,top5,top10,config_hash\n";
  const std::string name = to_string(kind);
  for (const auto& p : points) {
    const RunOutcome r = run_experiment(p.config);
    const std::string hash = config_hash(p.config);
    if (kind == AblationKind::kGallerySize) {
      for (const auto& row : r.sweep) {
        csv += name + ",gallery_size," + std::to_string(row.size) + ',' + metrics_columns(row.metrics) +
               ',' + hash + '\n';
      }
    } else {
      csv += name + ',' + p.param + ',' + p.value + ',' + metrics_columns(r.full) + ',' + hash + '\n';
    }
  }
  return csv;
}

void write_file(const std::string& dir, const std::string& name, const std::string& content) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw Error(Errc::kIoError, "cannot create '" + dir + "': " + ec.message());
  const auto path = std::filesystem::path(dir) / name;
  std::ofstream out(path, std::ios::binary);
  out << content;
  if (!out) throw Error(Errc::kIoError, "cannot write '" + path.string() + "'");
}

RunOutcome run_to_directory(const ExperimentConfig& cfg) {
  validate_config(cfg);
  RunOutcome r = run_experiment(cfg);
  write_file(cfg.output_dir, "config-echo.txt", emit_config(cfg));
  write_file(cfg.output_dir, "train.csv", r.train_csv);
  write_file(cfg.output_dir, "eval.csv", r.eval_csv);
  write_file(cfg.output_dir, "pr.csv", r.pr_csv);
  write_file(cfg.output_dir, "checkpoint.psckpt", r.checkpoint);
  return r;
}

}  // namespace psearch
