#ifndef PSEARCH_EXPERIMENT_HPP_
#define PSEARCH_EXPERIMENT_HPP_

#include <string>
#include <vector>

#include "psearch/config.hpp"
#include "psearch/eval.hpp"

namespace psearch {

struct RunOutcome {
  std::string train_csv;
  std::string eval_csv;   // gallery_size,mAP,top1,top5,top10
  std::string pr_csv;     // recall,precision at the full gallery
  std::string checkpoint;
  RetrievalMetrics full;  // metrics at the full gallery
  std::vector<GallerySweepRow> sweep;
  double first_window_loss = 0;  // mean total loss, first 50 iterations
  double last_window_loss = 0;   // mean total loss, last 50 iterations
};

// World, encoder, training and evaluation streams are all derived from
// cfg.seed, so the same config always reproduces the same bytes.
RunOutcome run_experiment(const ExperimentConfig& cfg);

enum class AblationKind { kDictSize, kPriorityT, kLossWeights, kInputCount, kGallerySize, kLossChoice };

std::string to_string(AblationKind kind);
AblationKind parse_ablation_kind(const std::string& name);  // throws kConfigError
const std::vector<AblationKind>& all_ablation_kinds();

struct AblationPoint {
  std::string param;
  std::string value;
  ExperimentConfig config;
};

// Sweep points with the default grids, all sharing the base seed.
std::vector<AblationPoint> ablation_points(AblationKind kind, const ExperimentConfig& base);

// CSV: kind,param,value,mAP,top1,top5,top10,config_hash
std::string run_ablation(AblationKind kind, const ExperimentConfig& base);

// Writes train.csv, eval.csv, pr.csv, checkpoint.psckpt and config-echo.txt
// to cfg.output_dir. Nothing is written if the config is invalid.
RunOutcome run_to_directory(const ExperimentConfig& cfg);

void write_file(const std::string& dir, const std::string& name, const std::string& content);

}  // namespace psearch

#endif  // PSEARCH_EXPERIMENT_HPP_
