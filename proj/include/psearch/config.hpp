#ifndef PSEARCH_CONFIG_HPP_
#define PSEARCH_CONFIG_HPP_

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "psearch/dictionaries.hpp"
#include "psearch/simulator.hpp"
#include "psearch/trainer.hpp"

namespace psearch {

struct ExperimentConfig {
  std::uint64_t seed = 1;
  WorldParams world;
  TrainerParams trainer;
  HyperParams hp;
  LossChoice loss_choice = LossChoice::kOlpC2hep;
  int feature_dim = 256;
  int encoder_hidden = 0;
  double encoder_init_scale = 0.1;
  EvalParams eval;
  std::vector<std::size_t> gallery_sizes;  // empty: the full gallery only
  std::string output_dir = "out";

  friend bool operator==(const ExperimentConfig&, const ExperimentConfig&);
};

// Flat "key = value" text, one key per line, '#' starts a comment.
// Later assignments win. Unknown keys and bad values raise kConfigError
// naming the key.
void apply_config_text(ExperimentConfig& cfg, const std::string& text);
void apply_config_file(ExperimentConfig& cfg, const std::string& path);
void set_config_value(ExperimentConfig& cfg, const std::string& key, const std::string& value);
std::string get_config_value(const ExperimentConfig& cfg, const std::string& key);
const std::vector<std::string>& config_keys();

// Every key in config_keys() order; parses back to an equal config.
std::string emit_config(const ExperimentConfig& cfg);
// FNV-1a over emit_config without output_dir, as 16 hex digits.
std::string config_hash(const ExperimentConfig& cfg);

// Cross-field checks; throws kConfigError naming the offending field.
void validate_config(const ExperimentConfig& cfg);

}  // namespace psearch

#endif  // PSEARCH_CONFIG_HPP_
