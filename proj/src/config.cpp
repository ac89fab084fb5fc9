#include "psearch/config.hpp"

#include <cstdio>
#include <fstream>
#include <functional>
#include <sstream>

#include "psearch/error.hpp"
#include "psearch/textio.hpp"

namespace psearch {

namespace {

struct Field {
  std::string key;
  std::function<std::string(const ExperimentConfig&)> get;
  std::function<void(ExperimentConfig&, const std::string&)> set;
};

std::string str(double x) { return textio::exact(x); }
std::string str(long long x) { return std::to_string(x); }

long long as_int(const std::string& key, const std::string& v) {
  try {
    return textio::parse_int(v);
  } catch (const Error&) {
    throw Error(Errc::kConfigError, key + ": expected an integer, got '" + v + "'");
  }
}

double as_double(const std::string& key, const std::string& v) {
  try {
    return textio::parse_double(v);
  } catch (const Error&) {
    throw Error(Errc::kConfigError, key + ": expected a number, got '" + v + "'");
  }
}

#define PSEARCH_INT(name, expr)                                                        \
  Field {                                                                              \
    name, [](const ExperimentConfig& c) { return str(static_cast<long long>(c.expr)); }, \
        [](ExperimentConfig& c, const std::string& v) {                                \
          c.expr = static_cast<decltype(c.expr)>(as_int(name, v));                     \
        }                                                                              \
  }
#define PSEARCH_REAL(name, expr)                                                         \
  Field {                                                                                \
    name, [](const ExperimentConfig& c) { return str(c.expr); },                         \
        [](ExperimentConfig& c, const std::string& v) { c.expr = as_double(name, v); }   \
  }

const std::vector<Field>& fields() {
  static const std::vector<Field> all = {
      Field{"seed", [](const ExperimentConfig& c) { return std::to_string(c.seed); },
            [](ExperimentConfig& c, const std::string& v) {
              const long long s = as_int("seed", v);
              if (s < 0) throw Error(Errc::kConfigError, "seed: must be >= 0");
              c.seed = static_cast<std::uint64_t>(s);
            }},
      PSEARCH_INT("num_identities", world.num_identities),
      PSEARCH_INT("test_identities", world.test_identities),
      PSEARCH_INT("latent_dim", world.latent_dim),
      PSEARCH_INT("obs_dim", world.obs_dim),
      PSEARCH_REAL("sigma_view", world.sigma_view),
      PSEARCH_REAL("sigma_noise", world.sigma_noise),
      PSEARCH_REAL("unlabeled_fraction", world.unlabeled_fraction),
      PSEARCH_REAL("background_fraction", world.background_fraction),
      PSEARCH_INT("family_size", world.family_size),
      PSEARCH_REAL("family_spread", world.family_spread),
      PSEARCH_INT("view_rank", world.view_rank),
      PSEARCH_INT("family_rank", world.family_rank),
      PSEARCH_INT("detail_rank", world.detail_rank),
      PSEARCH_INT("ids_per_image", world.ids_per_image),
      PSEARCH_INT("shared_ids", world.shared_ids),
      PSEARCH_INT("images_per_iter", trainer.images_per_iter),
      PSEARCH_INT("proposals_per_image", trainer.proposals_per_image),
      PSEARCH_INT("iters", trainer.iters),
      PSEARCH_INT("dict_multiplier", trainer.dict_multiplier),
      PSEARCH_REAL("lr_high", trainer.lr_high),
      PSEARCH_REAL("lr_low", trainer.lr_low),
      PSEARCH_REAL("lr_drop_fraction", trainer.lr_drop_fraction),
      PSEARCH_REAL("momentum", trainer.momentum),
      Field{"hep_normalization",
            [](const ExperimentConfig& c) {
              return std::string(c.trainer.hep_norm == HepNormalization::kAllSamples ? "all"
                                                                                     : "contributing");
            },
            [](ExperimentConfig& c, const std::string& v) {
              if (v == "all") {
                c.trainer.hep_norm = HepNormalization::kAllSamples;
              } else if (v == "contributing") {
                c.trainer.hep_norm = HepNormalization::kContributing;
              } else {
                throw Error(Errc::kConfigError, "hep_normalization: expected all|contributing");
              }
            }},
      PSEARCH_INT("feature_dim", feature_dim),
      PSEARCH_INT("encoder_hidden", encoder_hidden),
      PSEARCH_REAL("encoder_init_scale", encoder_init_scale),
      PSEARCH_REAL("alpha", hp.alpha),
      PSEARCH_REAL("beta", hp.beta),
      PSEARCH_REAL("lambda", hp.lambda),
      PSEARCH_REAL("phi", hp.phi),
      PSEARCH_INT("pool_size", hp.pool_size),
      PSEARCH_INT("top_negatives", hp.top_negatives),
      Field{"k_cap",
            [](const ExperimentConfig& c) { return std::to_string(c.hp.k_cap ? *c.hp.k_cap : 0); },
            [](ExperimentConfig& c, const std::string& v) {
              const long long k = as_int("k_cap", v);
              if (k < 0) throw Error(Errc::kConfigError, "k_cap: must be >= 0 (0 = unset)");
              c.hp.k_cap = k == 0 ? std::nullopt : std::optional<std::size_t>(k);
            }},
      PSEARCH_REAL("triplet_margin", hp.triplet_margin),
      PSEARCH_REAL("contrastive_margin", hp.contrastive_margin),
      Field{"loss_choice", [](const ExperimentConfig& c) { return to_string(c.loss_choice); },
            [](ExperimentConfig& c, const std::string& v) { c.loss_choice = parse_loss_choice(v); }},
      PSEARCH_INT("eval_views", eval.views_per_identity),
      PSEARCH_INT("eval_distractors", eval.distractors),
      Field{"gallery_sizes",
            [](const ExperimentConfig& c) {
              std::string s;
              for (std::size_t i = 0; i < c.gallery_sizes.size(); ++i) {
                if (i) s += ',';
                s += std::to_string(c.gallery_sizes[i]);
              }
              return s;
            },
            [](ExperimentConfig& c, const std::string& v) {
              c.gallery_sizes.clear();
              std::stringstream ss(v);
              std::string item;
              while (std::getline(ss, item, ',')) {
                if (textio::trim(item).empty()) continue;
                const long long s = as_int("gallery_sizes", std::string(textio::trim(item)));
                if (s < 1) throw Error(Errc::kConfigError, "gallery_sizes: sizes must be >= 1");
                c.gallery_sizes.push_back(static_cast<std::size_t>(s));
              }
            }},
      Field{"output_dir", [](const ExperimentConfig& c) { return c.output_dir; },
            [](ExperimentConfig& c, const std::string& v) {
              if (v.empty()) throw Error(Errc::kConfigError, "output_dir: must not be empty");
              c.output_dir = v;
            }},
  };
  return all;
}

#undef PSEARCH_INT
#undef PSEARCH_REAL

const Field& find_field(const std::string& key) {
  for (const auto& f : fields()) {
    if (f.key == key) return f;
  }
  throw Error(Errc::kConfigError, "unknown key '" + key + "'");
}

}  // namespace

bool operator==(const ExperimentConfig& a, const ExperimentConfig& b) {
  return emit_config(a) == emit_config(b);
}

const std::vector<std::string>& config_keys() {
  static const std::vector<std::string> keys = [] {
    std::vector<std::string> k;
    for (const auto& f : fields()) k.push_back(f.key);
    return k;
  }();
  return keys;
}

void set_config_value(ExperimentConfig& cfg, const std::string& key, const std::string& value) {
  find_field(key).set(cfg, std::string(textio::trim(value)));
}

std::string get_config_value(const ExperimentConfig& cfg, const std::string& key) {
  return find_field(key).get(cfg);
}

void apply_config_text(ExperimentConfig& cfg, const std::string& text) {
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    const std::string_view body = textio::trim(line);
    if (body.empty()) continue;
    const auto eq = body.find('=');
    if (eq == std::string_view::npos) {
      throw Error(Errc::kConfigError, "line " + std::to_string(lineno) + ": expected key = value");
    }
    set_config_value(cfg, std::string(textio::trim(body.substr(0, eq))),
                     std::string(textio::trim(body.substr(eq + 1))));
  }
}

void apply_config_file(ExperimentConfig& cfg, const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::kIoError, "cannot read config file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  apply_config_text(cfg, ss.str());
}

std::string emit_config(const ExperimentConfig& cfg) {
  std::string out;
  for (const auto& f : fields()) out += f.key + " = " + f.get(cfg) + "\n";
  return out;
}

std::string config_hash(const ExperimentConfig& cfg) {
  ExperimentConfig c = cfg;
  c.output_dir = "-";
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : emit_config(c)) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

void validate_config(const ExperimentConfig& cfg) {
  auto wrap = [](const char* field, const auto& fn) {
    try {
      fn();
    } catch (const Error& e) {
      throw Error(Errc::kConfigError, std::string(field) + ": " + e.what());
    }
  };
  wrap("world", [&] { cfg.world.validate(); });
  wrap("trainer", [&] { cfg.trainer.validate(); });
  wrap("hyperparams", [&] { cfg.hp.validate(); });
  if (cfg.feature_dim < 2) throw Error(Errc::kConfigError, "feature_dim: must be >= 2");
  if (cfg.encoder_hidden < 0) throw Error(Errc::kConfigError, "encoder_hidden: must be >= 0");
  if (!(cfg.encoder_init_scale > 0)) throw Error(Errc::kConfigError, "encoder_init_scale: must be > 0");
  if (cfg.eval.views_per_identity < 2) throw Error(Errc::kConfigError, "eval_views: must be >= 2");
  if (cfg.eval.distractors < 0) throw Error(Errc::kConfigError, "eval_distractors: must be >= 0");
  const std::size_t gallery =
      static_cast<std::size_t>(cfg.world.test_identities) * (cfg.eval.views_per_identity - 1) +
      static_cast<std::size_t>(cfg.eval.distractors);
  for (std::size_t s : cfg.gallery_sizes) {
    if (s > gallery) {
      throw Error(Errc::kConfigError, "gallery_sizes: " + std::to_string(s) +
                                          " exceeds the gallery of " + std::to_string(gallery));
    }
  }
}

}  // namespace psearch
