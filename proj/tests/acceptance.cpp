// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fail.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "psearch/checks.hpp"
#include "psearch/config.hpp"
#include "psearch/dictionaries.hpp"
#include "psearch/experiment.hpp"
#include "psearch/losses.hpp"

using namespace psearch;

namespace {

struct Outcome {
  bool ok = false;
  std::string detail;
};

int failures = 0;

void criterion(int id, const std::string& title, double limit_s, const std::function<Outcome()>& body) {
  const auto t0 = std::chrono::steady_clock::now();
  Outcome o;
  try {
    o = body();
  } catch (const std::exception& e) {
    o = {false, std::string("exception: ") + e.what()};
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  const bool in_time = secs < limit_s;
  const bool ok = o.ok && in_time;
  if (!ok) ++failures;
  char timing[64];
  std::snprintf(timing, sizeof timing, "%.1fs / %.0fs", secs, limit_s);
  std::cout << (ok ? "PASS" : "FAIL") << "  [" << id << "] " << title << "  (" << o.detail << "; " << timing
            << (in_time ? "" : " OVER TIME") << ")" << std::endl;
}

std::string num(double x, int prec = 4) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.*f", prec, x);
  return buf;
}

ExperimentConfig base_config() {
  ExperimentConfig c;
  apply_config_file(c, std::string(PSEARCH_CONFIG_DIR) + "/acceptance.cfg");
  c.output_dir = (std::filesystem::temp_directory_path() / "psearch_acceptance").string();
  validate_config(c);
  return c;
}

ExperimentConfig variant(const ExperimentConfig& base, LossChoice choice, int images) {
  ExperimentConfig c = base;
  c.loss_choice = choice;
  c.trainer.images_per_iter = images;
  return c;
}

// Every CSV produced, keyed by a run label, for the determinism rerun.
std::map<std::string, std::string> produced;

RunOutcome run(const std::string& label, const ExperimentConfig& cfg) {
  RunOutcome r = run_experiment(cfg);
  produced[label + "/train.csv"] = r.train_csv;
  produced[label + "/eval.csv"] = r.eval_csv;
  produced[label + "/pr.csv"] = r.pr_csv;
  std::cout << "      " << label << ": mAP " << num(r.full.map) << ", top-1 " << num(r.full.top1) << std::endl;
  return r;
}

std::vector<std::vector<std::string>> parse_csv(const std::string& text) {
  std::vector<std::vector<std::string>> rows;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    std::vector<std::string> cells;
    std::istringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    rows.push_back(cells);
  }
  return rows;
}

}  // namespace

int main() {
  const ExperimentConfig base = base_config();
  std::cout << "world: " << PSEARCH_CONFIG_DIR << "/acceptance.cfg (hash " << config_hash(base) << ")"
            << std::endl;

  criterion(1, "OLP anchor gradient vs central differences, 100 configurations", 30, [] {
    const auto r = checks::gradient_suite(1).front();
    return Outcome{r.passed, r.detail};
  });

  criterion(2, "closed-form spot values", 1, [] {
    bool ok = true;
    std::string bad;
    auto expect = [&](const std::string& what, double got, double want, double tol) {
      if (!(std::abs(got - want) <= tol)) {
        ok = false;
        bad += what + "=" + num(got, 12) + " ";
      }
    };
    const Embedding x = l2_normalize(Vec{1, 0}), y = l2_normalize(Vec{0, 1});
    Subgroup s;
    s.anchor = x;
    s.positive = x;
    s.negatives = {&y};
    s.negative_labels = {1};
    const OlpResult olp = olp_loss(std::span<const Subgroup>(&s, 1));
    expect("olp", olp.loss, std::log1p(std::exp(-1.0)), 1e-9);
    expect("olp_g0", olp.anchor_gradients[0][0], -0.26894142, 1e-8);
    expect("olp_g1", olp.anchor_gradients[0][1], 0.26894142, 1e-8);

    const ClassifierScores sc{{2, 0}, 0};
    expect("hep", hep_loss(std::span<const ClassifierScores>(&sc, 1), PriorityPool({0, 1}, 2)).loss,
           0.12692801, 1e-8);

    ClassCenterTable table(2, 0.5);
    table.update(0, x);
    table.update(1, y);
    const CenterSample cs{{1, 0}, 0};
    expect("c2hep", c2hep_loss(std::span<const CenterSample>(&cs, 1), PriorityPool({0, 1}, 2), table, 10).loss,
           std::log1p(std::exp(-10.0)), 1e-12);

    table.update(0, y);
    expect("center0", table.center(0)[0], std::sqrt(2.0) / 2, 1e-9);
    expect("center1", table.center(0)[1], std::sqrt(2.0) / 2, 1e-9);
    return Outcome{ok, ok ? "olp, gradient, hep, c2hep, center update within tolerance" : bad};
  });

  criterion(3, "AP/CMC fast path equals brute force on all patterns, gallery <= 6", 30, [] {
    const auto r = checks::oracle_suite(6);
    std::string d;
    for (const auto& c : r) d += c.name + ": " + c.detail + "; ";
    return Outcome{checks::all_passed(r), d.substr(0, d.size() - 2)};
  });

  criterion(4, "invariant suites, 1000 randomized trials each", 60, [] {
    const auto r = checks::invariant_suite(1, 1000);
    std::string d;
    for (const auto& c : r) {
      if (!c.passed) d += "failed: " + c.name + " ";
    }
    return Outcome{checks::all_passed(r), d.empty() ? std::to_string(r.size()) + " suites passed" : d};
  });

  criterion(5, "stagnation: contrastive needs more images, OLP+C2HEP does not", 300, [&] {
    const double o2 = run("olp+c2hep@2", variant(base, LossChoice::kOlpC2hep, 2)).full.map;
    const double o8 = run("olp+c2hep@8", variant(base, LossChoice::kOlpC2hep, 8)).full.map;
    const double c2 = run("contrastive@2", variant(base, LossChoice::kContrastive, 2)).full.map;
    const double c8 = run("contrastive@8", variant(base, LossChoice::kContrastive, 8)).full.map;
    const bool a = o2 >= 0.9 * o8, b = c2 <= c8 - 0.10, c = o2 - c2 >= 0.15;
    return Outcome{a && b && c, std::string("(a) ") + num(o2) + " vs 0.9*" + num(o8) + (a ? " ok" : " NO") +
                                    ", (b) " + num(c8 - c2) + " gain" + (b ? " ok" : " NO") + ", (c) " +
                                    num(o2 - c2) + " margin" + (c ? " ok" : " NO")};
  });

  criterion(6, "joint-loss ordering at 2 images", 900, [&] {
    const double full = run("olp+c2hep", variant(base, LossChoice::kOlpC2hep, 2)).full.map;
    const double olp = run("olp", variant(base, LossChoice::kOlpOnly, 2)).full.map;
    const double c2 = run("c2hep", variant(base, LossChoice::kC2hepOnly, 2)).full.map;
    const double tri = run("triplet+hep", variant(base, LossChoice::kTripletHep, 2)).full.map;
    const bool ok = full >= olp && full >= c2 && full - tri >= 0.05;
    return Outcome{ok, "olp+c2hep " + num(full) + ", olp " + num(olp) + ", c2hep " + num(c2) + ", triplet+hep " +
                           num(tri)};
  });

  std::map<std::string, std::string> ablation_csv;
  criterion(7, "ablate emits well-formed CSVs for all six kinds; gallery sweep monotone", 1200, [&] {
    const std::map<AblationKind, std::size_t> expected_rows = {
        {AblationKind::kDictSize, 3},    {AblationKind::kPriorityT, 4},   {AblationKind::kLossWeights, 12},
        {AblationKind::kInputCount, 3},  {AblationKind::kGallerySize, 5}, {AblationKind::kLossChoice, 6}};
    bool ok = true;
    std::string notes;
    for (AblationKind k : all_ablation_kinds()) {
      const std::string csv = run_ablation(k, base);
      ablation_csv[to_string(k)] = csv;
      produced["ablate/" + to_string(k) + ".csv"] = csv;
      const auto rows = parse_csv(csv);
      bool well_formed = !rows.empty() && csv.back() == '\n' && csv.find('\r') == std::string::npos &&
                         rows[0] == std::vector<std::string>{"kind", "param", "value", "mAP", "top1", "top5",
                                                             "top10", "config_hash"} &&
                         rows.size() == expected_rows.at(k) + 1;
      for (std::size_t i = 1; well_formed && i < rows.size(); ++i) {
        well_formed = rows[i].size() == 8 && rows[i][0] == to_string(k) && rows[i][7].size() == 16;
        for (int c = 3; well_formed && c < 7; ++c) {
          const double v = std::stod(rows[i][c]);
          well_formed = v >= 0 && v <= 1;
        }
      }
      if (k == AblationKind::kGallerySize) {
        for (std::size_t i = 2; well_formed && i < rows.size(); ++i) {
          if (std::stod(rows[i][3]) > std::stod(rows[i - 1][3])) {
            ok = false;
            notes += "gallery mAP rises at " + rows[i][2] + " ";
          }
        }
      }
      if (!well_formed) {
        ok = false;
        notes += to_string(k) + " malformed ";
      }
      std::cout << csv;
    }
    return Outcome{ok, notes.empty() ? "6 kinds, default grids, gallery mAP non-increasing" : notes};
  });

  criterion(8, "determinism: reruns give byte-identical CSVs", 1200, [&] {
    std::map<std::string, std::string> first = produced;
    produced.clear();
    run("olp+c2hep@2", variant(base, LossChoice::kOlpC2hep, 2));
    run("contrastive@8", variant(base, LossChoice::kContrastive, 8));
    run("triplet+hep", variant(base, LossChoice::kTripletHep, 2));
    for (AblationKind k : {AblationKind::kGallerySize, AblationKind::kPriorityT}) {
      produced["ablate/" + to_string(k) + ".csv"] = run_ablation(k, base);
    }
    std::size_t compared = 0, differ = 0;
    for (const auto& [name, bytes] : produced) {
      const auto it = first.find(name);
      if (it == first.end()) continue;
      ++compared;
      if (it->second != bytes) ++differ;
    }
    return Outcome{compared > 0 && differ == 0,
                   std::to_string(compared) + " files compared, " + std::to_string(differ) + " differ"};
  });

  std::cout << (failures == 0 ? "all criteria passed" : std::to_string(failures) + " criteria failed") << std::endl;
  return failures == 0 ? 0 : 1;
}
