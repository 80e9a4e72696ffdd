#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "pmseg/checkpoint.hpp"
#include "pmseg/dataset.hpp"
#include "pmseg/report.hpp"
#include "pmseg/train.hpp"

namespace pmseg {

/// Training budget shared by the CLI and experiment grids. The defaults are
/// sized so a run on the default synthetic corpus takes about 3.5 CPU-minutes.
struct RunSettings {
  std::size_t levels = 2;
  std::size_t base_channels = 8;
  std::size_t batch_size = 15;
  double foreground_fraction = 0.5;
  std::size_t max_steps = 600;
  std::size_t plateau_window = 100;
  double plateau_tolerance = 1e-3;
  double learning_rate = 1e-3;
  double fallback_learning_rate = 1e-4;
  std::size_t eval_every = 0;

  void validate() const;
};

RunSettings parse_run_settings(std::string_view json_object, RunSettings base = {});
std::string run_settings_to_json(const RunSettings& s);

struct ClassifierSpec {
  ClassifierType type = ClassifierType::Generic;
  /// Required for specific classifiers; ignored for generic ones.
  std::string source;
  std::string loss = "xent_or";
  /// Train on foreground-bearing images only.
  bool exclude_empty = false;

  /// Label used in reports, e.g. "dice_soft(w/o empty)".
  std::string loss_label() const;
};

struct RunOutput {
  Checkpoint checkpoint;
  std::vector<LogRow> log;
  PooledDice test;
  /// Report rows for the foreground classes (global names).
  std::vector<ReportRow> rows;
  /// Non-empty when training halted on a numerical failure.
  std::string failure;
};

/// Trains one classifier on `corpus` after shrinking its training split to
/// `shrink_percent` (subject order fixed by subset_seed) and evaluates it on
/// the test split. Specific classifiers see only their source, in its local
/// label space, with every class trusted.
RunOutput run_classifier(const Corpus& corpus, const ClassifierSpec& spec, const RunSettings& settings,
                         double shrink_percent, std::uint64_t run_seed, std::uint64_t subset_seed);

/// Local class names for a specific classifier of `source`.
std::vector<std::string> specific_class_names(const DatasetManifest& manifest, const std::string& source);

struct ExperimentPlan {
  std::filesystem::path corpus;
  std::filesystem::path output;
  std::uint64_t seed = 0;
  std::size_t replicates = 1;
  std::vector<ClassifierSpec> roster;
  std::vector<double> shrink_levels{80.0};
  RunSettings settings;

  std::size_t cell_count() const { return roster.size() * shrink_levels.size() * replicates; }
  /// Throws ConfigError for unknown losses or a specific classifier without
  /// exactly one source.
  void validate() const;
};

/// Paths in the plan are resolved relative to `base_dir`.
ExperimentPlan parse_experiment_plan(std::string_view json, const std::filesystem::path& base_dir = {});

struct Cell {
  std::size_t index = 0;
  std::size_t roster_index = 0;
  double shrink_percent = 80.0;
  std::size_t replicate = 0;
  std::uint64_t seed = 0;
  std::uint64_t subset_seed = 0;
};

/// Cells in roster-major, then shrink, then replicate order. Cell i trains
/// under derive_seed(plan seed, i); every replicate shares one subset seed
/// across shrink levels and classifiers.
std::vector<Cell> plan_cells(const ExperimentPlan& plan);

/// Throws ConfigError unless the subsets of every replicate are nested
/// across the plan's shrink levels.
void verify_nested_subsets(const Corpus& corpus, const ExperimentPlan& plan);

struct ExperimentResult {
  std::vector<ReportRow> rows;
  /// Cell index and message for every failed cell.
  std::vector<std::pair<std::size_t, std::string>> failures;
};

/// Runs the grid on `workers` threads (results never depend on the count),
/// writes report.csv, summary.json and cells/<i>/{checkpoint,log.csv} under
/// plan.output.
ExperimentResult run_experiment(const ExperimentPlan& plan, std::size_t workers = 1);

/// PMSEG_WORKERS, or 1 when unset.
std::size_t workers_from_env();

}  // namespace pmseg
