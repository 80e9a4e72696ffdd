#include "pmseg/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <fstream>
#include <map>
#include <mutex>
#include <set>
#include <thread>

#include <nlohmann/json.hpp>

#include "pmseg/corpus_io.hpp"
#include "pmseg/error.hpp"
#include "pmseg/rng.hpp"

namespace pmseg {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  f << text;
  if (!f) throw ConfigError("cannot write " + path.string());
}

std::vector<FeatureImage> features_of(const std::vector<Sample>& samples) {
  std::vector<FeatureImage> out;
  out.reserve(samples.size());
  for (const Sample& s : samples) out.push_back(s.feature);
  return out;
}

std::set<std::string> ids_of(const std::vector<Sample>& samples) {
  std::set<std::string> ids;
  for (const Sample& s : samples) ids.insert(s.id);
  return ids;
}

std::uint64_t subset_seed_for(std::uint64_t plan_seed, std::size_t replicate) {
  return derive_seed(derive_seed(plan_seed, 0x5b5e7), replicate);
}

}  // namespace

void RunSettings::validate() const {
  if (levels < 1) throw ConfigError("settings.levels must be positive");
  if (base_channels < 1) throw ConfigError("settings.base_channels must be positive");
  if (batch_size < 1) throw ConfigError("settings.batch_size must be positive");
  if (!(foreground_fraction >= 0.0 && foreground_fraction <= 1.0))
    throw ConfigError("settings.foreground_fraction must be in [0, 1]");
  if (max_steps < 1) throw ConfigError("settings.max_steps must be positive");
  if (plateau_window < 2) throw ConfigError("settings.plateau_window must be > 1");
  if (!(plateau_tolerance >= 0.0)) throw ConfigError("settings.plateau_tolerance must be >= 0");
  if (!(learning_rate > 0.0)) throw ConfigError("settings.learning_rate must be positive");
  if (!(fallback_learning_rate > 0.0)) throw ConfigError("settings.fallback_learning_rate must be positive");
}

RunSettings parse_run_settings(std::string_view text, RunSettings s) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("settings: ") + e.what());
  }
  static const std::set<std::string> known{"levels",         "base_channels",  "batch_size",
                                           "foreground_fraction", "max_steps", "plateau_window",
                                           "plateau_tolerance", "learning_rate", "fallback_learning_rate",
                                           "eval_every"};
  if (!j.is_object()) throw ConfigError("settings must be a JSON object");
  for (const auto& [key, value] : j.items())
    if (!known.contains(key)) throw ConfigError("settings: unknown field '" + key + "'");
  try {
    auto get = [&](const char* key, auto& field) {
      if (j.contains(key)) field = j.at(key).get<std::remove_reference_t<decltype(field)>>();
    };
    get("levels", s.levels);
    get("base_channels", s.base_channels);
    get("batch_size", s.batch_size);
    get("foreground_fraction", s.foreground_fraction);
    get("max_steps", s.max_steps);
    get("plateau_window", s.plateau_window);
    get("plateau_tolerance", s.plateau_tolerance);
    get("learning_rate", s.learning_rate);
    get("fallback_learning_rate", s.fallback_learning_rate);
    get("eval_every", s.eval_every);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("settings: ") + e.what());
  }
  s.validate();
  return s;
}

std::string run_settings_to_json(const RunSettings& s) {
  return json{{"levels", s.levels},
              {"base_channels", s.base_channels},
              {"batch_size", s.batch_size},
              {"foreground_fraction", s.foreground_fraction},
              {"max_steps", s.max_steps},
              {"plateau_window", s.plateau_window},
              {"plateau_tolerance", s.plateau_tolerance},
              {"learning_rate", s.learning_rate},
              {"fallback_learning_rate", s.fallback_learning_rate},
              {"eval_every", s.eval_every}}
      .dump();
}

std::string ClassifierSpec::loss_label() const { return exclude_empty ? loss + "(w/o empty)" : loss; }

std::vector<std::string> specific_class_names(const DatasetManifest& manifest, const std::string& source) {
  const ClassMapping& m = manifest.source(source);
  std::uint8_t max_local = 0;
  for (auto [local, global] : m.local_to_global) max_local = std::max(max_local, local);
  std::vector<std::string> names(max_local + 1u);
  names[0] = manifest.class_names.at(0);
  for (auto [local, global] : m.local_to_global) names[local] = manifest.class_names.at(global);
  for (std::size_t i = 1; i < names.size(); ++i)
    if (names[i].empty()) throw ConfigError("source '" + source + "' leaves local class " + std::to_string(i) + " unmapped");
  return names;
}

RunOutput run_classifier(const Corpus& corpus, const ClassifierSpec& spec, const RunSettings& settings,
                         double shrink_percent, std::uint64_t run_seed, std::uint64_t subset_seed) {
  settings.validate();
  const std::vector<Sample> subset = shrink_dataset(corpus.train, shrink_percent, subset_seed);

  std::vector<Sample> train_samples, test_samples;
  std::vector<std::string> names;
  std::vector<std::set<std::string>> class_sources;
  if (spec.type == ClassifierType::Specific) {
    if (spec.source.empty()) throw ConfigError("specific classifier needs a source");
    const ClassMapping& m = corpus.manifest.source(spec.source);
    train_samples = specific_view(subset, m);
    test_samples = specific_view(corpus.test, m);
    names = specific_class_names(corpus.manifest, spec.source);
    class_sources.assign(names.size(), {spec.source});
  } else {
    train_samples = subset;
    test_samples = corpus.test;
    names = corpus.manifest.class_names;
    class_sources = annotating_sources(corpus.manifest);
  }
  if (train_samples.empty()) throw ConfigError("no training images for '" + spec.source + "'");

  TrainConfig cfg;
  cfg.net.levels = settings.levels;
  cfg.net.base_channels = settings.base_channels;
  cfg.net.in_channels = 1;
  cfg.net.out_channels = names.size();
  cfg.net.seed = derive_seed(run_seed, 1);
  fit_input_normalization(cfg.net, features_of(train_samples));
  cfg.sampler.batch_size = settings.batch_size;
  cfg.sampler.foreground_fraction = settings.foreground_fraction;
  cfg.sampler.exclude_empty = spec.exclude_empty;
  cfg.sampler.seed = derive_seed(run_seed, 2);
  cfg.loss = parse_loss_preset(spec.loss);
  cfg.max_steps = settings.max_steps;
  cfg.plateau_window = settings.plateau_window;
  cfg.plateau_tolerance = settings.plateau_tolerance;
  cfg.learning_rate = settings.learning_rate;
  cfg.fallback_learning_rate = settings.fallback_learning_rate;
  cfg.eval_every = settings.eval_every;
  cfg.seed = run_seed;

  EvalSet eval{&test_samples, class_sources};
  TrainResult tr = train(train_samples, cfg, initial_state(cfg), eval);

  RunOutput out;
  out.failure = tr.failure;
  out.log = std::move(tr.log);
  out.checkpoint = {cfg.net, names, spec.type == ClassifierType::Specific ? spec.source : "", spec.loss_label(),
                    std::move(tr.state)};
  out.test = evaluate_pooled(cfg.net, out.checkpoint.state.params, test_samples, class_sources);
  for (std::size_t c = 1; c < names.size(); ++c) {
    if (out.test.images[c] == 0) continue;
    ReportRow r;
    r.type = spec.type;
    r.source = spec.type == ClassifierType::Specific ? spec.source : "";
    r.loss = spec.loss_label();
    r.shrink_percent = shrink_percent;
    r.class_name = names[c];
    r.dice = out.test.dice(c);
    r.samples = out.test.images[c];
    r.seed = subset_seed;
    out.rows.push_back(std::move(r));
  }
  return out;
}

void ExperimentPlan::validate() const {
  if (roster.empty()) throw ConfigError("plan: roster is empty");
  if (shrink_levels.empty()) throw ConfigError("plan: shrink_levels is empty");
  if (replicates == 0) throw ConfigError("plan: replicates must be positive");
  for (double p : shrink_levels)
    if (!(p > 0.0 && p <= 80.0)) throw ConfigError("plan: shrink level " + std::to_string(p) + " outside (0, 80]");
  for (const ClassifierSpec& c : roster) {
    parse_loss_preset(c.loss);
    if (c.type == ClassifierType::Specific && c.source.empty())
      throw ConfigError("plan: specific classifier with loss '" + c.loss + "' must name exactly one source");
    if (c.type == ClassifierType::Generic && !c.source.empty())
      throw ConfigError("plan: generic classifier with loss '" + c.loss + "' must not name a source");
  }
  settings.validate();
}

ExperimentPlan parse_experiment_plan(std::string_view text, const fs::path& base_dir) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("plan: ") + e.what());
  }
  ExperimentPlan plan;
  try {
    plan.corpus = base_dir / j.at("corpus").get<std::string>();
    plan.output = base_dir / j.at("output").get<std::string>();
    plan.seed = j.value("seed", std::uint64_t{0});
    plan.replicates = j.value("replicates", std::size_t{1});
    if (j.contains("shrink_levels")) plan.shrink_levels = j.at("shrink_levels").get<std::vector<double>>();
    for (const auto& r : j.at("roster")) {
      ClassifierSpec c;
      c.type = parse_classifier_type(r.at("type").get<std::string>());
      if (r.contains("sources")) {
        const auto sources = r.at("sources").get<std::vector<std::string>>();
        if (sources.size() != 1 && c.type == ClassifierType::Specific)
          throw ConfigError("plan: specific classifier must name exactly one source");
        if (!sources.empty()) c.source = sources.front();
      }
      if (r.contains("source")) c.source = r.at("source").get<std::string>();
      c.loss = r.at("loss").get<std::string>();
      c.exclude_empty = r.value("exclude_empty", false);
      plan.roster.push_back(c);
    }
    if (j.contains("settings")) plan.settings = parse_run_settings(j.at("settings").dump());
  } catch (const json::exception& e) {
    throw ConfigError(std::string("plan: ") + e.what());
  }
  plan.validate();
  return plan;
}

std::vector<Cell> plan_cells(const ExperimentPlan& plan) {
  std::vector<Cell> cells;
  for (std::size_t r = 0; r < plan.roster.size(); ++r)
    for (double shrink : plan.shrink_levels)
      for (std::size_t rep = 0; rep < plan.replicates; ++rep) {
        Cell c;
        c.index = cells.size();
        c.roster_index = r;
        c.shrink_percent = shrink;
        c.replicate = rep;
        c.seed = derive_seed(plan.seed, c.index);
        c.subset_seed = subset_seed_for(plan.seed, rep);
        cells.push_back(c);
      }
  return cells;
}

void verify_nested_subsets(const Corpus& corpus, const ExperimentPlan& plan) {
  std::vector<double> levels = plan.shrink_levels;
  std::sort(levels.begin(), levels.end(), std::greater<>());
  levels.erase(std::unique(levels.begin(), levels.end()), levels.end());
  for (std::size_t rep = 0; rep < plan.replicates; ++rep) {
    std::set<std::string> previous;
    for (std::size_t i = 0; i < levels.size(); ++i) {
      const auto ids = ids_of(shrink_dataset(corpus.train, levels[i], subset_seed_for(plan.seed, rep)));
      if (i > 0 && !std::includes(previous.begin(), previous.end(), ids.begin(), ids.end()))
        throw ConfigError("plan: the " + std::to_string(levels[i]) + "% subset is not contained in the " +
                          std::to_string(levels[i - 1]) + "% subset");
      previous = ids;
    }
  }
}

std::size_t workers_from_env() {
  const char* v = std::getenv("PMSEG_WORKERS");
  if (!v || !*v) return 1;
  char* end = nullptr;
  const long n = std::strtol(v, &end, 10);
  if (*end != '\0' || n < 1) throw ConfigError("PMSEG_WORKERS must be a positive integer, got '" + std::string(v) + "'");
  return static_cast<std::size_t>(n);
}

ExperimentResult run_experiment(const ExperimentPlan& plan, std::size_t workers) {
  plan.validate();
  const Corpus corpus = load_corpus(plan.corpus);
  for (const ClassifierSpec& c : plan.roster)
    if (c.type == ClassifierType::Specific) corpus.manifest.source(c.source);
  verify_nested_subsets(corpus, plan);

  const std::vector<Cell> cells = plan_cells(plan);
  std::error_code ec;
  fs::create_directories(plan.output / "cells", ec);
  if (ec) throw ConfigError("cannot create " + plan.output.string() + ": " + ec.message());

  struct CellResult {
    std::vector<ReportRow> rows;
    std::string failure;
    std::size_t steps = 0;
    std::string stop_reason;
    double mean_foreground = 0.0;
  };
  std::vector<CellResult> results(cells.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < cells.size(); i = next++) {
      const Cell& cell = cells[i];
      CellResult& res = results[i];
      try {
        RunOutput out = run_classifier(corpus, plan.roster[cell.roster_index], plan.settings, cell.shrink_percent,
                                       cell.seed, cell.subset_seed);
        const fs::path dir = plan.output / "cells" / std::to_string(i);
        save_checkpoint(out.checkpoint, dir / "checkpoint");
        write_text(dir / "log.csv", log_to_csv(out.log, out.checkpoint.class_names));
        res.rows = std::move(out.rows);
        res.failure = out.failure;
        res.steps = out.checkpoint.state.step;
        res.stop_reason = std::string(to_string(out.checkpoint.state.reason));
        res.mean_foreground = out.test.mean_foreground();
      } catch (const std::exception& e) {
        res.failure = e.what();
      }
    }
  };
  const std::size_t n = std::max<std::size_t>(1, std::min(workers, cells.size()));
  std::vector<std::thread> pool;
  for (std::size_t w = 1; w < n; ++w) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();

  ExperimentResult result;
  json cell_summary = json::array();
  for (std::size_t i = 0; i < cells.size(); ++i) {
    const Cell& c = cells[i];
    const ClassifierSpec& spec = plan.roster[c.roster_index];
    CellResult& r = results[i];
    if (!r.failure.empty()) result.failures.emplace_back(i, r.failure);
    cell_summary.push_back({{"index", i},
                            {"type", std::string(to_string(spec.type))},
                            {"source", spec.source},
                            {"loss", spec.loss_label()},
                            {"shrink_percent", c.shrink_percent},
                            {"replicate", c.replicate},
                            {"seed", c.seed},
                            {"steps", r.steps},
                            {"stop_reason", r.stop_reason},
                            {"mean_foreground_dice", r.mean_foreground},
                            {"failure", r.failure}});
    std::move(r.rows.begin(), r.rows.end(), std::back_inserter(result.rows));
  }
  mark_best(result.rows);

  // Replicate-averaged table with best-per-class markers.
  using Key = std::tuple<std::string, std::string, std::string, double>;
  std::map<Key, std::map<std::string, std::pair<double, std::size_t>>> table;
  for (const ReportRow& r : result.rows) {
    auto& cell = table[{std::string(to_string(r.type)), r.source, r.loss, r.shrink_percent}][r.class_name];
    cell.first += r.dice;
    ++cell.second;
  }
  std::map<std::pair<double, std::string>, double> best;
  for (const auto& [key, classes] : table)
    for (const auto& [name, acc] : classes) {
      const double mean = acc.first / static_cast<double>(acc.second);
      auto& b = best.try_emplace({std::get<3>(key), name}, mean).first->second;
      b = std::max(b, mean);
    }
  json classifiers = json::array();
  for (const auto& [key, classes] : table) {
    json per_class = json::object();
    double sum = 0.0;
    for (const auto& [name, acc] : classes) {
      const double mean = acc.first / static_cast<double>(acc.second);
      sum += mean;
      per_class[name] = {{"dice", mean}, {"best", mean == best[{std::get<3>(key), name}]}};
    }
    classifiers.push_back({{"type", std::get<0>(key)},
                           {"source", std::get<1>(key)},
                           {"loss", std::get<2>(key)},
                           {"shrink_percent", std::get<3>(key)},
                           {"classes", per_class},
                           {"average_dice", sum / static_cast<double>(classes.size())}});
  }
  json failures = json::array();
  for (const auto& [i, msg] : result.failures) failures.push_back({{"cell", i}, {"message", msg}});
  const json summary = {{"seed", plan.seed},
                        {"replicates", plan.replicates},
                        {"settings", json::parse(run_settings_to_json(plan.settings))},
                        {"cells", cell_summary},
                        {"classifiers", classifiers},
                        {"failures", failures}};
  write_text(plan.output / "report.csv", report_to_csv(result.rows));
  write_text(plan.output / "summary.json", summary.dump(1) + "\n");
  return result;
}

}  // namespace pmseg
