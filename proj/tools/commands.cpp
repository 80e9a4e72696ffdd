#include "commands.hpp"

#include <fstream>
#include <sstream>

#include <fmt/format.h>

#include "pmseg/checkpoint.hpp"
#include "pmseg/corpus_io.hpp"
#include "pmseg/error.hpp"
#include "pmseg/experiment.hpp"
#include "pmseg/gradcheck_suite.hpp"
#include "pmseg/synthetic.hpp"

namespace pmseg::cli {
namespace {

namespace fs = std::filesystem;

std::string read_text(const fs::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw ConfigError(path.string() + ": missing or unreadable");
  std::ostringstream s;
  s << f.rdbuf();
  return s.str();
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  f << text;
  if (!f) throw ConfigError("cannot write " + path.string());
}

template <typename Fn>
int guarded(std::ostream& log, Fn&& fn) {
  try {
    return fn();
  } catch (const ConfigError& e) {
    log << "error: " << e.what() << "\n";
    return kConfigError;
  } catch (const NumericalError& e) {
    log << "numerical failure: " << e.what() << "\n";
    return kNumericalError;
  } catch (const std::invalid_argument& e) {
    log << "error: " << e.what() << "\n";
    return kConfigError;
  }
}

}  // namespace

int gendata(const std::optional<fs::path>& spec_path, const fs::path& out, std::ostream& log) {
  return guarded(log, [&] {
    const SyntheticSpec spec = spec_path ? parse_synthetic_spec(read_text(*spec_path)) : default_synthetic_spec();
    const Corpus corpus = build_synthetic_corpus(spec);
    const std::string hash = store_corpus(corpus, out);
    log << fmt::format("wrote {} train + {} test images to {}\ncorpus sha256 {}\n", corpus.train.size(),
                       corpus.test.size(), out.string(), hash);
    return kOk;
  });
}

int train(const TrainArgs& args, std::ostream& log) {
  return guarded(log, [&] {
    ClassifierSpec spec;
    spec.type = parse_classifier_type(args.type);
    spec.source = args.source;
    spec.loss = args.loss;
    spec.exclude_empty = args.exclude_empty;
    parse_loss_preset(spec.loss);
    if (spec.type == ClassifierType::Specific && spec.source.empty())
      throw ConfigError("--type specific requires --source");
    if (spec.type == ClassifierType::Generic && !spec.source.empty())
      throw ConfigError("--source only applies to --type specific");
    const RunSettings settings = args.settings ? parse_run_settings(read_text(*args.settings)) : RunSettings{};
    const Corpus corpus = load_corpus(args.corpus);

    const RunOutput run = run_classifier(corpus, spec, settings, args.shrink_percent, args.seed, args.seed);
    std::error_code ec;
    fs::create_directories(args.out, ec);
    if (ec) throw ConfigError("cannot create " + args.out.string() + ": " + ec.message());
    save_checkpoint(run.checkpoint, args.out / "checkpoint");
    write_text(args.out / "log.csv", log_to_csv(run.log, run.checkpoint.class_names));
    write_text(args.out / "report.csv", report_to_csv(run.rows));
    const auto& st = run.checkpoint.state;
    log << fmt::format("{} steps ({}), final lr {}\n", st.step, to_string(st.reason), st.adam.lr);
    for (const ReportRow& r : run.rows) log << fmt::format("  {:<12} dice {:.4f} ({} images)\n", r.class_name, r.dice, r.samples);
    if (!run.failure.empty()) {
      log << "training halted: " << run.failure << "\nlast good parameters saved\n";
      return kNumericalError;
    }
    return kOk;
  });
}

int eval(const EvalArgs& args, std::ostream& out, std::ostream& log) {
  return guarded(log, [&] {
    const Checkpoint ckpt = load_checkpoint(args.checkpoint);
    const Corpus corpus = load_corpus(args.corpus);
    if (args.split != "train" && args.split != "test") throw ConfigError("--split must be 'train' or 'test'");
    const auto& split = args.split == "train" ? corpus.train : corpus.test;

    std::vector<Sample> samples;
    std::vector<std::string> names;
    std::vector<std::set<std::string>> class_sources;
    if (!ckpt.source.empty()) {
      samples = specific_view(split, corpus.manifest.source(ckpt.source));
      names = specific_class_names(corpus.manifest, ckpt.source);
      class_sources.assign(names.size(), {ckpt.source});
    } else {
      samples = split;
      names = corpus.manifest.class_names;
      class_sources = annotating_sources(corpus.manifest);
    }
    if (names != ckpt.class_names)
      throw ConfigError(fmt::format("checkpoint predicts {} classes, corpus defines {}", ckpt.class_names.size(),
                                    names.size()));
    const PooledDice d = evaluate_pooled(ckpt.net, ckpt.state.params, samples, class_sources);
    std::vector<ReportRow> rows;
    for (std::size_t c = 1; c < names.size(); ++c) {
      if (d.images[c] == 0) continue;
      ReportRow r;
      r.type = ckpt.source.empty() ? ClassifierType::Generic : ClassifierType::Specific;
      r.source = ckpt.source;
      r.loss = ckpt.loss;
      r.class_name = names[c];
      r.dice = d.dice(c);
      r.samples = d.images[c];
      r.seed = ckpt.net.seed;
      rows.push_back(r);
    }
    const std::string csv = report_to_csv(rows);
    if (args.out)
      write_text(*args.out, csv);
    else
      out << csv;
    log << fmt::format("mean foreground dice {:.4f} on {} {} images\n", d.mean_foreground(), samples.size(), args.split);
    return kOk;
  });
}

int experiment(const fs::path& plan_path, std::ostream& log) {
  return guarded(log, [&] {
    const ExperimentPlan plan = parse_experiment_plan(read_text(plan_path), plan_path.parent_path());
    const std::size_t workers = workers_from_env();
    log << fmt::format("{} cells on {} worker(s)\n", plan.cell_count(), workers);
    const ExperimentResult result = run_experiment(plan, workers);
    for (const auto& [cell, msg] : result.failures) log << fmt::format("cell {} failed: {}\n", cell, msg);
    log << fmt::format("report written to {}\n", (plan.output / "report.csv").string());
    return result.failures.empty() ? kOk : kPartialFailure;
  });
}

int gradcheck(std::ostream& out) {
  return guarded(out, [&] {
    bool ok = true;
    for (const GradcheckCase& c : run_gradcheck_suite()) {
      out << fmt::format("{:<34} {:>10.3e}  {}\n", c.name, c.result.max_rel_error, c.passed ? "ok" : "FAIL");
      ok = ok && c.passed;
    }
    out << (ok ? "all gradients within " : "gradient mismatch above ") << kGradcheckTolerance << "\n";
    return ok ? kOk : kNumericalError;
  });
}

}  // namespace pmseg::cli
