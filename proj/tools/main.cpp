#include <iostream>

#include <CLI11.hpp>

#include "commands.hpp"

int main(int argc, char** argv) {
  namespace cli = pmseg::cli;
  CLI::App app{"pmseg: presence-masked segmentation training on synthetic corpora"};
  app.require_subcommand(1);

  std::string spec, out_dir;
  auto* gen = app.add_subcommand("gendata", "Generate a synthetic corpus");
  gen->add_option("--spec", spec, "Synthetic spec JSON (default spec when omitted)");
  gen->add_option("--out", out_dir, "Output corpus directory")->required();

  cli::TrainArgs targs;
  std::string corpus_dir, train_out, settings;
  auto* tr = app.add_subcommand("train", "Train one classifier");
  tr->add_option("--corpus", corpus_dir, "Corpus directory")->required();
  tr->add_option("--loss", targs.loss, "Loss preset, e.g. xent_or or xent_plus+0.1*dice_soft")->required();
  tr->add_option("--type", targs.type, "specific or generic")->check(CLI::IsMember({"specific", "generic"}));
  tr->add_option("--source", targs.source, "Source of a specific classifier");
  tr->add_option("--out", train_out, "Output directory")->required();
  tr->add_flag("--exclude-empty", targs.exclude_empty, "Train on foreground-bearing images only");
  tr->add_option("--shrink", targs.shrink_percent, "Training subset percent (80 = full split)");
  tr->add_option("--seed", targs.seed, "Run seed");
  tr->add_option("--settings", settings, "Run settings JSON");

  cli::EvalArgs eargs;
  std::string ckpt_dir, eval_corpus, eval_out;
  auto* ev = app.add_subcommand("eval", "Evaluate a checkpoint");
  ev->add_option("--ckpt", ckpt_dir, "Checkpoint directory")->required();
  ev->add_option("--corpus", eval_corpus, "Corpus directory")->required();
  ev->add_option("--split", eargs.split, "train or test")->check(CLI::IsMember({"train", "test"}));
  ev->add_option("--out", eval_out, "Write report CSV here instead of stdout");

  std::string plan;
  auto* ex = app.add_subcommand("experiment", "Run an experiment grid");
  ex->add_option("--plan", plan, "Plan JSON")->required();

  app.add_subcommand("gradcheck", "Check every gradient against finite differences");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : cli::kConfigError;
  }

  if (gen->parsed()) {
    std::optional<std::filesystem::path> spec_path;
    if (!spec.empty()) spec_path = spec;
    return cli::gendata(spec_path, out_dir, std::cout);
  }
  if (tr->parsed()) {
    targs.corpus = corpus_dir;
    targs.out = train_out;
    if (!settings.empty()) targs.settings = settings;
    return cli::train(targs, std::cout);
  }
  if (ev->parsed()) {
    eargs.checkpoint = ckpt_dir;
    eargs.corpus = eval_corpus;
    if (!eval_out.empty()) eargs.out = eval_out;
    return cli::eval(eargs, std::cout, std::cerr);
  }
  if (ex->parsed()) return cli::experiment(plan, std::cout);
  return cli::gradcheck(std::cout);
}
