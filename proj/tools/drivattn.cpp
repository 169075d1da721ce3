#include <iostream>

#include "CLI11.hpp"
#include "drivattn/commands.hpp"

int main(int argc, char** argv) {
  using namespace drivattn;
  CommandOptions opt;
  std::uint64_t seed = 0;

  CLI::App app{"Driver attention classification from pre-deviation EEG"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kToolVersion);

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", opt.config_path, "flat key=value config file");
    sub->add_option("--seed", seed, "master seed (overrides the config)");
    sub->add_option("--out", opt.out_dir, "output directory");
    sub->add_flag("--quiet", opt.quiet, "suppress progress output");
  };
  auto add_recordings = [&](CLI::App* sub) {
    sub->add_option("--recordings", opt.recordings_dir, "directory of .atdr recordings");
  };

  auto* synth = app.add_subcommand("synth", "generate synthetic recordings and ground truth");
  add_common(synth);

  auto* label = app.add_subcommand("label", "write reaction times and trial labels");
  add_common(label);
  add_recordings(label);
  label->add_option("--session", opt.session, "kplus | kminus | all")->default_val("all");

  auto* features = app.add_subcommand("features", "write per-epoch band-power features");
  add_common(features);
  add_recordings(features);
  features->add_option("--session", opt.session, "kplus | kminus | all")->default_val("all");

  auto* pipeline = app.add_subcommand("pipeline", "train and evaluate one or more table cells");
  add_common(pipeline);
  add_recordings(pipeline);
  pipeline->add_option("--model", opt.model, "svm | eegnet-raw | eegnet-bands | all (comma lists allowed)");
  pipeline->add_option("--protocol", opt.protocol, "mixed | loso | all");
  pipeline->add_option("--session", opt.session, "kplus | kminus | all");

  auto* stats = app.add_subcommand("stats", "Wilcoxon (and optional Pearson) on two LOSO reports");
  add_common(stats);
  add_recordings(stats);
  stats->add_option("reports", opt.reports, "two report.csv files")->required()->expected(2);

  auto* report = app.add_subcommand("report", "merge report CSVs into the accuracy grid");
  add_common(report);
  report->add_option("reports", opt.reports, "report.csv files")->required()->expected(1, -1);
  report->add_flag("--reference", opt.with_reference, "append the reference accuracies");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kExitConfig;
  }
  for (auto* sub : app.get_subcommands())
    if (sub->count("--seed")) opt.seed = seed;

  return guarded([&] {
    if (*synth) return cmd_synth(opt);
    if (*label) return cmd_label(opt);
    if (*features) return cmd_features(opt);
    if (*pipeline) return cmd_pipeline(opt);
    if (*stats) return cmd_stats(opt);
    return cmd_report(opt);
  });
}
