// Command-line front end: extract, eval, synth.

#include <cstdio>
#include <exception>
#include <iostream>
#include <string>
#include <variant>

#include <CLI11.hpp>

#include "fpx/pipeline.hpp"

namespace {

enum ExitCode : int { kOk = 0, kInputError = 1, kRejected = 2 };

struct CommonFlags {
  std::string config_path;
  int block_size = 0;
  std::string threshold;
  double tolerance = 0.0;
  bool dump = false;
  int workers = 0;
  std::string out;
};

void add_common(CLI::App* cmd, CommonFlags& f) {
  cmd->add_option("--config", f.config_path, "Key-value config file");
  cmd->add_option("--block-size", f.block_size, "Block size in pixels");
  cmd->add_option("--threshold", f.threshold, "Binarization threshold: auto or 0..255");
  cmd->add_option("--tolerance", f.tolerance, "Match tolerance in pixels");
  cmd->add_flag("--dump-intermediates", f.dump, "Write intermediate images and grids");
  cmd->add_option("--workers", f.workers, "Worker threads for batch evaluation");
  cmd->add_option("--out", f.out, "Output directory");
}

fpx::PipelineConfig resolve(const CommonFlags& f) {
  fpx::PipelineConfig cfg;
  if (!f.config_path.empty()) cfg = fpx::apply_config(fpx::KeyValueFile::load(f.config_path), cfg);
  if (f.block_size) cfg.block_size = f.block_size;
  if (!f.threshold.empty()) cfg.fixed_threshold = fpx::parse_threshold(f.threshold);
  if (f.tolerance > 0.0) cfg.tolerance = f.tolerance;
  if (f.dump) cfg.dump_intermediates = true;
  if (f.workers) cfg.workers = f.workers;
  if (!f.out.empty()) cfg.output_dir = f.out;
  cfg.validate();
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Fingerprint enhancement and minutiae extraction"};
  app.require_subcommand(1);

  CommonFlags extract_flags, eval_flags;
  std::string image_path, dataset_dir, truth_dir, spec_path, synth_out = ".";
  int count = 1;

  auto* extract = app.add_subcommand("extract", "Extract minutiae from one PGM image");
  extract->add_option("image", image_path, "Input PGM")->required();
  add_common(extract, extract_flags);

  auto* eval = app.add_subcommand("eval", "Evaluate against ground-truth minutiae files");
  eval->add_option("dataset", dataset_dir, "Directory of PGM images")->required();
  eval->add_option("truth", truth_dir, "Directory of same-stem .min truth files")->required();
  add_common(eval, eval_flags);

  auto* synth = app.add_subcommand("synth", "Generate a synthetic corpus");
  synth->add_option("spec", spec_path, "Key-value synth spec")->required();
  synth->add_option("-n,--count", count, "Number of images");
  synth->add_option("--out", synth_out, "Output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kInputError;
  }

  try {
    if (*extract) {
      const auto cfg = resolve(extract_flags);
      const auto report = fpx::run_extract(image_path, cfg);
      if (const auto* rej = std::get_if<fpx::Rejection>(&report.outcome)) {
        std::fprintf(stderr, "rejected: recoverable fraction %.4f below threshold %.4f\n",
                     rej->recoverable_fraction, rej->threshold);
        return kRejected;
      }
      std::cout << std::get<std::filesystem::path>(report.outcome).string() << '\n';
      for (const auto& p : report.intermediates) std::cout << p.string() << '\n';
      return kOk;
    }
    if (*eval) {
      const auto cfg = resolve(eval_flags);
      const auto summary = fpx::run_eval(dataset_dir, truth_dir, cfg);
      std::ifstream table(summary.table_path);
      std::cout << table.rdbuf();
      return summary.report ? kOk : kInputError;
    }
    if (*synth) {
      const auto spec = fpx::parse_synth_spec(fpx::KeyValueFile::load(spec_path));
      for (const auto& p : fpx::run_synth(spec, count, synth_out)) std::cout << p.string() << '\n';
      return kOk;
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kInputError;
  }
  return kInputError;
}
