#pragma once

// Command-line driver: edge, train, sample, eval, ablate-edge, ablate-loss.
// Exit status is 0 on success, 1 on a runtime failure and 2 on a usage error.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "bicamo/config.hpp"
#include "bicamo/data/dataset.hpp"
#include "bicamo/data/image_io.hpp"
#include "bicamo/diffusion/checkpoint.hpp"
#include "bicamo/metrics.hpp"
#include "bicamo/pipeline.hpp"

namespace bicamo {

inline constexpr const char* kMetricsCsvHeader = "config,S_m,E_m,F_w,MAE";
inline constexpr const char* kAblationOperators[] = {"prewitt", "laplacian", "canny", "log", "sobel"};

inline std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string q = "\"";
  for (char c : s) q += c == '"' ? std::string("\"\"") : std::string(1, c);
  return q + "\"";
}

inline std::string metrics_csv_row(const std::string& tag, const MetricsReport& r) {
  char buf[128];
  std::snprintf(buf, sizeof buf, ",%.6f,%.6f,%.6f,%.6f", r.s_measure, r.e_measure, r.weighted_fbeta, r.mae);
  return csv_field(tag) + buf;
}

namespace detail {

namespace fs = std::filesystem;

inline void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
  out << text;
  if (!out) throw std::runtime_error("failed writing '" + path.string() + "'");
}

inline void emit(const std::string& text, const std::string& path, std::ostream& out) {
  if (path.empty()) {
    out << text;
  } else {
    write_text(path, text);
  }
}

inline ExperimentConfig load_with_overrides(const std::string& config, const std::optional<std::uint64_t>& seed,
                                            int workers) {
  ExperimentConfig cfg = config.empty() ? ExperimentConfig{} : load_experiment_config(config);
  if (seed) cfg.seed = *seed;
  if (workers > 0) cfg.workers = workers;
  cfg.validate();
  return cfg;
}

// <dir>/Images when it exists, otherwise <dir> itself.
inline std::map<std::string, fs::path> input_images(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw std::runtime_error("'" + dir.string() + "' is not a directory");
  const fs::path images = dir / "Images";
  return index_images(fs::is_directory(images) ? images : dir);
}

inline std::string run_ablation(const ExperimentConfig& base, const std::vector<std::string>& tags,
                                const std::vector<ExperimentConfig>& rows) {
  const DataSplit split = load_split(base.data);
  std::string csv = std::string(kMetricsCsvHeader) + "\n";
  for (std::size_t k = 0; k < rows.size(); ++k) {
    csv += metrics_csv_row(tags[k], run_experiment(rows[k], split).heldout.report) + "\n";
  }
  return csv;
}

}  // namespace detail

inline int cli_run(int argc, const char* const* argv, std::ostream& out = std::cout,
                   std::ostream& err = std::cerr) {
  namespace fs = std::filesystem;
  CLI::App app{"Edge-prior conditioned diffusion segmentation for camouflaged objects"};
  app.require_subcommand(1);

  std::string config, out_path, out_dir, input, op_name = "sobel", checkpoint, pred_dir, gt_dir, tag = "eval";
  std::optional<std::uint64_t> seed;
  std::uint64_t sample_seed = 0;
  int workers = 0, steps = kDefaultSamplingSteps;
  bool with_eval = false;
  double log_sigma = 1.4, canny_sigma = 1.0, canny_low = 0.1, canny_high = 0.2;

  CLI::App* edge = app.add_subcommand("edge", "Extract an edge prior from one image and save it as PNG");
  edge->add_option("--input", input, "Input image (PNG or JPEG)")->required();
  edge->add_option("--operator", op_name, "sobel, prewitt, laplacian, log or canny")
      ->check(CLI::IsMember({"sobel", "prewitt", "laplacian", "log", "canny"}));
  edge->add_option("--out", out_path, "Output PNG")->required();
  edge->add_option("--log-sigma", log_sigma, "Gaussian sigma of the LoG operator");
  edge->add_option("--canny-sigma", canny_sigma, "Gaussian sigma of the Canny operator");
  edge->add_option("--canny-low", canny_low, "Canny low threshold (relative)");
  edge->add_option("--canny-high", canny_high, "Canny high threshold (relative)");

  CLI::App* train_cmd = app.add_subcommand("train", "Train a denoiser from a JSON config");
  train_cmd->add_option("--config", config, "Experiment config (JSON)")->required();
  train_cmd->add_option("--seed", seed, "Override the experiment seed");
  train_cmd->add_option("--out-dir", out_dir, "Directory for checkpoint, log and resolved config")->required();
  train_cmd->add_option("--workers", workers, "Worker threads for sampling and evaluation");
  train_cmd->add_flag("--eval", with_eval, "Also sample and score the held-out split");

  CLI::App* sample_cmd = app.add_subcommand("sample", "Run the sampler on a directory of images");
  sample_cmd->add_option("--checkpoint", checkpoint, "Checkpoint written by train")->required();
  sample_cmd->add_option("--input", input, "Image directory (or dataset root with Images/)")->required();
  sample_cmd->add_option("--out-dir", out_dir, "Directory for <stem>.png probability maps")->required();
  sample_cmd->add_option("--steps", steps, "Sampling steps")->check(CLI::PositiveNumber);
  sample_cmd->add_option("--seed", sample_seed, "Sampling seed");
  sample_cmd->add_option("--workers", workers, "Worker threads");

  CLI::App* eval_cmd = app.add_subcommand("eval", "Score prediction PNGs against ground-truth masks");
  eval_cmd->add_option("--pred", pred_dir, "Prediction directory")->required();
  eval_cmd->add_option("--gt", gt_dir, "Ground-truth directory")->required();
  eval_cmd->add_option("--tag", tag, "Value of the config column");
  eval_cmd->add_option("--out", out_path, "CSV output (stdout when omitted)");
  eval_cmd->add_option("--workers", workers, "Worker threads");

  CLI::App* ablate_edge = app.add_subcommand("ablate-edge", "Train and score once per edge operator");
  CLI::App* ablate_loss = app.add_subcommand("ablate-loss", "Train and score once per loss configuration");
  for (CLI::App* a : {ablate_edge, ablate_loss}) {
    a->add_option("--config", config, "Base experiment config (JSON)")->required();
    a->add_option("--seed", seed, "Override the experiment seed");
    a->add_option("--out", out_path, "CSV output (stdout when omitted)");
    a->add_option("--workers", workers, "Worker threads for sampling and evaluation");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    const auto chosen = app.get_subcommands();
    out << (chosen.empty() ? app.help() : chosen.front()->help());
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n";
    const auto chosen = app.get_subcommands();
    err << (chosen.empty() ? app.help() : chosen.front()->help());
    return 2;
  }

  try {
    if (edge->parsed()) {
      EdgeOperator op = EdgeOperator::parse(op_name);
      op.log_sigma = log_sigma;
      op.canny_sigma = canny_sigma;
      op.canny_low = canny_low;
      op.canny_high = canny_high;
      op.validate();
      write_png(extract_edge_prior(read_image_rgb(input), op).map, out_path);
    } else if (train_cmd->parsed()) {
      const ExperimentConfig cfg = detail::load_with_overrides(config, seed, workers);
      const DataSplit split = load_split(cfg.data);
      const TrainedModel trained = train_model(cfg, split.train);
      fs::create_directories(out_dir);
      save_checkpoint(trained.checkpoint(cfg), (fs::path(out_dir) / "checkpoint.bin").string());
      std::ostringstream log;
      trained.log.write_csv(log);
      detail::write_text(fs::path(out_dir) / "train_log.csv", log.str());
      detail::write_text(fs::path(out_dir) / "config.json", dump_experiment_config(cfg));
      char probe[128];
      std::snprintf(probe, sizeof probe, "probe_initial,probe_final\n%.10g,%.10g\n", trained.probe_initial,
                    trained.probe_final);
      detail::write_text(fs::path(out_dir) / "probe.csv", probe);
      if (with_eval) {
        const Evaluation ev = evaluate_model(trained.model, trained.schedule, split.test, cfg.edge,
                                             cfg.injection, cfg.sampling_steps, cfg.seed, cfg.workers);
        const fs::path pred = fs::path(out_dir) / "predictions";
        fs::create_directories(pred);
        for (std::size_t k = 0; k < ev.ids.size(); ++k) write_png(ev.predictions[k], (pred / (ev.ids[k] + ".png")).string());
        detail::write_text(fs::path(out_dir) / "metrics.csv",
                           std::string(kMetricsCsvHeader) + "\n" + metrics_csv_row(cfg.name, ev.report) + "\n");
      }
    } else if (sample_cmd->parsed()) {
      const Checkpoint ck = load_checkpoint(checkpoint);
      const Denoiser model = ck.build_denoiser();
      std::vector<Sample> images;
      for (const auto& [stem, path] : detail::input_images(input)) {
        const ImageRGB img = read_image_rgb(path.string());
        images.emplace_back(stem, img, Grid(img.height(), img.width()));
      }
      if (steps > ck.schedule.steps()) throw std::runtime_error("--steps exceeds the schedule length");
      const std::vector<Grid> preds = predict_all(model, images, ck.edge_op, ck.schedule, steps, sample_seed,
                                                  ck.injection, std::max(1, workers));
      fs::create_directories(out_dir);
      for (std::size_t k = 0; k < images.size(); ++k)
        write_png(preds[k], (fs::path(out_dir) / (images[k].id() + ".png")).string());
    } else if (eval_cmd->parsed()) {
      if (!fs::is_directory(pred_dir)) throw std::runtime_error("'" + pred_dir + "' is not a directory");
      if (!fs::is_directory(gt_dir)) throw std::runtime_error("'" + gt_dir + "' is not a directory");
      const auto preds = index_images(pred_dir), gts = index_images(gt_dir);
      std::vector<Grid> p, g;
      for (const auto& [stem, path] : gts) {
        const auto it = preds.find(stem);
        if (it == preds.end()) throw std::runtime_error("no prediction for ground truth '" + stem + "'");
        p.push_back(read_image_gray(it->second.string()));
        g.push_back(binarize_mask(read_image_gray(path.string())));
        if (p.back().height() != g.back().height() || p.back().width() != g.back().width())
          throw std::runtime_error("'" + stem + "': prediction is " + shape_string(p.back()) +
                                   " but ground truth is " + shape_string(g.back()));
      }
      for (const auto& [stem, path] : preds)
        if (!gts.count(stem)) throw std::runtime_error("prediction '" + stem + "' has no ground truth");
      if (g.empty()) throw std::runtime_error("no ground-truth masks in '" + gt_dir + "'");
      const MetricsReport r = evaluate(p, g, std::max(1, workers));
      detail::emit(std::string(kMetricsCsvHeader) + "\n" + metrics_csv_row(tag, r) + "\n", out_path, out);
    } else if (ablate_edge->parsed()) {
      const ExperimentConfig base = detail::load_with_overrides(config, seed, workers);
      std::vector<std::string> tags;
      std::vector<ExperimentConfig> rows;
      for (const char* name : kAblationOperators) {
        ExperimentConfig row = base;
        EdgeOperator op = EdgeOperator::parse(name);
        op.log_sigma = base.edge.log_sigma;
        op.canny_sigma = base.edge.canny_sigma;
        op.canny_low = base.edge.canny_low;
        op.canny_high = base.edge.canny_high;
        row.edge = op;
        tags.push_back(name);
        rows.push_back(row);
      }
      detail::emit(detail::run_ablation(base, tags, rows), out_path, out);
    } else if (ablate_loss->parsed()) {
      const ExperimentConfig base = detail::load_with_overrides(config, seed, workers);
      std::vector<std::string> tags;
      std::vector<ExperimentConfig> rows;
      for (LossPreset p : kLossPresets) {
        ExperimentConfig row = base;
        row.losses = apply_preset(base.losses, p);
        tags.push_back(preset_tag(p));
        rows.push_back(row);
      }
      detail::emit(detail::run_ablation(base, tags, rows), out_path, out);
    }
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

inline int cli_run(const std::vector<std::string>& args, std::ostream& out = std::cout,
                   std::ostream& err = std::cerr) {
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  return cli_run(static_cast<int>(argv.size()), argv.data(), out, err);
}

}  // namespace bicamo
