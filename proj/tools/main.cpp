// Command-line front end for the marine debris classifier pipeline:
//   mdcnn prepare   scan a data root, augment, balance, split, write manifest
//   mdcnn train     train (optionally replicated) from a manifest
//   mdcnn eval      confusion matrix + metrics for a split
//   mdcnn predict   classify individual image files
//
// Exit codes: 0 success, 1 runtime failure, 2 usage error. Data rows go to
// stdout; progress and diagnostics go to stderr.

#include <cinttypes>
#include <cstdio>
#include <filesystem>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "mdcnn/evaluate.hpp"
#include "mdcnn/image.hpp"
#include "mdcnn/manifest.hpp"
#include "mdcnn/model_io.hpp"
#include "mdcnn/pipeline.hpp"
#include "mdcnn/train.hpp"

namespace fs = std::filesystem;

namespace {

const char* class_name(int label) { return label == mdcnn::kAnimalClass ? "Animal" : "Litter"; }

int run_prepare(const mdcnn::PrepareConfig& config, const std::string& out_path) {
  const fs::path out(out_path);
  const fs::path out_dir = out.has_parent_path() ? out.parent_path() : fs::path(".");
  const mdcnn::SampleManifest manifest = mdcnn::prepare_dataset(config, out_dir);
  mdcnn::write_manifest(manifest, out_path);
  std::fprintf(stderr, "wrote %zu records to %s\n", manifest.samples.size(), out_path.c_str());
  std::printf("split\tclass\tcount\n");
  for (const auto split : {mdcnn::Split::train, mdcnn::Split::val, mdcnn::Split::test}) {
    for (int label = 0; label < 2; ++label) {
      std::printf("%s\t%s\t%" PRId64 "\n", mdcnn::to_string(split).c_str(), class_name(label),
                  manifest.count(split, label));
    }
  }
  return 0;
}

struct TrainCliOptions {
  std::string manifest_path;
  std::string out_path;
  std::string history_path;
  mdcnn::TrainConfig config;
  int replicates = 1;
};

int run_train(const TrainCliOptions& opt) {
  const fs::path manifest_file(opt.manifest_path);
  const mdcnn::SampleManifest manifest = mdcnn::read_manifest(opt.manifest_path);
  const fs::path base_dir =
      manifest_file.has_parent_path() ? manifest_file.parent_path() : fs::path(".");

  const auto progress = [](const mdcnn::EpochMetrics& m) {
    std::fprintf(stderr, "epoch %d: train_loss=%.4f train_acc=%.4f val_loss=%.4f val_acc=%.4f\n",
                 m.epoch, m.train_loss, m.train_acc, m.val_loss, m.val_acc);
  };

  if (opt.replicates == 1) {
    const mdcnn::TrainResult result = mdcnn::train(opt.config, manifest, base_dir, progress);
    mdcnn::save_model(result.params, opt.out_path);
    if (!opt.history_path.empty()) {
      mdcnn::write_history_csv(result.history.epochs, opt.history_path);
    }
    const mdcnn::EpochMetrics& f = result.history.epochs.back();
    std::printf("final\ttrain_loss=%.2f\ttrain_acc=%.2f\tval_loss=%.2f\tval_acc=%.2f\n",
                f.train_loss, f.train_acc, f.val_loss, f.val_acc);
    return 0;
  }

  const mdcnn::ReplicateResult result =
      mdcnn::run_replicates(opt.config, manifest, base_dir, opt.replicates, progress);
  for (std::size_t i = 0; i < result.runs.size(); ++i) {
    const std::string path = opt.out_path + ".r" + std::to_string(i);
    mdcnn::save_model(result.runs[i].params, path);
    if (!opt.history_path.empty()) {
      mdcnn::write_history_csv(result.runs[i].history.epochs,
                               opt.history_path + ".r" + std::to_string(i));
    }
    const mdcnn::EpochMetrics& f = result.finals[i];
    std::printf("run\t%zu\tseed=%" PRIu64 "\ttrain_loss=%.2f\ttrain_acc=%.2f\tval_loss=%.2f"
                "\tval_acc=%.2f\n",
                i, opt.config.seed + i, f.train_loss, f.train_acc, f.val_loss, f.val_acc);
  }
  std::printf("means\ttrain_loss=%.2f\ttrain_acc=%.2f\tval_loss=%.2f\tval_acc=%.2f\n",
              result.means.train_loss, result.means.train_acc, result.means.val_loss,
              result.means.val_acc);
  return 0;
}

void print_metric(const char* name, const std::optional<double>& v) {
  if (v) {
    std::printf("%s\t%.6f\n", name, *v);
  } else {
    std::printf("%s\tundefined\n", name);
  }
}

int run_eval(const std::string& model_path, const std::string& manifest_path,
             const std::string& split_name, const std::string& format, bool skip_unreadable) {
  const mdcnn::ModelParams params = mdcnn::load_model(model_path);
  const mdcnn::SampleManifest manifest = mdcnn::read_manifest(manifest_path);
  const fs::path manifest_file(manifest_path);
  const fs::path base_dir =
      manifest_file.has_parent_path() ? manifest_file.parent_path() : fs::path(".");

  mdcnn::Split split = mdcnn::Split::test;
  if (split_name == "train") split = mdcnn::Split::train;
  else if (split_name == "val") split = mdcnn::Split::val;

  const std::vector<mdcnn::Sample> samples = manifest.split_samples(split);
  if (samples.empty()) {
    throw std::runtime_error("manifest has no '" + split_name + "' samples");
  }
  const mdcnn::EvalResult result = mdcnn::evaluate(params, samples, base_dir, skip_unreadable);
  for (const std::string& e : result.unreadable) {
    std::fprintf(stderr, "skipped: %s\n", e.c_str());
  }
  const mdcnn::ConfusionMatrix& cm = result.matrix;
  const mdcnn::MatrixMetrics metrics = mdcnn::metrics_from_matrix(cm);
  if (format == "csv") {
    std::printf("tp,fn,fp,tn,accuracy,precision,recall,hazard_rate\n");
    std::printf("%" PRId64 ",%" PRId64 ",%" PRId64 ",%" PRId64, cm.tp, cm.fn, cm.fp, cm.tn);
    for (const auto& v : {metrics.accuracy, metrics.precision, metrics.recall,
                          metrics.hazard_rate}) {
      if (v) std::printf(",%.6f", *v);
      else std::printf(",");
    }
    std::printf("\n");
  } else {
    std::printf("n=%" PRId64 "\tpredicted_animal\tpredicted_litter\n", cm.total());
    std::printf("actual_animal\t%" PRId64 "\t%" PRId64 "\n", cm.tp, cm.fn);
    std::printf("actual_litter\t%" PRId64 "\t%" PRId64 "\n", cm.fp, cm.tn);
    print_metric("accuracy", metrics.accuracy);
    print_metric("precision", metrics.precision);
    print_metric("recall", metrics.recall);
    print_metric("hazard_rate", metrics.hazard_rate);
  }
  return 0;
}

int run_predict(const std::string& model_path, const std::vector<std::string>& images) {
  const mdcnn::ModelParams params = mdcnn::load_model(model_path);
  mdcnn::model_chain_shapes(params, 3, mdcnn::kImageSize, mdcnn::kImageSize);
  int failures = 0;
  for (const std::string& path : images) {
    try {
      const mdcnn::Tensor image = mdcnn::load_image(path);
      const float p = mdcnn::model_forward_one(image, params).prob;
      std::printf("%s\t%.6f\t%s\n", path.c_str(), p, class_name(mdcnn::predict_label(p)));
    } catch (const std::exception& e) {
      std::fprintf(stderr, "error: %s\n", e.what());
      ++failures;
    }
  }
  return failures == 0 ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Binary underwater image classifier: Animal (0) vs Litter (1)"};
  app.require_subcommand(1);

  // prepare
  auto* prepare = app.add_subcommand("prepare", "Build a dataset manifest from an image tree");
  mdcnn::PrepareConfig prep_config;
  std::string prep_out;
  prepare->add_option("--data", prep_config.data_root,
                      "Data root containing animals/ and litter/ (and optionally test/)")
      ->required();
  prepare->add_option("--out", prep_out, "Manifest file to write")->required();
  prepare->add_option("--seed", prep_config.seed, "Pipeline seed")->required();
  prepare->add_option("--augment-rotations", prep_config.augment_rotations,
                      "Rotated copies per training image (90 degree steps)")
      ->check(CLI::Range(0, 3))
      ->capture_default_str();
  prepare->add_option("--augment-crops", prep_config.augment_crops,
                      "Random crops per training image")
      ->check(CLI::NonNegativeNumber)
      ->capture_default_str();
  prepare->add_option("--val-fraction", prep_config.val_fraction,
                      "Fraction of each class held out for validation")
      ->check(CLI::Validator(
          [](std::string& value) -> std::string {
            try {
              const double v = std::stod(value);
              if (v > 0.0 && v < 1.0) return {};
            } catch (...) {
            }
            return "value must lie strictly between 0 and 1";
          },
          "FLOAT in (0, 1)"))
      ->capture_default_str();

  // train
  auto* train = app.add_subcommand("train", "Train the classifier from a manifest");
  TrainCliOptions train_opt;
  train->add_option("--manifest", train_opt.manifest_path, "Manifest produced by prepare")
      ->required();
  train->add_option("--out", train_opt.out_path, "Model file to write")->required();
  train->add_option("--epochs", train_opt.config.epochs, "Training epochs")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  train->add_option("--batch-size", train_opt.config.batch_size, "Minibatch size")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  train->add_option("--lr", train_opt.config.lr, "Adam learning rate")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  train->add_option("--seed", train_opt.config.seed, "Training seed")->capture_default_str();
  train->add_option("--replicates", train_opt.replicates,
                    "Independent runs with seeds seed, seed+1, ...")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  train->add_option("--history", train_opt.history_path, "Per-epoch metrics CSV to write");

  // eval
  auto* eval = app.add_subcommand("eval", "Confusion matrix and metrics on a manifest split");
  std::string eval_model, eval_manifest, eval_split = "test", eval_format = "text";
  bool eval_skip = false;
  eval->add_option("--model", eval_model, "Model file")->required();
  eval->add_option("--manifest", eval_manifest, "Manifest file")->required();
  eval->add_option("--split", eval_split, "Split to evaluate")
      ->check(CLI::IsMember({"train", "val", "test"}))
      ->capture_default_str();
  eval->add_option("--format", eval_format, "Output format")
      ->check(CLI::IsMember({"text", "csv"}))
      ->capture_default_str();
  eval->add_flag("--skip-unreadable", eval_skip,
                 "Report unreadable images and exclude them instead of aborting");

  // predict
  auto* predict = app.add_subcommand("predict", "Classify image files");
  std::string predict_model;
  std::vector<std::string> predict_images;
  predict->add_option("--model", predict_model, "Model file")->required();
  predict->add_option("images", predict_images, "Image files to classify")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (app.got_subcommand(prepare)) {
      return run_prepare(prep_config, prep_out);
    }
    if (app.got_subcommand(train)) {
      return run_train(train_opt);
    }
    if (app.got_subcommand(eval)) {
      return run_eval(eval_model, eval_manifest, eval_split, eval_format, eval_skip);
    }
    return run_predict(predict_model, predict_images);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
}
