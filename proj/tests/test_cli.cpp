#include <gtest/gtest.h>

#include <cstdlib>
#include <fstream>
#include <string>

#include "mdcnn/manifest.hpp"
#include "mdcnn/model.hpp"
#include "mdcnn/model_io.hpp"

#include "test_util.hpp"

using testutil::TempDir;

namespace {

struct CmdResult {
  int exit_code = -1;
  std::string out;
  std::string err;
};

CmdResult run_cli(const TempDir& dir, const std::string& args) {
  const std::string out_path = (dir / "_stdout.txt").string();
  const std::string err_path = (dir / "_stderr.txt").string();
  const std::string cmd =
      std::string(MDCNN_CLI_PATH) + " " + args + " > " + out_path + " 2> " + err_path;
  const int status = std::system(cmd.c_str());
  CmdResult result;
  result.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  result.out = testutil::read_file(out_path);
  result.err = testutil::read_file(err_path);
  return result;
}

void write_tiny_corpus(const TempDir& dir, int per_class) {
  namespace fs = std::filesystem;
  fs::create_directories(dir.path() / "data" / "animals");
  fs::create_directories(dir.path() / "data" / "litter");
  for (int i = 0; i < per_class; ++i) {
    mdcnn::write_png((dir.path() / "data" / "animals" / ("a" + std::to_string(i) + ".png")).string(),
                     testutil::speckled(testutil::disc_image(48), 10 + i));
    mdcnn::write_png((dir.path() / "data" / "litter" / ("l" + std::to_string(i) + ".png")).string(),
                     testutil::speckled(testutil::square_image(48), 20 + i));
  }
}

}  // namespace

TEST(CliHelp, SubcommandHelpListsFlagsWithDefaults) {
  TempDir dir("cli");
  const auto train_help = run_cli(dir, "train --help");
  EXPECT_EQ(train_help.exit_code, 0);
  for (const char* needle : {"--manifest", "--out", "--epochs", "95", "--batch-size", "32",
                             "--lr", "0.001", "--seed", "--replicates", "--history"}) {
    EXPECT_NE(train_help.out.find(needle), std::string::npos) << needle;
  }
  const auto prep_help = run_cli(dir, "prepare --help");
  EXPECT_EQ(prep_help.exit_code, 0);
  for (const char* needle : {"--data", "--seed", "--augment-rotations", "--augment-crops",
                             "--val-fraction", "0.1"}) {
    EXPECT_NE(prep_help.out.find(needle), std::string::npos) << needle;
  }
  EXPECT_EQ(run_cli(dir, "eval --help").exit_code, 0);
  EXPECT_EQ(run_cli(dir, "predict --help").exit_code, 0);
}

TEST(CliUsage, ErrorsExitWithTwo) {
  TempDir dir("cli");
  EXPECT_EQ(run_cli(dir, "").exit_code, 2);
  EXPECT_EQ(run_cli(dir, "train").exit_code, 2);  // missing required flags
  EXPECT_EQ(run_cli(dir, "train --manifest x --out y --epochs 0").exit_code, 2);
  EXPECT_EQ(run_cli(dir, "prepare --data x --out y --seed 1 --frobnicate").exit_code, 2);
  EXPECT_EQ(run_cli(dir, "prepare --data x --out y --seed 1 --val-fraction 0").exit_code, 2);
  EXPECT_EQ(run_cli(dir, "bogus-subcommand").exit_code, 2);
}

TEST(CliPrepare, TinyCorpusGivesBalancedManifest) {
  TempDir dir("cli");
  write_tiny_corpus(dir, 4);
  const std::string manifest_path = (dir / "set.manifest").string();
  const auto result = run_cli(dir, "prepare --data " + (dir / "data").string() + " --out " +
                                       manifest_path + " --seed 9");
  ASSERT_EQ(result.exit_code, 0) << result.err;
  EXPECT_NE(result.out.find("split\tclass\tcount"), std::string::npos);

  const auto manifest = mdcnn::read_manifest(manifest_path);
  EXPECT_GE(manifest.samples.size(), 8u);
  EXPECT_EQ(manifest.count(mdcnn::Split::train, 0), manifest.count(mdcnn::Split::train, 1));
}

TEST(CliPrepare, RerunsAreByteIdentical) {
  TempDir dir("cli");
  write_tiny_corpus(dir, 4);
  const std::string m1 = (dir / "one.manifest").string();
  const std::string m2 = (dir / "two.manifest").string();
  const std::string base = "prepare --data " + (dir / "data").string() +
                           " --seed 3 --augment-rotations 1 --out ";
  ASSERT_EQ(run_cli(dir, base + m1).exit_code, 0);
  ASSERT_EQ(run_cli(dir, base + m2).exit_code, 0);
  const std::string a = testutil::read_file(m1);
  const std::string b = testutil::read_file(m2);
  ASSERT_FALSE(a.empty());
  EXPECT_EQ(a, b);
}

TEST(CliPrepare, MissingClassDirectoryFailsLoudly) {
  TempDir dir("cli");
  std::filesystem::create_directories(dir.path() / "data" / "animals");
  mdcnn::write_png((dir.path() / "data" / "animals" / "a.png").string(),
                   testutil::disc_image(32));
  const auto result = run_cli(dir, "prepare --data " + (dir / "data").string() + " --out " +
                                       (dir / "x.manifest").string() + " --seed 1");
  EXPECT_EQ(result.exit_code, 1);
  EXPECT_NE(result.err.find("litter"), std::string::npos);
}

TEST(CliTrainEvalPredict, EndToEndOnTheFixture) {
  TempDir dir("cli");
  const auto manifest = testutil::write_fixture_corpus(dir.path(), 2, 1);
  const std::string manifest_path = (dir / "fixture.manifest").string();
  mdcnn::write_manifest(manifest, manifest_path);

  const std::string model_path = (dir / "model.mdcnn").string();
  const std::string history_path = (dir / "history.csv").string();
  const auto train_result =
      run_cli(dir, "train --manifest " + manifest_path + " --out " + model_path +
                       " --epochs 2 --seed 4 --history " + history_path);
  ASSERT_EQ(train_result.exit_code, 0) << train_result.err;
  EXPECT_TRUE(std::filesystem::exists(model_path));
  EXPECT_TRUE(std::filesystem::exists(history_path));
  EXPECT_NE(train_result.out.find("final\ttrain_loss="), std::string::npos);
  EXPECT_NE(train_result.err.find("epoch 1:"), std::string::npos);

  const auto eval_result =
      run_cli(dir, "eval --model " + model_path + " --manifest " + manifest_path +
                       " --split val --format csv");
  ASSERT_EQ(eval_result.exit_code, 0) << eval_result.err;
  EXPECT_EQ(eval_result.out.rfind("tp,fn,fp,tn,accuracy,precision,recall,hazard_rate\n", 0), 0u);

  const auto eval_text =
      run_cli(dir, "eval --model " + model_path + " --manifest " + manifest_path + " --split val");
  ASSERT_EQ(eval_text.exit_code, 0);
  EXPECT_NE(eval_text.out.find("actual_animal"), std::string::npos);
  EXPECT_NE(eval_text.out.find("hazard_rate"), std::string::npos);

  // The fixture manifest has no test split; the default split must fail.
  const auto eval_missing =
      run_cli(dir, "eval --model " + model_path + " --manifest " + manifest_path);
  EXPECT_EQ(eval_missing.exit_code, 1);
  EXPECT_NE(eval_missing.err.find("test"), std::string::npos);

  const std::string image = (dir / "animals" / "a0.png").string();
  const auto predict_result =
      run_cli(dir, "predict --model " + model_path + " " + image + " " + image);
  ASSERT_EQ(predict_result.exit_code, 0) << predict_result.err;
  // Duplicate inputs give identical lines, in argument order.
  const auto first_newline = predict_result.out.find('\n');
  ASSERT_NE(first_newline, std::string::npos);
  const std::string line1 = predict_result.out.substr(0, first_newline + 1);
  EXPECT_EQ(predict_result.out, line1 + line1);
}

TEST(CliTrain, FiftyEpochsOverfitTheFixtureAndPrintPerfectAccuracy) {
  TempDir dir("cli");
  const auto manifest = testutil::write_fixture_corpus(dir.path(), 4, 1);
  const std::string manifest_path = (dir / "fixture.manifest").string();
  mdcnn::write_manifest(manifest, manifest_path);
  const std::string model_path = (dir / "model.mdcnn").string();
  const auto result = run_cli(dir, "train --manifest " + manifest_path + " --out " + model_path +
                                       " --epochs 50 --seed 1");
  ASSERT_EQ(result.exit_code, 0) << result.err;
  EXPECT_TRUE(std::filesystem::exists(model_path));
  EXPECT_NE(result.out.find("train_acc=1.00"), std::string::npos) << result.out;

  // A model that separates the fixture perfectly evaluates to accuracy 1
  // and hazard 0 on the split it overfit.
  const auto eval_result = run_cli(dir, "eval --model " + model_path + " --manifest " +
                                            manifest_path + " --split train");
  ASSERT_EQ(eval_result.exit_code, 0) << eval_result.err;
  EXPECT_NE(eval_result.out.find("accuracy\t1.000000"), std::string::npos) << eval_result.out;
  EXPECT_NE(eval_result.out.find("hazard_rate\t0.000000"), std::string::npos) << eval_result.out;
}

TEST(CliTrain, ReplicatesWriteSuffixedModelsAndMeansLine) {
  TempDir dir("cli");
  const auto manifest = testutil::write_fixture_corpus(dir.path(), 1, 0);
  const std::string manifest_path = (dir / "fixture.manifest").string();
  mdcnn::write_manifest(manifest, manifest_path);
  const std::string model_path = (dir / "model.mdcnn").string();
  const auto result = run_cli(dir, "train --manifest " + manifest_path + " --out " + model_path +
                                       " --epochs 1 --seed 6 --replicates 2");
  ASSERT_EQ(result.exit_code, 0) << result.err;
  EXPECT_TRUE(std::filesystem::exists(model_path + ".r0"));
  EXPECT_TRUE(std::filesystem::exists(model_path + ".r1"));
  EXPECT_FALSE(std::filesystem::exists(model_path));
  EXPECT_NE(result.out.find("means\ttrain_loss="), std::string::npos);
}

TEST(CliPredict, ZeroModelUsesTieRuleAndPartialFailuresExitNonzero) {
  TempDir dir("cli");
  const auto manifest = testutil::write_fixture_corpus(dir.path(), 1, 0);
  (void)manifest;
  mdcnn::Rng rng(1);
  const mdcnn::ModelParams zero =
      mdcnn::ModelParams::zero_like(mdcnn::init_params(rng, mdcnn::ModelArch{}));
  const std::string model_path = (dir / "zero.mdcnn").string();
  mdcnn::save_model(zero, model_path);

  const std::string image = (dir / "animals" / "a0.png").string();
  const auto ok = run_cli(dir, "predict --model " + model_path + " " + image);
  ASSERT_EQ(ok.exit_code, 0) << ok.err;
  EXPECT_NE(ok.out.find("\t0.500000\tAnimal"), std::string::npos);

  const auto partial = run_cli(dir, "predict --model " + model_path + " " + image + " " +
                                        (dir / "nope.png").string());
  EXPECT_EQ(partial.exit_code, 1);
  EXPECT_NE(partial.out.find("0.500000"), std::string::npos);  // valid file still classified
  EXPECT_NE(partial.err.find("nope.png"), std::string::npos);
}

TEST(CliEval, WrongArchitectureModelNamesTheTensor) {
  TempDir dir("cli");
  const auto manifest = testutil::write_fixture_corpus(dir.path(), 1, 1);
  const std::string manifest_path = (dir / "fixture.manifest").string();
  mdcnn::write_manifest(manifest, manifest_path);

  mdcnn::Rng rng(2);
  mdcnn::ModelParams params = mdcnn::init_params(rng, mdcnn::ModelArch{});
  params.head_weights = mdcnn::Tensor({64}, 0.0f);  // wrong flatten length
  const std::string model_path = (dir / "wrong.mdcnn").string();
  mdcnn::save_model(params, model_path);

  const auto result = run_cli(dir, "eval --model " + model_path + " --manifest " +
                                       manifest_path + " --split val");
  EXPECT_EQ(result.exit_code, 1);
  EXPECT_NE(result.err.find("head.weight"), std::string::npos);
}
