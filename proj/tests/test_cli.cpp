#include <gtest/gtest.h>

#include "pcaids/cli.hpp"
#include "support.hpp"

using namespace pcaids;
using testing_support::Gen;
using testing_support::read_file;
using testing_support::TempDir;
using testing_support::write_file;
using testing_support::write_matrix_csv;

namespace {
int run(std::vector<std::string> args) {
  args.insert(args.begin(), "pcaids");
  return cli::run(args);
}

struct Fixture {
  TempDir d;
  std::string train, test;
  Fixture() {
    Gen g(11);
    const Matrix all = g.correlated(2400, 5);  // one draw: both files share a distribution
    const Matrix y = all.topRows(2000);
    train = (d / "train.csv").string();
    write_matrix_csv(train, y);
    Matrix t = all.bottomRows(400);
    const Eigen::RowVectorXd sd = ((y.rowwise() - y.colwise().mean()).array().square().colwise().mean()).sqrt();
    std::vector<bool> labels(400, false);
    for (Index i = 0; i < 40; ++i) {
      t.row(i).array() += 6.0 * (i % 2 == 0 ? 1.0 : -1.0) * sd.array();
      t(i, 4) -= 12.0 * sd(4);
      labels[static_cast<std::size_t>(i)] = true;
    }
    test = (d / "test.csv").string();
    write_matrix_csv(test, t, &labels);
  }
  std::string path(const std::string& s) const { return (d / s).string(); }
  int train_into(const std::string& out, std::vector<std::string> extra = {}) const {
    std::vector<std::string> a{"train", "--input", train, "--out", out, "--boot-count", "200", "--boot-size", "500",
                               "--alpha", "0.01", "--seed", "3"};
    a.insert(a.end(), extra.begin(), extra.end());
    return run(a);
  }
};
}  // namespace

TEST(Cli, TrainScoreEvaluatePipeline) {
  Fixture f;
  ASSERT_EQ(f.train_into(f.path("m")), 0);
  for (const char* file : {"model.json", "thresholds.json", "reference.csv", "training_report.txt", "manifest.json"}) {
    EXPECT_TRUE(std::filesystem::exists(f.path("m") + "/" + file)) << file;
  }
  ASSERT_EQ(run({"score", "--model-dir", f.path("m"), "--input", f.test, "--method", "all", "--out", f.path("s"),
                 "--theta-boot-count", "100", "--theta-boot-size", "400"}),
            0);
  const auto table = read_csv_table(f.path("s") + "/scores.csv");
  EXPECT_EQ(table.rows.size(), 400u);
  EXPECT_EQ(table.comments.size(), 3u);
  EXPECT_EQ(table.comments[0].rfind("method=aad threshold=", 0), 0u);
  for (const char* c : {"row", "label", "aad_score", "aad_threshold", "aad_flag", "waad_score", "wbpca_score", "wbpca_flag"}) {
    EXPECT_GE(table.column(c), 0) << c;
  }
  ASSERT_EQ(run({"evaluate", "--scores", f.path("s") + "/scores.csv", "--out", f.path("e")}), 0);
  const std::string roc = read_file(f.path("e") + "/roc_waad.csv");
  ASSERT_EQ(roc.rfind("# auc=", 0), 0u);
  EXPECT_GT(std::stod(roc.substr(6)), 0.95);
  EXPECT_NE(read_file(f.path("e") + "/rates.txt").find("waad"), std::string::npos);
}

TEST(Cli, ArtifactsAreReproducibleAndReplayable) {
  Fixture f;
  ASSERT_EQ(f.train_into(f.path("a")), 0);
  ASSERT_EQ(run({"--threads", "1", "train", "--input", f.train, "--out", f.path("b"), "--boot-count", "200",
                 "--boot-size", "500", "--alpha", "0.01", "--seed", "3"}),
            0);
  ASSERT_EQ(run({"--replay", f.path("a") + "/manifest.json", "--out", f.path("c")}), 0);
  for (const char* file : {"model.json", "thresholds.json", "reference.csv", "training_report.txt"}) {
    const std::string a = read_file(f.path("a") + "/" + file);
    EXPECT_EQ(a, read_file(f.path("b") + "/" + file)) << file;
    EXPECT_EQ(a, read_file(f.path("c") + "/" + file)) << file;
  }
  const auto manifest = nlohmann::json::parse(read_file(f.path("a") + "/manifest.json"));
  EXPECT_EQ(manifest["format"], "pcaids-manifest");
  EXPECT_EQ(manifest["artifacts"]["model.json"].get<std::string>().size(), 64u);
}

TEST(Cli, ZeroVarianceColumnIsNamed) {
  TempDir d;
  Matrix y = Gen(1).gaussian(300, 3);
  y.col(1).setConstant(7.0);
  write_matrix_csv(d / "x.csv", y);
  testing::internal::CaptureStderr();
  EXPECT_EQ(run({"train", "--input", (d / "x.csv").string(), "--out", (d / "m").string(), "--boot-count", "100",
                 "--boot-size", "100"}),
            2);
  const std::string err = testing::internal::GetCapturedStderr();
  EXPECT_NE(err.find("f2"), std::string::npos) << err;
  EXPECT_EQ(run({"train", "--input", (d / "x.csv").string(), "--out", (d / "m").string(), "--boot-count", "100",
                 "--boot-size", "100", "--drop-constant-columns"}),
            0);
  const auto model = load_model(d / "m" / "model.json");
  EXPECT_EQ(model.feature_names, (std::vector<std::string>{"f1", "f3"}));
}

TEST(Cli, ExitCodes) {
  Fixture f;
  testing::internal::CaptureStderr();
  testing::internal::CaptureStdout();
  EXPECT_EQ(run({}), 1);
  EXPECT_EQ(run({"train"}), 1);
  EXPECT_EQ(run({"bogus"}), 1);
  EXPECT_EQ(run({"train", "--input", f.train, "--boot-count", "x"}), 1);
  EXPECT_EQ(run({"--help"}), 0);
  EXPECT_EQ(run({"train", "--input", f.path("missing.csv"), "--out", f.path("m0")}), 2);
  ASSERT_EQ(f.train_into(f.path("m")), 0);
  EXPECT_EQ(run({"score", "--model-dir", f.path("m"), "--input", f.test, "--method", "waad", "--threshold-source",
                 "chi-square", "--out", f.path("s0")}),
            1);
  std::filesystem::remove(f.path("m") + "/reference.csv");
  EXPECT_EQ(run({"score", "--model-dir", f.path("m"), "--input", f.test, "--method", "waad", "--out", f.path("s1")}), 2);
  const std::string err = testing::internal::GetCapturedStderr();
  testing::internal::GetCapturedStdout();
  EXPECT_NE(err.find("missing bootstrap artifact"), std::string::npos);
}

TEST(Cli, EmptyAffectedSetIsNotAnError) {
  Fixture f;
  ASSERT_EQ(f.train_into(f.path("m")), 0);
  const Matrix train = load_csv(f.train, FeaturePreset{}).y;
  const Matrix clean = train.colwise().mean().replicate(50, 1);
  write_matrix_csv(f.path("quiet.csv"), clean);
  testing::internal::CaptureStdout();
  EXPECT_EQ(run({"score", "--model-dir", f.path("m"), "--input", f.path("quiet.csv"), "--method", "aad", "--out",
                 f.path("s")}),
            0);
  const std::string out = testing::internal::GetCapturedStdout();
  const auto summary = nlohmann::json::parse(read_file(f.path("s") + "/score_summary.json"));
  EXPECT_TRUE(summary["methods"]["aad"]["affected"].empty());
  EXPECT_EQ(summary["methods"]["aad"]["flagged"], 0);
}

TEST(Cli, FixedComponentsAndChiSquare) {
  Fixture f;
  ASSERT_EQ(f.train_into(f.path("m")), 0);
  ASSERT_EQ(run({"score", "--model-dir", f.path("m"), "--input", f.test, "--method", "aad", "--components", "1,5",
                 "--threshold-source", "chi-square", "--out", f.path("s")}),
            0);
  const auto summary = nlohmann::json::parse(read_file(f.path("s") + "/score_summary.json"));
  EXPECT_EQ(summary["methods"]["aad"]["affected"], (std::vector<int>{1, 5}));
  EXPECT_NEAR(summary["methods"]["aad"]["threshold"].get<double>(), chi_square_quantile(0.99, 2), 1e-9);
}

TEST(Cli, EvaluatePerfectSeparation) {
  TempDir d;
  write_file(d / "s.csv", "row,label,x_score\n1,0,0.1\n2,1,5\n3,0,0.3\n4,1,2\n");
  ASSERT_EQ(run({"evaluate", "--scores", (d / "s.csv").string(), "--threshold", "1", "--out", (d / "e").string()}), 0);
  EXPECT_EQ(read_file(d / "e" / "roc_x.csv").rfind("# auc=1\n", 0), 0u);
}

TEST(Cli, DiagnoseCleanTrainingData) {
  Fixture f;
  ASSERT_EQ(f.train_into(f.path("m")), 0);
  ASSERT_EQ(run({"diagnose", "--model-dir", f.path("m"), "--input", f.train, "--out", f.path("d")}), 0);
  EXPECT_NE(read_file(f.path("d") + "/diagnosis.txt").find("no suspicious components"), std::string::npos);
  testing::internal::CaptureStderr();
  EXPECT_NE(run({"diagnose", "--model-dir", f.path("m"), "--input", f.train, "--out", f.path("m"), "--remove-and-retrain", "--yes"}), 0);
  testing::internal::GetCapturedStderr();
}

TEST(Cli, SyntheticSimulationWritesCurves) {
  TempDir d;
  testing::internal::CaptureStdout();
  ASSERT_EQ(run({"simulate", "--n", "500", "--m", "300", "--p", "6", "--k", "2", "--anomaly-count", "20",
                 "--replicates", "2", "--c", "2,3", "--shift-policy", "first", "--boot-count", "100", "--out",
                 (d / "sim").string()}),
            0);
  testing::internal::GetCapturedStdout();
  const std::string roc = read_file(d / "sim" / "roc_c2.csv");
  EXPECT_NE(roc.find("fpr,tpr_aad,tpr_waad,tpr_wbpca,tpr_true"), std::string::npos);
  EXPECT_TRUE(std::filesystem::exists(d / "sim" / "roc_c3.csv"));
  const auto s = nlohmann::json::parse(read_file(d / "sim" / "summary.json"));
  EXPECT_FALSE(s.empty());
}
