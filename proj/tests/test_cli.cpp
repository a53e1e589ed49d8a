#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>
#include <unistd.h>

#include "gammareg/cli.hpp"
#include "support.hpp"

using namespace gammareg;
using namespace gammareg::cli;
namespace fs = std::filesystem;

namespace {

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
    dir_ = fs::temp_directory_path() / ("gammareg_cli_" + std::to_string(::getpid()) + "_" + info->name());
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  std::string path(const std::string& name) const { return (dir_ / name).string(); }

  int call(std::vector<std::string> args) {
    out_.str("");
    err_.str("");
    return run(std::move(args), out_, err_);
  }

  void write(const std::string& name, const std::string& body) const { std::ofstream(path(name)) << body; }

  static std::string slurp(const std::string& p) {
    std::ifstream f(p);
    std::stringstream s;
    s << f.rdbuf();
    return s.str();
  }

  fs::path dir_;
  std::ostringstream out_, err_;
};

std::vector<double> coefficient_column(const std::string& csv_path) {
  std::ifstream f(csv_path);
  std::string line;
  std::getline(f, line);
  std::vector<double> v;
  while (std::getline(f, line)) v.push_back(*parse_double(split_commas(line)[1]));
  return v;
}

}  // namespace

TEST(Csv, ParsesHeaderAndRows) {
  std::istringstream in("a, y ,b\n1,2,3\n\n4.5,-1e-3,+7\n");
  const CsvTable t = read_csv(in);
  EXPECT_EQ(t.header, (std::vector<std::string>{"a", "y", "b"}));
  ASSERT_EQ(t.rows.size(), 2u);
  EXPECT_EQ(t.rows[1][1], -1e-3);
  EXPECT_EQ(t.rows[1][2], 7.0);
  const LabeledDataset d = to_dataset(t, "y");
  EXPECT_EQ(d.predictors, (std::vector<std::string>{"a", "b"}));
  EXPECT_EQ(d.data.x(1, 0), 4.5);
  EXPECT_EQ(d.data.y(0), 2.0);
}

TEST(Csv, ErrorsNameRowAndColumn) {
  std::istringstream in("x1,y\n1,2\n3,abc\n");
  try {
    read_csv(in, "data.csv");
    FAIL() << "expected InputError";
  } catch (const InputError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("row 2"), std::string::npos) << msg;
    EXPECT_NE(msg.find("column 'y'"), std::string::npos) << msg;
  }
  std::istringstream nan_in("x1,y\n1,nan\n");
  EXPECT_THROW(read_csv(nan_in), InputError);
  std::istringstream ragged("x1,y\n1,2,3\n");
  EXPECT_THROW(read_csv(ragged), InputError);
  std::istringstream empty("");
  EXPECT_THROW(read_csv(empty), InputError);
}

TEST(Csv, MissingResponseIsInputError) {
  std::istringstream in("x1,x2\n1,2\n3,4\n");
  EXPECT_THROW(to_dataset(read_csv(in), "y"), InputError);
}

TEST(Config, ReadsKeyValueLinesAndRejectsUnknownKeys) {
  std::istringstream in("# comment\ngamma = 0.3\ncommand = fit\nresult.beta0 = 1\nfolds=5 # trailing\n");
  const auto kv = read_config(in);
  EXPECT_EQ(kv.at("gamma"), "0.3");
  EXPECT_EQ(kv.at("folds"), "5");
  EXPECT_EQ(kv.count("command"), 0u);
  std::istringstream bad("gama = 0.3\n");
  EXPECT_THROW(read_config(bad), ConfigError);
  std::istringstream noeq("gamma 0.3\n");
  EXPECT_THROW(read_config(noeq), ConfigError);
  RunConfig c;
  EXPECT_THROW(find_key("folds").set(c, "five"), ConfigError);
  EXPECT_THROW(find_key("loo").set(c, "maybe"), ConfigError);
}

TEST_F(CliTest, MissingResponseExitsWithInputError) {
  write("d.csv", "x1,x2\n1,2\n3,4\n5,7\n");
  EXPECT_EQ(call({"fit", "--input", path("d.csv"), "--output", path("o")}), kInputError);
  EXPECT_NE(err_.str().find("response column"), std::string::npos);
}

TEST_F(CliTest, MalformedCellExitsWithInputError) {
  write("d.csv", "x1,y\n1,2\n3,oops\n");
  EXPECT_EQ(call({"fit", "--input", path("d.csv"), "--output", path("o")}), kInputError);
  EXPECT_NE(err_.str().find("row 2, column 'y'"), std::string::npos) << err_.str();
}

TEST_F(CliTest, MissingFileExitsWithInputError) {
  EXPECT_EQ(call({"fit", "--input", path("nope.csv"), "--output", path("o")}), kInputError);
}

TEST_F(CliTest, ConfigErrorsExitWithFour) {
  EXPECT_EQ(call({"bench", "--replications", "0", "--output", path("o")}), kConfigError);
  EXPECT_EQ(call({"divcheck", "--tol_scale", "-1"}), kConfigError);
  EXPECT_EQ(call({"simulate", "--pattern", "c", "--output", path("o")}), kConfigError);
  EXPECT_EQ(call({"simulate", "--eps", "0.7", "--output", path("o")}), kConfigError);
  EXPECT_EQ(call({"fit", "--select", "aic", "--input", path("x.csv")}), kConfigError);
  EXPECT_EQ(call({"fit", "--init", "lts", "--input", path("x.csv")}), kConfigError);
  EXPECT_EQ(call({"fit", "--gamma", "0", "--input", path("x.csv")}), kConfigError);
  EXPECT_EQ(call({"fit", "--bogus", "1"}), kConfigError);
  EXPECT_EQ(call({}), kConfigError);
  write("bad.cfg", "gamma = 0.2\nunknown_key = 1\n");
  EXPECT_EQ(call({"fit", "--config", path("bad.cfg")}), kConfigError);
}

TEST_F(CliTest, DegenerateFitExitsWithThree) {
  // a single predictor that fits y exactly drives sigma2 to zero
  write("d.csv", "x1,y\n1,2\n2,4\n3,6\n4,8\n5,10\n6,12\n");
  EXPECT_EQ(call({"fit", "--input", path("d.csv"), "--output", path("o"), "--init", "zero"}), kNumericalFailure);
}

TEST_F(CliTest, DivcheckPassesAtDefaults) {
  EXPECT_EQ(call({"divcheck", "--random_models", "4"}), kOk);
  EXPECT_NE(out_.str().find("all checks passed"), std::string::npos);
  EXPECT_EQ(out_.str().find("FAIL"), std::string::npos);
}

TEST_F(CliTest, DivcheckReportsFailureWithExitOne) {
  EXPECT_EQ(call({"divcheck", "--random_models", "2", "--tol_scale", "1e-20"}), kCheckFailed);
  EXPECT_NE(out_.str().find("FAIL"), std::string::npos);
}

TEST_F(CliTest, SimulateWritesExpectedFiles) {
  ASSERT_EQ(call({"simulate", "--n", "30", "--p", "6", "--eps", "0.3", "--seed", "5", "--output", path("sim")}), kOk);
  for (const char* f : {"train.csv", "test.csv", "truth.csv", "contaminated.csv", "manifest.txt"})
    EXPECT_TRUE(fs::exists(dir_ / "sim" / f)) << f;
  const CsvTable train = read_csv_file(path("sim/train.csv"));
  EXPECT_EQ(train.header.back(), "y");
  EXPECT_EQ(train.rows.size(), 30u);
  EXPECT_NE(slurp(path("sim/manifest.txt")).find("result.contaminated_rows = 9"), std::string::npos);
}

TEST_F(CliTest, FitRoundTripMatchesInMemoryPipeline) {
  ASSERT_EQ(call({"simulate", "--n", "40", "--p", "8", "--eps", "0.1", "--seed", "2", "--output", path("sim")}), kOk);
  ASSERT_EQ(call({"fit", "--input", path("sim/train.csv"), "--output", path("fit"), "--lambda", "0.05", "--gamma",
                  "0.2", "--init", "ransac", "--seed", "2"}),
            kOk)
      << err_.str();

  RunConfig c;
  c.n = 40;
  c.p = 8;
  c.eps = 0.1;
  c.seed = 2;
  c.lambda = 0.05;
  c.gamma = 0.2;
  c.init = "ransac";
  const SimulatedData sim = generate(simulation_spec(c));
  const FitOutcome mem = fit_pipeline(sim.train, c, false);
  const auto file = coefficient_column(path("fit/coefficients.csv"));
  ASSERT_EQ(file.size(), 9u);
  EXPECT_EQ(file[0], mem.fit.params.beta0);
  for (Eigen::Index j = 0; j < 8; ++j) EXPECT_EQ(file[static_cast<std::size_t>(j + 1)], mem.fit.params.beta(j));
}

TEST_F(CliTest, ManifestReplaysTheRun) {
  ASSERT_EQ(call({"simulate", "--n", "40", "--p", "6", "--seed", "4", "--output", path("sim")}), kOk);
  ASSERT_EQ(call({"cv", "--input", path("sim/train.csv"), "--output", path("a"), "--folds", "4", "--grid_size", "6",
                  "--init", "zero"}),
            kOk)
      << err_.str();
  const std::string manifest = slurp(path("a/manifest.txt"));
  EXPECT_NE(manifest.find("select = rocv"), std::string::npos);
  EXPECT_NE(manifest.find("result.selected_lambda"), std::string::npos);
  EXPECT_TRUE(fs::exists(dir_ / "a" / "cv_path.csv"));

  ASSERT_EQ(call({"fit", "--config", path("a/manifest.txt"), "--output", path("b")}), kOk) << err_.str();
  EXPECT_EQ(slurp(path("a/coefficients.csv")), slurp(path("b/coefficients.csv")));
}

TEST_F(CliTest, CommandLineOverridesConfigFile) {
  write("d.csv", "x1,x2,y\n0.1,1,1.3\n0.5,-1,0.2\n-0.3,0.4,0.9\n1.2,0.3,2.9\n-1,0.8,-0.4\n0.7,-0.6,0.8\n0.2,0.1,1.1\n");
  write("run.cfg", "lambda = 100\ninit = zero\n");
  ASSERT_EQ(call({"fit", "--config", path("run.cfg"), "--input", path("d.csv"), "--output", path("o"), "--lambda",
                  "0"}),
            kOk)
      << err_.str();
  EXPECT_NE(slurp(path("o/manifest.txt")).find("lambda = 0\n"), std::string::npos);
  EXPECT_NE(slurp(path("o/manifest.txt")).find("init = zero\n"), std::string::npos);
}

TEST_F(CliTest, ZeroLambdaFitIsNearOls) {
  testing_support::Rng rng(3);
  const Dataset d = testing_support::random_dataset(rng, 60, 3, 1.0);
  write_dataset_csv(path("d.csv"), d);
  ASSERT_EQ(call({"fit", "--input", path("d.csv"), "--output", path("o"), "--gamma", "0.001", "--tol_loss", "1e-13",
                  "--tol_param", "1e-11", "--max_mm_iters", "5000"}),
            kOk)
      << err_.str();
  const Vector ols = testing_support::ols_normal_equations(d.x, d.y);
  const auto file = coefficient_column(path("o/coefficients.csv"));
  for (std::size_t k = 0; k < 4; ++k) EXPECT_NEAR(file[k], ols(static_cast<Eigen::Index>(k)), 1e-3);
}

TEST_F(CliTest, BenchHonorsMethodList) {
  ASSERT_EQ(call({"bench", "--methods", "lasso", "--replications", "2", "--n", "30", "--p", "12", "--folds", "3",
                  "--grid_size", "5", "--output", path("b")}),
            kOk)
      << err_.str();
  const CsvTable t = [&] {
    std::ifstream f(path("b/bench.csv"));
    std::string line;
    CsvTable out;
    std::getline(f, line);
    out.header = split_commas(line);
    while (std::getline(f, line)) out.rows.push_back({});
    return out;
  }();
  EXPECT_EQ(t.header.front(), "method");
  EXPECT_EQ(t.rows.size(), 1u);
  EXPECT_EQ(call({"bench", "--methods", "svm", "--output", path("c")}), kConfigError);
}

TEST_F(CliTest, HelpExitsCleanly) {
  EXPECT_EQ(call({"--help"}), kOk);
  EXPECT_NE(out_.str().find("divcheck"), std::string::npos);
  EXPECT_EQ(call({"fit", "--help"}), kOk);
  EXPECT_NE(out_.str().find("--gamma0"), std::string::npos);
}
