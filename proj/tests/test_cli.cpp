#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <json.hpp>
#include <sstream>

#include "gls/cli.hpp"
#include "gls/config.hpp"
#include "gls/csv_io.hpp"
#include "gls/error.hpp"

namespace gls {
namespace {
namespace fs = std::filesystem;

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("gls_cli_test_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

int run_cli(std::vector<std::string> args, std::string* err = nullptr) {
  args.insert(args.begin(), "gls_adapt");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream captured;
  auto* old = std::cerr.rdbuf(captured.rdbuf());
  auto* old_out = std::cout.rdbuf(captured.rdbuf());
  const int code = cli::run(static_cast<int>(argv.size()), argv.data());
  std::cerr.rdbuf(old);
  std::cout.rdbuf(old_out);
  if (err) *err = captured.str();
  return code;
}

std::size_t count_lines(const fs::path& p) {
  std::ifstream in(p);
  std::size_t n = 0;
  std::string line;
  while (std::getline(in, line)) ++n;
  return n;
}

// ---------------------------------------------------------------------------
// config

TEST(KeyValueConfig, TypedValues) {
  std::istringstream in("# comment\n epochs = 12  # trailing\n\nlr=0.5\nflag = yes\ndist = 0.5, 0.25,0.25\nname = iwdan\n");
  const auto c = KeyValueConfig::parse(in, "t.cfg");
  EXPECT_EQ(c.get_int("epochs", 0), 12);
  EXPECT_EQ(c.get_double("lr", 0), 0.5);
  EXPECT_TRUE(c.get_bool("flag", false));
  EXPECT_EQ(c.get_doubles("dist", {}), (std::vector<double>{0.5, 0.25, 0.25}));
  EXPECT_EQ(c.get_string("name", ""), "iwdan");
  EXPECT_EQ(c.get_int("missing", 4), 4);
}

TEST(KeyValueConfig, ParseErrorsNameTheLine) {
  std::istringstream in("a = 1\n\nnot an assignment\n");
  try {
    KeyValueConfig::parse(in, "x.cfg");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::ParseError);
    EXPECT_NE(std::string(e.what()).find("x.cfg:3"), std::string::npos) << e.what();
  }
  std::istringstream dup("a = 1\na = 2\n");
  try {
    KeyValueConfig::parse(dup, "d.cfg");
    FAIL();
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("d.cfg:2"), std::string::npos);
  }
}

TEST(KeyValueConfig, BadValueIsConfigInvalid) {
  std::istringstream in("epochs = ten\n");
  const auto c = KeyValueConfig::parse(in, "c.cfg");
  try {
    c.get_int("epochs", 1);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::ConfigInvalid);
    EXPECT_NE(std::string(e.what()).find("c.cfg:1"), std::string::npos);
  }
  EXPECT_THROW(c.require_known({"lr"}), Error);
}

TEST(KeyValueConfig, OverridesWin) {
  std::istringstream in("epochs = 3\n");
  auto c = KeyValueConfig::parse(in, "c.cfg");
  c.set_assignment("epochs=9");
  EXPECT_EQ(c.get_int("epochs", 0), 9);
  EXPECT_THROW(c.set_assignment("=3"), Error);
}

// ---------------------------------------------------------------------------
// csv

TEST(Csv, SixSignificantDigits) {
  EXPECT_EQ(format_number(1.0 / 3.0), "0.333333");
  EXPECT_EQ(format_number(123456789.0), "1.23457e+08");
  EXPECT_EQ(std::stod(format_number(0.1 + 0.2, Precision::Full)), 0.1 + 0.2);
}

TEST(Csv, DatasetRoundTrip) {
  DomainSpec s;
  s.label_dist = {0.2, 0.3, 0.5};
  s.n = 50;
  const auto d = make_gaussian_domain(s);
  std::stringstream io;
  write_dataset_csv(io, d, Precision::Full);
  const auto back = read_dataset_csv(io, "mem", 3);
  EXPECT_EQ(back.features, d.features);
  EXPECT_EQ(back.labels, d.labels);
  std::stringstream header;
  write_dataset_csv(header, d);
  std::string first;
  std::getline(header, first);
  EXPECT_EQ(first, "feature_0,feature_1,label");
}

TEST(Csv, MalformedRowNamesLine) {
  std::istringstream in("feature_0,label\n1.0,0\n\n2.0,x\n");
  try {
    read_dataset_csv(in, "data.csv");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::ParseError);
    EXPECT_NE(std::string(e.what()).find("data.csv:4"), std::string::npos) << e.what();
  }
  std::istringstream ragged("a,b\n1,2\n3\n");
  EXPECT_THROW(read_numeric_csv(ragged, "r.csv"), Error);
}

TEST(Csv, TraceAndBoundsLayout) {
  TrainTrace t;
  t.w_true = WeightVector(std::vector<double>{0.5, 2.0});
  EpochRecord e;
  e.epoch = 1;
  e.w = WeightVector(std::vector<double>{1.0, 1.0});
  BoundReport r = make_report("lower_bound_pred", Relation::AtLeast, 0.1, 0.0, 0.02);
  r.applicable = false;
  e.bounds.push_back(r);
  t.epochs.push_back(e);
  std::ostringstream trace, bounds;
  write_trace_csv(trace, t);
  write_bounds_csv(bounds, t);
  EXPECT_EQ(trace.str().substr(0, trace.str().find('\n')), "epoch,acc_src,acc_tgt,loss_da,loss_c,w_0,w_1,w_dist,jsd_label");
  EXPECT_NE(bounds.str().find("lower_bound_pred,1,0.1,0,na,"), std::string::npos) << bounds.str();
}

TEST(Csv, SweepGain) {
  std::ostringstream out;
  write_sweep_csv(out, {{0, 0.01, 0.8, 0.85}});
  EXPECT_EQ(out.str(), "task_id,jsd,acc_base,acc_variant,gain\n0,0.01,0.8,0.85,0.05\n");
}

// ---------------------------------------------------------------------------
// commands

TEST(Cli, GenerateIsDeterministic) {
  const auto a = scratch("gen_a"), b = scratch("gen_b");
  ASSERT_EQ(run_cli({"generate", "--seed", "4", "-o", a.string()}), 0);
  ASSERT_EQ(run_cli({"generate", "--seed", "4", "-o", b.string()}), 0);
  EXPECT_EQ(slurp(a / "source.csv"), slurp(b / "source.csv"));
  EXPECT_EQ(slurp(a / "target.csv"), slurp(b / "target.csv"));
  EXPECT_EQ(slurp(a / "manifest.json"), slurp(b / "manifest.json"));
  const auto m = nlohmann::json::parse(slurp(a / "manifest.json"));
  EXPECT_TRUE(m.contains("jsd"));
  EXPECT_EQ(m["k"], 3);
}

TEST(Cli, SubsampleManifestMatchesFiles) {
  const auto dir = scratch("gen_sub");
  ASSERT_EQ(run_cli({"generate", "--subsample", "0.3", "-o", dir.string()}), 0);
  const auto m = nlohmann::json::parse(slurp(dir / "manifest.json"));
  std::ifstream s(dir / "source.csv"), t(dir / "target.csv");
  const auto src = read_dataset_csv(s, "source", 3);
  const auto tgt = read_dataset_csv(t, "target", 3);
  const double j = jsd(src.label_distribution(), tgt.label_distribution());
  EXPECT_GT(j, 0.0);
  EXPECT_NEAR(m["jsd"].get<double>(), j, 1e-6);
}

TEST(Cli, TrainWritesTracesAndSummary) {
  const auto dir = scratch("train");
  ASSERT_EQ(run_cli({"train", "--algorithms", "none,dann,iwdan", "--seeds", "1,2", "--epochs", "2", "-s",
                     "batches_per_epoch=5", "-s", "n_source=300", "-s", "n_target=300", "-o", dir.string()}),
            0);
  for (const char* name : {"none", "dann", "iwdan"})
    for (int seed : {1, 2}) {
      const auto stem = std::string(name) + "_seed" + std::to_string(seed);
      EXPECT_TRUE(fs::exists(dir / ("trace_" + stem + ".csv"))) << stem;
      EXPECT_EQ(count_lines(dir / ("trace_" + stem + ".csv")), 3u);
      EXPECT_TRUE(fs::exists(dir / ("bounds_" + stem + ".csv")));
    }
  const std::string summary = slurp(dir / "summary.csv");
  EXPECT_EQ(summary.substr(0, summary.find('\n')), "algorithm,seed,best_acc_tgt,final_acc_tgt,final_w_dist,beats_base");
  EXPECT_NE(summary.find("\nnone,mean,"), std::string::npos);
  EXPECT_NE(summary.find("\niwdan,mean,"), std::string::npos);
  EXPECT_NE(summary.find(",na\n"), std::string::npos);
  EXPECT_FALSE(fs::exists(dir / "summary.raw.csv"));
}

TEST(Cli, ConfigFileAndFlags) {
  const auto dir = scratch("cfg");
  {
    std::ofstream cfg(dir / "run.cfg");
    cfg << "algorithms = dann\nepochs = 7\nbatches_per_epoch = 3\nn_source = 200\nn_target = 200\n";
  }
  ASSERT_EQ(run_cli({"train", "-c", (dir / "run.cfg").string(), "--epochs", "2", "--full-precision", "-o",
                     (dir / "out").string()}),
            0);
  EXPECT_EQ(count_lines(dir / "out" / "trace_dann_seed0.csv"), 3u);
  EXPECT_TRUE(fs::exists(dir / "out" / "trace_dann_seed0.raw.csv"));
}

TEST(Cli, ErrorsExitNonzero) {
  const auto dir = scratch("err");
  {
    std::ofstream cfg(dir / "bad.cfg");
    cfg << "epochs = 2\n\nthis line is wrong\n";
  }
  std::string err;
  EXPECT_NE(run_cli({"train", "-c", (dir / "bad.cfg").string()}, &err), 0);
  EXPECT_NE(err.find("bad.cfg:3"), std::string::npos) << err;
  EXPECT_NE(run_cli({"train", "-s", "unknown_key=1"}, &err), 0);
  EXPECT_NE(run_cli({"train", "--algorithms", "nope"}, &err), 0);
  EXPECT_NE(run_cli({"generate", "-s", "k=1"}, &err), 0);
  EXPECT_NE(run_cli({}, &err), 0);
}

TEST(Cli, SeedFromEnvironment) {
  ::setenv("GLS_ADAPT_SEED", "42", 1);
  EXPECT_EQ(cli::default_seed(), 42u);
  KeyValueConfig c;
  EXPECT_EQ(cli::train_config_from(c).seed, 42u);
  c.set("seed", "3");
  EXPECT_EQ(cli::train_config_from(c).seed, 3u);
  ::unsetenv("GLS_ADAPT_SEED");
  EXPECT_EQ(cli::default_seed(), 0u);
}

void write_file(const fs::path& p, const std::string& body) {
  std::ofstream out(p);
  out << body;
}

TEST(Cli, EstimateWeightsRecoversRatio) {
  const auto dir = scratch("est");
  // Perfect one-hot predictions: 6/2/2 source, 2/2/6 target.
  std::string sp = "p0,p1,p2\n", sl = "label\n", tp = "p0,p1,p2\n";
  const char* rows[3] = {"1,0,0\n", "0,1,0\n", "0,0,1\n"};
  const int src_counts[3] = {6, 2, 2}, tgt_counts[3] = {2, 2, 6};
  for (int y = 0; y < 3; ++y) {
    for (int i = 0; i < src_counts[y]; ++i) sp += rows[y], sl += std::to_string(y) + "\n";
    for (int i = 0; i < tgt_counts[y]; ++i) tp += rows[y];
  }
  write_file(dir / "sp.csv", sp);
  write_file(dir / "sl.csv", sl);
  write_file(dir / "tp.csv", tp);
  ASSERT_EQ(run_cli({"estimate-weights", "--source-predictions", (dir / "sp.csv").string(), "--source-labels",
                     (dir / "sl.csv").string(), "--target-predictions", (dir / "tp.csv").string(), "--full-precision",
                     "-o", dir.string()}),
            0);
  std::ifstream in(dir / "weights.raw.csv");
  const auto t = read_numeric_csv(in, "weights");
  const double expect[3] = {1.0 / 3.0, 1.0, 3.0};
  for (int y = 0; y < 3; ++y) {
    EXPECT_NEAR(t.values(y, 1), expect[y], 1e-6);
    EXPECT_NEAR(t.values(y, 2), expect[y], 1e-6);
  }
  std::ifstream conf_in(dir / "confusion.raw.csv");
  const auto conf = read_numeric_csv(conf_in, "confusion");
  ASSERT_EQ(conf.values.cols(), 9);
  EXPECT_EQ(conf.header[1], "c_0_1");
  EXPECT_DOUBLE_EQ(conf.values(0, 0), 0.6);  // c_0_0
  EXPECT_DOUBLE_EQ(conf.values(0, 8), 0.2);  // c_2_2
  EXPECT_DOUBLE_EQ(conf.values.sum(), 1.0);

  // Same predictions on both sides: no shift.
  ASSERT_EQ(run_cli({"estimate-weights", "--source-predictions", (dir / "sp.csv").string(), "--source-labels",
                     (dir / "sl.csv").string(), "--target-predictions", (dir / "sp.csv").string(), "-o",
                     (dir / "same").string()}),
            0);
  std::ifstream same(dir / "same" / "weights.csv");
  const auto u = read_numeric_csv(same, "weights");
  for (int y = 0; y < 3; ++y) EXPECT_NEAR(u.values(y, 1), 1.0, 1e-6);

  write_file(dir / "broken.csv", "p0,p1,p2\n1,0,0\n0,1\n");
  std::string err;
  EXPECT_NE(run_cli({"estimate-weights", "--source-predictions", (dir / "broken.csv").string(), "--source-labels",
                     (dir / "sl.csv").string(), "--target-predictions", (dir / "tp.csv").string(), "-o", dir.string()},
                    &err),
            0);
  EXPECT_NE(err.find("broken.csv:3"), std::string::npos) << err;
}

TEST(Cli, SweepSingleTask) {
  const auto dir = scratch("sweep");
  ASSERT_EQ(run_cli({"sweep-jsd", "--tasks", "1", "--epochs", "2", "-s", "batches_per_epoch=5", "-s", "k=3", "-s",
                     "run_bounds=false", "-o", dir.string()}),
            0);
  std::ifstream in(dir / "sweep.csv");
  const auto t = read_numeric_csv(in, "sweep");
  ASSERT_EQ(t.values.rows(), 1);
  EXPECT_NEAR(t.values(0, 4), t.values(0, 3) - t.values(0, 2), 2e-6);
}

TEST(Cli, SweepJobsDoNotChangeResults) {
  const auto a = scratch("sweep_j1"), b = scratch("sweep_j2");
  const std::vector<std::string> common{"sweep-jsd", "--tasks", "3", "--epochs", "2", "-s", "batches_per_epoch=4",
                                        "-s", "k=3", "-s", "run_bounds=false"};
  auto with = [&](std::vector<std::string> extra) {
    auto args = common;
    args.insert(args.end(), extra.begin(), extra.end());
    return args;
  };
  ASSERT_EQ(run_cli(with({"--jobs", "1", "-o", a.string()})), 0);
  ASSERT_EQ(run_cli(with({"--jobs", "3", "-o", b.string()})), 0);
  EXPECT_EQ(slurp(a / "sweep.csv"), slurp(b / "sweep.csv"));
}

TEST(Cli, VerifyBoundsOnSavedModel) {
  const auto dir = scratch("verify");
  ASSERT_EQ(run_cli({"generate", "-o", dir.string()}), 0);
  const auto src = (dir / "source.csv").string(), tgt = (dir / "target.csv").string();
  ASSERT_EQ(run_cli({"train", "--algorithms", "dann", "--epochs", "1", "-s", "batches_per_epoch=5", "--source", src,
                     "--target", tgt, "--save-model", "-o", dir.string()}),
            0);
  ASSERT_EQ(run_cli({"verify-bounds", "--source", src, "--target", tgt, "--model",
                     (dir / "model_dann_seed0.ckpt").string(), "-o", (dir / "v").string()}),
            0);
  EXPECT_EQ(count_lines(dir / "v" / "bounds.csv"), 7u);
}

}  // namespace
}  // namespace gls
