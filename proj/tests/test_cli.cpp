#include <sys/wait.h>
#include <unistd.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <regex>
#include <sstream>
#include <string>

#include <gtest/gtest.h>
#include <json.hpp>

#include "support/nmes.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Outcome {
  int code = -1;
  std::string out;
  std::string err;
};

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() / ("unbcount_cli_" + std::to_string(::getpid()) + "_" +
                                        ::testing::UnitTest::GetInstance()->current_test_info()->name());
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  fs::path path(const std::string& name) const { return dir_ / name; }

  fs::path write(const std::string& name, const std::string& content) const {
    std::ofstream(path(name), std::ios::binary) << content;
    return path(name);
  }

  Outcome run(const std::string& args) const {
    const auto err_file = path("stderr.txt");
    const std::string cmd = std::string("'") + UNB_CLI_PATH + "' " + args + " 2>'" + err_file.string() + "'";
    Outcome r;
    FILE* pipe = ::popen(cmd.c_str(), "r");
    if (!pipe) return r;
    char buf[4096];
    std::size_t got;
    while ((got = std::fread(buf, 1, sizeof buf, pipe)) > 0) r.out.append(buf, got);
    const int status = ::pclose(pipe);
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    std::ifstream e(err_file);
    r.err.assign(std::istreambuf_iterator<char>(e), {});
    return r;
  }

  static std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), {}};
  }

  static std::vector<long> counts(const fs::path& p) {
    std::ifstream in(p);
    std::vector<long> out;
    for (long v; in >> v;) out.push_back(v);
    return out;
  }

  fs::path dir_;
};

std::string g6(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

// Every number in a JSON document, printed as the text renderer would. The
// schema version and the confidence level (shown as a percentage in the
// column headers) are left out.
void collect_numbers(const json& j, std::vector<std::string>& out) {
  if (j.is_number_float()) {
    out.push_back(g6(j.get<double>()));
  } else if (j.is_number()) {
    out.push_back(std::to_string(j.get<long long>()));
  } else if (j.is_object()) {
    for (const auto& [key, v] : j.items())
      if (key != "schema_version" && key != "level") collect_numbers(v, out);
  } else if (j.is_array()) {
    for (const auto& v : j) collect_numbers(v, out);
  }
}

}  // namespace

TEST_F(Cli, SimulateIsByteIdenticalAcrossRuns) {
  const auto a = path("a.txt"), b = path("b.txt");
  ASSERT_EQ(run("simulate --r 3 --p 0.5 --n 10 --seed 7 -o '" + a.string() + "'").code, 0);
  ASSERT_EQ(run("simulate --r 3 --p 0.5 --n 10 --seed 7 -o '" + b.string() + "'").code, 0);
  EXPECT_EQ(slurp(a), slurp(b));
  EXPECT_EQ(counts(a).size(), 10u);
  const auto side = json::parse(slurp(a.string() + ".json"));
  EXPECT_EQ(side["params"]["r"], 3.0);
  EXPECT_EQ(side["params"]["p"], 0.5);
  EXPECT_EQ(side["seed"], 7);
  EXPECT_EQ(side["n"], 10);
  EXPECT_EQ(side["schema_version"], 1);
  ASSERT_EQ(run("simulate --r 3 --p 0.5 --n 10 --seed 8 -o '" + b.string() + "'").code, 0);
  EXPECT_NE(slurp(a), slurp(b));
}

TEST_F(Cli, SimulatedGeometricZeroShare) {
  const auto f = path("geo.txt");
  ASSERT_EQ(run("simulate --r 2 --p 0.5 --n 100000 -o '" + f.string() + "'").code, 0);
  const auto xs = counts(f);
  ASSERT_EQ(xs.size(), 100000u);
  const double zeros = static_cast<double>(std::count(xs.begin(), xs.end(), 0L)) / 1e5;
  EXPECT_NEAR(zeros, 0.5, 3 * std::sqrt(0.25 / 1e5));
}

TEST_F(Cli, SimulatedMean) {
  const auto f = path("s.txt");
  ASSERT_EQ(run("simulate --r 3 --p 0.5 --n 100000 --seed 11 -o '" + f.string() + "'").code, 0);
  const auto xs = counts(f);
  double mean = 0;
  for (long x : xs) mean += static_cast<double>(x);
  mean /= static_cast<double>(xs.size());
  // variance (rq/12p)(6 + 4q/p + rq/p) = 3.25 at r = 3, p = 0.5
  EXPECT_NEAR(mean, 1.5, 3 * std::sqrt(3.25 / 1e5));
}

TEST_F(Cli, FitRecoversGeometricR) {
  const auto f = path("geo.txt");
  ASSERT_EQ(run("simulate --r 2 --p 0.4 --n 20000 --seed 3 -o '" + f.string() + "'").code, 0);
  const auto r = run("fit --no-header -i '" + f.string() + "' -m unb,geometric -f json");
  ASSERT_EQ(r.code, 0) << r.err;
  const auto doc = json::parse(r.out);
  EXPECT_EQ(doc["command"], "fit");
  EXPECT_EQ(doc["data"]["response"], "V1");
  const auto& unb = doc["fits"][0];
  EXPECT_EQ(unb["model"], "unb");
  EXPECT_NEAR(unb["parameters"][0]["estimate"].get<double>(), 2.0, 0.25);
  EXPECT_GT(unb["lr_test_geometric"]["p_value"].get<double>(), 0.001);
  EXPECT_EQ(doc["fits"][1]["parameters"].size(), 1u);
}

TEST_F(Cli, TextAndJsonCarryTheSameNumbers) {
  const auto f = path("s.txt");
  ASSERT_EQ(run("simulate --r 1.5 --p 0.3 --n 400 --seed 5 -o '" + f.string() + "'").code, 0);
  const auto data = write("reg.csv", [&] {
    std::ostringstream os;
    os << "y,x\n";
    int i = 0;
    for (long v : counts(f)) os << v << "," << (i++ % 7) / 3.0 << "\n";
    return os.str();
  }());
  for (const std::string args : {"fit --no-header -i '" + f.string() + "' -m unb,nb,up,geometric",
                                 "regress -i '" + data.string() + "' -y y -x x -m unb,nb,up",
                                 "compare -i '" + data.string() + "' -y y -x x -m unb,nb,up",
                                 "summarize -i '" + data.string() + "' -y y -g x"}) {
    const auto text = run(args);
    const auto js = run(args + " -f json");
    ASSERT_EQ(text.code, 0) << args << "\n" << text.err;
    ASSERT_EQ(js.code, 0) << args;
    std::vector<std::string> numbers;
    collect_numbers(json::parse(js.out), numbers);
    ASSERT_FALSE(numbers.empty());
    for (const auto& n : numbers) {
      const std::regex word("(^|[\\s(])" + std::regex_replace(n, std::regex(R"([.+\-])"), R"(\$&)") + "([\\s,)%]|$)");
      EXPECT_TRUE(std::regex_search(text.out, word)) << args << ": " << n << " missing from text output";
    }
  }
}

TEST_F(Cli, OutputIsDeterministic) {
  const auto f = path("s.txt");
  ASSERT_EQ(run("simulate --r 4 --p 0.6 --n 500 -o '" + f.string() + "'").code, 0);
  const std::string args = "compare --no-header -i '" + f.string() + "' -m unb,nb,up -f json";
  EXPECT_EQ(run(args).out, run(args).out);
  const auto out = path("report.json");
  ASSERT_EQ(run(args + " -o '" + out.string() + "'").code, 0);
  EXPECT_EQ(slurp(out), run(args).out);
}

TEST_F(Cli, ExitCodes) {
  const auto empty = write("empty.csv", "");
  auto r = run("fit -i '" + empty.string() + "' -y y");
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("line 1"), std::string::npos) << r.err;

  const auto bad = write("bad.csv", "y\n1\n-1\n");
  r = run("fit -i '" + bad.string() + "'");
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("row 2"), std::string::npos) << r.err;

  const auto ok = write("ok.csv", "y,one\n0,1\n1,1\n3,1\n0,1\n2,1\n5,1\n");
  r = run("regress -i '" + ok.string() + "' -y y -x one");
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("rank"), std::string::npos) << r.err;

  EXPECT_EQ(run("fit -i '" + ok.string() + "' -y missing").code, 2);
  EXPECT_EQ(run("fit -i '" + ok.string() + "' -y y -m poisson").code, 2);
  EXPECT_EQ(run("fit -i '" + ok.string() + "' -y y --level 1.5").code, 2);
  EXPECT_EQ(run("summarize -i '" + ok.string() + "' -y y -g nope").code, 2);
  EXPECT_EQ(run("simulate --r -1 --p 0.5 --n 5 -o '" + path("x").string() + "'").code, 2);
  EXPECT_EQ(run("frobnicate").code, 2);
  EXPECT_EQ(run("").code, 2);
  EXPECT_EQ(run("--help").code, 0);

  const auto sim = path("s.txt");
  ASSERT_EQ(run("simulate --r 0.7 --p 0.3 --n 3000 -o '" + sim.string() + "'").code, 0);
  r = run("fit --no-header -i '" + sim.string() + "' --max-iterations 1");
  EXPECT_EQ(r.code, 3);
  EXPECT_NE(r.out.find("did not converge"), std::string::npos);
  EXPECT_EQ(run("fit --no-header -i '" + sim.string() + "'").code, 0);
}

TEST_F(Cli, CompareWithItselfReportsDegeneracy) {
  const auto f = path("s.txt");
  ASSERT_EQ(run("simulate --r 3 --p 0.5 --n 300 -o '" + f.string() + "'").code, 0);
  const auto r = run("compare --no-header -i '" + f.string() + "' -m unb,unb,nb");
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("notice"), std::string::npos);
  const auto js = json::parse(run("compare --no-header -i '" + f.string() + "' -m unb,unb,nb -f json").out);
  EXPECT_TRUE(js["vuong"][0]["degenerate"].get<bool>());
  EXPECT_FALSE(js["vuong"][1]["degenerate"].get<bool>());
  EXPECT_EQ(run("compare --no-header -i '" + f.string() + "' -m unb").code, 2);
}

TEST_F(Cli, CompareFavoursUnbOnUnbData) {
  int positive = 0;
  for (int rep = 0; rep < 20; ++rep) {
    const auto f = path("rep.txt");
    ASSERT_EQ(run("simulate --r 5 --p 0.5 --n 3000 --seed " + std::to_string(100 + rep) + " -o '" + f.string() + "'").code, 0);
    const auto js = json::parse(run("compare --no-header -i '" + f.string() + "' -m unb,nb -f json").out);
    positive += js["vuong"][0]["z"].get<double>() > 0;
  }
  EXPECT_GT(positive, 10);
}

TEST_F(Cli, SummarizeTinyFile) {
  const auto f = write("tiny.csv", "y,g\n0,1\n1,0\n2,1\n0,0\n7,1\n");
  const auto r = run("summarize -i '" + f.string() + "' -y y -g g -f json");
  ASSERT_EQ(r.code, 0) << r.err;
  const auto doc = json::parse(r.out);
  const auto& all = doc["groups"][0];
  EXPECT_EQ(all["label"], "all");
  EXPECT_EQ(all["n"], 5);
  EXPECT_DOUBLE_EQ(all["mean"].get<double>(), 2.0);
  EXPECT_DOUBLE_EQ(all["variance"].get<double>(), 8.5);
  EXPECT_EQ(doc["groups"].size(), 3u);
  EXPECT_EQ(doc["groups"][1]["n"].get<int>() + doc["groups"][2]["n"].get<int>(), 5);
  EXPECT_EQ(doc["frequencies"][0]["count"], 2);

  const auto semi = write("semi.csv", "y;g\n0;1\n3;0\n");
  EXPECT_EQ(run("summarize -i '" + semi.string() + "' -y y --delimiter ';'").code, 0);
}

TEST_F(Cli, NmesTables) {
  const auto file = nmes::locate();
  if (!file) GTEST_SKIP() << "NMES file not found; set UNB_NMES_DIR";
  const std::string in = "-i '" + file->string() + "' -y HOSP";
  const auto fit = json::parse(run("fit " + in + " -m unb,nb,up -f json").out);
  EXPECT_NEAR(fit["fits"][0]["log_likelihood"].get<double>(), nmes::kMarginalLoglikUnb, 0.5);
  EXPECT_NEAR(fit["fits"][1]["log_likelihood"].get<double>(), nmes::kMarginalLoglikNb, 0.5);
  EXPECT_NEAR(fit["fits"][2]["log_likelihood"].get<double>(), nmes::kMarginalLoglikUp, 0.5);

  std::string covs;
  for (const auto& c : nmes::kCovariates) covs += (covs.empty() ? "" : ",") + c;
  const auto cmp = json::parse(run("compare " + in + " -x " + covs + " -m unb,nb,up -f json").out);
  EXPECT_NEAR(cmp["models"][0]["aic"].get<double>(), nmes::kRegAicUnb, 2.0);
  EXPECT_NEAR(cmp["vuong"][0]["z"].get<double>(), nmes::kVuongNb, 0.15);
  EXPECT_NEAR(cmp["vuong"][1]["z"].get<double>(), nmes::kVuongUp, 0.25);

  const auto sum = json::parse(run("summarize " + in + " -g POORHLTH -f json").out);
  EXPECT_EQ(sum["groups"][2]["label"], "POORHLTH=1");
  EXPECT_EQ(sum["groups"][2]["n"], 554);
}
