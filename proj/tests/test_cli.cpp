// Drives the built surrobench executable as a subprocess.
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <sys/wait.h>

#include <algorithm>
#include <cstdio>
#include <unistd.h>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "doctest.h"
#include "json.hpp"

namespace fs = std::filesystem;

namespace {

struct Result {
  int code;
  std::string out;
  std::string err;
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

const fs::path& work_dir() {
  static const fs::path dir = [] {
    auto d = fs::temp_directory_path() / ("surrobench_cli_" + std::to_string(::getpid()));
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
  }();
  return dir;
}

Result run(const std::string& args, const std::string& input = "") {
  const fs::path err = work_dir() / "stderr.txt";
  std::string cmd = std::string(SURROBENCH_EXE) + " " + args + " 2>" + err.string();
  if (!input.empty()) {
    const fs::path in = work_dir() / "stdin.txt";
    std::ofstream(in) << input;
    cmd += " <" + in.string();
  }
  Result r;
  FILE* pipe = ::popen(cmd.c_str(), "r");
  REQUIRE(pipe != nullptr);
  char buf[4096];
  std::size_t n;
  while ((n = std::fread(buf, 1, sizeof buf, pipe)) > 0) r.out.append(buf, n);
  const int status = ::pclose(pipe);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  r.err = slurp(err);
  return r;
}

/// Small generated dataset, produced once.
const fs::path& data_dir() {
  static const fs::path dir = [] {
    const auto d = work_dir() / "data";
    const auto r = run("generate --instances 6 --configurators roar,random --repetitions 2 --evaluations 120 --out-dir " +
                       d.string());
    REQUIRE(r.code == 0);
    return d;
  }();
  return dir;
}

std::string train_args(const fs::path& out) {
  const auto& d = data_dir();
  return "train --space " + (d / "space.pcs").string() + " --runs " + (d / "runs.csv").string() + " --features " +
         (d / "features.csv").string() + " --num-trees 6 --out " + out.string();
}

const char* kDefaultConfig =
    R"({"algo":"cdcl","restart":"luby","heuristic":"vsids","restart_base":100,"decay":0.95,"alpha":1,"beta":0.5,"level":5,"gamma":0})";

}  // namespace

TEST_CASE("generate writes the three input files") {
  for (const char* f : {"space.pcs", "features.csv", "runs.csv"}) CHECK(fs::file_size(data_dir() / f) > 0);
}

TEST_CASE("training twice with the same seed writes identical model files") {
  const auto a = work_dir() / "a.model", b = work_dir() / "b.model";
  const auto ra = run(train_args(a));
  const auto rb = run(train_args(b));
  REQUIRE(ra.code == 0);
  REQUIRE(rb.code == 0);
  CHECK(slurp(a) == slurp(b));
  const auto summary = nlohmann::json::parse(ra.out);
  CHECK(summary.contains("sha256"));
  CHECK(summary["sha256"] == nlohmann::json::parse(rb.out)["sha256"]);
}

TEST_CASE("predict prints one JSON object and serve --stdio answers line by line") {
  const auto model = work_dir() / "p.model";
  REQUIRE(run(train_args(model)).code == 0);
  const auto r = run("predict --model " + model.string() + " --instance inst000 --seed 3 --config '" + kDefaultConfig + "'");
  REQUIRE(r.code == 0);
  CHECK(std::count(r.out.begin(), r.out.end(), '\n') == 1);
  const auto j = nlohmann::json::parse(r.out);
  for (const char* k : {"cost", "quantile", "raw_prediction", "status"}) CHECK(j.contains(k));

  const auto s = run("serve --stdio --model " + model.string(),
                     "{\"id\":1,\"op\":\"run\",\"config\":" + std::string(kDefaultConfig) +
                         ",\"instance\":\"inst000\",\"seed\":3}\n"
                     "{\"id\":2,\"op\":\"shutdown\"}\n");
  REQUIRE(s.code == 0);
  const auto first = nlohmann::json::parse(s.out.substr(0, s.out.find('\n')));
  CHECK(first["id"] == 1);
  CHECK(first["cost"] == j["cost"]);
}

TEST_CASE("usage errors exit 2 and runtime errors exit 1, both with a JSON error on stderr") {
  auto r = run("train --space nowhere.pcs");
  CHECK(r.code == 2);
  CHECK(nlohmann::json::parse(r.err)["error"]["kind"] == "usage");

  r = run("frobnicate");
  CHECK(r.code == 2);

  r = run("predict --model " + (work_dir() / "missing.model").string() + " --instance x");
  CHECK(r.code == 1);
  CHECK(nlohmann::json::parse(r.err)["error"]["kind"] == "runtime");

  const auto model = work_dir() / "p.model";
  if (fs::exists(model)) {
    r = run("predict --model " + model.string() + " --instance inst000 --config '{not json'");
    CHECK(r.code == 2);
    r = run("predict --model " + model.string() + " --instance no_such_instance --config '" + kDefaultConfig + "'");
    CHECK(r.code == 1);
  }
}

TEST_CASE("help lists every flag with its default") {
  const auto r = run("train --help");
  CHECK(r.code == 0);
  for (const char* flag : {"--num-trees", "--frac-points", "--seed", "--setting", "--subsample-cap", "--bootstrap"}) {
    CHECK_MESSAGE(r.out.find(flag) != std::string::npos, flag);
  }
  CHECK(r.out.find("[1]") != std::string::npos);     // --seed
  CHECK(r.out.find("[all]") != std::string::npos);   // --setting
  CHECK(r.out.find("default off") != std::string::npos);
  const auto top = run("--help");
  for (const char* sub : {"generate", "train", "predict", "serve", "evaluate", "compare", "demo"}) {
    CHECK_MESSAGE(top.out.find(sub) != std::string::npos, sub);
  }
}

TEST_CASE("evaluate writes a run-wise quality report") {
  const auto& d = data_dir();
  const auto out = work_dir() / "quality.json";
  const auto r = run("evaluate --space " + (d / "space.pcs").string() + " --runs " + (d / "runs.csv").string() +
                     " --features " + (d / "features.csv").string() + " --num-trees 4 --scheme loro --out " +
                     out.string());
  REQUIRE(r.code == 0);
  const auto j = nlohmann::json::parse(slurp(out));
  CHECK(j.contains("summary"));
}
