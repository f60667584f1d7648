#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <doctest.h>

#include "intman/cli.hpp"

namespace fs = std::filesystem;

namespace {

struct Result {
  int code = 0;
  std::string out, err;
};

Result run(std::vector<std::string> args) {
  args.insert(args.begin(), "intman");
  std::vector<const char*> argv;
  for (const std::string& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  Result r;
  r.code = intman::cli(static_cast<int>(argv.size()), argv.data(), out, err);
  r.out = out.str();
  r.err = err.str();
  return r;
}

std::string slurp(const fs::path& p) {
  std::ifstream is(p);
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

std::vector<std::string> lines(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream is(text);
  for (std::string l; std::getline(is, l);) out.push_back(l);
  return out;
}

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::istringstream is(line);
  for (std::string c; std::getline(is, c, ',');) out.push_back(c);
  return out;
}

/// Fresh scratch directory holding a small four-lane scenario.
struct Workspace {
  fs::path dir;
  fs::path cfg;
  explicit Workspace(const std::string& name) {
    dir = fs::temp_directory_path() / ("intman_cli_" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);
    cfg = dir / "toy.cfg";
    std::ofstream(cfg) << "name = toy\nnum_lanes = 4\nlane_rates = 0.1\nstream_length = 60\n"
                          "transient_cutoff = 10\nT_h = 30\nT_r = 20\nslots = 8\n";
  }
  ~Workspace() { fs::remove_all(dir); }
  std::string out(const std::string& sub) const { return (dir / sub).string(); }
};

}  // namespace

TEST_CASE("simulate is deterministic") {
  Workspace w("simulate");
  for (const char* sub : {"a", "b"}) {
    const Result r = run({"--scenario", w.cfg.string(), "--out", w.out(sub), "--seed", "3",
                          "--policy", "ttr", "simulate"});
    REQUIRE_MESSAGE(r.code == 0, r.err);
  }
  for (const char* f : {"log.jsonl", "metrics.csv", "scenario.cfg", "manifest.txt", "COMPLETE"})
    CHECK(fs::exists(w.dir / "a" / f));
  CHECK(!slurp(w.dir / "a" / "log.jsonl").empty());
  CHECK(slurp(w.dir / "a" / "log.jsonl") == slurp(w.dir / "b" / "log.jsonl"));
  CHECK(slurp(w.dir / "a" / "manifest.txt") == slurp(w.dir / "b" / "manifest.txt"));
}

TEST_CASE("evaluate against itself") {
  Workspace w("evaluate");
  const Result r = run({"--scenario", w.cfg.string(), "--out", w.out("e"), "--policy", "ttr",
                        "--policy", "ocp", "evaluate", "--streams", "2", "--rate", "0.08",
                        "--reference", "ttr"});
  REQUIRE_MESSAGE(r.code == 0, r.err);
  const auto rows = lines(slurp(w.dir / "e" / "summary.csv"));
  REQUIRE(rows.size() == 3);
  const auto head = split(rows[0]);
  const auto ttr = split(rows[1]);
  REQUIRE(ttr.size() == head.size());
  CHECK(ttr[0] == "ttr");
  CHECK(split(rows[2])[0] == "ocp-approx");
  CHECK(std::stod(ttr[5]) == 0.0);
  CHECK(std::stod(ttr[6]) == 0.0);
  CHECK(lines(slurp(w.dir / "e" / "runs.csv")).size() == 5);
}

TEST_CASE("benchmark tables") {
  Workspace w("benchmark");
  const fs::path toy = w.dir / "two.cfg";
  std::ofstream(toy) << "num_lanes = 2\napproach_length = 3\nlane_rates = 0.15\nT_c = 2\nT_h = 8\n"
                        "T_r = 8\nstream_length = 100\ntransient_cutoff = 10\n";
  const Result r = run({"--scenario", toy.string(), "--out", w.out("b"), "benchmark",
                        "--gap-max", "2", "--timing-max", "3", "--per-size", "2", "--streams", "4"});
  REQUIRE_MESSAGE(r.code == 0, r.err);
  const auto gap = lines(slurp(w.dir / "b" / "optgap.csv"));
  REQUIRE(gap.size() >= 2);
  CHECK(split(gap[0]).front() == "pending");
  for (std::size_t i = 1; i < gap.size(); ++i) {
    const auto c = split(gap[i]);
    REQUIRE(c.size() == 6);
    CHECK(std::stod(c[2]) >= -1e-9);
  }
  CHECK(lines(slurp(w.dir / "b" / "timing.csv")).size() >= 2);
  CHECK(slurp(w.dir / "b" / "manifest.txt").find("optgap_skipped") != std::string::npos);
}

TEST_CASE("usage errors") {
  Workspace w("usage");
  CHECK(run({"frobnicate"}).code != 0);
  CHECK(run({"--scenario", w.cfg.string(), "--out", w.out("x"), "simulate"}).code == 2);
  CHECK(run({"--scenario", w.cfg.string(), "--out", w.out("x"), "--policy", "nope", "simulate"}).code == 2);
  CHECK(run({"--scenario", "/nonexistent.cfg", "--out", w.out("x"), "--policy", "ttr", "simulate"}).code == 2);
  CHECK(run({"--scenario", w.cfg.string(), "--out", w.out("x"), "sweep"}).code == 2);
  CHECK(!fs::exists(w.dir / "x" / "COMPLETE"));
  const Result help = run({"--help"});
  CHECK(help.code == 0);
  CHECK(help.out.find("simulate") != std::string::npos);
}

TEST_CASE("scenario files") {
  Workspace w("scenarios");
  REQUIRE(run({"--out", w.out("s"), "scenarios"}).code == 0);
  CHECK(fs::exists(w.dir / "s" / "sim1_test.cfg"));
  CHECK(fs::exists(w.dir / "s" / "sim9_train.cfg"));
  CHECK(slurp(w.dir / "s" / "sim1_test.cfg").rfind("name = sim1\n", 0) == 0);
}
