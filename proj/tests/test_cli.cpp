#include <doctest.h>

#include <sys/wait.h>
#include <unistd.h>

#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <nlohmann/json.hpp>
#include <sstream>
#include <string>

namespace fs = std::filesystem;

namespace {

struct Result {
  int status = -1;
  std::string out;
};

class Workspace {
 public:
  Workspace() : dir_(fs::temp_directory_path() / ("dimino-cli-" + std::to_string(::getpid()))) {
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  ~Workspace() { fs::remove_all(dir_); }

  // Runs the CLI inside the workspace; stdout and stderr are merged.
  Result run(const std::string& args) const {
    const std::string cmd = "cd '" + dir_.string() + "' && '" DIMINO_CLI "' " + args + " 2>&1";
    Result r;
    FILE* pipe = ::popen(cmd.c_str(), "r");
    REQUIRE(pipe != nullptr);
    std::array<char, 4096> buf{};
    while (std::fgets(buf.data(), buf.size(), pipe)) r.out += buf.data();
    const int raw = ::pclose(pipe);
    r.status = WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
    return r;
  }

  fs::path path(const std::string& rel) const { return dir_ / rel; }

  std::string read(const std::string& rel) const {
    std::ifstream in(path(rel), std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
  }

 private:
  fs::path dir_;
};

const char* kGen = "gen-data --system advection1d --n 12 --n-test 4 --grid 32 --seed 5 --threads 1";
const char* kTrain = "train --data d --width 8 --depth 2 --modes 6 --epochs 3 --batch-size 4 --threads 1 --quiet";

}  // namespace

TEST_CASE("usage errors exit with 2 and a structured message") {
  Workspace ws;
  auto r = ws.run("gen-data --system heat1d --out x");
  CHECK(r.status == 2);
  CHECK(r.out.find("error: code=") != std::string::npos);
  r = ws.run("no-such-command");
  CHECK(r.status == 2);
  r = ws.run("gen-data --system advection1d --range beta=2:1 --out x");
  CHECK(r.status == 2);
  CHECK(r.out.find("code=InvalidArgument") != std::string::npos);
  r = ws.run("eval --checkpoint missing.ckpt --data missing");
  CHECK(r.status == 1);
}

TEST_CASE("registry dump") {
  Workspace ws;
  const auto r = ws.run("dump-registry --json");
  REQUIRE(r.status == 0);
  const auto j = nlohmann::json::parse(r.out);
  CHECK(j.dump().find("beta_T_over_L") != std::string::npos);
  CHECK(j.dump().find("Re") != std::string::npos);
}

TEST_CASE("gen-data and train are byte reproducible") {
  Workspace ws;
  REQUIRE(ws.run(std::string(kGen) + " --out d").status == 0);
  REQUIRE(ws.run(std::string(kGen) + " --out d2").status == 0);
  for (const char* f : {"train.bin", "test.bin", "manifest.json"}) {
    CHECK(ws.read(std::string("d/") + f) == ws.read(std::string("d2/") + f));
  }
  // Existing output needs --force.
  CHECK(ws.run(std::string(kGen) + " --out d").status != 0);

  REQUIRE(ws.run(std::string(kTrain) + " --out t1").status == 0);
  REQUIRE(ws.run(std::string(kTrain) + " --out t2").status == 0);
  for (const char* f : {"model.ckpt", "model-history.jsonl", "metrics.json"}) {
    CHECK(ws.read(std::string("t1/") + f) == ws.read(std::string("t2/") + f));
  }
  const auto run = nlohmann::json::parse(ws.read("t1/run.json"));
  CHECK(run["command"] == "train");
  CHECK(run.contains("inputs"));
  CHECK(run.contains("outputs"));

  SUBCASE("eval agrees with the training summary") {
    const auto r = ws.run("eval --checkpoint t1/model.ckpt --data d --split test --json --threads 1");
    REQUIRE(r.status == 0);
    const auto ev = nlohmann::json::parse(r.out);
    const auto tr = nlohmann::json::parse(ws.read("t1/metrics.json"));
    CHECK(ev["rows"][0]["rel_l2"].get<double>() ==
          doctest::Approx(tr["rows"][0]["rel_l2"].get<double>()).epsilon(1e-12));
  }
  SUBCASE("replay reproduces the checkpoint") {
    REQUIRE(ws.run("replay --run t1/run.json").status == 0);
    CHECK(ws.read("t1/model.ckpt") == ws.read("t1-replay/model.ckpt"));
  }
  SUBCASE("paired run writes both models and a gain column") {
    REQUIRE(ws.run(std::string(kTrain) + " --out tp --ablate-gate").status == 0);
    CHECK(fs::exists(ws.path("tp/twin.ckpt")));
    CHECK(ws.read("tp/metrics.txt").find("gain") != std::string::npos);
  }
}

TEST_CASE("sti-check and grad-check exit codes") {
  Workspace ws;
  REQUIRE(ws.run("gen-data --system ns-vorticity2d --n 4 --n-test 2 --grid 16 --seed 3 --threads 1 --out d").status ==
          0);
  REQUIRE(ws.run("train --data d --width 8 --depth 2 --modes 4 --epochs 1 --batch-size 2 --post-order scale-last "
                 "--quiet --out t")
              .status == 0);
  auto r = ws.run("sti-check --checkpoint t/model.ckpt --data d --samples 2 --json --max-latent-residual 1e-12");
  CHECK(r.status == 0);
  r = ws.run("sti-check --checkpoint t/model.ckpt --data d --p 2,4");
  CHECK(r.status == 2);

  r = ws.run("grad-check --seeds 2 --model-seeds 1 --json");
  CHECK(r.status == 0);
  // An impossible threshold fails the check.
  r = ws.run("grad-check --seeds 1 --model-seeds 1 --threshold 1e-300");
  CHECK(r.status == 1);
}
