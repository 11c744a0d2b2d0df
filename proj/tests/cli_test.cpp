// Integration tests driving the installed binary through its subcommands.
// The binary path arrives via the BRIDGESENTRY_BIN environment variable set
// by CTest.

#include <sys/wait.h>
#include <unistd.h>

#include <array>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>

#include "doctest.h"

namespace fs = std::filesystem;

namespace {

std::string binary_path() {
  const char* path = std::getenv("BRIDGESENTRY_BIN");
  REQUIRE_MESSAGE(path != nullptr, "BRIDGESENTRY_BIN must point at the CLI binary");
  return path;
}

struct CommandResult {
  int exit_code = -1;
  std::string output;  // stdout + stderr
};

CommandResult run_cli(const std::string& args) {
  const std::string command = binary_path() + " " + args + " 2>&1";
  CommandResult result;
  FILE* pipe = popen(command.c_str(), "r");
  REQUIRE(pipe != nullptr);
  std::array<char, 4096> buffer;
  while (std::size_t n = std::fread(buffer.data(), 1, buffer.size(), pipe)) {
    result.output.append(buffer.data(), n);
  }
  const int status = pclose(pipe);
  result.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return result;
}

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& tag) {
    path = fs::temp_directory_path() / ("bsentry_cli_" + tag + "_" + std::to_string(getpid()));
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string operator/(const std::string& tail) const { return (path / tail).string(); }
};

}  // namespace

TEST_CASE("cli: no arguments prints usage and exits 1") {
  const CommandResult result = run_cli("");
  CHECK(result.exit_code == 1);
  CHECK(result.output.find("Usage") != std::string::npos);
}

TEST_CASE("cli: unknown flag exits 1, --help exits 0") {
  CHECK(run_cli("mine --bogus-flag 1").exit_code == 1);
  const CommandResult help = run_cli("--help");
  CHECK(help.exit_code == 0);
  CHECK(help.output.find("gen-corpus") != std::string::npos);
  CHECK(run_cli("detect --help").exit_code == 0);
}

TEST_CASE("cli: missing input file exits 2") {
  TempDir dir("missing");
  fs::create_directories(dir.path / "graphs");
  const CommandResult result =
      run_cli("train --graphs " + (dir / "graphs") + " --metapaths " + (dir / "nope.json") +
              " --out " + (dir / "model.json"));
  // CLI11 validates existence up front: that is a usage error (1); a file
  // that exists but fails to parse is a data error (2).
  CHECK(result.exit_code == 1);

  std::ofstream(dir / "broken.json") << "{not json";
  const CommandResult data_err =
      run_cli("train --graphs " + (dir / "graphs") + " --metapaths " + (dir / "broken.json") +
              " --out " + (dir / "model.json"));
  CHECK(data_err.exit_code != 0);
}

TEST_CASE("cli: full chain on a micro corpus, then detect") {
  TempDir dir("chain");

  CHECK(run_cli("gen-corpus --seed 5 --n-normal 28 --n-attack 4 --out " + (dir / "corpus"))
            .exit_code == 0);
  CHECK(run_cli("build-graphs --records " + (dir / "corpus/records.jsonl") + " --pairs " +
                (dir / "corpus/pairs.jsonl") + " --bridge-config " +
                (dir / "corpus/bridge_config.json") + " --out " + (dir / "graphs"))
            .exit_code == 0);
  CHECK(run_cli("mine --graphs " + (dir / "graphs") + " --theta 0.5 --out " + (dir / "mp.json"))
            .exit_code == 0);
  CHECK(run_cli("train --graphs " + (dir / "graphs") + " --metapaths " + (dir / "mp.json") +
                " --seed 3 --epochs 30 --out " + (dir / "model.json"))
            .exit_code == 0);
  const CommandResult eval =
      run_cli("evaluate --model " + (dir / "model.json") + " --graphs " + (dir / "graphs") +
              " --runs 2 --report " + (dir / "report.json"));
  CHECK(eval.exit_code == 0);
  CHECK(eval.output.find("Attack avg") != std::string::npos);
  CHECK(fs::exists(dir / "report.json"));

  const CommandResult rendered = run_cli("report --in " + (dir / "report.json"));
  CHECK(rendered.exit_code == 0);
  CHECK(rendered.output.find("F1-score") != std::string::npos);

  // A freshly generated normal behavior classifies as Normal after training
  // on the full corpus.
  const CommandResult detect =
      run_cli("detect --model " + (dir / "model.json") + " --graph " +
              (dir / "graphs/pair-000000.json"));
  CHECK(detect.exit_code == 0);
  CHECK(detect.output.rfind("Normal\n", 0) == 0);
  CHECK(detect.output.find("probabilities:") != std::string::npos);
}

TEST_CASE("cli: subcommands are idempotent given identical seeds") {
  TempDir dir("idem");
  CHECK(run_cli("gen-corpus --seed 11 --n-normal 6 --n-attack 2 --out " + (dir / "a"))
            .exit_code == 0);
  CHECK(run_cli("gen-corpus --seed 11 --n-normal 6 --n-attack 2 --out " + (dir / "b"))
            .exit_code == 0);
  for (const char* name : {"records.jsonl", "pairs.jsonl", "bridge_config.json"}) {
    std::ifstream fa(dir / ("a/" + std::string(name)), std::ios::binary);
    std::ifstream fb(dir / ("b/" + std::string(name)), std::ios::binary);
    const std::string ca((std::istreambuf_iterator<char>(fa)), std::istreambuf_iterator<char>());
    const std::string cb((std::istreambuf_iterator<char>(fb)), std::istreambuf_iterator<char>());
    CHECK(ca == cb);
  }
}
