#include <doctest.h>
#include <httplib.h>

#include <csignal>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <sys/wait.h>
#include <unistd.h>

#include "synthetic.hpp"

using testsupport::TempDir;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  int exit_code = -1;
  std::string out;
};

// Runs the CLI through the shell; stderr is folded into the output when
// `merge` is set.
Outcome run(const std::string& args, bool merge = false) {
  const std::string cmd = std::string(DERMCLASS_CLI) + " " + args + (merge ? " 2>&1" : " 2>/dev/null");
  Outcome o;
  FILE* p = popen(cmd.c_str(), "r");
  REQUIRE(p);
  char buf[4096];
  for (std::size_t n; (n = std::fread(buf, 1, sizeof(buf), p)) > 0;) o.out.append(buf, n);
  const int status = pclose(p);
  o.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return o;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::string common_flags(const TempDir& dir) {
  const auto q = [](const fs::path& p) { return "'" + p.string() + "'"; };
  return "--manifest " + q(dir / "manifest.tsv") + " --set paths.augment_dir=" + q(dir / "aug") +
         " --set model.init=random --set model.resize=32 --set model.crop=32";
}

}  // namespace

TEST_CASE("help lists every subcommand with its re-run semantics") {
  const auto help = run("--help");
  CHECK(help.exit_code == 0);
  for (const char* name : {"ingest", "split", "augment", "train", "crossval", "evaluate", "serve", "incorporate", "report"}) {
    CHECK(help.out.find(name) != std::string::npos);
  }
  CHECK(help.out.find("[idempotent]") != std::string::npos);
  CHECK(help.out.find("[append-only]") != std::string::npos);
  const auto sub = run("train --help");
  CHECK(sub.exit_code == 0);
  CHECK(sub.out.find("--backbone") != std::string::npos);
  CHECK(sub.out.find("--seed") != std::string::npos);
}

TEST_CASE("usage errors exit 2 and operational failures exit 1") {
  CHECK(run("").exit_code == 2);
  CHECK(run("frobnicate").exit_code == 2);
  CHECK(run("train --epochs").exit_code == 2);
  CHECK(run("train --no-such-flag").exit_code == 2);

  const auto missing = run("evaluate --checkpoint /nonexistent/model.weights", true);
  CHECK(missing.exit_code == 1);
  CHECK(missing.out.find("error: ") != std::string::npos);
  CHECK(missing.out.find("not found") != std::string::npos);

  const auto bad_key = run("split --set train.bogus=1", true);
  CHECK(bad_key.exit_code == 1);
  CHECK(bad_key.out.find("train.bogus") != std::string::npos);
  CHECK(run("train --backbone vgg16").exit_code == 1);
}

TEST_CASE("batch commands print artifact paths and repeat byte-identically") {
  TempDir dir;
  testsupport::write_class_tree(dir / "corpus", 5, 24);
  const auto flags = common_flags(dir);
  const auto ingest = run("ingest --corpus '" + (dir / "corpus").string() + "' " + flags);
  REQUIRE(ingest.exit_code == 0);
  CHECK(ingest.out == (dir / "manifest.tsv").generic_string() + "\n");

  REQUIRE(run("split --seed 5 --test-per-class 1 " + flags).exit_code == 0);
  const auto first = slurp(dir / "manifest.tsv");
  REQUIRE(run("split --seed 5 --test-per-class 1 " + flags).exit_code == 0);
  CHECK(slurp(dir / "manifest.tsv") == first);
  REQUIRE(run("split --seed 6 --test-per-class 1 " + flags).exit_code == 0);
  CHECK(slurp(dir / "manifest.tsv") != first);

  // A config file, then a flag on top of it.
  {
    std::ofstream(dir / "p.conf") << "seed = 5\nsplit.test_per_class = 1\n";
  }
  REQUIRE(run("split --config '" + (dir / "p.conf").string() + "' " + flags).exit_code == 0);
  CHECK(slurp(dir / "manifest.tsv") == first);

  REQUIRE(run("augment --seed 5 --target 6 " + flags).exit_code == 0);
  const auto augmented = slurp(dir / "manifest.tsv");
  REQUIRE(run("augment --seed 5 --target 6 " + flags).exit_code == 0);
  CHECK(slurp(dir / "manifest.tsv") == augmented);
}

TEST_CASE("serve prints its address and stops cleanly on SIGTERM") {
  TempDir dir;
  int out_pipe[2];
  REQUIRE(pipe(out_pipe) == 0);
  const pid_t pid = fork();
  REQUIRE(pid >= 0);
  if (pid == 0) {
    dup2(out_pipe[1], STDOUT_FILENO);
    close(out_pipe[0]);
    close(out_pipe[1]);
    const auto store = (dir / "store").string();
    execl(DERMCLASS_CLI, DERMCLASS_CLI, "serve", "--listen", "127.0.0.1:0", "--store", store.c_str(),
          static_cast<char*>(nullptr));
    _exit(127);
  }
  close(out_pipe[1]);
  std::string line;
  char c;
  while (read(out_pipe[0], &c, 1) == 1 && c != '\n') line += c;
  close(out_pipe[0]);
  REQUIRE(line.rfind("http://localhost:", 0) == 0);
  const int port = std::stoi(line.substr(std::string("http://localhost:").size()));

  httplib::Client client("127.0.0.1", port);
  auto health = client.Get("/health");
  REQUIRE(health);
  CHECK(health->status == 200);
  CHECK(health->body.find("no_model") != std::string::npos);
  const auto png = testsupport::encode_png(testsupport::class_image(0, 0, 32));
  auto submit = client.Post("/cases", png, "image/png");
  REQUIRE(submit);
  CHECK(submit->status == 503);

  kill(pid, SIGTERM);
  int status = 0;
  waitpid(pid, &status, 0);
  CHECK(WIFEXITED(status));
  CHECK(WEXITSTATUS(status) == 0);
}
