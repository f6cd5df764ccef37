#include <doctest.h>

#include "testkit.hpp"
#include "vulncity/cli.hpp"
#include "vulncity/ingest.hpp"

#include <json.hpp>

#include <csignal>
#include <fstream>
#include <spawn.h>
#include <sstream>
#include <sys/wait.h>
#include <unistd.h>

using namespace vulncity;
namespace fs = std::filesystem;

extern char** environ;

namespace {

struct Run {
  int code;
  std::string out;
  std::string err;
};

Run cli(std::vector<std::string> args) {
  args.insert(args.begin(), "vulncity");
  std::vector<char*> argv;
  for (auto& a : args) argv.push_back(a.data());
  std::ostringstream out, err;
  int code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

fs::path scratch(const std::string& name) {
  auto dir = fs::temp_directory_path() / ("vulncity-cli-" + std::to_string(::getpid()));
  fs::create_directories(dir);
  return dir / name;
}

std::string small(const char* file) { return testkit::fixture(std::string("small/") + file).string(); }

// A child process running the real executable with stdout on a pipe.
struct Child {
  pid_t pid = -1;
  FILE* out = nullptr;

  explicit Child(std::vector<std::string> args) {
    args.insert(args.begin(), VULNCITY_EXE);
    std::vector<char*> argv;
    for (auto& a : args) argv.push_back(a.data());
    argv.push_back(nullptr);
    int fds[2];
    REQUIRE(pipe(fds) == 0);
    posix_spawn_file_actions_t actions;
    posix_spawn_file_actions_init(&actions);
    posix_spawn_file_actions_adddup2(&actions, fds[1], STDOUT_FILENO);
    posix_spawn_file_actions_addclose(&actions, fds[0]);
    REQUIRE(posix_spawn(&pid, VULNCITY_EXE, &actions, nullptr, argv.data(), environ) == 0);
    posix_spawn_file_actions_destroy(&actions);
    close(fds[1]);
    out = fdopen(fds[0], "r");
  }
  ~Child() {
    if (pid > 0) {
      kill(pid, SIGKILL);
      waitpid(pid, nullptr, 0);
    }
    if (out) fclose(out);
  }
  std::string line() {
    char buf[1024];
    return fgets(buf, sizeof buf, out) ? std::string(buf) : std::string();
  }
  int wait() {
    int status = 0;
    waitpid(pid, &status, 0);
    pid = -1;
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  }
};

}  // namespace

TEST_CASE("build writes a scene and prints a summary") {
  auto out = scratch("scene.json");
  auto r = cli({"build", "--sast", small("report.xml"), "--model", small("model.json"), "-o", out.string()});
  CHECK(r.code == kExitOk);
  CHECK(fs::exists(out));
  CHECK(r.out.find("classes:   3") != std::string::npos);
  CHECK(r.out.find("2 bound, 0 unbound") != std::string::npos);
  CHECK(r.err.find("dangling edge") != std::string::npos);
  auto scene = parse_scene(testkit::slurp(out));
  CHECK(scene.nodes.size() == 10);
}

TEST_CASE("build: layout flags are echoed in the scene metadata") {
  auto out = scratch("apl.json");
  auto r = cli({"build", "--sast", small("report.xml"), "--model", small("model.json"), "-o", out.string(),
                "--area-per-line", "0.5", "--street-width", "1.5"});
  REQUIRE(r.code == kExitOk);
  auto meta = nlohmann::json::parse(testkit::slurp(out))["metadata"]["layout"];
  CHECK(meta["areaPerLine"] == 0.5);
  CHECK(meta["streetWidth"] == 1.5);
  CHECK(meta["heightPerLine"] == 0.05);
}

TEST_CASE("build: config file applies and flags override it") {
  auto cfg = scratch("layout.json");
  std::ofstream(cfg) << R"({"areaPerLine": 2.0, "widenFactor": 1.2})";
  auto out = scratch("cfg.json");
  auto r = cli({"build", "--sast", small("report.xml"), "--model", small("model.json"), "-o", out.string(), "--config",
                cfg.string(), "--area-per-line", "0.75"});
  REQUIRE(r.code == kExitOk);
  auto meta = nlohmann::json::parse(testkit::slurp(out))["metadata"]["layout"];
  CHECK(meta["areaPerLine"] == 0.75);
  CHECK(meta["widenFactor"] == 1.2);
}

TEST_CASE("build: a missing input exits 2 naming the path") {
  auto r = cli({"build", "--sast", "/nonexistent/r.xml", "--model", small("model.json"), "-o",
                scratch("x.json").string()});
  CHECK(r.code == kExitInput);
  CHECK(r.err.find("/nonexistent/r.xml") != std::string::npos);
}

TEST_CASE("build: a malformed model exits 2 with a module prefix and the violation path") {
  auto r = cli({"build", "--sast", small("report.xml"), "--model",
                testkit::fixture("malformed/model_bad_edge_id.json").string(), "-o", scratch("x.json").string()});
  CHECK(r.code == kExitInput);
  CHECK(r.err.find("ingest") != std::string::npos);
  CHECK(r.err.find("$.callEdges[0].caller") != std::string::npos);
}

TEST_CASE("build: bad flags exit 2") {
  CHECK(cli({"build", "--sast", small("report.xml")}).code == kExitInput);
  CHECK(cli({"build", "--sast", small("report.xml"), "--model", small("model.json"), "-o", scratch("y.json").string(),
             "--area-per-line", "-1"})
            .code == kExitInput);
}

TEST_CASE("inspect a model prints LOC per top-level package") {
  auto r = cli({"inspect", small("model.json")});
  CHECK(r.code == kExitOk);
  auto doc = parse_code_model(testkit::slurp(small("model.json")));
  for (const auto& p : doc.root.subpackages) {
    CHECK(r.out.find("    " + p.fqName + ": " + std::to_string(p.totalLoc) + " LOC") != std::string::npos);
  }
}

TEST_CASE("inspect a SAST report prints a histogram consistent with the parse") {
  auto path = testkit::fixture("corpus/report.xml").string();
  auto r = cli({"inspect", path});
  CHECK(r.code == kExitOk);
  auto report = parse_sast_report(testkit::slurp(path));
  std::map<Severity, int> h;
  for (const auto& f : report.findings) ++h[*severity_of(std::vector{f})];
  std::ostringstream expect;
  expect << "{High: " << h[Severity::High] << ", Medium: " << h[Severity::Medium] << ", Low: " << h[Severity::Low]
         << ", Info: " << h[Severity::Info] << "}";
  CHECK(r.out.find(expect.str()) != std::string::npos);
}

TEST_CASE("inspect a scene and a malformed file") {
  auto out = scratch("insp.json");
  REQUIRE(cli({"build", "--sast", small("report.xml"), "--model", small("model.json"), "-o", out.string()}).code == 0);
  auto ok = cli({"inspect", out.string()});
  CHECK(ok.code == kExitOk);
  CHECK(ok.out.find("nodes: 10") != std::string::npos);

  auto bad = cli({"inspect", testkit::fixture("malformed/model_duplicate_siblings.json").string()});
  CHECK(bad.code == kExitInput);
  CHECK(bad.err.find("$.packages[1]") != std::string::npos);
  auto xml = cli({"inspect", testkit::fixture("malformed/sast_mismatched_tag.xml").string()});
  CHECK(xml.code == kExitInput);
  CHECK(xml.err.find("line 4") != std::string::npos);
}

TEST_CASE("serve: corrupt scene exits 2 before binding") {
  auto bad = scratch("corrupt.json");
  std::ofstream(bad) << R"({"metadata": {}, "nodes": [)";
  auto r = cli({"serve", bad.string(), "--listen", "127.0.0.1:0"});
  CHECK(r.code == kExitInput);
  CHECK(r.out.empty());
}

TEST_CASE("serve: prints a ready line, a second serve on the port exits 2, SIGTERM stops cleanly") {
  auto scene = scratch("serve.json");
  REQUIRE(cli({"build", "--sast", small("report.xml"), "--model", small("model.json"), "-o", scene.string()}).code ==
          0);
  Child first({"serve", scene.string(), "--listen", "127.0.0.1:0"});
  auto ready = first.line();
  REQUIRE(ready.find("vulncity serving") != std::string::npos);
  auto at = ready.find("127.0.0.1:");
  REQUIRE(at != std::string::npos);
  int port = std::stoi(ready.substr(at + 10));
  CHECK(port > 0);

  auto second = cli({"serve", scene.string(), "--listen", "127.0.0.1:" + std::to_string(port)});
  CHECK(second.code == kExitInput);
  CHECK(second.err.find("cannot listen") != std::string::npos);

  kill(first.pid, SIGTERM);
  CHECK(first.wait() == kExitOk);
}

TEST_CASE("version flag") {
  auto r = cli({"--version"});
  CHECK(r.code == kExitOk);
  CHECK(r.out.find(kVersion) != std::string::npos);
}
