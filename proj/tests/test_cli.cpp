#include <doctest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "scenecode/scenario.hpp"
#include "scenecode/synth.hpp"

namespace fs = std::filesystem;
using namespace scenecode;

namespace {

const fs::path kDir = fs::temp_directory_path() / "scenecode_cli_test";

struct Run {
  int code;
  std::string output;
};

Run cli(const std::string& args) {
  const fs::path log = kDir / "last.log";
  const std::string cmd = std::string("\"") + SCENECODE_CLI + "\" " + args + " > \"" + log.string() + "\" 2>&1";
  const int status = std::system(cmd.c_str());
  std::ifstream in(log);
  std::stringstream s;
  s << in.rdbuf();
  return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, s.str()};
}

void write(const fs::path& p, const std::string& text) { std::ofstream(p) << text; }

std::string quoted(const fs::path& p) { return "\"" + p.string() + "\""; }

struct Workspace {
  Workspace() {
    fs::remove_all(kDir);
    fs::create_directories(kDir);
    write(kDir / "desk.json", R"({"decoder": {"lane_dim": 16, "vehicle_dim": 16, "interaction_dim": 16,
      "mcg_layers": 2, "head_hidden": 32, "max_lanes": 16, "pe_frequencies": 2},
      "train": {"batch_size": 4, "log_every": 1}})");
  }
  ~Workspace() { fs::remove_all(kDir); }
  std::string cfg() const { return "--config " + quoted(kDir / "desk.json") + " "; }
};

}  // namespace

TEST_CASE("cli: usage and input errors exit 2 with a message") {
  Workspace w;
  CHECK(cli("").code == 2);
  CHECK(cli("analyze " + quoted(kDir / "nope.json")).code == 2);

  write(kDir / "broken.json", "{ not json");
  Run r = cli("analyze " + quoted(kDir / "broken.json"));
  CHECK(r.code == 2);

  write(kDir / "empty.json", R"({"map": {"lanes": [], "intersection": null}, "vehicles": [], "trajectories": []})");
  r = cli("analyze " + quoted(kDir / "empty.json"));
  CHECK(r.code == 2);

  write(kDir / "bad_cfg.json", R"({"train": {"lr": 0.1}})");
  r = cli("--config " + quoted(kDir / "bad_cfg.json") + " synth --out " + quoted(kDir / "s"));
  CHECK(r.code == 2);
  CHECK(r.output.find("'lr'") != std::string::npos);
}

TEST_CASE("cli: analyze output parses back; evaluate pairs by name") {
  Workspace w;
  REQUIRE(cli("--seed 3 synth --out " + quoted(kDir / "gt") + " --count 3").code == 0);
  Run r = cli("analyze " + quoted(kDir / "gt" / "scenario_000.json") + " -o " + quoted(kDir / "one.codes.txt"));
  CHECK(r.code == 0);
  CHECK(fs::exists(kDir / "one.codes.txt"));

  fs::create_directories(kDir / "same");
  fs::create_directories(kDir / "moved");
  for (const auto& e : fs::directory_iterator(kDir / "gt")) {
    fs::copy_file(e.path(), kDir / "same" / e.path().filename());
    Scenario s = load_scenario(e.path().string());
    for (Trajectory& t : s.trajectories) {
      for (auto& p : t.positions) p = p + Vec2{3, 4};
    }
    save_scenario(s, (kDir / "moved" / e.path().filename()).string());
  }
  write(kDir / "moved" / "extra.json", "{}");

  r = cli("evaluate --gt " + quoted(kDir / "gt") + " --pred " + quoted(kDir / "same") + " -o " +
          quoted(kDir / "same.json") + " --json");
  REQUIRE(r.code == 0);
  auto j = nlohmann::json::parse(std::ifstream(kDir / "same.json"));
  CHECK(j["aggregate"]["mADE"] == 0.0);
  CHECK(j["aggregate"]["HD"] == 0.0);

  r = cli("evaluate --gt " + quoted(kDir / "gt") + " --pred " + quoted(kDir / "moved") + " -o " +
          quoted(kDir / "moved.csv"));
  REQUIRE(r.code == 0);
  CHECK(r.output.find("extra") != std::string::npos);
  std::ifstream csv(kDir / "moved.csv");
  std::string header, first;
  std::getline(csv, header);
  std::getline(csv, first);
  CHECK(header == "scenario,mADE,minADE,mFDE,minFDE,SCR,HD");
  CHECK(first.starts_with("scenario_000,5.000000,5.000000,5.000000,5.000000,"));

  fs::create_directories(kDir / "void");
  CHECK(cli("evaluate --gt " + quoted(kDir / "void") + " --pred " + quoted(kDir / "void")).code != 0);
}

TEST_CASE("cli: train resumes the loss curve; generate needs a checkpoint") {
  Workspace w;
  const std::string cfg = w.cfg();
  const fs::path ck = kDir / "a.ckpt", log = kDir / "train.log";
  REQUIRE(cli(cfg + "train --synth 4 --steps 3 -o " + quoted(ck) + " --log " + quoted(log)).code == 0);
  REQUIRE(cli(cfg + "train --synth 4 --steps 2 --resume " + quoted(ck) + " -o " + quoted(kDir / "b.ckpt") +
              " --log " + quoted(log))
              .code == 0);
  std::ifstream in(log);
  std::vector<std::string> lines;
  for (std::string line; std::getline(in, line);) lines.push_back(line);
  REQUIRE(lines.size() == 5);
  for (std::size_t i = 0; i < lines.size(); ++i) CHECK(lines[i].starts_with("step=" + std::to_string(i + 1) + " "));

  const Run r = cli(cfg + "generate --mock --description \"x\" --checkpoint " + quoted(kDir / "missing.ckpt") +
                    " --map-index " + quoted(kDir / "none.json") + " -o " + quoted(kDir / "out.json"));
  CHECK(r.code == 2);
  CHECK(r.output.find("missing.ckpt") != std::string::npos);
}
