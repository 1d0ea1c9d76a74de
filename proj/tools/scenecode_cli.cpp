// scenecode: command-line front end for analysis, training, generation and
// evaluation of code-conditioned traffic scenarios.
#include <algorithm>
#include <atomic>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <mutex>
#include <optional>
#include <sstream>
#include <thread>

#include <CLI11.hpp>
#include <spdlog/spdlog.h>

#include "scenecode/checkpoint.hpp"
#include "scenecode/code_text.hpp"
#include "scenecode/config.hpp"
#include "scenecode/map_library.hpp"
#include "scenecode/synth.hpp"

namespace fs = std::filesystem;
using namespace scenecode;

namespace {

constexpr int kExitRuntime = 1;
constexpr int kExitUsage = 2;

constexpr std::string_view kCodesSuffix = ".codes.txt";

/// Used by --mock when no script is given.
constexpr std::string_view kDefaultMockReply =
    "Vehicle Code:\n"
    "- 'V1': [-1,0,0,4,4,4,4,4,4,1]\n"
    "- 'V2': [0,1,0,4,4,4,4,4,4,1]\n"
    "\n"
    "Map Code:\n"
    "- 'Map': [2,1,0,0,-1,1]\n"
    "\n"
    "Interaction Code:\n"
    "- 'I1': [0,0,0,0,0] | [0,0,0,0,0]\n"
    "- 'I2': [1,1,1,1,1] | [0,0,0,0,0]\n";

/// An error raised in a named pipeline stage.
class StageError : public std::runtime_error {
 public:
  StageError(const std::string& stage, const std::string& what, bool usage)
      : std::runtime_error(stage + ": " + what), usage_(usage) {}
  [[nodiscard]] bool usage() const { return usage_; }

 private:
  bool usage_;
};

template <typename F>
auto in_stage(const std::string& stage, F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const StageError&) {
    throw;
  } catch (const InvalidInputError& e) {
    throw StageError(stage, e.what(), true);
  } catch (const ValidationError& e) {
    throw StageError(stage, e.what(), true);
  } catch (const CodeParseError& e) {
    throw StageError(stage, e.what(), true);
  } catch (const std::exception& e) {
    throw StageError(stage, e.what(), false);
  }
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InvalidInputError("cannot open '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_file(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open '" + path.string() + "' for writing");
  out << text;
  if (!out) throw std::runtime_error("failed writing '" + path.string() + "'");
}

/// Sorted list of files in `dir` ending with `suffix`.
std::vector<fs::path> list_files(const fs::path& dir, std::string_view suffix) {
  if (!fs::is_directory(dir)) throw InvalidInputError("'" + dir.string() + "' is not a directory");
  std::vector<fs::path> out;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.is_regular_file() && e.path().filename().string().ends_with(suffix)) out.push_back(e.path());
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::string strip_suffix(const fs::path& p, std::string_view suffix) {
  std::string name = p.filename().string();
  if (name.ends_with(suffix)) name.resize(name.size() - suffix.size());
  return name;
}

std::vector<Scenario> load_scenarios(const fs::path& dir, std::vector<std::string>* names = nullptr) {
  std::vector<Scenario> out;
  for (const fs::path& p : list_files(dir, ".json")) {
    out.push_back(load_scenario(p.string()));
    if (names) names->push_back(p.stem().string());
  }
  if (out.empty()) throw InvalidInputError("no scenario files in '" + dir.string() + "'");
  return out;
}

struct Globals {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  bool verbose{false};
  RunConfig config;
};

// synth ----------------------------------------------------------------------

struct SynthArgs {
  std::string out_dir;
  std::size_t count{8};
  int max_vehicles{4};
  std::string spec_path;
};

void cmd_synth(const Globals& g, const SynthArgs& a) {
  const std::uint64_t seed = g.seed.value_or(0);
  std::vector<Scenario> scenarios;
  if (!a.spec_path.empty()) {
    const SynthSpec spec = in_stage("spec", [&] {
      try {
        return synth_spec_from_json(nlohmann::json::parse(read_file(a.spec_path)));
      } catch (const nlohmann::json::exception& e) {
        throw InvalidInputError(std::string("malformed spec: ") + e.what());
      }
    });
    scenarios.push_back(in_stage("synth", [&] { return synth_scenario(spec, seed); }));
  } else {
    scenarios = in_stage("synth", [&] { return synth_dataset(a.count, seed, a.max_vehicles); });
  }
  for (std::size_t i = 0; i < scenarios.size(); ++i) {
    char name[32];
    std::snprintf(name, sizeof(name), "scenario_%03zu.json", i);
    write_file(fs::path(a.out_dir) / name, scenario_to_json(scenarios[i]).dump(1) + "\n");
  }
  std::cout << "wrote " << scenarios.size() << " scenario(s) to " << a.out_dir << "\n";
}

// analyze --------------------------------------------------------------------

struct AnalyzeArgs {
  std::string input;
  std::string out;
};

std::string analyze_one(const std::string& path, const CodecConfig& cc) {
  const Scenario s = in_stage("load", [&] { return load_scenario(path); });
  return in_stage("analyze", [&] { return serialize_codes(extract_codes(s, cc)); });
}

void cmd_analyze(const Globals& g, const AnalyzeArgs& a) {
  if (fs::is_directory(a.input)) {
    if (a.out.empty()) throw InvalidInputError("analyze: --out directory is required for a directory input");
    const auto files = list_files(a.input, ".json");
    if (files.empty()) throw InvalidInputError("no scenario files in '" + a.input + "'");
    for (const fs::path& p : files) {
      write_file(fs::path(a.out) / (p.stem().string() + std::string(kCodesSuffix)), analyze_one(p.string(), g.config.codec));
    }
    std::cout << "analyzed " << files.size() << " scenario(s) into " << a.out << "\n";
    return;
  }
  const std::string text = analyze_one(a.input, g.config.codec);
  if (a.out.empty()) {
    std::cout << text;
  } else {
    write_file(a.out, text);
  }
}

// train ----------------------------------------------------------------------

struct TrainArgs {
  std::string data_dir;
  std::size_t synth_count{0};
  int max_vehicles{4};
  std::string out;
  std::string log_path;
  std::string resume;
  std::optional<int> steps;
  std::optional<double> lr;
  std::optional<int> epochs;
};

void cmd_train(const Globals& g, const TrainArgs& a) {
  TrainConfig tc = g.config.train;
  if (g.seed) tc.seed = *g.seed;
  if (a.steps) tc.max_steps = *a.steps;
  if (a.lr) tc.learning_rate = *a.lr;
  if (a.epochs) tc.epochs = *a.epochs;
  if (tc.max_steps > 0 && !a.epochs) tc.epochs = std::max(tc.epochs, tc.max_steps);
  tc.validate();

  std::vector<Scenario> data;
  if (!a.data_dir.empty()) {
    data = in_stage("load", [&] { return load_scenarios(a.data_dir); });
  } else if (a.synth_count > 0) {
    data = in_stage("synth", [&] { return synth_dataset(a.synth_count, tc.seed, a.max_vehicles); });
  } else {
    throw InvalidInputError("train: give --data or --synth");
  }

  std::optional<Checkpoint> resumed;
  if (!a.resume.empty()) {
    if (!fs::exists(a.resume)) throw InvalidInputError("checkpoint '" + a.resume + "' does not exist");
    resumed = in_stage("checkpoint", [&] { return load_checkpoint(a.resume); });
  }
  DecoderConfig dc = tc.shrink_dims ? *tc.shrink_dims : g.config.decoder;
  if (resumed) {
    if ((g.config.decoder_given || tc.shrink_dims) && !(resumed->model.config() == dc)) {
      throw InvalidInputError("train: --resume checkpoint config differs from the configured decoder");
    }
    dc = resumed->model.config();
  }

  std::vector<TrainingSample> samples;
  in_stage("prepare", [&] {
    for (const Scenario& s : data) samples.push_back(make_training_sample(s, dc, g.config.codec));
  });

  DecoderModel model = resumed ? std::move(resumed->model) : DecoderModel(dc, tc.seed);
  Trainer trainer(model, tc);
  if (resumed && resumed->optimizer) trainer.optimizer().set_state(std::move(*resumed->optimizer));

  std::ofstream log_file;
  std::ostream* log = &std::cout;
  if (!a.log_path.empty()) {
    log_file.open(a.log_path, resumed ? std::ios::app : std::ios::trunc);
    if (!log_file) throw std::runtime_error("cannot open log '" + a.log_path + "'");
    log = &log_file;
  }
  const auto records = in_stage("train", [&] { return trainer.fit(samples, log); });
  in_stage("checkpoint", [&] { save_checkpoint(model, a.out, &trainer.optimizer().state()); });
  if (!records.empty()) {
    std::cout << "trained " << records.size() << " step(s); final total loss " << records.back().loss.total
              << "; checkpoint " << a.out << "\n";
  }
}

// generate -------------------------------------------------------------------

struct GenerateArgs {
  std::string codes;
  std::string description;
  std::string checkpoint;
  std::string map_index;
  std::string out;
  std::string render;
  bool mock{false};
  std::string mock_script;
};

Scenario generate_one(const CodeBundle& bundle, const MapIndex& index, const DecoderModel& model,
                      const CodecConfig& cc) {
  const RetrievedMap rm = in_stage("map retrieval", [&] { return retrieve(index, bundle.map_code); });
  if (rm.match_distance > 0) {
    spdlog::warn("map retrieval: closest map code is at distance {} (entry {})", rm.match_distance,
                 index.entries[rm.entry_index].source_id);
  }
  Scenario s = in_stage("decode", [&] { return decode(bundle, rm.map, model, cc); });
  in_stage("validate", [&] { require_valid(s); });
  return s;
}

void cmd_generate(const Globals& g, const GenerateArgs& a) {
  if (a.codes.empty() == a.description.empty()) {
    throw InvalidInputError("generate: give exactly one of --codes or --description");
  }
  if (!fs::exists(a.checkpoint)) throw InvalidInputError("checkpoint '" + a.checkpoint + "' does not exist");
  if (!fs::exists(a.map_index)) throw InvalidInputError("map index '" + a.map_index + "' does not exist");
  const DecoderConfig* expected = g.config.decoder_given ? &g.config.decoder : nullptr;
  const Checkpoint ck = in_stage("checkpoint", [&] { return load_checkpoint(a.checkpoint, expected); });
  const MapIndex index = in_stage("map index", [&] { return load_map_index(a.map_index); });
  const CodecConfig& cc = g.config.codec;

  std::vector<std::pair<std::string, CodeBundle>> jobs;
  bool out_is_dir = false;
  if (!a.description.empty()) {
    std::unique_ptr<llm::Provider> provider;
    if (a.mock || !a.mock_script.empty()) {
      if (a.mock_script.empty()) {
        provider = std::make_unique<llm::MockProvider>(std::map<std::string, std::string>{},
                                                       std::string(kDefaultMockReply));
      } else {
        provider = std::make_unique<llm::MockProvider>(in_stage("llm", [&] {
          try {
            return llm::mock_provider_from_json(nlohmann::json::parse(read_file(a.mock_script)));
          } catch (const nlohmann::json::exception& e) {
            throw InvalidInputError(std::string("malformed mock script: ") + e.what());
          }
        }));
      }
    } else {
      provider = std::make_unique<llm::HttpChatProvider>(g.config.llm);
    }
    llm::EncodeOptions opts;
    opts.max_retries = g.config.llm.max_retries;
    opts.initial_backoff = std::chrono::milliseconds(static_cast<long>(g.config.llm.initial_backoff_seconds * 1000));
    opts.interaction_areas = cc.interaction_areas;
    const llm::EncodeResult r = in_stage("llm", [&] {
      try {
        return llm::encode_description(a.description, *provider, opts);
      } catch (const llm::EncodeError& e) {
        spdlog::error("raw reply:\n{}", e.raw_reply());
        throw;
      }
    });
    for (const std::string& w : r.warnings) spdlog::warn("llm: {}", w);
    jobs.emplace_back("generated", r.bundle);
  } else if (fs::is_directory(a.codes)) {
    out_is_dir = true;
    const auto files = list_files(a.codes, kCodesSuffix);
    if (files.empty()) throw InvalidInputError("no *.codes.txt files in '" + a.codes + "'");
    for (const fs::path& p : files) {
      ParsedCodes parsed = in_stage("parse " + p.filename().string(), [&] {
        return parse_codes(read_file(p.string()), cc.interaction_areas);
      });
      for (const std::string& w : parsed.warnings) spdlog::warn("{}: {}", p.filename().string(), w);
      jobs.emplace_back(strip_suffix(p, kCodesSuffix), std::move(parsed.bundle));
    }
  } else {
    ParsedCodes parsed = in_stage("parse", [&] { return parse_codes(read_file(a.codes), cc.interaction_areas); });
    for (const std::string& w : parsed.warnings) spdlog::warn("parse: {}", w);
    jobs.emplace_back("generated", std::move(parsed.bundle));
  }

  for (const auto& [name, bundle] : jobs) {
    const Scenario s = generate_one(bundle, index, ck.model, cc);
    const fs::path out = out_is_dir ? fs::path(a.out) / (name + ".json") : fs::path(a.out);
    write_file(out, scenario_to_json(s).dump(1) + "\n");
    if (!a.render.empty()) {
      const fs::path svg = out_is_dir ? fs::path(a.render) / (name + ".svg") : fs::path(a.render);
      write_file(svg, render_svg(s, g.config.render));
    }
  }
  std::cout << "generated " << jobs.size() << " scenario(s)\n";
}

// evaluate -------------------------------------------------------------------

struct EvaluateArgs {
  std::string gt_dir;
  std::string pred_dir;
  std::string out;
  bool json{false};
};

void cmd_evaluate(const Globals& g, const EvaluateArgs& a) {
  const auto gt_files = list_files(a.gt_dir, ".json");
  const auto pred_files = list_files(a.pred_dir, ".json");
  std::map<std::string, fs::path> preds;
  for (const fs::path& p : pred_files) preds[p.filename().string()] = p;

  std::vector<std::pair<fs::path, fs::path>> pairs;
  for (const fs::path& p : gt_files) {
    const auto it = preds.find(p.filename().string());
    if (it == preds.end()) {
      spdlog::warn("evaluate: no prediction for {}; skipped", p.filename().string());
      continue;
    }
    pairs.emplace_back(p, it->second);
    preds.erase(it);
  }
  for (const auto& [name, path] : preds) spdlog::warn("evaluate: no ground truth for {}; skipped", name);
  if (pairs.empty()) throw InvalidInputError("evaluate: no paired scenario files");

  std::vector<ScenarioMetrics> rows(pairs.size());
  std::vector<std::string> errors(pairs.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < pairs.size(); i = next++) {
      try {
        rows[i] = scenario_metrics(load_scenario(pairs[i].first.string()), load_scenario(pairs[i].second.string()),
                                   g.config.metrics);
        rows[i].name = pairs[i].first.stem().string();
      } catch (const std::exception& e) {
        errors[i] = pairs[i].first.filename().string() + ": " + e.what();
      }
    }
  };
  const unsigned threads = std::clamp(std::thread::hardware_concurrency(), 1u, 8u);
  std::vector<std::thread> pool;
  for (unsigned t = 1; t < threads; ++t) pool.emplace_back(worker);
  worker();
  for (std::thread& t : pool) t.join();
  for (const std::string& e : errors) {
    if (!e.empty()) throw InvalidInputError("evaluate: " + e);
  }

  const MetricReport report = make_report(std::move(rows));
  const std::string text = a.json ? report_to_json(report).dump(2) + "\n" : report_to_csv(report);
  if (a.out.empty()) {
    std::cout << text;
  } else {
    write_file(a.out, text);
    std::cout << (a.json ? report_to_json(report)["aggregate"].dump() + "\n" : text);
  }
}

// retrieve-map ---------------------------------------------------------------

struct RetrieveArgs {
  std::string index;
  std::string code;
  std::string out;
  bool build{false};
  std::string scenarios_dir;
};

MapCode parse_map_code(const std::string& text) {
  std::string cleaned = text;
  for (char& c : cleaned) {
    if (c == '[' || c == ']' || c == ',') c = ' ';
  }
  std::istringstream in(cleaned);
  std::array<int, kMapCodeLength> v{};
  for (int& x : v) {
    if (!(in >> x)) throw InvalidInputError("map code must be 6 integers, got '" + text + "'");
  }
  std::string extra;
  if (in >> extra) throw InvalidInputError("map code must be 6 integers, got '" + text + "'");
  return MapCode::from_flat(v);
}

void cmd_retrieve_map(const Globals& g, const RetrieveArgs& a) {
  if (a.build) {
    if (a.scenarios_dir.empty() || a.out.empty()) throw InvalidInputError("retrieve-map --build needs --scenarios and --out");
    std::vector<std::string> names;
    const auto scenarios = in_stage("load", [&] { return load_scenarios(a.scenarios_dir, &names); });
    const MapIndex idx = in_stage("index", [&] { return build_index(scenarios, g.config.codec, names); });
    save_map_index(idx, a.out);
    std::cout << "indexed " << idx.entries.size() << " map(s) into " << a.out << "\n";
    return;
  }
  if (a.index.empty() || a.code.empty()) throw InvalidInputError("retrieve-map needs --index and --code (or --build)");
  const MapIndex idx = in_stage("map index", [&] { return load_map_index(a.index); });
  const RetrievedMap rm = in_stage("map retrieval", [&] { return retrieve(idx, parse_map_code(a.code)); });
  const nlohmann::json j{{"source_id", idx.entries[rm.entry_index].source_id},
                         {"match_distance", rm.match_distance},
                         {"map", lane_map_to_json(rm.map)}};
  if (a.out.empty()) {
    std::cout << j.dump(1) << "\n";
  } else {
    write_file(a.out, j.dump(1) + "\n");
    std::cout << "retrieved " << idx.entries[rm.entry_index].source_id << " (distance " << rm.match_distance << ")\n";
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"scenecode: code-conditioned traffic scenario generation"};
  app.require_subcommand(1);
  Globals g;
  app.add_option("--config", g.config_path, "JSON run configuration")->check(CLI::ExistingFile);
  app.add_option("--seed", g.seed, "Seed for synthesis and training");
  app.add_flag("-v,--verbose", g.verbose, "Debug logging");

  SynthArgs synth;
  auto* synth_cmd = app.add_subcommand("synth", "Write synthetic scenarios");
  synth_cmd->add_option("--out", synth.out_dir, "Output directory")->required();
  synth_cmd->add_option("--count", synth.count, "Number of scenarios")->check(CLI::PositiveNumber);
  synth_cmd->add_option("--max-vehicles", synth.max_vehicles, "Vehicles per scenario")->check(CLI::Range(1, 32));
  synth_cmd->add_option("--spec", synth.spec_path, "Synth spec JSON for a single scenario")->check(CLI::ExistingFile);

  AnalyzeArgs analyze;
  auto* analyze_cmd = app.add_subcommand("analyze", "Extract scene codes from scenarios");
  analyze_cmd->add_option("input", analyze.input, "Scenario file or directory")->required()->check(CLI::ExistingPath);
  analyze_cmd->add_option("-o,--out", analyze.out, "Output code file, or directory for a directory input");

  TrainArgs train;
  auto* train_cmd = app.add_subcommand("train", "Train the decoder");
  train_cmd->add_option("--data", train.data_dir, "Directory of scenario files")->check(CLI::ExistingDirectory);
  train_cmd->add_option("--synth", train.synth_count, "Train on this many synthetic scenarios");
  train_cmd->add_option("--max-vehicles", train.max_vehicles, "Vehicles per synthetic scenario")->check(CLI::Range(1, 32));
  train_cmd->add_option("-o,--out", train.out, "Output checkpoint")->required();
  train_cmd->add_option("--log", train.log_path, "Training log file (stdout by default)");
  train_cmd->add_option("--resume", train.resume, "Continue from a checkpoint");
  train_cmd->add_option("--steps", train.steps, "Maximum optimizer steps")->check(CLI::PositiveNumber);
  train_cmd->add_option("--lr", train.lr, "Learning rate");
  train_cmd->add_option("--epochs", train.epochs, "Epochs")->check(CLI::PositiveNumber);

  GenerateArgs gen;
  auto* gen_cmd = app.add_subcommand("generate", "Generate scenarios from codes or a description");
  gen_cmd->add_option("--codes", gen.codes, "Code file or directory of *.codes.txt")->check(CLI::ExistingPath);
  gen_cmd->add_option("--description", gen.description, "Natural-language scene description");
  gen_cmd->add_option("--checkpoint", gen.checkpoint, "Decoder checkpoint")->required();
  gen_cmd->add_option("--map-index", gen.map_index, "Map index file")->required();
  gen_cmd->add_option("-o,--out", gen.out, "Output scenario file, or directory for a code directory")->required();
  gen_cmd->add_option("--render", gen.render, "SVG output file (or directory)");
  gen_cmd->add_flag("--mock", gen.mock, "Use the offline mock language model");
  gen_cmd->add_option("--mock-script", gen.mock_script, "Mock reply script JSON")->check(CLI::ExistingFile);

  EvaluateArgs eval;
  auto* eval_cmd = app.add_subcommand("evaluate", "Compare predicted scenarios with ground truth");
  eval_cmd->add_option("--gt", eval.gt_dir, "Ground-truth directory")->required();
  eval_cmd->add_option("--pred", eval.pred_dir, "Prediction directory")->required();
  eval_cmd->add_option("-o,--out", eval.out, "Metric table file");
  eval_cmd->add_flag("--json", eval.json, "Write JSON instead of CSV");

  RetrieveArgs ret;
  auto* ret_cmd = app.add_subcommand("retrieve-map", "Look up a map by map code, or build an index");
  ret_cmd->add_option("--index", ret.index, "Map index file")->check(CLI::ExistingFile);
  ret_cmd->add_option("--code", ret.code, "Map code, e.g. \"[2,1,0,0,-1,1]\"");
  ret_cmd->add_option("-o,--out", ret.out, "Output file");
  ret_cmd->add_flag("--build", ret.build, "Build an index from --scenarios into --out");
  ret_cmd->add_option("--scenarios", ret.scenarios_dir, "Scenario directory for --build")->check(CLI::ExistingDirectory);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kExitUsage;
  }

  spdlog::set_level(g.verbose ? spdlog::level::debug : spdlog::level::info);
  spdlog::set_pattern("[%l] %v");
  try {
    g.config = load_run_config(g.config_path);
    if (*synth_cmd) cmd_synth(g, synth);
    else if (*analyze_cmd) cmd_analyze(g, analyze);
    else if (*train_cmd) cmd_train(g, train);
    else if (*gen_cmd) cmd_generate(g, gen);
    else if (*eval_cmd) cmd_evaluate(g, eval);
    else if (*ret_cmd) cmd_retrieve_map(g, ret);
    return 0;
  } catch (const StageError& e) {
    spdlog::error("{}", e.what());
    return e.usage() ? kExitUsage : kExitRuntime;
  } catch (const InvalidInputError& e) {
    spdlog::error("{}", e.what());
    return kExitUsage;
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return kExitRuntime;
  }
}
