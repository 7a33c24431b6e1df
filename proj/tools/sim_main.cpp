#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "nstream/error.hpp"
#include "nstream/sim/scenario.hpp"
#include "nstream/sim/url.hpp"
#include "nstream/sim/world.hpp"

namespace {

struct RunFlags {
  std::string connector;
  std::uint64_t seed = 0;
  bool seed_set = false;
  std::string report;
  bool transcripts = false;
  bool emit = false;
};

void add_run_flags(CLI::App* cmd, RunFlags& flags) {
  cmd->add_option("--connector", flags.connector, "scheme or scheme:locator (mem, rtclite, storage, sfu, split)");
  cmd->add_option_function<std::uint64_t>(
      "--seed",
      [&flags](std::uint64_t s) {
        flags.seed = s;
        flags.seed_set = true;
      },
      "override the scenario seed");
  cmd->add_option("--report", flags.report, "write the JSON report here instead of stdout");
  cmd->add_flag("--transcripts", flags.transcripts, "include session transcripts in the report");
  cmd->add_flag("--emit", flags.emit, "print the scenario script instead of running it");
}

int run(nstream::Scenario scenario, const RunFlags& flags) {
  if (!flags.connector.empty()) scenario.connector = flags.connector;
  if (flags.seed_set) scenario.seed = flags.seed;
  if (flags.emit) {
    std::cout << scenario.str();
    return 0;
  }
  nstream::ScenarioRunner runner(scenario, {std::chrono::milliseconds(1000), flags.transcripts});
  auto report = runner.run();
  auto json = report.to_json();
  if (flags.report.empty()) {
    std::cout << json;
  } else {
    std::ofstream out(flags.report, std::ios::binary);
    if (!out) throw nstream::Error(nstream::Errc::param, "cannot write " + flags.report);
    out << json;
  }
  std::size_t passed = 0;
  for (const auto& a : report.assertions) {
    if (a.ok) {
      ++passed;
    } else {
      std::cerr << "FAILED at " << a.at.count() << "ms: expect " << a.expect << " (" << a.detail << ")\n";
    }
  }
  for (const auto& e : report.action_errors) std::cerr << "action error: " << e << '\n';
  if (!report.consistent()) std::cerr << "frame counts inconsistent\n";
  std::cerr << passed << "/" << report.assertions.size() << " expectations passed\n";
  return report.ok() ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Named-stream simulator"};
  app.require_subcommand(1);

  RunFlags flags;
  std::string file;
  auto* run_cmd = app.add_subcommand("run", "run a scenario file");
  run_cmd->add_option("scenario", file, "scenario file")->required()->check(CLI::ExistingFile);
  add_run_flags(run_cmd, flags);

  std::string a = "alice";
  std::string b = "bob";
  auto* call_cmd = app.add_subcommand("call", "two-party call");
  call_cmd->add_option("a", a, "first party");
  call_cmd->add_option("b", b, "second party");
  add_run_flags(call_cmd, flags);

  int n = 3;
  auto* conf_cmd = app.add_subcommand("conf", "n-party conference");
  conf_cmd->add_option("n", n, "number of endpoints")->required();
  add_run_flags(conf_cmd, flags);

  int depth = 2;
  int fanout = 2;
  auto* tree_cmd = app.add_subcommand("tree", "peer-to-peer broadcast tree");
  tree_cmd->add_option("depth", depth, "levels below the root")->required();
  tree_cmd->add_option("fanout", fanout, "children per node")->required();
  add_run_flags(tree_cmd, flags);

  auto* canon_cmd = app.add_subcommand("canonical", "one publisher, two subscribers, full feature sweep");
  add_run_flags(canon_cmd, flags);

  std::string url;
  auto* url_cmd = app.add_subcommand("parse-url", "parse a web+ezpub:/web+ezsub: link");
  url_cmd->add_option("url", url, "link to parse")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*url_cmd) {
      auto parsed = nstream::parse_stream_url(url);
      nlohmann::ordered_json j{{"mode", nstream::to_string(parsed.mode)},
                               {"scheme", parsed.scheme},
                               {"locator", parsed.locator},
                               {"stream", parsed.stream}};
      std::cout << j.dump() << '\n';
      return 0;
    }
    if (*run_cmd) {
      std::ifstream in(file, std::ios::binary);
      std::stringstream text;
      text << in.rdbuf();
      return run(nstream::parse_scenario(text.str()), flags);
    }
    const std::string connector = flags.connector.empty() ? "mem" : flags.connector;
    if (*call_cmd) return run(nstream::build_call(a, b, connector), flags);
    if (*conf_cmd) return run(nstream::build_conference(n, connector), flags);
    if (*tree_cmd) return run(nstream::build_broadcast_tree(depth, fanout, connector), flags);
    if (*canon_cmd) return run(nstream::build_canonical(connector), flags);
  } catch (const nstream::Error& e) {
    std::cerr << "error: " << nstream::to_string(e.code()) << ": " << e.what() << '\n';
    return 2;
  }
  return 2;
}
