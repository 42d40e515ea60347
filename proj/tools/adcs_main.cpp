// adcs: scenario runner.
//
//   adcs simulate        <scenario> [--seed N] [--out-dir D] [--sweep p=a:b:n]
//   adcs estimate-replay <scenario> ...
//   adcs closed-loop     <scenario> ...
//   adcs validate        <scenario>
//
// Exit status: 0 ok, 1 scenario invalid, 2 runtime error.

#include <CLI11.hpp>
#include <cstdio>
#include <fstream>
#include <future>
#include <iostream>
#include <optional>
#include <string>

#include "adcs/errors.hpp"
#include "adcs/runner.hpp"

namespace {

constexpr int kOk = 0;
constexpr int kInvalid = 1;
constexpr int kRuntime = 2;

struct Options {
  std::string scenario;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out_dir;
  std::optional<std::string> sweep;
};

int report(const std::vector<adcs::Finding>& findings, const std::string& file) {
  for (const auto& f : findings) std::cerr << file << ": " << adcs::to_string(f) << '\n';
  return findings.empty() ? kOk : kInvalid;
}

std::optional<nlohmann::json> read_json(const std::string& path, std::vector<adcs::Finding>& findings) {
  std::ifstream in(path);
  if (!in) {
    findings.push_back({"", "cannot open scenario file"});
    return std::nullopt;
  }
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    findings.push_back({"", std::string("invalid JSON: ") + e.what()});
    return std::nullopt;
  }
}

// Parses one variant, forcing the mode that the subcommand names.
adcs::ScenarioParse prepare(nlohmann::json doc, adcs::Mode mode, const Options& opt,
                            const std::filesystem::path& base) {
  doc["mode"] = std::string(adcs::to_string(mode));
  if (opt.seed) doc["seed"] = *opt.seed;
  auto parsed = adcs::parse_scenario(doc, base);
  if (opt.out_dir) parsed.scenario.out_dir = *opt.out_dir;
  return parsed;
}

void run_one(const adcs::Scenario& s, const std::filesystem::path& dir) {
  const adcs::RunResult r = adcs::run(s);
  for (const auto& w : r.warnings) std::cerr << "warning: " << w << '\n';
  for (const auto& p : adcs::write_outputs(s, r, dir)) std::cout << p.string() << '\n';
}

int execute(adcs::Mode mode, const Options& opt) {
  std::vector<adcs::Finding> findings;
  const auto doc = read_json(opt.scenario, findings);
  if (!doc) return report(findings, opt.scenario);
  const std::filesystem::path base = std::filesystem::path(opt.scenario).parent_path();

  if (!opt.sweep) {
    auto parsed = prepare(*doc, mode, opt, base);
    if (!parsed.ok()) return report(parsed.findings, opt.scenario);
    run_one(parsed.scenario, parsed.scenario.out_dir);
    return kOk;
  }

  const adcs::SweepSpec sweep = adcs::parse_sweep(*opt.sweep);
  std::vector<adcs::Scenario> variants;
  for (std::size_t i = 0; i < sweep.values.size(); ++i) {
    nlohmann::json d = *doc;
    adcs::set_dotted(d, sweep.param, sweep.values[i]);
    auto parsed = prepare(std::move(d), mode, opt, base);
    for (auto& f : parsed.findings) {
      f.message += " (" + sweep.param + "=" + adcs::format_number(sweep.values[i]) + ")";
      findings.push_back(f);
    }
    variants.push_back(std::move(parsed.scenario));
  }
  if (!findings.empty()) return report(findings, opt.scenario);

  const std::filesystem::path root = variants.front().out_dir;
  std::filesystem::create_directories(root);
  auto dir_of = [&](std::size_t i) {
    char name[32];
    std::snprintf(name, sizeof name, "sweep_%03zu", i);
    return root / name;
  };
  {
    std::ofstream index(root / "sweep.csv", std::ios::binary);
    index << "# schema=adcs.sweep/1 version=" << adcs::build_version() << '\n';
    index << "index," << sweep.param << ",dir\n";
    for (std::size_t i = 0; i < variants.size(); ++i) {
      index << i << ',' << adcs::format_number(sweep.values[i]) << ','
            << dir_of(i).filename().string() << '\n';
    }
  }

  // Independent runs; each writes only its own directory.
  std::vector<std::future<void>> jobs;
  for (std::size_t i = 0; i < variants.size(); ++i) {
    jobs.push_back(std::async(std::launch::async, [&, i] {
      const adcs::RunResult r = adcs::run(variants[i]);
      adcs::write_outputs(variants[i], r, dir_of(i));
    }));
  }
  std::string first_error;
  for (auto& j : jobs) {
    try {
      j.get();
    } catch (const std::exception& e) {
      if (first_error.empty()) first_error = e.what();
    }
  }
  if (!first_error.empty()) throw adcs::Error(first_error);
  std::cout << (root / "sweep.csv").string() << '\n';
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Spacecraft attitude simulation, estimation and VSCMG control"};
  app.require_subcommand(1);

  Options opt;
  std::uint64_t seed = 0;
  std::string out_dir, sweep;

  struct Command {
    const char* name;
    const char* help;
    std::optional<adcs::Mode> mode;
    CLI::App* app = nullptr;
  };
  std::vector<Command> commands{
      {"simulate", "propagate truth, synthesise sensors and run the filter", adcs::Mode::simulate},
      {"estimate-replay", "run the filter over a recorded sensor log", adcs::Mode::estimate_replay},
      {"closed-loop", "dynamics, allocation and filter in one loop", adcs::Mode::closed_loop},
      {"validate", "report every problem in a scenario file", std::nullopt},
  };
  for (auto& c : commands) {
    c.app = app.add_subcommand(c.name, c.help);
    c.app->add_option("scenario", opt.scenario, "scenario JSON file")->required();
    if (c.mode) {
      c.app->add_option("--seed", seed, "override the scenario seed");
      c.app->add_option("--out-dir", out_dir, "output directory");
      c.app->add_option("--sweep", sweep, "param=a:b:n or param=a,b,c");
    }
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kOk : kInvalid;
  }

  for (const auto& c : commands) {
    if (!c.app->parsed()) continue;
    try {
      if (!c.mode) return report(adcs::validate(opt.scenario), opt.scenario);
      if (c.app->count("--seed")) opt.seed = seed;
      if (c.app->count("--out-dir")) opt.out_dir = out_dir;
      if (c.app->count("--sweep")) opt.sweep = sweep;
      return execute(*c.mode, opt);
    } catch (const adcs::InvalidParameter& e) {
      std::cerr << "error: " << e.what() << '\n';
      return kInvalid;
    } catch (const std::exception& e) {
      std::cerr << "error: " << e.what() << '\n';
      return kRuntime;
    }
  }
  return kRuntime;
}
