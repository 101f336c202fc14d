#include <CLI11.hpp>
#include <cstdlib>
#include <iostream>
#include <string>

#include "pamlab/errors.hpp"
#include "pamlab/harness.hpp"

namespace {

struct Options {
  std::string config;
  std::uint64_t seed = 0;
  bool has_seed = false;
  std::string out;
  bool override_dalang = false;
  std::string kind;  // validate only
};

void add_common(CLI::App* sub, Options& o) {
  sub->add_option("--config", o.config, "config file or manifest.json")->required()->check(CLI::ExistingFile);
  sub->add_option_function<std::uint64_t>(
      "--seed", [&o](const std::uint64_t& s) { o.seed = s; o.has_seed = true; }, "override run.seed");
  sub->add_option("--out", o.out, "output directory (overrides PAMLAB_OUT and output.dir)");
  sub->add_flag("--override-dalang", o.override_dalang, "run even if alpha <= (d-2)/2");
}

pamlab::ExperimentConfig resolve(const Options& o) {
  pamlab::ExperimentConfig cfg = pamlab::load_config(o.config);
  if (o.has_seed) cfg.run.seed = o.seed;
  if (!o.out.empty()) {
    cfg.output.dir = o.out;
  } else if (const char* env = std::getenv("PAMLAB_OUT"); env && *env) {
    cfg.output.dir = env;
  }
  return cfg;
}

int validate(const Options& o) {
  const pamlab::ExperimentConfig cfg = resolve(o);
  std::vector<pamlab::ExperimentKind> kinds;
  if (o.kind.empty()) {
    kinds = pamlab::all_kinds();
  } else if (auto k = pamlab::parse_kind(o.kind)) {
    kinds.push_back(*k);
  } else {
    std::cerr << "error: unknown experiment kind '" << o.kind << "'\n";
    return 2;
  }
  int status = 0;
  for (auto k : kinds) {
    try {
      pamlab::validate_config(cfg, k, o.override_dalang);
      std::cout << pamlab::kind_name(k) << ": ok\n";
    } catch (const std::exception& e) {
      std::cout << pamlab::kind_name(k) << ": " << e.what() << "\n";
      status = 2;
    }
  }
  std::cout << "\n" << pamlab::serialize_config(cfg);
  return status;
}

int run(pamlab::ExperimentKind kind, const Options& o) {
  const pamlab::ExperimentConfig cfg = resolve(o);
  const pamlab::RunResult r = pamlab::run_experiment(kind, cfg, cfg.output.dir, o.override_dalang);
  for (const auto& a : r.assertions)
    std::cout << (a.passed ? "PASS " : "FAIL ") << a.name << ": " << a.detail << "\n";
  std::cout << "wrote " << r.files.size() << " files to " << cfg.output.dir << "\n";
  return r.all_passed() ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"pamlab: numerical experiments for the parabolic Anderson model on flat tori"};
  app.require_subcommand(1);
  Options opt;
  std::vector<std::pair<CLI::App*, pamlab::ExperimentKind>> runs;
  for (auto k : pamlab::all_kinds()) {
    auto* sub = app.add_subcommand(pamlab::kind_name(k), std::string("run the ") + pamlab::kind_name(k) + " experiment");
    add_common(sub, opt);
    runs.emplace_back(sub, k);
  }
  auto* val = app.add_subcommand("validate", "check a config without running anything");
  add_common(val, opt);
  val->add_option("--kind", opt.kind, "check only this experiment kind");

  CLI11_PARSE(app, argc, argv);
  try {
    if (val->parsed()) return validate(opt);
    for (const auto& [sub, kind] : runs)
      if (sub->parsed()) return run(kind, opt);
  } catch (const pamlab::InvalidConfig& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const pamlab::DalangViolated& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
  return 3;
}
