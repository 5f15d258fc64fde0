#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "sdfa/sdfa.h"

namespace {

using json = nlohmann::json;

std::string output_root() {
  const char* env = std::getenv("SDFA_OUT");
  return env && *env ? std::string(env) : std::string("runs");
}

int fail(int code, const std::string& msg) {
  std::cerr << "sdfa: " << msg << "\n";
  return code;
}

int report(sdfa_status st) {
  if (st != SDFA_OK) return fail(st, sdfa_last_error());
  return 0;
}

// Reads the config file (if any) and applies flag overrides.
std::optional<std::string> build_config(const std::string& path, std::optional<std::uint64_t> seed,
                                        const std::string& out, const std::string& command, int& code) {
  json cfg = json::object();
  if (!path.empty()) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
      code = fail(SDFA_ERR_IO, "load error: cannot open config " + path);
      return std::nullopt;
    }
    std::stringstream buf;
    buf << in.rdbuf();
    try {
      cfg = json::parse(buf.str());
    } catch (const json::exception& e) {
      code = fail(SDFA_ERR_IO, "load error: malformed config " + path + ": " + e.what());
      return std::nullopt;
    }
    if (!cfg.is_object()) {
      code = fail(SDFA_ERR_VALIDATION, "validation error: config must be a JSON object");
      return std::nullopt;
    }
  }
  if (seed) cfg["master_seed"] = *seed;
  if (!out.empty())
    cfg["output_dir"] = out;
  else if (!cfg.contains("output_dir"))
    cfg["output_dir"] = output_root() + "/" + command;
  return cfg.dump();
}

std::vector<double> parse_values(const std::string& csv, bool& ok) {
  std::vector<double> out;
  std::stringstream ss(csv);
  std::string item;
  ok = true;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t pos = 0;
      out.push_back(std::stod(item, &pos));
      if (pos != item.size()) ok = false;
    } catch (const std::exception&) {
      ok = false;
    }
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Self-supervised diverse feature augmentation for generalized zero-shot learning"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(sdfa_version()));

  std::string config_path, out_dir, param, values;
  std::uint64_t seed_value = 0;
  int n_seeds = 1;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "JSON config file");
    sub->add_option("--seed", seed_value, "master seed override");
    sub->add_option("--out", out_dir, "output directory");
  };

  auto* make = app.add_subcommand("make-synthetic", "write the synthetic benchmark dataset");
  add_common(make);
  auto* cluster = app.add_subcommand("cluster", "group attribute dimensions");
  add_common(cluster);
  auto* run = app.add_subcommand("run", "full pipeline: cluster, train, synthesize, evaluate");
  add_common(run);
  auto* ablate = app.add_subcommand("ablate", "baseline / +div / +div+self legs over paired seeds");
  add_common(ablate);
  ablate->add_option("--seeds", n_seeds, "number of paired seeds");
  auto* sweep = app.add_subcommand("sweep", "one run per value of m or ratio");
  add_common(sweep);
  sweep->add_option("--param", param, "m or ratio")->required();
  sweep->add_option("--values", values, "comma-separated values")->required();
  sweep->add_option("--seeds", n_seeds, "number of paired seeds");
  auto* rep = app.add_subcommand("report", "PCA scatter, loss curves and metric summary for a run");
  std::string run_dir;
  rep->add_option("run_dir", run_dir, "run directory");
  rep->add_option("--out", out_dir, "run directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : SDFA_ERR_VALIDATION;
  }

  const bool seed_given = app.got_subcommand(rep) ? false : (*app.get_subcommands().front())["--seed"]->count() > 0;
  const std::optional<std::uint64_t> seed = seed_given ? std::optional<std::uint64_t>(seed_value) : std::nullopt;
  int code = 0;

  if (app.got_subcommand(make)) {
    json spec = json::object();
    if (!config_path.empty()) {
      std::ifstream in(config_path, std::ios::binary);
      if (!in) return fail(SDFA_ERR_IO, "load error: cannot open spec " + config_path);
      try {
        in >> spec;
      } catch (const json::exception& e) {
        return fail(SDFA_ERR_IO, "load error: malformed spec " + config_path + ": " + e.what());
      }
    }
    if (seed) spec["seed"] = *seed;
    const std::string dir = out_dir.empty() ? output_root() + "/synthetic" : out_dir;
    char manifest[4096];
    if (const int rc = report(sdfa_make_synthetic(spec.dump().c_str(), dir.c_str(), manifest, sizeof manifest))) return rc;
    std::cout << manifest << "\n";
    return 0;
  }

  if (app.got_subcommand(rep)) {
    const std::string dir = !run_dir.empty() ? run_dir : out_dir;
    if (dir.empty()) return fail(SDFA_ERR_VALIDATION, "argument error: report needs a run directory");
    if (const int rc = report(sdfa_report(dir.c_str()))) return rc;
    std::cout << dir << "/report\n";
    return 0;
  }

  const std::string name = app.get_subcommands().front()->get_name();
  const auto cfg = build_config(config_path, seed, out_dir, name, code);
  if (!cfg) return code;

  if (app.got_subcommand(cluster)) return report(sdfa_cluster(cfg->c_str()));
  if (app.got_subcommand(run)) {
    sdfa_metrics m{};
    if (const int rc = report(sdfa_run(cfg->c_str(), &m))) return rc;
    std::printf("U=%.4f S=%.4f H=%.4f\n", m.U, m.S, m.H);
    return 0;
  }
  if (app.got_subcommand(ablate)) return report(sdfa_ablate(cfg->c_str(), n_seeds));
  bool ok = true;
  const auto vals = parse_values(values, ok);
  if (!ok) return fail(SDFA_ERR_VALIDATION, "argument error: --values must be a comma-separated number list");
  return report(sdfa_sweep(cfg->c_str(), param.c_str(), vals.data(), vals.size(), n_seeds));
}
