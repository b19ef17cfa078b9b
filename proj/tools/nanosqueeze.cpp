#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "nanosqueeze/scan.hpp"

namespace {

using namespace nanosq;

#ifndef NSQ_PRESET_DIR
#define NSQ_PRESET_DIR "presets"
#endif

std::string resolve_preset(const std::string& name) {
  namespace fs = std::filesystem;
  for (const std::string& candidate :
       {name, "presets/" + name + ".json",
        std::string(NSQ_PRESET_DIR) + "/" + name + ".json"})
    if (fs::exists(candidate) && fs::is_regular_file(candidate))
      return candidate;
  throw scan::ConfigError("preset not found: " + name);
}

struct Overrides {
  std::string out_dir;
  std::vector<std::string> formats;
  int threads = 1;
  double tol = 0;
};

void apply(scan::ScanConfig& cfg, const Overrides& o) {
  if (!o.out_dir.empty()) cfg.out_dir = o.out_dir;
  if (!o.formats.empty()) cfg.formats = o.formats;
  if (o.tol > 0) {
    cfg.green_tol = o.tol;
    cfg.quad_rel_tol = o.tol;
  }
  cfg.validate();
}

int run_config(const std::string& path, const Overrides& o) {
  scan::ScanConfig cfg = scan::ScanConfig::from_file(path);
  apply(cfg, o);
  std::fprintf(stderr, "%s: scan %s, %s\n", cfg.name.c_str(), path.c_str(),
               cfg.hash().substr(0, 12).c_str());
  auto grid = scan::run(cfg, o.threads);
  auto paths = scan::emit_outputs(grid, cfg);
  for (const auto& p : paths) std::fprintf(stderr, "wrote %s\n", p.c_str());

  auto failed = grid.failed_points();
  if (!failed.empty()) {
    std::fprintf(stderr, "%zu of %zu points failed:\n", failed.size(),
                 grid.size());
    for (int idx : failed) {
      std::fprintf(stderr, "  point %d (", idx);
      size_t stride = grid.size(), k = (size_t)idx;
      for (size_t a = 0; a < grid.axes.size(); ++a) {
        stride /= grid.axes[a].values.size();
        std::fprintf(stderr, "%s%s=%g", a ? ", " : "",
                     grid.axes[a].name.c_str(),
                     grid.axes[a].values[(k / stride) %
                                         grid.axes[a].values.size()]);
      }
      std::fprintf(stderr, ") error %d\n", grid.errors[idx]);
    }
    return 2;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"parameter sweeps for emitter-nanosphere squeezing"};
  app.require_subcommand(1);

  Overrides o;
  app.add_option("--out-dir", o.out_dir, "override the output directory");
  app.add_option("--format", o.formats, "output formats (csv, json, svg)");
  app.add_option("--threads", o.threads, "worker threads")->check(CLI::PositiveNumber);
  app.add_option("--tol", o.tol, "override numerical tolerances");

  std::string run_path, preset_name, validate_path;
  auto* run_cmd = app.add_subcommand("run", "execute a scan config");
  run_cmd->add_option("config", run_path, "config JSON path")->required();
  auto* preset_cmd = app.add_subcommand("preset", "execute a named preset");
  preset_cmd->add_option("name", preset_name, "preset name (e.g. fig1b), or 'list'")
      ->required();
  auto* val_cmd = app.add_subcommand("validate", "parse and echo a config");
  val_cmd->add_option("config", validate_path, "config JSON path")->required();
  for (auto* sub : {run_cmd, preset_cmd, val_cmd}) sub->fallthrough();

  CLI11_PARSE(app, argc, argv);

  try {
    if (run_cmd->parsed()) return run_config(run_path, o);
    if (preset_cmd->parsed()) {
      if (preset_name == "list") {
        namespace fs = std::filesystem;
        for (const std::string& dir : {std::string("presets"),
                                       std::string(NSQ_PRESET_DIR)}) {
          std::error_code ec;
          for (const auto& p : fs::directory_iterator(dir, ec))
            if (p.path().extension() == ".json")
              std::printf("%s\n", p.path().stem().string().c_str());
          if (!ec) break;
        }
        return 0;
      }
      return run_config(resolve_preset(preset_name), o);
    }
    // validate
    scan::ScanConfig cfg = scan::ScanConfig::from_file(validate_path);
    apply(cfg, o);
    std::printf("%s\n", cfg.to_json().dump(1).c_str());
    return 0;
  } catch (const scan::IoError& e) {
    std::fprintf(stderr, "I/O error: %s\n", e.what());
    return 3;
  } catch (const scan::ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "numerical failure: %s\n", e.what());
    return 2;
  }
}
