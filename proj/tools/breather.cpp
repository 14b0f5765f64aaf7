#include <cstdio>
#include <fstream>
#include <string>

#include <CLI11.hpp>

#include <breather/pipeline.hpp>

namespace {

breather::RunConfig load_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw breather::ConfigError("cannot open config file '" + path + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw breather::ConfigError("config '" + path + "' is not valid JSON: " + e.what());
  }
  breather::RunConfig cfg = breather::parse_config(j);
  breather::validate_config(cfg);
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"time-periodic traveling breathers in step-index media"};
  app.require_subcommand(1);

  std::string config_path, out_dir, solution_dir;
  int sublattice = 0, refine = 0;
  bool allow_uncertified = false;

  CLI::App* bands =
      app.add_subcommand("bands", "certify spectral gaps of the weighted Hill operator");
  bands->add_option("--config", config_path, "run configuration (JSON)")->required();
  bands->add_option("--out", out_dir, "output directory")->required();

  CLI::App* solve =
      app.add_subcommand("solve", "compute a breather via the dual variational search");
  solve->add_option("--config", config_path, "run configuration (JSON)")->required();
  solve->add_option("--out", out_dir, "output directory")->required();
  solve->add_option("--sublattice", sublattice,
                    "restrict the frequency set to odd multiples of m");
  solve->add_flag("--allow-uncertified", allow_uncertified,
                  "proceed even if gap certification fails");

  CLI::App* verify =
      app.add_subcommand("verify", "recompute residuals for a stored solution");
  verify->add_option("--config", config_path, "run configuration (JSON)")->required();
  verify->add_option("--solution", solution_dir, "directory holding a solve run")
      ->required();
  verify->add_option("--refine", refine,
                     "re-evaluate on a nested grid refined by this factor (2 or 4)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int rc = app.exit(e);
    return rc == 0 ? 0 : 4;
  }

  try {
    breather::RunConfig cfg = load_config(config_path);
    if (bands->parsed()) return breather::cmd_bands(cfg, out_dir);
    if (solve->parsed())
      return breather::cmd_solve(cfg, out_dir, sublattice, allow_uncertified);
    return breather::cmd_verify(cfg, solution_dir, refine);
  } catch (const breather::ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 4;
  } catch (const breather::UsageError& e) {
    std::fprintf(stderr, "usage error: %s\n", e.what());
    return 4;
  } catch (const breather::CertificationError& e) {
    std::fprintf(stderr, "certification error: %s\n", e.what());
    return 2;
  } catch (const breather::SolverError& e) {
    std::fprintf(stderr, "solver error: %s\n", e.what());
    return 3;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
}
