#include <CLI11.hpp>

#include <fstream>
#include <iostream>

#include "rolab/errors.hpp"
#include "rolab/experiment.hpp"
#include "rolab/version.hpp"

namespace {

struct CommonArgs {
  std::string config_path;
  std::string out_dir = "out";
  std::optional<std::int64_t> stages;
  std::string tol;
  std::optional<std::uint64_t> seed;
  bool no_cache = false;
  unsigned threads = 1;
  std::string cache_dir;
};

void attach_common(CLI::App* cmd, CommonArgs& args) {
  cmd->add_option("--config", args.config_path, "Experiment config (JSON)")->required();
  cmd->add_option("--out", args.out_dir, "Output directory (report.json + CSV series)");
  cmd->add_option("--stages", args.stages, "Override the construction stage budget");
  cmd->add_option("--tol", args.tol, "Correlation tolerance as a rational, e.g. 1/1000000");
  cmd->add_option("--seed", args.seed, "Seed for pseudo-random test vectors");
  cmd->add_flag("--no-cache", args.no_cache, "Bypass cache reads (results are still recorded)");
  cmd->add_option("--threads", args.threads, "Worker threads for batch evaluations");
  cmd->add_option("--cache-dir", args.cache_dir,
                  "Cache directory (default: $ROLAB_CACHE_DIR or <out>/cache)");
}

int run_command(const std::string& command, const CommonArgs& args) {
  std::ifstream in(args.config_path);
  if (!in) {
    std::cerr << "config: cannot open '" << args.config_path << "'\n";
    return 1;
  }
  nlohmann::json config;
  try {
    in >> config;
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "config: not valid JSON: " << e.what() << "\n";
    return 1;
  }

  rolab::experiment::RunOptions options;
  options.out_dir = args.out_dir;
  options.threads = args.threads == 0 ? 1 : args.threads;
  options.no_cache = args.no_cache;
  options.stages = args.stages;
  options.seed = args.seed;
  if (!args.cache_dir.empty()) options.cache_dir = args.cache_dir;
  try {
    if (!args.tol.empty()) options.tol = rolab::parse_rational(args.tol);
  } catch (const rolab::BadParameter& e) {
    std::cerr << "--tol: " << e.what() << "\n";
    return 1;
  }

  try {
    rolab::experiment::RunResult result =
        rolab::experiment::run(command, config, options);
    for (const auto& section : result.payload.at("sections")) {
      std::cout << section.at("kind").get<std::string>()
                << (section.at("cache").at("hit").get<bool>() ? " [cached]" : "") << "\n";
    }
    std::cout << "report: " << (std::filesystem::path(args.out_dir) / "report.json").string()
              << "\n";
    return 0;
  } catch (const rolab::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 1;
  } catch (const rolab::StageBudgetExceeded& e) {
    std::cerr << "budget exceeded: " << e.what() << "\n";
    return 3;
  } catch (const rolab::Error& e) {
    std::cerr << "computation error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "computation error: " << e.what() << "\n";
    return 2;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"rolab: exact-arithmetic laboratory for rank-one cutting-and-stacking "
               "transformations"};
  app.set_version_flag("--version", rolab::kVersion);
  app.require_subcommand(1);

  static const std::vector<std::pair<std::string, std::string>> commands = {
      {"build", "Build the construction and report stage arithmetic"},
      {"correlate", "Correlation series <U^k f, g> over a lag range"},
      {"weaklimit", "Scan weak-operator-limit candidates against powers"},
      {"spectrum", "Spectral density estimates from a correlation sequence"},
      {"convolution", "Convolution powers and affinity diagnostics"},
      {"cyclic", "Cyclic-subspace residuals in the product space"},
      {"lemma", "Exact identities in the formal tensor algebra"},
      {"report", "Run every section present in the config"},
  };

  std::map<std::string, CommonArgs> args;
  for (const auto& [name, desc] : commands) attach_common(app.add_subcommand(name, desc), args[name]);

  CLI11_PARSE(app, argc, argv);
  for (const auto& [name, desc] : commands)
    if (app.get_subcommand(name)->parsed()) return run_command(name, args[name]);
  return 1;
}
