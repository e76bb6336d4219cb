#include <filesystem>
#include <functional>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "bxent/config.hpp"
#include "bxent/error.hpp"
#include "bxent/pipeline.hpp"

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitStage = 3;

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Proxy-based behavior prediction benchmark: cases, model rankings, entropy curves."};
  app.require_subcommand(1);

  std::string config_path;
  std::string output_override;
  bool quiet = false;

  struct Command {
    const char* name;
    const char* help;
    std::function<void(const bxent::RunConfig&, std::ostream&)> run;
  };
  const Command commands[] = {
      {"ingest", "Parse a MovieLens/Last.fm/store dataset into the artifact store", bxent::stage_ingest},
      {"synth", "Generate a synthetic population with ground truth", bxent::stage_synth},
      {"gen-cases", "Generate evaluation cases from the stored dataset", bxent::stage_gen_cases},
      {"score", "Query every model (through the cache) and score its rankings",
       [](const bxent::RunConfig& c, std::ostream& log) {
         bxent::stage_rank(c, log);
         bxent::stage_score(c, log);
       }},
      {"fit", "Fit entropy curves to scores.csv", bxent::stage_fit},
      {"report", "Write plots and comparison tables", bxent::stage_report},
      {"run", "Run every stage in order", bxent::run_pipeline},
  };

  const Command* selected = nullptr;
  for (const auto& cmd : commands) {
    auto* sub = app.add_subcommand(cmd.name, cmd.help);
    sub->add_option("-c,--config", config_path, "Run configuration (TOML)")->required()->check(CLI::ExistingFile);
    sub->add_option("-o,--output", output_override, "Override output.dir");
    sub->add_flag("-q,--quiet", quiet, "Suppress progress lines");
    sub->callback([&selected, &cmd] { selected = &cmd; });
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitConfig;
  }

  std::ostream null_stream(nullptr);
  std::ostream& log = quiet ? null_stream : std::cerr;
  try {
    auto config = bxent::load_config(config_path);
    if (!output_override.empty()) {
      const bool default_cache = config.cache_path == config.output_dir / "cache.jsonl";
      config.output_dir = std::filesystem::absolute(output_override).lexically_normal();
      if (default_cache) config.cache_path = config.output_dir / "cache.jsonl";
    }
    if (std::string_view(selected->name) != "run") bxent::record_config(config);
    selected->run(config, log);
  } catch (const bxent::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const bxent::StageError& e) {
    std::cerr << "stage " << e.what() << '\n';
    return kExitStage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitStage;
  }
  return 0;
}
