#include <iostream>
#include <string>

#include <CLI11.hpp>
#include <spdlog/spdlog.h>

#include "bfqr/config.hpp"
#include "bfqr/dataset.hpp"
#include "bfqr/errors.hpp"
#include "bfqr/harness.hpp"
#include "bfqr/report.hpp"

namespace {

struct Overrides {
  std::string config_path;
  std::string preset;
  std::string dataset;
  std::string csv;
  std::string features;
  std::string label;
  std::string group;
  std::size_t n = 0;
  double alpha = 0.0;
  std::size_t bins = 0;
  std::string methods;
  std::string seeds;
  long long max_iters = -1;
  double epsilon = -1.0;
  std::string optimize_on;
  long long t_repeats = -1;
  std::string out;
  std::size_t threads = 0;
  std::string noise;
  bool no_group_feature = false;
  bool weighted_bins = false;
  bool quiet = false;
};

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (start <= s.size()) {
    auto c = s.find(',', start);
    auto tok = s.substr(start, c == std::string::npos ? std::string::npos : c - start);
    if (!tok.empty()) out.push_back(tok);
    if (c == std::string::npos) break;
    start = c + 1;
  }
  return out;
}

bfqr::ExperimentConfig build_config(const Overrides& o) {
  using namespace bfqr;
  ExperimentConfig c;
  if (!o.config_path.empty()) c = load_config(o.config_path, c);
  if (!o.preset.empty()) c = config_from_json({{"preset", o.preset}}, c);
  if (!o.dataset.empty()) {
    if (o.dataset == "synthetic") c.dataset.kind = DatasetKind::kSynthetic;
    else if (o.dataset == "csv") c.dataset.kind = DatasetKind::kCsv;
    else throw ConfigError("--dataset must be 'synthetic' or 'csv'");
  }
  if (!o.csv.empty()) {
    c.dataset.kind = DatasetKind::kCsv;
    c.dataset.path = o.csv;
  }
  if (!o.features.empty()) c.dataset.schema.features = split_list(o.features);
  if (!o.label.empty()) c.dataset.schema.label = o.label;
  if (!o.group.empty()) c.dataset.schema.group = o.group;
  if (!o.noise.empty()) c = config_from_json({{"dataset", {{"noise", o.noise}}}}, c);
  if (o.n) c.dataset.n = o.n;
  if (o.alpha > 0.0) c.alpha = o.alpha;
  if (o.bins) c.bins = o.bins;
  if (!o.methods.empty()) c.methods = parse_methods(o.methods);
  if (!o.seeds.empty()) c.seeds = parse_seeds(o.seeds);
  if (o.max_iters >= 0) c.optimizer.options.max_iterations = static_cast<std::size_t>(o.max_iters);
  if (o.epsilon >= 0.0) c.optimizer.options.epsilon = o.epsilon;
  if (!o.optimize_on.empty()) c = config_from_json({{"optimizer", {{"optimize_on", o.optimize_on}}}}, c);
  if (o.t_repeats >= 0) c.metrics.t_repeats = static_cast<std::size_t>(o.t_repeats);
  if (!o.out.empty()) c.output.dir = o.out;
  if (o.threads) c.threads = o.threads;
  if (o.no_group_feature) c.model.group_feature = false;
  if (o.weighted_bins) c.optimizer.weighted_bins = true;
  c.validate();
  return c;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Binned fair quantile regression experiments"};
  app.require_subcommand(0, 1);
  Overrides o;
  app.add_option("-c,--config", o.config_path, "JSON experiment config")->check(CLI::ExistingFile);
  app.add_option("--preset", o.preset, "named preset (desk)");
  app.add_option("--dataset", o.dataset, "synthetic or csv");
  app.add_option("--csv", o.csv, "CSV path (implies --dataset csv)");
  app.add_option("--features", o.features, "comma-separated CSV feature columns");
  app.add_option("--label", o.label, "CSV label column");
  app.add_option("--group", o.group, "CSV group column");
  app.add_option("--n", o.n, "synthetic sample count");
  app.add_option("--alpha", o.alpha, "miscoverage rate");
  app.add_option("--bins", o.bins, "calibration label bins");
  app.add_option("--methods", o.methods, "comma list of CQR,GCQR,LCQR,BFQR,BFQR*");
  app.add_option("--seeds", o.seeds, "seed list, e.g. 0-19 or 1,4,7");
  app.add_option("--max-iters", o.max_iters, "optimizer iteration cap");
  app.add_option("--epsilon", o.epsilon, "slope-error tolerance for the stopping rule");
  app.add_option("--optimize-on", o.optimize_on, "test or calibration");
  app.add_option("--t-repeats", o.t_repeats, "T statistic repeats when subsampling");
  app.add_option("--out", o.out, "output directory");
  app.add_option("--threads", o.threads, "seeds run concurrently");
  app.add_option("--noise", o.noise, "synthetic noise: normal or uniform");
  app.add_flag("--no-group-feature", o.no_group_feature, "do not give the base model the group id");
  app.add_flag("--weighted-bins", o.weighted_bins, "weight bins by calibration mass");
  app.add_flag("-q,--quiet", o.quiet, "only print errors");

  auto* gen = app.add_subcommand("generate", "write a synthetic dataset as CSV");
  std::size_t gen_n = 1000;
  std::uint64_t gen_seed = 0;
  std::string gen_out;
  std::string gen_noise = "normal";
  gen->add_option("--n", gen_n, "rows");
  gen->add_option("--seed", gen_seed, "seed");
  gen->add_option("--noise", gen_noise, "normal or uniform")->check(CLI::IsMember({"normal", "uniform"}));
  gen->add_option("-o,--out", gen_out, "output CSV")->required();

  auto* show = app.add_subcommand("show-config", "print the resolved config as JSON");

  CLI11_PARSE(app, argc, argv);
  if (o.quiet) spdlog::set_level(spdlog::level::err);

  try {
    if (*gen) {
      bfqr::GeneratorOptions g;
      g.noise = gen_noise == "uniform" ? bfqr::NoiseKind::kUniform : bfqr::NoiseKind::kNormal;
      bfqr::write_csv(bfqr::generate_synthetic(gen_n, gen_seed, g), gen_out);
      return 0;
    }
    auto config = build_config(o);
    if (*show) {
      std::cout << bfqr::config_to_json(config).dump(2) << '\n';
      return 0;
    }
    auto result = bfqr::run_experiment(config);
    std::cout << bfqr::format_table(result.table);
    if (!config.output.dir.empty()) {
      auto paths = bfqr::emit_report(result, config.output.dir, config.output.traces);
      spdlog::info("wrote {} and {}", paths.table, paths.json);
    }
    return result.all_ok() ? 0 : 1;
  } catch (const bfqr::Error& e) {
    spdlog::error("{}", e.what());
    return 2;
  }
}
