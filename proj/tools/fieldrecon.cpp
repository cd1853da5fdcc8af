#include <cstdio>
#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "fieldrecon/ingest.hpp"
#include "fieldrecon/pipeline.hpp"
#include "fieldrecon/synthetic.hpp"

namespace fr = fieldrecon;

namespace {

constexpr int kExitRuntime = 1;
constexpr int kExitValidation = 2;

struct RawOptions {
  std::string data;
  std::string out = "out";
  std::uint64_t seed = 0;
  std::vector<std::string> methods{"idw", "ok", "inr"};
  std::size_t n_dates = 100;
  std::size_t min_valid = 500;
  std::size_t n_initial = 0;
  std::size_t n_iterations = 0;
  std::string idw_coord = "geographic";
  int inr_epochs = fr::kInrEpochs;
  std::vector<std::string> sizes;
  std::string ladder = "small";
  std::size_t reps = 10;
  std::size_t warmup = 1;
  double alpha = 0.05;
};

std::string join(const std::vector<std::string>& parts) {
  std::string out;
  for (const auto& p : parts) out += (out.empty() ? "" : ",") + p;
  return out;
}

fr::ExperimentConfig to_config(const RawOptions& o, const CLI::App& app) {
  fr::ExperimentConfig cfg;
  cfg.data = o.data;
  cfg.out = o.out;
  cfg.seed = o.seed;
  cfg.methods = fr::parse_methods(join(o.methods));
  cfg.n_dates = o.n_dates;
  cfg.min_valid = o.min_valid;
  if (app.count("--n_initial") > 0) cfg.n_initial = o.n_initial;
  if (app.count("--n_iterations") > 0) cfg.n_iterations = o.n_iterations;
  try {
    cfg.idw_coord = fr::coordinate_system_from_string(o.idw_coord);
    cfg.bench_sizes = fr::ladder_sizes(fr::ladder_from_string(o.ladder));
  } catch (const std::invalid_argument& e) {
    throw fr::ValidationError(e.what());
  }
  if (!o.sizes.empty()) cfg.bench_sizes = fr::parse_sizes(join(o.sizes));
  cfg.inr_epochs = o.inr_epochs;
  cfg.bench_reps = o.reps;
  cfg.bench_warmup = o.warmup;
  cfg.alpha = o.alpha;
  cfg.validate();
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Sparse climate-field reconstruction experiments"};
  app.require_subcommand(1);
  app.fallthrough();
  app.set_config("--config", "", "Flat key = value file; keys are the long option names");

  RawOptions o;
  app.add_option("--data", o.data, "Station CSV (station_id,lat,lon,date,value_tenths_degC,qflag)");
  app.add_option("--out", o.out, "Output directory")->capture_default_str();
  app.add_option("--seed", o.seed, "Master seed")->capture_default_str();
  app.add_option("--methods", o.methods, "Comma-separated subset of idw,ok,inr")->delimiter(',')->capture_default_str();
  app.add_option("--n_dates", o.n_dates, "Dates to sample")->capture_default_str();
  app.add_option("--min_valid", o.min_valid, "A date needs more valid records than this")->capture_default_str();
  app.add_option("--n_initial", o.n_initial, "Random trials before the surrogate (default 50)");
  app.add_option("--n_iterations", o.n_iterations, "Surrogate-guided trials (default 100, inr 200)");
  app.add_option("--idw_coord", o.idw_coord, "IDW distance: geographic or euclidean")->capture_default_str();
  app.add_option("--inr_epochs", o.inr_epochs, "Network training epochs")->capture_default_str();
  app.add_option("--sizes", o.sizes, "Comma-separated bench target counts (overrides --ladder)")->delimiter(',');
  app.add_option("--ladder", o.ladder, "Bench size ladder: small or large")->capture_default_str();
  app.add_option("--reps", o.reps, "Bench repetitions per size")->capture_default_str();
  app.add_option("--warmup", o.warmup, "Untimed bench runs per size")->capture_default_str();
  app.add_option("--alpha", o.alpha, "Significance level")->capture_default_str();

  auto* ingest = app.add_subcommand("ingest", "Select dates and write seeded splits");
  auto* tune = app.add_subcommand("tune", "Tune every method on every date (resumable)");
  auto* evaluate = app.add_subcommand("evaluate", "Score tuned methods on the test splits");
  auto* compare = app.add_subcommand("compare", "Rank-based comparison of the evaluated methods");
  auto* bench = app.add_subcommand("bench", "Time reconstruction over growing target sets");
  auto* report = app.add_subcommand("report", "Collect all results into report.md");
  auto* synth = app.add_subcommand("synth", "Write a synthetic Gaussian-bump station file");
  std::string synth_path;
  std::size_t synth_dates = 5, synth_stations = 600;
  synth->add_option("path", synth_path, "Output CSV")->required();
  synth->add_option("--dates", synth_dates, "Consecutive dates")->capture_default_str();
  synth->add_option("--stations", synth_stations, "Stations per date")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kExitValidation;
  }

  try {
    if (synth->parsed()) {
      fr::SyntheticSpec spec;
      spec.n_dates = synth_dates;
      spec.n_stations = synth_stations;
      if (spec.n_dates == 0 || spec.n_stations == 0) throw fr::ValidationError("synth: empty dataset");
      std::ofstream out(synth_path, std::ios::binary);
      if (!out) throw std::runtime_error("cannot write " + synth_path);
      fr::write_station_csv(out, fr::synthetic_records(spec, o.seed));
      return 0;
    }

    const auto cfg = to_config(o, app);
    struct Stage {
      CLI::App* cmd;
      const char* name;
      std::vector<std::string> (*run)(const fr::ExperimentConfig&);
    };
    const Stage stages[] = {{ingest, "ingest", fr::cmd_ingest},     {tune, "tune", fr::cmd_tune},
                            {evaluate, "evaluate", fr::cmd_evaluate}, {compare, "compare", fr::cmd_compare},
                            {bench, "bench", fr::cmd_bench},         {report, "report", fr::cmd_report}};
    for (const auto& s : stages) {
      if (!s.cmd->parsed()) continue;
      const auto outputs = s.run(cfg);
      fr::write_manifest(cfg, s.name, outputs);
      fmt::print(stderr, "{}: wrote {} files under {}\n", s.name, outputs.size(), cfg.out.string());
    }
    return 0;
  } catch (const std::invalid_argument& e) {
    fmt::print(stderr, "error: {}\n", e.what());
    return kExitValidation;
  } catch (const fr::ParseError& e) {
    fmt::print(stderr, "error: {}\n", e.what());
    return kExitValidation;
  } catch (const fr::InsufficientDatesError& e) {
    fmt::print(stderr, "error: {}\n", e.what());
    return kExitValidation;
  } catch (const fr::TooFewObservationsError& e) {
    fmt::print(stderr, "error: {}\n", e.what());
    return kExitValidation;
  } catch (const std::exception& e) {
    fmt::print(stderr, "error: {}\n", e.what());
    return kExitRuntime;
  }
}
