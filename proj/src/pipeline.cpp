#include "fieldrecon/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include <fmt/format.h>

#include "fieldrecon/experiment.hpp"
#include "fieldrecon/ingest.hpp"
#include "fieldrecon/metrics.hpp"
#include "fieldrecon/random.hpp"
#include "fieldrecon/stats.hpp"

namespace fieldrecon {

namespace fs = std::filesystem;

namespace {

constexpr std::size_t kHistogramBins = 10;

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw MissingArtifactError("missing " + p.string());
  return {std::istreambuf_iterator<char>(in), {}};
}

std::ofstream open_out(const fs::path& p) {
  fs::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + p.string());
  return out;
}

// Replace-by-rename so an interrupted write never leaves a torn file.
void write_atomically(const fs::path& p, const std::function<void(const fs::path&)>& writer) {
  fs::create_directories(p.parent_path());
  const auto tmp = fs::path(p.string() + ".tmp");
  writer(tmp);
  fs::rename(tmp, p);
}

std::string rel(const ExperimentConfig& cfg, const fs::path& p) {
  return fs::relative(p, cfg.out).generic_string();
}

std::string g17(double v) { return fmt::format("{:.17g}", v); }

struct SplitClouds {
  ClimatePointCloud train;
  ClimatePointCloud validation;
};

SplitClouds load_train_validation(const Layout& layout, const std::string& date) {
  const auto path = layout.split_file(date);
  if (!fs::exists(path)) throw MissingArtifactError("missing split file " + path.string() + "; run ingest");
  const auto set = read_split_csv(path, false);
  return {set.cloud(Split::Train), set.cloud(Split::Validation)};
}

MethodOptions method_options(const ExperimentConfig& cfg) {
  MethodOptions o;
  o.idw_coord = cfg.idw_coord;
  o.inr_epochs = cfg.inr_epochs;
  return o;
}

std::string hex(std::uint64_t v) { return fmt::format("{:016x}", v); }

}  // namespace

void ExperimentConfig::validate() const {
  if (methods.empty()) throw ValidationError("methods: at least one method is required");
  std::set<Method> seen(methods.begin(), methods.end());
  if (seen.size() != methods.size()) throw ValidationError("methods: duplicates");
  if (n_dates == 0) throw ValidationError("n_dates must be >= 1");
  if (n_initial && *n_initial == 0) throw ValidationError("n_initial must be >= 1");
  if (inr_epochs < 1) throw ValidationError("inr_epochs must be >= 1");
  if (!(alpha > 0.0 && alpha < 1.0)) throw ValidationError("alpha must lie in (0, 1)");
  BenchConfig bc{bench_sizes, bench_reps, bench_warmup};
  try {
    bc.validate();
  } catch (const std::invalid_argument& e) {
    throw ValidationError(e.what());
  }
}

BoBudget ExperimentConfig::budget(Method m) const {
  auto b = BoBudget::for_method(m);
  if (n_initial) b.n_initial = *n_initial;
  if (n_iterations) b.n_iterations = *n_iterations;
  return b;
}

nlohmann::json ExperimentConfig::to_json() const {
  nlohmann::json j;
  j["data"] = data.generic_string();
  j["seed"] = seed;
  std::vector<std::string> ms;
  for (auto m : methods) ms.push_back(to_string(m));
  j["methods"] = ms;
  j["n_dates"] = n_dates;
  j["min_valid"] = min_valid;
  for (auto m : methods) {
    const auto b = budget(m);
    j["budget"][to_string(m)] = {b.n_initial, b.n_iterations};
  }
  j["idw_coord"] = to_string(idw_coord);
  j["inr_epochs"] = inr_epochs;
  j["bench_sizes"] = bench_sizes;
  j["bench_reps"] = bench_reps;
  j["bench_warmup"] = bench_warmup;
  j["alpha"] = alpha;
  return j;
}

std::uint64_t ExperimentConfig::hash() const { return fnv1a(to_json().dump()); }

std::vector<Method> parse_methods(const std::string& csv) {
  std::vector<Method> out;
  for (const auto& s : split_csv_line(csv)) {
    try {
      out.push_back(method_from_string(s));
    } catch (const std::invalid_argument&) {
      throw ValidationError("unknown method '" + s + "' (expected idw, ok or inr)");
    }
  }
  return out;
}

std::vector<std::size_t> parse_sizes(const std::string& csv) {
  std::vector<std::size_t> out;
  for (const auto& s : split_csv_line(csv)) {
    std::size_t pos = 0;
    unsigned long v = 0;
    try {
      v = std::stoul(s, &pos);
    } catch (const std::exception&) {
      pos = 0;
    }
    if (pos == 0 || pos != s.size() || s.front() == '-') throw ValidationError("bad size '" + s + "'");
    out.push_back(v);
  }
  return out;
}

std::uint64_t tune_seed(std::uint64_t master, Method m, const std::string& date) {
  return derive_seed(master, "tune/" + to_string(m) + "/" + date);
}

std::vector<std::string> read_dates(const Layout& layout) {
  std::istringstream in(slurp(layout.dates_file()));
  std::vector<std::string> dates;
  for (std::string line; std::getline(in, line);) {
    if (!line.empty()) dates.push_back(line);
  }
  if (dates.empty()) throw MissingArtifactError(layout.dates_file().string() + " lists no dates");
  return dates;
}

BestParams read_best(const Layout& layout, Method m, const std::string& date) {
  const auto path = layout.best_file(m, date);
  if (!fs::exists(path)) {
    throw MissingArtifactError(fmt::format("no tuned parameters for {} on {} ({}); run tune",
                                           to_string(m), date, path.string()));
  }
  const auto j = nlohmann::json::parse(slurp(path));
  const auto space = SearchSpace::for_method(m);
  return {m, date, assignment_from_json(space, j.at("params")), j.at("objective").get<double>(),
          j.at("trial_index").get<std::size_t>()};
}

std::vector<std::string> cmd_ingest(const ExperimentConfig& cfg) {
  if (cfg.data.empty()) throw ValidationError("ingest: no data file given");
  if (!fs::exists(cfg.data)) throw ValidationError("ingest: data file " + cfg.data.string() + " not found");
  const Layout layout{cfg.out};
  const auto records = read_station_file(cfg.data);
  if (records.empty()) throw ValidationError("ingest: " + cfg.data.string() + " holds no records");
  const auto dates = select_dates(records, cfg.min_valid, cfg.n_dates, cfg.seed);

  std::vector<std::string> outputs;
  std::vector<SplitSet> sets;
  for (const auto& date : dates) {
    sets.push_back(make_splits(date, records, cfg.seed));
    fs::create_directories(layout.splits_dir());
    write_split_csv(layout.split_file(date), sets.back());
    outputs.push_back(rel(cfg, layout.split_file(date)));
  }
  {
    auto out = open_out(layout.dates_file());
    for (const auto& d : dates) out << d << '\n';
    outputs.push_back(rel(cfg, layout.dates_file()));
  }
  {
    const auto s = split_summary(sets);
    auto out = open_out(layout.summary_file());
    out << "split,count,min,mean,std,max\n";
    for (const auto& [name, st] : {std::pair{"train", s.train}, std::pair{"val", s.validation}}) {
      out << fmt::format("{},{},{:.6f},{:.6f},{:.6f},{:.6f}\n", name, st.count, st.min, st.mean, st.std,
                         st.max);
    }
    outputs.push_back(rel(cfg, layout.summary_file()));
  }
  return outputs;
}

std::vector<std::string> cmd_tune(const ExperimentConfig& cfg) {
  const Layout layout{cfg.out};
  const auto dates = read_dates(layout);
  const auto opts = method_options(cfg);
  std::vector<std::string> outputs;
  for (const auto method : cfg.methods) {
    const auto space = SearchSpace::for_method(method);
    const auto budget = cfg.budget(method);
    const std::size_t total = budget.n_initial + budget.n_iterations;
    for (const auto& date : dates) {
      const auto hist_path = layout.history_file(method, date);
      const auto best_path = layout.best_file(method, date);
      std::vector<Trial> resume;
      if (fs::exists(hist_path)) resume = read_history_csv(hist_path, space);
      if (resume.size() > total) {
        throw ValidationError(fmt::format("{} holds {} trials but the budget is {}", hist_path.string(),
                                          resume.size(), total));
      }
      if (resume.size() < total || !fs::exists(best_path)) {
        if (!resume.empty()) {
          fmt::print(stderr, "tune {} {}: resuming after {} trials\n", to_string(method), date, resume.size());
        }
        const auto clouds = load_train_validation(layout, date);
        const auto objective = validation_objective(space, clouds.train, clouds.validation, opts);
        const auto result = tune(space, objective, budget, tune_seed(cfg.seed, method, date), std::move(resume),
                                 [&](const std::vector<Trial>& h) {
                                   write_atomically(hist_path, [&](const fs::path& p) {
                                     write_history_csv(p, space, h);
                                   });
                                 });
        if (result.best_trial().status != TrialStatus::Ok) {
          throw std::runtime_error(fmt::format("tune {} {}: every trial failed", to_string(method), date));
        }
        const auto& best = result.best_trial();
        nlohmann::json j;
        j["method"] = to_string(method);
        j["date"] = date;
        j["objective"] = best.objective;
        j["trial_index"] = best.index;
        j["params"] = assignment_to_json(space, best.params);
        write_atomically(best_path, [&](const fs::path& p) {
          auto out = open_out(p);
          out << j.dump(2) << '\n';
        });
        fmt::print(stderr, "tune {} {}: best validation MAE {:.4f} (trial {})\n", to_string(method), date,
                   best.objective, best.index);
      }
      outputs.push_back(rel(cfg, hist_path));
      outputs.push_back(rel(cfg, best_path));

      const auto history = read_history_csv(hist_path, space);
      for (std::size_t d = 0; d < space.size(); ++d) {
        const auto& p = space.params()[d];
        if (!p.is_continuous()) continue;
        std::vector<double> values;
        for (const auto& t : history) values.push_back(t.params[d]);
        const auto bins = histogram(values, p.lower, p.upper, kHistogramBins, p.kind == ParamKind::RealLog);
        const auto path = layout.tune_dir(method) / fmt::format("{}.hist_{}.csv", date, p.name);
        auto out = open_out(path);
        out << "lower,upper,count\n";
        for (const auto& b : bins) out << g17(b.lower) << ',' << g17(b.upper) << ',' << b.count << '\n';
        outputs.push_back(rel(cfg, path));
      }
    }
  }
  return outputs;
}

std::vector<std::string> cmd_evaluate(const ExperimentConfig& cfg) {
  const Layout layout{cfg.out};
  const auto dates = read_dates(layout);
  const auto opts = method_options(cfg);
  // Fail before any work when a method was never tuned.
  for (const auto method : cfg.methods) {
    for (const auto& date : dates) (void)read_best(layout, method, date);
  }
  auto out = open_out(layout.metrics_file());
  out << "date,method,rmse,mae,r2,delta_max,n_test\n";
  for (const auto& date : dates) {
    const auto set = read_split_csv(layout.split_file(date), true);
    const auto train = set.cloud(Split::Train);
    const auto validation = set.cloud(Split::Validation);
    const auto test = set.cloud(Split::Test);
    for (const auto method : cfg.methods) {
      const auto best = read_best(layout, method, date);
      const auto space = SearchSpace::for_method(method);
      const auto seed = trial_seed(tune_seed(cfg.seed, method, date), best.trial_index);
      const auto model = fit_reconstructor(space, best.params, train, validation, seed, opts);
      const auto m = compute_metrics(EvalPair(test.values(), model->reconstruct(test.locations())));
      out << fmt::format("{},{},{},{},{},{},{}\n", date, to_string(method), g17(m.rmse), g17(m.mae),
                         g17(m.r2), g17(m.delta_max), test.size());
    }
  }
  return {rel(cfg, layout.metrics_file())};
}

namespace {

struct MetricsTable {
  std::vector<std::string> dates;
  std::map<std::string, std::vector<MetricSet>> by_method;  // in date order
};

MetricsTable read_metrics(const Layout& layout) {
  std::istringstream in(slurp(layout.metrics_file()));
  std::string line;
  std::getline(in, line);
  if (line != "date,method,rmse,mae,r2,delta_max,n_test") {
    throw std::runtime_error(layout.metrics_file().string() + ": unexpected header");
  }
  MetricsTable t;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto f = split_csv_line(line);
    if (f.size() != 7) throw std::runtime_error(layout.metrics_file().string() + ": malformed row");
    if (t.dates.empty() || t.dates.back() != f[0]) t.dates.push_back(f[0]);
    t.by_method[f[1]].push_back({std::stod(f[2]), std::stod(f[3]), std::stod(f[4]), std::stod(f[5])});
  }
  return t;
}

}  // namespace

std::vector<std::string> cmd_compare(const ExperimentConfig& cfg) {
  const Layout layout{cfg.out};
  const auto table = read_metrics(layout);
  if (table.dates.size() < 3) {
    throw ValidationError(fmt::format("compare needs at least 3 evaluated dates, found {}", table.dates.size()));
  }
  std::vector<std::string> methods;
  std::vector<std::vector<MetricSet>> groups;
  for (const auto m : cfg.methods) {
    const auto it = table.by_method.find(to_string(m));
    if (it == table.by_method.end()) {
      throw MissingArtifactError("no evaluation rows for " + to_string(m) + "; run evaluate");
    }
    methods.push_back(it->first);
    groups.push_back(it->second);
  }
  if (methods.size() < 2) throw ValidationError("compare needs at least 2 methods");
  const auto report = compare_methods(methods, groups, cfg.alpha);

  const auto dir = layout.compare_dir();
  std::vector<std::string> outputs;
  {
    auto out = open_out(dir / "summary.csv");
    out << "metric,method,median,iqr\n";
    for (const auto& mc : report.metrics) {
      for (std::size_t i = 0; i < methods.size(); ++i) {
        out << fmt::format("{},{},{},{}\n", mc.metric, methods[i], g17(mc.medians[i]), g17(mc.iqrs[i]));
      }
    }
    outputs.push_back(rel(cfg, dir / "summary.csv"));
  }
  {
    auto out = open_out(dir / "omnibus.csv");
    out << "metric,h,p,eta_squared\n";
    for (const auto& mc : report.metrics) {
      out << fmt::format("{},{},{},{}\n", mc.metric, g17(mc.omnibus.h()), g17(mc.omnibus.p()),
                         mc.omnibus.has_eta_squared() ? g17(mc.omnibus.eta_squared()) : std::string());
    }
    outputs.push_back(rel(cfg, dir / "omnibus.csv"));
  }
  {
    auto out = open_out(dir / "posthoc.csv");
    out << "metric,first,second,z,p_raw,p_adjusted,rank_biserial\n";
    for (const auto& mc : report.metrics) {
      if (!mc.posthoc) continue;
      for (const auto& p : mc.posthoc->pairs) {
        out << fmt::format("{},{},{},{},{},{},{}\n", mc.metric, p.first, p.second, g17(p.z), g17(p.p_raw),
                           g17(p.p_adjusted), g17(p.rank_biserial));
      }
    }
    outputs.push_back(rel(cfg, dir / "posthoc.csv"));
  }
  {
    auto out = open_out(dir / "report.txt");
    out << format_report(report);
    outputs.push_back(rel(cfg, dir / "report.txt"));
  }
  return outputs;
}

std::vector<std::string> cmd_bench(const ExperimentConfig& cfg) {
  const Layout layout{cfg.out};
  const auto dates = read_dates(layout);
  const auto opts = method_options(cfg);
  const BenchConfig bc{cfg.bench_sizes, cfg.bench_reps, cfg.bench_warmup};

  std::vector<BenchSubject> subjects;
  for (const auto method : cfg.methods) {
    const auto space = SearchSpace::for_method(method);
    BenchSubject s{to_string(method), {}, {}};
    for (const auto& date : dates) {
      const auto best = read_best(layout, method, date);
      const auto clouds = load_train_validation(layout, date);
      const auto seed = trial_seed(tune_seed(cfg.seed, method, date), best.trial_index);
      s.models.push_back(fit_reconstructor(space, best.params, clouds.train, clouds.validation, seed, opts));
      s.nodes.push_back(clouds.train);
    }
    subjects.push_back(std::move(s));
  }

  const auto dir = layout.bench_dir();
  auto records_out = open_out(dir / "bench_records.csv");
  records_out << kBenchRecordHeader << '\n' << std::flush;
  const auto records = run_bench(bc, subjects, derive_seed(cfg.seed, "bench"), [&](const BenchRecord& r) {
    records_out << format_bench_record(r) << '\n' << std::flush;
  });
  records_out.close();
  const auto rows = summarize_bench(records);
  write_bench_summary(dir / "bench_summary.csv", rows);
  write_bench_plot(dir / "time.svg", rows, BenchQuantity::Time, true);
  write_bench_plot(dir / "memory.svg", rows, BenchQuantity::Memory, true);
  return {rel(cfg, dir / "bench_records.csv"), rel(cfg, dir / "bench_summary.csv"), rel(cfg, dir / "time.svg"),
          rel(cfg, dir / "memory.svg")};
}

std::vector<std::string> cmd_report(const ExperimentConfig& cfg) {
  const Layout layout{cfg.out};
  const auto dates = read_dates(layout);
  std::ostringstream md;
  md << "# Reconstruction experiment report\n\n";
  md << fmt::format("Seed {}, {} dates, methods:", cfg.seed, dates.size());
  for (auto m : cfg.methods) md << ' ' << to_string(m);
  md << "\n\n## Splits (train and validation, degC)\n\n";
  {
    std::istringstream in(slurp(layout.summary_file()));
    std::string line;
    std::getline(in, line);
    md << "| split | count | min | mean | std | max |\n|---|---|---|---|---|---|\n";
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      md << "| ";
      for (const auto& c : split_csv_line(line)) md << c << " | ";
      md << '\n';
    }
  }

  md << "\n## Tuning\n\nValidation MAE of the best trial against the median of the initial random trials.\n\n";
  md << "| method | date | trials | failed | best MAE | random median MAE |\n|---|---|---|---|---|---|\n";
  for (const auto method : cfg.methods) {
    const auto space = SearchSpace::for_method(method);
    const auto n_initial = cfg.budget(method).n_initial;
    for (const auto& date : dates) {
      const auto path = layout.history_file(method, date);
      if (!fs::exists(path)) {
        md << fmt::format("| {} | {} | not tuned | | | |\n", to_string(method), date);
        continue;
      }
      const auto h = read_history_csv(path, space);
      std::vector<double> random;
      std::size_t failed = 0;
      for (const auto& t : h) {
        if (t.status == TrialStatus::Failed) ++failed;
        if (t.index < n_initial && t.status == TrialStatus::Ok) random.push_back(t.objective);
      }
      const auto bsf = best_so_far(h);
      md << fmt::format("| {} | {} | {} | {} | {:.4f} | {} |\n", to_string(method), date, h.size(), failed,
                        bsf.empty() ? NAN : bsf.back(),
                        random.empty() ? std::string("-") : fmt::format("{:.4f}", quantile(random, 0.5)));
    }
  }

  if (fs::exists(layout.compare_dir() / "report.txt")) {
    md << "\n## Test-split comparison\n\n```\n" << slurp(layout.compare_dir() / "report.txt") << "```\n";
  } else if (fs::exists(layout.metrics_file())) {
    md << "\n## Test-split metrics\n\n```\n" << slurp(layout.metrics_file()) << "```\n";
  }
  if (fs::exists(layout.bench_dir() / "bench_summary.csv")) {
    md << "\n## Reconstruction cost\n\nMedian and 95% interval of wall time (s) and peak resident growth "
          "(bytes). Plots: bench/time.svg, bench/memory.svg.\n\n```\n"
       << slurp(layout.bench_dir() / "bench_summary.csv") << "```\n";
  }
  auto out = open_out(layout.report_file());
  out << md.str();
  return {rel(cfg, layout.report_file())};
}

std::uint64_t file_digest(const fs::path& path) { return fnv1a(slurp(path)); }

void write_manifest(const ExperimentConfig& cfg, const std::string& command,
                    const std::vector<std::string>& outputs) {
  const Layout layout{cfg.out};
  nlohmann::json j;
  j["command"] = command;
  j["artifact_version"] = kArtifactVersion;
  j["seed"] = cfg.seed;
  j["config_hash"] = hex(cfg.hash());
  j["config"] = cfg.to_json();
  j["outputs"] = nlohmann::json::array();
  for (const auto& o : outputs) {
    const bool timing = o.rfind("bench/", 0) == 0 ||
                        (o == "report.md" && fs::exists(layout.bench_dir() / "bench_summary.csv"));
    j["outputs"].push_back({{"path", o}, {"fnv1a64", hex(file_digest(cfg.out / o))}, {"timing_dependent", timing}});
  }
  auto out = open_out(layout.manifest_file(command));
  out << j.dump(2) << '\n';
}

}  // namespace fieldrecon
