#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include <fmt/format.h>

#include "fieldrecon/experiment.hpp"
#include "fieldrecon/ingest.hpp"
#include "fieldrecon/metrics.hpp"
#include "fieldrecon/pipeline.hpp"
#include "fieldrecon/stats.hpp"
#include "fieldrecon/synthetic.hpp"

using namespace fieldrecon;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("fieldrecon_it_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

fs::path write_dataset(const fs::path& dir, std::size_t dates, std::size_t stations) {
  SyntheticSpec spec;
  spec.n_dates = dates;
  spec.n_stations = stations;
  const auto path = dir / "stations.csv";
  std::ofstream out(path);
  write_station_csv(out, synthetic_records(spec, 17));
  return path;
}

ExperimentConfig small_config(const fs::path& dir, std::size_t dates = 3) {
  ExperimentConfig cfg;
  cfg.data = write_dataset(dir, dates, 80);
  cfg.out = dir / "out";
  cfg.methods = {Method::Idw, Method::Ok};
  cfg.n_dates = dates;
  cfg.min_valid = 50;
  cfg.n_initial = 3;
  cfg.n_iterations = 2;
  cfg.bench_sizes = {10, 50};
  cfg.bench_reps = 3;
  return cfg;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

std::map<std::string, std::string> snapshot(const fs::path& root) {
  std::map<std::string, std::string> files;
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    if (e.is_regular_file()) files[fs::relative(e.path(), root).generic_string()] = slurp(e.path());
  }
  return files;
}

}  // namespace

TEST_CASE("ingest writes one split file per date, reproducibly") {
  const auto dir = scratch("ingest");
  auto cfg = small_config(dir);
  const auto outputs = cmd_ingest(cfg);
  const Layout layout{cfg.out};
  CHECK(read_dates(layout).size() == 3);
  for (const auto& d : read_dates(layout)) CHECK(fs::exists(layout.split_file(d)));
  CHECK(outputs.size() == 5);
  const auto first = snapshot(cfg.out);
  cmd_ingest(cfg);
  CHECK(snapshot(cfg.out) == first);

  std::ofstream(dir / "empty.csv").close();
  cfg.data = dir / "empty.csv";
  CHECK_THROWS_AS(cmd_ingest(cfg), ParseError);
  {
    std::ofstream h(dir / "header.csv");
    h << kStationHeader << '\n';
  }
  cfg.data = dir / "header.csv";
  CHECK_THROWS_AS(cmd_ingest(cfg), ValidationError);
  cfg.data = dir / "absent.csv";
  CHECK_THROWS_AS(cmd_ingest(cfg), ValidationError);
}

TEST_CASE("tuning resumes and skips finished work") {
  const auto dir = scratch("resume");
  auto cfg = small_config(dir);
  cfg.methods = {Method::Idw};
  cmd_ingest(cfg);
  const Layout layout{cfg.out};
  const auto date = read_dates(layout).front();
  const auto space = SearchSpace::for_method(Method::Idw);

  cmd_tune(cfg);
  const auto full = read_history_csv(layout.history_file(Method::Idw, date), space);
  REQUIRE(full.size() == 5);
  const auto full_text = slurp(layout.history_file(Method::Idw, date));
  const auto stamp = fs::last_write_time(layout.history_file(Method::Idw, date));

  // Finished: nothing is recomputed.
  cmd_tune(cfg);
  CHECK(fs::last_write_time(layout.history_file(Method::Idw, date)) == stamp);

  // Interrupted after trial 3: the remaining trials match the uninterrupted run.
  write_history_csv(layout.history_file(Method::Idw, date), space,
                    std::vector<Trial>(full.begin(), full.begin() + 3));
  fs::remove(layout.best_file(Method::Idw, date));
  cmd_tune(cfg);
  CHECK(slurp(layout.history_file(Method::Idw, date)) == full_text);
  const auto best = read_best(layout, Method::Idw, date);
  CHECK(best.objective == best_so_far(full).back());

  for (const auto* p : {"power"}) {
    CHECK(fs::exists(layout.tune_dir(Method::Idw) / (date + ".hist_" + p + ".csv")));
  }
  CHECK_FALSE(fs::exists(layout.tune_dir(Method::Idw) / (date + ".hist_k_neighbours.csv")));

  // A history longer than the budget is a configuration mismatch.
  cfg.n_iterations = 0;
  CHECK_THROWS_AS(cmd_tune(cfg), ValidationError);
}

TEST_CASE("budget (1, 0) fast path") {
  const auto dir = scratch("fast");
  auto cfg = small_config(dir);
  cfg.n_initial = 1;
  cfg.n_iterations = 0;
  cmd_ingest(cfg);
  cmd_tune(cfg);
  const Layout layout{cfg.out};
  for (const auto& d : read_dates(layout)) {
    const auto h = read_history_csv(layout.history_file(Method::Ok, d), SearchSpace::for_method(Method::Ok));
    REQUIRE(h.size() == 1);
  }
}

TEST_CASE("only evaluate reads test rows; metrics match a direct computation") {
  const auto dir = scratch("guard");
  auto cfg = small_config(dir);
  const Layout layout{cfg.out};
  const auto before = test_split_reads();
  cmd_ingest(cfg);
  CHECK_THROWS_AS(cmd_evaluate(cfg), MissingArtifactError);
  cmd_tune(cfg);
  cmd_bench(cfg);
  CHECK(test_split_reads() == before);
  cmd_evaluate(cfg);
  CHECK(test_split_reads() == before + 3);

  // Oracle: refit IDW for the first date and score with the metrics module.
  const auto date = read_dates(layout).front();
  const auto set = read_split_csv(layout.split_file(date), true);
  const auto best = read_best(layout, Method::Idw, date);
  const auto space = SearchSpace::for_method(Method::Idw);
  const auto model = fit_reconstructor(space, best.params, set.cloud(Split::Train),
                                       set.cloud(Split::Validation), 0, {});
  const auto test = set.cloud(Split::Test);
  const auto m = compute_metrics(EvalPair(test.values(), model->reconstruct(test.locations())));

  std::istringstream in(slurp(layout.metrics_file()));
  std::string line;
  std::getline(in, line);
  CHECK(line == "date,method,rmse,mae,r2,delta_max,n_test");
  std::getline(in, line);
  std::stringstream row(line);
  std::vector<std::string> f;
  for (std::string c; std::getline(row, c, ',');) f.push_back(c);
  REQUIRE(f.size() == 7);
  CHECK(f[0] == date);
  CHECK(f[1] == "idw");
  CHECK(std::stod(f[2]) == doctest::Approx(m.rmse).epsilon(1e-12));
  CHECK(std::stod(f[3]) == doctest::Approx(m.mae).epsilon(1e-12));
  CHECK(std::stod(f[5]) == doctest::Approx(m.delta_max).epsilon(1e-12));
  CHECK(std::stoul(f[6]) == test.size());
}

TEST_CASE("compare and bench outputs") {
  const auto dir = scratch("compare");
  auto cfg = small_config(dir);
  const Layout layout{cfg.out};
  cmd_ingest(cfg);
  cmd_tune(cfg);
  cmd_evaluate(cfg);
  cmd_compare(cfg);

  const auto summary = slurp(layout.compare_dir() / "summary.csv");
  CHECK(summary.rfind("metric,method,median,iqr\n", 0) == 0);
  CHECK(slurp(layout.compare_dir() / "omnibus.csv").rfind("metric,h,p,eta_squared\n", 0) == 0);
  CHECK(slurp(layout.compare_dir() / "posthoc.csv").rfind("metric,first,second,z,p_raw,p_adjusted,rank_biserial\n", 0) ==
        0);

  // Median MAE of idw against a quantile oracle over metrics.csv.
  std::istringstream in(slurp(layout.metrics_file()));
  std::string line;
  std::getline(in, line);
  std::vector<double> idw_mae;
  while (std::getline(in, line)) {
    if (line.find(",idw,") == std::string::npos) continue;
    std::stringstream row(line);
    std::vector<std::string> f;
    for (std::string c; std::getline(row, c, ',');) f.push_back(c);
    idw_mae.push_back(std::stod(f[3]));
  }
  std::sort(idw_mae.begin(), idw_mae.end());
  std::istringstream s(summary);
  bool found = false;
  while (std::getline(s, line)) {
    if (line.rfind("mae,idw,", 0) != 0) continue;
    found = true;
    CHECK(std::stod(line.substr(8)) == doctest::Approx(idw_mae[1]));
  }
  CHECK(found);

  const auto outputs = cmd_bench(cfg);
  CHECK(outputs.size() == 4);
  const auto records = read_bench_records(layout.bench_dir() / "bench_records.csv");
  CHECK(records.size() == 2 * 2 * 3);
  CHECK(slurp(layout.bench_dir() / "time.svg").find("\"y_scale\":\"log\"") != std::string::npos);

  cmd_report(cfg);
  const auto report = slurp(layout.report_file());
  CHECK(report.find("## Tuning") != std::string::npos);
  CHECK(report.find("## Reconstruction cost") != std::string::npos);

  write_manifest(cfg, "bench", outputs);
  const auto manifest = nlohmann::json::parse(slurp(layout.manifest_file("bench")));
  CHECK(manifest["config_hash"] == fmt::format("{:016x}", cfg.hash()));
  CHECK(manifest["outputs"].size() == 4);
  CHECK(manifest["outputs"][0]["timing_dependent"] == true);
}

TEST_CASE("compare refuses fewer than three dates") {
  const auto dir = scratch("two_dates");
  auto cfg = small_config(dir, 2);
  cmd_ingest(cfg);
  cmd_tune(cfg);
  cmd_evaluate(cfg);
  CHECK_THROWS_AS(cmd_compare(cfg), ValidationError);
}

TEST_CASE("network method through tune and evaluate") {
  const auto dir = scratch("inr");
  auto cfg = small_config(dir);
  cfg.methods = {Method::Inr};
  cfg.inr_epochs = 3;
  cfg.n_initial = 2;
  cfg.n_iterations = 1;
  cmd_ingest(cfg);
  cmd_tune(cfg);
  const Layout layout{cfg.out};
  const auto first = slurp(layout.history_file(Method::Inr, read_dates(layout).front()));
  cmd_evaluate(cfg);
  std::istringstream in(slurp(layout.metrics_file()));
  std::string line;
  std::size_t rows = 0;
  std::getline(in, line);
  while (std::getline(in, line)) rows += line.find(",inr,") != std::string::npos;
  CHECK(rows == 3);

  // Same seed, same history.
  const auto dir2 = scratch("inr2");
  auto cfg2 = cfg;
  cfg2.out = dir2 / "out";
  cmd_ingest(cfg2);
  cmd_tune(cfg2);
  CHECK(slurp(Layout{cfg2.out}.history_file(Method::Inr, read_dates(layout).front())) == first);
}

TEST_CASE("config validation") {
  ExperimentConfig cfg;
  CHECK_NOTHROW(cfg.validate());
  CHECK(cfg.budget(Method::Inr).n_iterations == 200);
  cfg.n_iterations = 7;
  CHECK(cfg.budget(Method::Inr).n_iterations == 7);
  cfg.methods = {};
  CHECK_THROWS_AS(cfg.validate(), ValidationError);
  cfg.methods = {Method::Idw, Method::Idw};
  CHECK_THROWS_AS(cfg.validate(), ValidationError);
  cfg.methods = {Method::Idw};
  cfg.bench_reps = 2;
  CHECK_THROWS_AS(cfg.validate(), ValidationError);
  cfg.bench_reps = 3;
  cfg.bench_sizes = {100, 10};
  CHECK_THROWS_AS(cfg.validate(), ValidationError);

  CHECK(parse_methods("idw,ok") == std::vector<Method>{Method::Idw, Method::Ok});
  CHECK_THROWS_AS(parse_methods("idw,rbf"), ValidationError);
  CHECK(parse_sizes("10,100") == std::vector<std::size_t>{10, 100});
  CHECK_THROWS_AS(parse_sizes("10,x"), ValidationError);
  CHECK_THROWS_AS(parse_sizes("-5"), ValidationError);

  ExperimentConfig a, b;
  b.out = "elsewhere";
  CHECK(a.hash() == b.hash());
  b.seed = 1;
  CHECK(a.hash() != b.hash());
}
