#include "fieldrecon/bench.hpp"

#include <algorithm>
#include <array>
#include <atomic>
#include <chrono>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>
#include <thread>

#include <fmt/format.h>
#include <unistd.h>

#include "fieldrecon/random.hpp"
#include "fieldrecon/stats.hpp"

namespace fieldrecon {

Ladder ladder_from_string(const std::string& s) {
  if (s == "small") return Ladder::Small;
  if (s == "large") return Ladder::Large;
  throw std::invalid_argument("ladder must be small or large, got '" + s + "'");
}

std::vector<std::size_t> ladder_sizes(Ladder ladder) {
  if (ladder == Ladder::Small) return {10, 100, 500, 1000, 2000, 5000, 10000};
  return {100, 500, 1000, 5000, 10000, 50000, 100000, 500000, 1000000};
}

void BenchConfig::validate() const {
  if (sizes.empty()) throw std::invalid_argument("bench: no sizes");
  if (sizes.front() == 0) throw std::invalid_argument("bench: sizes must be positive");
  for (std::size_t i = 1; i < sizes.size(); ++i) {
    if (sizes[i] <= sizes[i - 1]) throw std::invalid_argument("bench: sizes must strictly increase");
  }
  if (repetitions < 3) throw std::invalid_argument("bench: need at least 3 repetitions");
}

std::vector<QueryPoint> sample_targets(const ClimatePointCloud& pc, std::size_t m, std::uint64_t seed) {
  if (m == 0) throw std::invalid_argument("sample_targets: M must be >= 1");
  const auto box = bounding_box(pc);
  Rng rng(seed);
  std::vector<QueryPoint> out;
  out.reserve(m);
  for (std::size_t i = 0; i < m; ++i) {
    const double lat = uniform(rng, box.lat_min, box.lat_max);
    const double lon = uniform(rng, box.lon_min, box.lon_max);
    out.emplace_back(lat, lon);
  }
  return out;
}

struct RssSampler::State {
  std::atomic<bool> running{false};
  std::atomic<std::size_t> peak{0};
  std::size_t baseline = 0;
  std::thread worker;
};

RssSampler::RssSampler() : state_(std::make_unique<State>()) {}

RssSampler::~RssSampler() {
  if (state_->worker.joinable()) {
    state_->running = false;
    state_->worker.join();
  }
}

std::size_t RssSampler::current_rss_bytes() {
  std::ifstream statm("/proc/self/statm");
  std::size_t size = 0, resident = 0;
  if (!(statm >> size >> resident)) return 0;
  return resident * static_cast<std::size_t>(sysconf(_SC_PAGESIZE));
}

void RssSampler::start() {
  if (state_->worker.joinable()) throw std::logic_error("RssSampler already running");
  state_->baseline = current_rss_bytes();
  state_->peak = state_->baseline;
  state_->running = true;
  state_->worker = std::thread([s = state_.get()] {
    while (s->running) {
      const auto now = current_rss_bytes();
      auto prev = s->peak.load();
      while (now > prev && !s->peak.compare_exchange_weak(prev, now)) {
      }
      std::this_thread::sleep_for(std::chrono::milliseconds(1));
    }
  });
}

std::size_t RssSampler::stop() {
  if (!state_->worker.joinable()) throw std::logic_error("RssSampler not running");
  state_->running = false;
  state_->worker.join();
  const auto last = current_rss_bytes();
  const auto peak = std::max(state_->peak.load(), last);
  return peak > state_->baseline ? peak - state_->baseline : 0;
}

std::vector<BenchRecord> run_bench(const BenchConfig& cfg, const std::vector<BenchSubject>& subjects,
                                   std::uint64_t seed, const RecordSink& sink) {
  cfg.validate();
  std::vector<BenchRecord> out;
  for (const auto& subject : subjects) {
    if (subject.models.empty() || subject.models.size() != subject.nodes.size()) {
      throw std::invalid_argument("bench: subject " + subject.method + " needs one node set per model");
    }
    for (const auto m : cfg.sizes) {
      for (std::size_t run = 0; run < cfg.warmup + cfg.repetitions; ++run) {
        const std::size_t cell = run % subject.models.size();
        const auto targets = sample_targets(
            subject.nodes[cell], m, derive_seed(seed, fmt::format("{}/{}/{}", subject.method, m, run)));
        BenchRecord r;
        r.method = subject.method;
        r.m = m;
        r.trial = run;
        RssSampler sampler;
        try {
          sampler.start();
          const auto t0 = std::chrono::steady_clock::now();
          const auto values = subject.models[cell]->reconstruct(targets);
          const auto t1 = std::chrono::steady_clock::now();
          r.peak_bytes = sampler.stop();
          r.seconds = std::chrono::duration<double>(t1 - t0).count();
          r.failed = values.size() != targets.size();
        } catch (const std::exception&) {
          r.failed = true;
        }
        if (run < cfg.warmup) continue;
        r.trial = run - cfg.warmup;
        if (sink) sink(r);
        out.push_back(std::move(r));
      }
    }
  }
  return out;
}

std::vector<BenchSummaryRow> summarize_bench(const std::vector<BenchRecord>& records) {
  std::vector<std::pair<std::string, std::size_t>> order;
  std::map<std::pair<std::string, std::size_t>, std::vector<const BenchRecord*>> cells;
  for (const auto& r : records) {
    const auto key = std::make_pair(r.method, r.m);
    if (!cells.count(key)) order.push_back(key);
    cells[key].push_back(&r);
  }
  std::vector<BenchSummaryRow> rows;
  for (const auto& key : order) {
    const auto& cell = cells[key];
    if (cell.size() < 3) {
      throw std::invalid_argument(
          fmt::format("bench summary: {} at M={} has {} trials, need 3", key.first, key.second, cell.size()));
    }
    BenchSummaryRow row;
    row.method = key.first;
    row.m = key.second;
    row.trials = cell.size();
    std::vector<double> t, mem;
    for (const auto* r : cell) {
      if (r->failed) {
        ++row.failures;
        continue;
      }
      t.push_back(r->seconds);
      mem.push_back(static_cast<double>(r->peak_bytes));
    }
    if (t.empty()) {
      const double nan = std::numeric_limits<double>::quiet_NaN();
      row.time_median = row.time_lo = row.time_hi = nan;
      row.mem_median = row.mem_lo = row.mem_hi = nan;
    } else {
      row.time_median = quantile(t, 0.5);
      row.time_lo = quantile(t, 0.025);
      row.time_hi = quantile(t, 0.975);
      row.mem_median = quantile(mem, 0.5);
      row.mem_lo = quantile(mem, 0.025);
      row.mem_hi = quantile(mem, 0.975);
    }
    rows.push_back(row);
  }
  return rows;
}

std::string format_bench_record(const BenchRecord& r) {
  return fmt::format("{},{},{},{:.9g},{},{}", r.method, r.m, r.trial, r.seconds, r.peak_bytes,
                     r.failed ? 1 : 0);
}

std::vector<BenchRecord> read_bench_records(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line) || line != kBenchRecordHeader) {
    throw std::runtime_error(path.string() + ": unexpected header");
  }
  std::vector<BenchRecord> out;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string f[6];
    for (auto& cell : f) std::getline(ss, cell, ',');
    BenchRecord r;
    r.method = f[0];
    r.m = std::stoul(f[1]);
    r.trial = std::stoul(f[2]);
    r.seconds = std::stod(f[3]);
    r.peak_bytes = std::stoul(f[4]);
    r.failed = f[5] == "1";
    out.push_back(std::move(r));
  }
  return out;
}

void write_bench_summary(const std::filesystem::path& path, const std::vector<BenchSummaryRow>& rows) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "method,M,trials,failures,time_median,time_p2.5,time_p97.5,mem_median,mem_p2.5,mem_p97.5\n";
  for (const auto& r : rows) {
    out << fmt::format("{},{},{},{},{:.9g},{:.9g},{:.9g},{:.9g},{:.9g},{:.9g}\n", r.method, r.m, r.trials,
                       r.failures, r.time_median, r.time_lo, r.time_hi, r.mem_median, r.mem_lo,
                       r.mem_hi);
  }
}

namespace {

constexpr const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e"};

}  // namespace

void write_bench_plot(const std::filesystem::path& path, const std::vector<BenchSummaryRow>& rows,
                      BenchQuantity quantity, bool log_y) {
  constexpr double kW = 640, kH = 420, kLeft = 70, kRight = 20, kTop = 30, kBottom = 50;
  const bool time = quantity == BenchQuantity::Time;
  auto pick = [time](const BenchSummaryRow& r) {
    return time ? std::array<double, 3>{r.time_lo, r.time_median, r.time_hi}
                : std::array<double, 3>{r.mem_lo, r.mem_median, r.mem_hi};
  };
  auto usable = [log_y](double v) { return std::isfinite(v) && (!log_y || v > 0.0); };

  double xmin = INFINITY, xmax = -INFINITY, ymin = INFINITY, ymax = -INFINITY;
  std::vector<std::string> methods;
  for (const auto& r : rows) {
    if (std::find(methods.begin(), methods.end(), r.method) == methods.end()) methods.push_back(r.method);
    xmin = std::min(xmin, std::log10(static_cast<double>(r.m)));
    xmax = std::max(xmax, std::log10(static_cast<double>(r.m)));
    for (double v : pick(r)) {
      if (!usable(v)) continue;
      const double y = log_y ? std::log10(v) : v;
      ymin = std::min(ymin, y);
      ymax = std::max(ymax, y);
    }
  }
  if (!std::isfinite(xmin)) xmin = 0, xmax = 1;
  if (!std::isfinite(ymin)) ymin = 0, ymax = 1;
  if (xmax - xmin < 1e-12) xmin -= 0.5, xmax += 0.5;
  if (ymax - ymin < 1e-12) ymin -= 0.5, ymax += 0.5;

  auto px = [&](double m) {
    return kLeft + (std::log10(m) - xmin) / (xmax - xmin) * (kW - kLeft - kRight);
  };
  auto py = [&](double v) {
    const double y = log_y ? std::log10(v) : v;
    return kH - kBottom - (y - ymin) / (ymax - ymin) * (kH - kTop - kBottom);
  };

  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  const char* label = time ? "reconstruction time [s]" : "peak memory [bytes]";
  out << fmt::format(
      "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{}\" height=\"{}\" data-x-scale=\"log\" "
      "data-y-scale=\"{}\">\n",
      kW, kH, log_y ? "log" : "linear");
  out << fmt::format("<metadata>{{\"x\":\"M\",\"x_scale\":\"log\",\"y\":\"{}\",\"y_scale\":\"{}\"}}</metadata>\n",
                     time ? "seconds" : "peak_bytes", log_y ? "log" : "linear");
  out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  out << fmt::format("<line x1=\"{0}\" y1=\"{1}\" x2=\"{2}\" y2=\"{1}\" stroke=\"black\"/>\n", kLeft,
                     kH - kBottom, kW - kRight);
  out << fmt::format("<line x1=\"{0}\" y1=\"{1}\" x2=\"{0}\" y2=\"{2}\" stroke=\"black\"/>\n", kLeft, kTop,
                     kH - kBottom);
  for (int e = static_cast<int>(std::ceil(xmin)); e <= static_cast<int>(std::floor(xmax)); ++e) {
    const double x = px(std::pow(10.0, e));
    out << fmt::format("<text x=\"{:.1f}\" y=\"{}\" font-size=\"11\" text-anchor=\"middle\">1e{}</text>\n", x,
                       kH - kBottom + 16, e);
  }
  for (int i = 0; i <= 4; ++i) {
    const double y = ymin + (ymax - ymin) * i / 4.0;
    const double v = log_y ? std::pow(10.0, y) : y;
    out << fmt::format("<text x=\"{}\" y=\"{:.1f}\" font-size=\"11\" text-anchor=\"end\">{:.3g}</text>\n",
                       kLeft - 6, py(v) + 4, v);
  }
  out << fmt::format("<text x=\"{}\" y=\"{}\" font-size=\"12\" text-anchor=\"middle\">M (targets)</text>\n",
                     (kLeft + kW - kRight) / 2, kH - 12);
  out << fmt::format(
      "<text x=\"14\" y=\"{}\" font-size=\"12\" text-anchor=\"middle\" transform=\"rotate(-90 14 {})\">{}</text>\n",
      kH / 2, kH / 2, label);

  for (std::size_t mi = 0; mi < methods.size(); ++mi) {
    const char* colour = kPalette[mi % std::size(kPalette)];
    std::string line, band_top, band_bottom;
    for (const auto& r : rows) {
      if (r.method != methods[mi]) continue;
      const auto v = pick(r);
      if (!usable(v[1])) continue;
      line += fmt::format("{:.1f},{:.1f} ", px(static_cast<double>(r.m)), py(v[1]));
      if (usable(v[0]) && usable(v[2])) {
        out << fmt::format("<line x1=\"{0:.1f}\" y1=\"{1:.1f}\" x2=\"{0:.1f}\" y2=\"{2:.1f}\" stroke=\"{3}\"/>\n",
                           px(static_cast<double>(r.m)), py(v[0]), py(v[2]), colour);
      }
    }
    out << fmt::format("<polyline fill=\"none\" stroke=\"{}\" stroke-width=\"2\" points=\"{}\"/>\n", colour,
                       line);
    out << fmt::format("<text x=\"{}\" y=\"{}\" font-size=\"12\" fill=\"{}\">{}</text>\n", kLeft + 10,
                       kTop + 14 * (mi + 1), colour, methods[mi]);
  }
  out << "</svg>\n";
}

}  // namespace fieldrecon
