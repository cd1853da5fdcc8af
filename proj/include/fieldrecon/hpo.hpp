#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "fieldrecon/random.hpp"

namespace fieldrecon {

enum class ParamKind { Real, RealLog, Integer, Categorical };

/// One dimension of a search space. Numeric bounds are inclusive.
struct ParamSpec {
  std::string name;
  ParamKind kind = ParamKind::Real;
  double lower = 0.0;
  double upper = 1.0;
  std::vector<std::string> categories;

  static ParamSpec real(std::string name, double lower, double upper);
  static ParamSpec real_log(std::string name, double lower, double upper);
  static ParamSpec integer(std::string name, int lower, int upper);
  static ParamSpec categorical(std::string name, std::vector<std::string> categories);

  void validate() const;
  bool is_continuous() const noexcept { return kind == ParamKind::Real || kind == ParamKind::RealLog; }
  /// Width of this dimension in the GP input encoding.
  std::size_t encoded_width() const noexcept;
};

enum class Method { Idw, Ok, Inr };

std::string to_string(Method m);
Method method_from_string(const std::string& s);

/// A parameter assignment: one number per dimension. Integers hold integral
/// values and categoricals hold the category index.
using Assignment = std::vector<double>;

class SearchSpace {
 public:
  SearchSpace(Method method, std::vector<ParamSpec> params);

  /// Search bounds used when tuning each method.
  static SearchSpace for_method(Method method);

  Method method() const noexcept { return method_; }
  const std::vector<ParamSpec>& params() const noexcept { return params_; }
  std::size_t size() const noexcept { return params_.size(); }
  std::size_t index_of(const std::string& name) const;

  double real(const Assignment& a, const std::string& name) const;
  int integer(const Assignment& a, const std::string& name) const;
  const std::string& category(const Assignment& a, const std::string& name) const;

  /// True when every value lies in bounds and has the right type.
  bool contains(const Assignment& a) const noexcept;

  std::vector<double> encode(const Assignment& a) const;
  std::size_t encoded_size() const noexcept;

  /// Text form of one value (category label for categoricals).
  std::string format_value(std::size_t dim, double v) const;
  double parse_value(std::size_t dim, const std::string& text) const;

 private:
  Method method_;
  std::vector<ParamSpec> params_;
};

enum class TrialStatus { Ok, Failed };

struct Trial {
  Assignment params;
  double objective = std::numeric_limits<double>::infinity();
  TrialStatus status = TrialStatus::Failed;
  std::size_t index = 0;
};

struct BoBudget {
  std::size_t n_initial = 50;
  std::size_t n_iterations = 100;

  /// 50 initial samples; 100 iterations for IDW and OK, 200 for the network.
  static BoBudget for_method(Method method);
};

std::vector<Assignment> sample_initial(const SearchSpace& space, std::size_t n, std::uint64_t seed);

/// Expected-improvement maximizer of a Matern-5/2 GP fitted to the finite
/// trials of `history`. Falls back to a random sample when there is nothing
/// to fit or the fit degenerates.
Assignment propose_next(const std::vector<Trial>& history, const SearchSpace& space,
                        std::uint64_t seed);

/// Objective evaluated on one assignment; exceptions mark the trial failed.
using Objective = std::function<double(const Assignment&, std::uint64_t trial_seed)>;

struct TuneResult {
  std::vector<Trial> history;
  std::size_t best = 0;

  const Trial& best_trial() const { return history.at(best); }
};

/// Seed handed to the objective for trial `index` of a run seeded with `seed`.
std::uint64_t trial_seed(std::uint64_t seed, std::size_t index);

/// Called after every completed trial with the history so far.
using TrialCallback = std::function<void(const std::vector<Trial>&)>;

/// Runs the remaining trials of `budget` after those already in `resume`.
/// Trial i depends only on (seed, i) and the history before it, so a resumed
/// run reproduces an uninterrupted one.
TuneResult tune(const SearchSpace& space, const Objective& objective, const BoBudget& budget,
                std::uint64_t seed, std::vector<Trial> resume = {},
                const TrialCallback& on_trial = {});

/// Running minimum of finite objectives (infinity until the first success).
std::vector<double> best_so_far(const std::vector<Trial>& history);

void write_history_csv(const std::filesystem::path& path, const SearchSpace& space,
                       const std::vector<Trial>& history);
std::vector<Trial> read_history_csv(const std::filesystem::path& path, const SearchSpace& space);

struct HistogramBin {
  double lower;
  double upper;
  std::size_t count;
};

/// Equal-width histogram over [lower, upper] (log-spaced when `log_scale`).
std::vector<HistogramBin> histogram(const std::vector<double>& values, double lower, double upper,
                                    std::size_t bins, bool log_scale);

}  // namespace fieldrecon
