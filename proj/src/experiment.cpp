#include "fieldrecon/experiment.hpp"

#include "fieldrecon/kdtree.hpp"
#include "fieldrecon/metrics.hpp"

namespace fieldrecon {

namespace {

class IdwReconstructor final : public Reconstructor {
 public:
  IdwReconstructor(const ClimatePointCloud& train, IdwParams params, CoordinateSystem cs)
      : nodes_(train), index_(nodes_), params_(params), cs_(cs) {}

  std::vector<double> reconstruct(std::span<const QueryPoint> targets) const override {
    return idw_reconstruct(nodes_, index_, params_, targets, cs_);
  }

 private:
  ClimatePointCloud nodes_;
  KdIndex index_;
  IdwParams params_;
  CoordinateSystem cs_;
};

class KrigingReconstructor final : public Reconstructor {
 public:
  explicit KrigingReconstructor(OrdinaryKriging ok) : ok_(std::move(ok)) {}

  std::vector<double> reconstruct(std::span<const QueryPoint> targets) const override {
    return ok_.predict(targets);
  }

 private:
  OrdinaryKriging ok_;
};

class InrReconstructor final : public Reconstructor {
 public:
  explicit InrReconstructor(InrModel model) : model_(std::move(model)) {}

  std::vector<double> reconstruct(std::span<const QueryPoint> targets) const override {
    return inr_reconstruct(model_, targets);
  }

 private:
  InrModel model_;
};

void expect_method(const SearchSpace& space, Method m) {
  if (space.method() != m) {
    throw std::invalid_argument("search space belongs to " + to_string(space.method()) +
                                ", not " + to_string(m));
  }
}

}  // namespace

IdwParams idw_params(const SearchSpace& space, const Assignment& a) {
  expect_method(space, Method::Idw);
  return IdwParams(space.integer(a, "k_neighbours"), space.real(a, "power"));
}

KrigingParams kriging_params(const SearchSpace& space, const Assignment& a) {
  expect_method(space, Method::Ok);
  return KrigingParams(space.integer(a, "n_bins"), space.real(a, "anisotropy_scale"),
                       coordinate_system_from_string(space.category(a, "coordinates")),
                       variogram_family_from_string(space.category(a, "variogram_model")));
}

InrParams inr_params(const SearchSpace& space, const Assignment& a, int epochs) {
  expect_method(space, Method::Inr);
  InrParams p;
  p.learning_rate = space.real(a, "learning_rate");
  p.l2 = space.real(a, "l2");
  p.batch_size = space.integer(a, "batch_size");
  p.hidden_dim = std::stoi(space.category(a, "hidden_dim"));
  p.latent_dim = std::stoi(space.category(a, "latent_dim"));
  p.n_layers = space.integer(a, "n_layers");
  p.input_scale = space.real(a, "input_scale");
  p.alpha = space.real(a, "alpha");
  p.epochs = epochs;
  return p;
}

std::unique_ptr<Reconstructor> fit_reconstructor(const SearchSpace& space, const Assignment& a,
                                                 const ClimatePointCloud& train,
                                                 const ClimatePointCloud& validation,
                                                 std::uint64_t seed, const MethodOptions& opts) {
  switch (space.method()) {
    case Method::Idw:
      return std::make_unique<IdwReconstructor>(train, idw_params(space, a), opts.idw_coord);
    case Method::Ok:
      return std::make_unique<KrigingReconstructor>(
          OrdinaryKriging::fit(train, kriging_params(space, a)));
    case Method::Inr:
      return std::make_unique<InrReconstructor>(
          inr_train(train, validation, inr_params(space, a, opts.inr_epochs), seed).model);
  }
  throw std::invalid_argument("unknown method");
}

Objective validation_objective(const SearchSpace& space, const ClimatePointCloud& train,
                               const ClimatePointCloud& validation, const MethodOptions& opts) {
  return [&space, &train, &validation, opts](const Assignment& a, std::uint64_t seed) {
    const auto model = fit_reconstructor(space, a, train, validation, seed, opts);
    const auto targets = validation.locations();
    return mae(EvalPair(validation.values(), model->reconstruct(targets)));
  };
}

nlohmann::json assignment_to_json(const SearchSpace& space, const Assignment& a) {
  nlohmann::json j = nlohmann::json::object();
  for (std::size_t i = 0; i < space.size(); ++i) {
    const auto& p = space.params()[i];
    switch (p.kind) {
      case ParamKind::Categorical: j[p.name] = space.format_value(i, a[i]); break;
      case ParamKind::Integer: j[p.name] = static_cast<long>(a[i]); break;
      default: j[p.name] = a[i]; break;
    }
  }
  return j;
}

Assignment assignment_from_json(const SearchSpace& space, const nlohmann::json& j) {
  Assignment a(space.size());
  for (std::size_t i = 0; i < space.size(); ++i) {
    const auto& p = space.params()[i];
    if (!j.contains(p.name)) throw std::invalid_argument("missing parameter " + p.name);
    a[i] = p.kind == ParamKind::Categorical ? space.parse_value(i, j.at(p.name).get<std::string>())
                                            : j.at(p.name).get<double>();
  }
  if (!space.contains(a)) throw std::invalid_argument("parameters outside the search space");
  return a;
}

}  // namespace fieldrecon
