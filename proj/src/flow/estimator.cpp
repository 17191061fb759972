#include <fstream>

#include "networks.hpp"

namespace ahsnpe {

namespace {

constexpr const char* kCheckpointFormat = "ahsnpe-estimator";
constexpr int kCheckpointVersion = 1;

std::vector<double> to_std(const Vector& v) { return {v.data(), v.data() + v.size()}; }

Vector from_std(const std::vector<double>& v) {
  return Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size()));
}

}  // namespace

std::string to_string(EstimatorKind k) { return k == EstimatorKind::kMdn ? "mdn" : "maf"; }

EstimatorKind estimator_kind_from_string(const std::string& name) {
  if (name == "mdn" || name == "MDN") return EstimatorKind::kMdn;
  if (name == "maf" || name == "MAF") return EstimatorKind::kMaf;
  throw InvalidArgument("unknown estimator kind '" + name + "'");
}

void EstimatorSpec::validate() const {
  if (theta_dim < 1 || context_dim < 1) throw InvalidArgument("estimator dimensions must be at least 1");
  if (kind == EstimatorKind::kMaf) {
    if (hidden_units < 1) throw InvalidArgument("MAF needs at least one hidden unit");
    if (n_transforms < 1) throw InvalidArgument("MAF needs at least one transform");
  } else {
    if (hidden_units < 0) throw InvalidArgument("negative hidden width");
    if (n_components < 1) throw InvalidArgument("MDN needs at least one component");
  }
}

void ParamLayout::add(std::string name, Eigen::Index rows, Eigen::Index cols) {
  blocks_.push_back(Block{std::move(name), size_, rows, cols});
  size_ += rows * cols;
}

const ParamLayout::Block& ParamLayout::block(const std::string& name) const {
  for (const auto& b : blocks_)
    if (b.name == name) return b;
  throw InvalidArgument("no parameter block '" + name + "'");
}

ParamLayout make_layout(const EstimatorSpec& spec) {
  spec.validate();
  ParamLayout layout;
  if (spec.kind == EstimatorKind::kMaf)
    detail::add_maf_blocks(layout, spec);
  else
    detail::add_mdn_blocks(layout, spec);
  return layout;
}

namespace detail {

ad::Var BlockNodes::operator()(const std::string& name) const {
  const auto& blocks = layout_.blocks();
  for (std::size_t i = 0; i < blocks.size(); ++i)
    if (blocks[i].name == name) return nodes_[i];
  throw InvalidArgument("no parameter block '" + name + "'");
}

}  // namespace detail

ConditionalDensityEstimator::ConditionalDensityEstimator(EstimatorSpec spec, Standardizer standardizer, Vector params)
    : spec_(spec), standardizer_(std::move(standardizer)), params_(std::move(params)), layout_(make_layout(spec_)),
      trained_(true) {
  if (params_.size() != layout_.size()) throw InvalidArgument("parameter vector does not match the estimator layout");
  if (standardizer_.theta_mean.size() != spec_.theta_dim || standardizer_.x_mean.size() != spec_.context_dim)
    throw InvalidArgument("standardizer does not match the estimator dimensions");
}

Vector ConditionalDensityEstimator::initial_parameters(const EstimatorSpec& spec, Rng& rng, bool identity) {
  const ParamLayout layout = make_layout(spec);
  Vector params = Vector::Zero(layout.size());
  if (spec.kind == EstimatorKind::kMaf)
    detail::init_maf(spec, layout, params, rng, identity);
  else
    detail::init_mdn(spec, layout, params, rng);
  return params;
}

void ConditionalDensityEstimator::require_trained() const {
  if (!trained_) throw InvalidArgument("estimator has not been trained");
}

std::vector<ad::Var> ConditionalDensityEstimator::parameter_nodes(ad::Tape& tape, const Vector& params,
                                                                  bool trainable) const {
  std::vector<ad::Var> nodes;
  nodes.reserve(layout_.blocks().size());
  for (const auto& b : layout_.blocks()) {
    Matrix value = Eigen::Map<const Matrix>(params.data() + b.offset, b.rows, b.cols);
    nodes.push_back(trainable ? tape.variable(std::move(value)) : tape.constant(std::move(value)));
  }
  return nodes;
}

ad::Var ConditionalDensityEstimator::build_log_prob(ad::Tape& tape, const std::vector<ad::Var>& blocks,
                                                    const Matrix& u, const Matrix& c) const {
  const detail::BlockNodes p(layout_, blocks);
  if (spec_.kind == EstimatorKind::kMaf) return detail::maf_log_prob(tape, spec_, p, u, c);
  return detail::mdn_log_prob(tape, spec_, p, u, c);
}

Vector ConditionalDensityEstimator::log_prob_batch(const Matrix& theta, const Matrix& x) const {
  require_trained();
  if (theta.cols() != spec_.theta_dim || x.cols() != spec_.context_dim || theta.rows() != x.rows())
    throw InvalidArgument("log_prob input shapes do not match the estimator");
  ad::Tape tape;
  const auto nodes = parameter_nodes(tape, params_, false);
  const ad::Var lp =
      build_log_prob(tape, nodes, standardizer_.theta_forward(theta), standardizer_.x_forward(x));
  return tape.value(lp).col(0).array() + standardizer_.log_jacobian();
}

double ConditionalDensityEstimator::log_prob(const Vector& theta, const Vector& x) const {
  return log_prob_batch(theta.transpose(), x.transpose())[0];
}

Matrix ConditionalDensityEstimator::sample(const Vector& x, Eigen::Index n, Rng& rng) const {
  require_trained();
  if (x.size() != spec_.context_dim) throw InvalidArgument("context has the wrong dimension");
  const RowVector c = standardizer_.x_forward(x.transpose()).row(0);
  Matrix u;
  if (spec_.kind == EstimatorKind::kMaf) {
    const Matrix z = standard_normal(n, spec_.theta_dim, rng);
    u = detail::maf_inverse(spec_, layout_, params_, z, c.replicate(n, 1));
  } else {
    u = detail::mdn_sample(spec_, layout_, params_, c, n, rng);
  }
  return standardizer_.theta_inverse(u);
}

std::pair<Matrix, Vector> ConditionalDensityEstimator::forward(const Matrix& theta, const Matrix& x) const {
  require_trained();
  if (spec_.kind != EstimatorKind::kMaf) throw InvalidArgument("forward() is defined for flows only");
  auto [z, logdet] =
      detail::maf_forward(spec_, layout_, params_, standardizer_.theta_forward(theta), standardizer_.x_forward(x));
  logdet.array() += standardizer_.log_jacobian();
  return {std::move(z), std::move(logdet)};
}

Matrix ConditionalDensityEstimator::inverse(const Matrix& z, const Matrix& x) const {
  require_trained();
  if (spec_.kind != EstimatorKind::kMaf) throw InvalidArgument("inverse() is defined for flows only");
  return standardizer_.theta_inverse(detail::maf_inverse(spec_, layout_, params_, z, standardizer_.x_forward(x)));
}

nlohmann::json ConditionalDensityEstimator::to_json() const {
  require_trained();
  nlohmann::json j;
  j["format"] = kCheckpointFormat;
  j["version"] = kCheckpointVersion;
  j["spec"] = {{"kind", to_string(spec_.kind)},
               {"hidden_units", spec_.hidden_units},
               {"n_transforms", spec_.n_transforms},
               {"n_components", spec_.n_components},
               {"theta_dim", spec_.theta_dim},
               {"context_dim", spec_.context_dim}};
  j["standardizer"] = {{"theta_mean", to_std(standardizer_.theta_mean)},
                       {"theta_sd", to_std(standardizer_.theta_sd)},
                       {"x_mean", to_std(standardizer_.x_mean)},
                       {"x_sd", to_std(standardizer_.x_sd)}};
  j["parameters"] = to_std(params_);
  return j;
}

ConditionalDensityEstimator ConditionalDensityEstimator::from_json(const nlohmann::json& j) {
  try {
    if (j.at("format").get<std::string>() != kCheckpointFormat) throw InvalidArgument("not an estimator checkpoint");
    if (j.at("version").get<int>() != kCheckpointVersion)
      throw InvalidArgument("unsupported estimator checkpoint version");
    const auto& s = j.at("spec");
    EstimatorSpec spec;
    spec.kind = estimator_kind_from_string(s.at("kind").get<std::string>());
    spec.hidden_units = s.at("hidden_units").get<int>();
    spec.n_transforms = s.at("n_transforms").get<int>();
    spec.n_components = s.at("n_components").get<int>();
    spec.theta_dim = s.at("theta_dim").get<int>();
    spec.context_dim = s.at("context_dim").get<int>();
    const auto& st = j.at("standardizer");
    Standardizer standardizer;
    standardizer.theta_mean = from_std(st.at("theta_mean").get<std::vector<double>>());
    standardizer.theta_sd = from_std(st.at("theta_sd").get<std::vector<double>>());
    standardizer.x_mean = from_std(st.at("x_mean").get<std::vector<double>>());
    standardizer.x_sd = from_std(st.at("x_sd").get<std::vector<double>>());
    return ConditionalDensityEstimator(spec, std::move(standardizer),
                                       from_std(j.at("parameters").get<std::vector<double>>()));
  } catch (const nlohmann::json::exception& e) {
    throw InvalidArgument(std::string("malformed estimator checkpoint: ") + e.what());
  }
}

void ConditionalDensityEstimator::save(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << to_json().dump(1) << '\n';
  if (!out) throw std::runtime_error("failed writing " + path);
}

ConditionalDensityEstimator ConditionalDensityEstimator::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw InvalidArgument(path + ": " + e.what());
  }
  return from_json(j);
}

}  // namespace ahsnpe
