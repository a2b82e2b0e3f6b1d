#include "ncv/network.hpp"

#include <cmath>
#include <json.hpp>
#include <stdexcept>

namespace ncv {

std::size_t Architecture::affine_parameter_count() const {
  std::size_t n = 0;
  for (int l = 1; l <= depth(); ++l)
    n += static_cast<std::size_t>(layers[l]) * layers[l - 1] + layers[l];
  return n;
}

std::size_t Architecture::parameter_count() const {
  return affine_parameter_count() + (input_batchnorm ? 2 * static_cast<std::size_t>(inputs()) : 0);
}

double Architecture::forward_flops() const {
  double f = 0.0;
  for (int l = 1; l <= depth(); ++l) f += 2.0 * layers[l] * layers[l - 1];
  return f;
}

Architecture make_architecture(int state_dim, int output_dim, int hidden_layers, int hidden_size) {
  if (hidden_layers < 1 || hidden_size < 1 || output_dim < 1)
    throw std::invalid_argument("network needs at least one hidden layer and one output");
  Architecture a;
  a.layers.push_back(1 + state_dim);
  for (int i = 0; i < hidden_layers; ++i) a.layers.push_back(hidden_size + state_dim);
  a.layers.push_back(output_dim);
  return a;
}

BatchNormStats batch_stats(const Eigen::Ref<const RowMatrix>& inputs) {
  BatchNormStats s;
  const double n = static_cast<double>(inputs.rows());
  s.mean = inputs.colwise().mean().transpose();
  s.var = ((inputs.rowwise() - s.mean.transpose()).array().square().colwise().sum() / n).transpose();
  return s;
}

Network::Network(Architecture arch) : arch_(std::move(arch)) {
  if (arch_.depth() < 1) throw std::invalid_argument("network needs at least one affine layer");
  std::size_t off = 0;
  layers_.resize(arch_.depth());
  for (int l = 0; l < arch_.depth(); ++l) {
    layers_[l].in = arch_.layers[l];
    layers_[l].out = arch_.layers[l + 1];
    layers_[l].w = off;
    off += static_cast<std::size_t>(layers_[l].in) * layers_[l].out;
  }
  for (auto& layer : layers_) {
    layer.b = off;
    off += layer.out;
  }
  gamma_ = off;
  beta_ = off + arch_.inputs();
  params_.assign(arch_.parameter_count(), 0.0);
  if (arch_.input_batchnorm)
    std::fill(params_.begin() + gamma_, params_.begin() + beta_, 1.0);
  running_mean_ = Eigen::VectorXd::Zero(arch_.inputs());
  running_var_ = Eigen::VectorXd::Ones(arch_.inputs());
}

void Network::initialize(RandomStream& rng) {
  std::fill(params_.begin(), params_.end(), 0.0);
  for (const auto& layer : layers_) {
    const double sd = std::sqrt(2.0 / layer.in);
    for (std::size_t i = 0; i < static_cast<std::size_t>(layer.in) * layer.out; ++i)
      params_[layer.w + i] = sd * rng.normal();
  }
  if (arch_.input_batchnorm)
    std::fill(params_.begin() + gamma_, params_.begin() + beta_, 1.0);
  running_mean_.setZero();
  running_var_.setOnes();
}

void Network::normalise(const Eigen::Ref<const RowMatrix>& inputs, const Eigen::VectorXd& mean,
                        const Eigen::VectorXd& var, RowMatrix& out, RowMatrix* xhat) const {
  if (inputs.cols() != arch_.inputs()) throw std::invalid_argument("input width mismatch");
  if (!arch_.input_batchnorm) {
    out = inputs;
    if (xhat) *xhat = inputs;
    return;
  }
  const Eigen::RowVectorXd inv = (var.array() + kBatchNormEps).rsqrt().matrix().transpose();
  RowMatrix z = (inputs.rowwise() - mean.transpose()).array().rowwise() * inv.array();
  Eigen::Map<const Eigen::RowVectorXd> g(params_.data() + gamma_, arch_.inputs());
  Eigen::Map<const Eigen::RowVectorXd> b(params_.data() + beta_, arch_.inputs());
  out = (z.array().rowwise() * g.array()).rowwise() + b.array();
  if (xhat) *xhat = std::move(z);
}

void Network::run(RowMatrix& a, RowMatrix& out, std::vector<RowMatrix>* tape) const {
  // A row-major (rows x n) block is the column-major (n x rows) transpose, so
  // each layer is one GEMM W * A^T with samples along the columns.
  RowMatrix next;
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    const Layer& layer = layers_[l];
    Eigen::Map<const Eigen::MatrixXd> Wt(params_.data() + layer.w, layer.in, layer.out);
    Eigen::Map<const Eigen::VectorXd> b(params_.data() + layer.b, layer.out);
    next.resize(a.rows(), layer.out);
    Eigen::Map<const Eigen::MatrixXd> at(a.data(), layer.in, a.rows());
    Eigen::Map<Eigen::MatrixXd> zt(next.data(), layer.out, a.rows());
    zt.noalias() = Wt.transpose() * at;
    if (l + 1 < layers_.size())
      zt = (zt.colwise() + b).cwiseMax(0.0);
    else
      zt.colwise() += b;
    if (tape) tape->push_back(std::move(a));
    a.swap(next);
  }
  out.swap(a);
}

RowMatrix Network::forward(const Eigen::Ref<const RowMatrix>& inputs, bool training) {
  RowMatrix out;
  if (training && arch_.input_batchnorm) {
    const BatchNormStats stats = batch_stats(inputs);
    forward_with(inputs, stats, out);
    update_running(stats, inputs.rows());
  } else {
    infer(inputs, out);
  }
  return out;
}

void Network::infer(const Eigen::Ref<const RowMatrix>& inputs, RowMatrix& out) const {
  RowMatrix a;
  normalise(inputs, running_mean_, running_var_, a, nullptr);
  run(a, out, nullptr);
}

void Network::forward_with(const Eigen::Ref<const RowMatrix>& inputs, const BatchNormStats& stats,
                           RowMatrix& out) const {
  RowMatrix a;
  normalise(inputs, stats.mean, stats.var, a, nullptr);
  run(a, out, nullptr);
}

void Network::backward(const Eigen::Ref<const RowMatrix>& inputs, const BatchNormStats& stats,
                       const Eigen::Ref<const RowMatrix>& d_out, std::span<double> grad) const {
  Tape tape;
  RowMatrix out;
  forward_tape(inputs, stats, out, tape);
  backward(tape, d_out, grad);
}

void Network::forward_tape(const Eigen::Ref<const RowMatrix>& inputs, const BatchNormStats& stats,
                           RowMatrix& out, Tape& tape) const {
  RowMatrix a;
  tape.activations.clear();
  tape.activations.reserve(layers_.size());
  normalise(inputs, stats.mean, stats.var, a, &tape.xhat);
  run(a, out, &tape.activations);
}

void Network::backward(const Tape& tape, const Eigen::Ref<const RowMatrix>& d_out,
                       std::span<double> grad) const {
  // Column-major views as in run(): samples along the columns.
  const Eigen::Index rows = d_out.rows();
  RowMatrix delta = d_out;
  RowMatrix prev;
  for (std::size_t l = layers_.size(); l-- > 0;) {
    const Layer& layer = layers_[l];
    const RowMatrix& input = tape.activations[l];
    Eigen::Map<const Eigen::MatrixXd> at(input.data(), layer.in, rows);
    Eigen::Map<const Eigen::MatrixXd> dt(delta.data(), layer.out, rows);
    Eigen::Map<const Eigen::MatrixXd> Wt(params_.data() + layer.w, layer.in, layer.out);
    Eigen::Map<Eigen::MatrixXd> gWt(grad.data() + layer.w, layer.in, layer.out);
    Eigen::Map<Eigen::VectorXd> gb(grad.data() + layer.b, layer.out);
    gWt.noalias() += at * dt.transpose();
    gb += dt.rowwise().sum();
    if (l == 0 && !arch_.input_batchnorm) break;
    prev.resize(rows, layer.in);
    Eigen::Map<Eigen::MatrixXd> pt(prev.data(), layer.in, rows);
    pt.noalias() = Wt * dt;
    if (l > 0) pt = (at.array() > 0.0).select(pt, 0.0);
    delta.swap(prev);
  }
  if (arch_.input_batchnorm) {
    Eigen::Map<Eigen::RowVectorXd> gg(grad.data() + gamma_, arch_.inputs());
    Eigen::Map<Eigen::RowVectorXd> gbeta(grad.data() + beta_, arch_.inputs());
    gg += (delta.array() * tape.xhat.array()).colwise().sum().matrix();
    gbeta += delta.colwise().sum();
  }
}

void Network::update_running(const BatchNormStats& stats, std::size_t rows) {
  const double n = static_cast<double>(rows);
  const double unbias = n > 1 ? n / (n - 1.0) : 1.0;
  running_mean_ = (1.0 - kMomentum) * running_mean_ + kMomentum * stats.mean;
  running_var_ = (1.0 - kMomentum) * running_var_ + kMomentum * unbias * stats.var;
}

double Network::lipschitz_bound() const {
  double bound = 1.0;
  if (arch_.input_batchnorm) {
    double m = 0.0;
    for (int i = 0; i < arch_.inputs(); ++i)
      m = std::max(m, std::abs(params_[gamma_ + i]) / std::sqrt(running_var_(i) + kBatchNormEps));
    bound *= m;
  }
  for (const auto& layer : layers_) {
    Eigen::Map<const RowMatrix> W(params_.data() + layer.w, layer.out, layer.in);
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(W);
    bound *= svd.singularValues()(0);
  }
  return bound;
}

double gradient(const Network& net, const Eigen::Ref<const RowMatrix>& inputs,
                const OutputLoss& loss, std::vector<double>& grad) {
  BatchNormStats stats = net.arch().input_batchnorm
                             ? batch_stats(inputs)
                             : BatchNormStats{Eigen::VectorXd::Zero(net.arch().inputs()),
                                              Eigen::VectorXd::Ones(net.arch().inputs())};
  RowMatrix out, d_out;
  net.forward_with(inputs, stats, out);
  d_out.resize(out.rows(), out.cols());
  const double value = loss(out, d_out);
  ParamVector g(net.params().size(), 0.0);
  net.backward(inputs, stats, d_out, g);
  grad.assign(g.begin(), g.end());
  return value;
}

std::string network_to_json(const Network& net) {
  nlohmann::json j;
  j["layers"] = net.arch().layers;
  j["input_batchnorm"] = net.arch().input_batchnorm;
  j["params"] = net.params();
  j["running_mean"] = std::vector<double>(net.running_mean().data(),
                                          net.running_mean().data() + net.running_mean().size());
  j["running_var"] = std::vector<double>(net.running_var().data(),
                                         net.running_var().data() + net.running_var().size());
  return j.dump();
}

Network network_from_json(const std::string& text) {
  const auto j = nlohmann::json::parse(text);
  Architecture arch{j.at("layers").get<std::vector<int>>(), j.at("input_batchnorm").get<bool>()};
  Network net(arch);
  auto params = j.at("params").get<std::vector<double>>();
  if (params.size() != net.params().size())
    throw std::invalid_argument("parameter blob does not match the architecture");
  net.params().assign(params.begin(), params.end());
  const auto mean = j.at("running_mean").get<std::vector<double>>();
  const auto var = j.at("running_var").get<std::vector<double>>();
  if (static_cast<int>(mean.size()) != arch.inputs() || static_cast<int>(var.size()) != arch.inputs())
    throw std::invalid_argument("batchnorm statistics do not match the architecture");
  net.running_mean() = Eigen::Map<const Eigen::VectorXd>(mean.data(), mean.size());
  net.running_var() = Eigen::Map<const Eigen::VectorXd>(var.data(), var.size());
  return net;
}

}  // namespace ncv
