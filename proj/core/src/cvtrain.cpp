#include "ncv/cvtrain.hpp"

#include <boost/math/distributions/normal.hpp>
#include <chrono>
#include <cmath>
#include <json.hpp>
#include <numeric>
#include <stdexcept>

namespace ncv {

namespace {

constexpr Eigen::Index kChunkRows = 512;
constexpr std::size_t kReplayPaths = 1000;
constexpr double kTapeBytes = 768.0 * (1 << 20);

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

void accumulate(const RowMatrix& out, const Eigen::Ref<const RowMatrix>& coefs,
                const std::uint32_t* row_path, std::vector<double>& gamma) {
  for (Eigen::Index r = 0; r < out.rows(); ++r) gamma[row_path[r]] += out.row(r).dot(coefs.row(r));
}

struct Gathered {
  RowMatrix inputs, coefs;
  std::vector<std::uint32_t> row_path;
  std::vector<double> base;
};

Gathered gather(const ReplayData& data, std::span<const std::size_t> paths) {
  Gathered g;
  std::size_t rows = 0;
  for (std::size_t p : paths) rows += data.offsets[p + 1] - data.offsets[p];
  g.inputs.resize(rows, data.inputs.cols());
  g.coefs.resize(rows, data.coefs.cols());
  g.row_path.resize(rows);
  g.base.resize(paths.size());
  std::size_t r = 0;
  for (std::size_t i = 0; i < paths.size(); ++i) {
    const std::size_t b = data.offsets[paths[i]], e = data.offsets[paths[i] + 1];
    const auto n = static_cast<Eigen::Index>(e - b);
    g.inputs.middleRows(r, n) = data.inputs.middleRows(b, n);
    g.coefs.middleRows(r, n) = data.coefs.middleRows(b, n);
    std::fill(g.row_path.begin() + r, g.row_path.begin() + r + n, static_cast<std::uint32_t>(i));
    g.base[i] = data.base[paths[i]];
    r += n;
  }
  return g;
}

std::vector<double> gamma_of(const RowMatrix& inputs, const RowMatrix& coefs,
                             const std::vector<std::uint32_t>& row_path, std::vector<double> gamma,
                             const ControlField& control) {
  RowMatrix out;
  for (Eigen::Index r = 0; r < inputs.rows(); r += kChunkRows) {
    const Eigen::Index n = std::min(kChunkRows, inputs.rows() - r);
    control.evaluate(inputs.middleRows(r, n), out);
    accumulate(out, coefs.middleRows(r, n), row_path.data() + r, gamma);
  }
  return gamma;
}

double mean_of(std::span<const double> v) {
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

}  // namespace

std::string to_string(ControlMode mode) { return mode == ControlMode::Brownian ? "brownian" : "levy"; }

ControlMode control_mode(const ModelSpec& model) {
  return model.measure() ? ControlMode::Levy : ControlMode::Brownian;
}

int control_outputs(const ModelSpec& model) {
  return model.measure() ? model.brownian_dim() + 2 * model.jump_dim() : model.brownian_dim();
}

ReplayData make_replay(const ModelSpec& model, const TrajectoryBatch& rec) {
  ReplayData data;
  data.mode = control_mode(model);
  const int d = rec.dim, bw = rec.brownian, q = rec.jumps;
  const int outs = control_outputs(model);
  const std::size_t M = rec.paths();
  const std::size_t rows = rec.points() - M;
  data.inputs.resize(rows, 1 + d);
  data.coefs.resize(rows, outs);
  data.row_path.resize(rows);
  data.base = rec.gamma_base;
  data.offsets.resize(M + 1);
  data.offsets[0] = 0;

  const double comp = model.levy() ? model.levy()->linear_compensator(0) : 0.0;
  std::size_t r = 0;
  for (std::size_t m = 0; m < M; ++m) {
    for (std::size_t k = rec.offsets[m]; k + 1 < rec.offsets[m + 1]; ++k, ++r) {
      data.inputs(r, 0) = rec.t[k];
      for (int i = 0; i < d; ++i) data.inputs(r, 1 + i) = rec.x[k * d + i];
      const double y = rec.y[k];
      for (int i = 0; i < bw; ++i) data.coefs(r, i) = y * rec.dw[k * bw + i];
      if (data.mode == ControlMode::Levy) {
        const double theta = rec.t[k + 1] - rec.t[k];
        for (int j = 0; j < q; ++j) {
          data.coefs(r, bw + j) = y * rec.dW[k * q + j];
          const double jump = rec.kind[k] == StepKind::Jump ? rec.jump[k * q + j] : 0.0;
          data.coefs(r, bw + q + j) = y * (jump - comp * theta);
        }
      }
      data.row_path[r] = static_cast<std::uint32_t>(m);
    }
    data.offsets[m + 1] = r;
  }
  return data;
}

void ZeroControl::evaluate(const Eigen::Ref<const RowMatrix>& inputs, RowMatrix& out) const {
  out.setZero(inputs.rows(), outputs_);
}

void NetworkControl::evaluate(const Eigen::Ref<const RowMatrix>& inputs, RowMatrix& out) const {
  net_->infer(inputs, out);
}

void FunctionControl::evaluate(const Eigen::Ref<const RowMatrix>& inputs, RowMatrix& out) const {
  out.resize(inputs.rows(), outputs_);
  const auto d = static_cast<std::size_t>(inputs.cols() - 1);
  for (Eigen::Index r = 0; r < inputs.rows(); ++r) {
    fn_(inputs(r, 0), std::span<const double>(inputs.row(r).data() + 1, d),
        std::span<double>(out.row(r).data(), static_cast<std::size_t>(outputs_)));
  }
}

std::vector<double> replay_gamma(const ReplayData& data, const ControlField& control) {
  if (control.outputs() != data.coefs.cols()) throw std::invalid_argument("control has the wrong width");
  return gamma_of(data.inputs, data.coefs, data.row_path, data.base, control);
}

std::vector<double> replay_gamma(const ReplayData& data, const ControlField& control,
                                 std::span<const std::size_t> paths) {
  if (control.outputs() != data.coefs.cols()) throw std::invalid_argument("control has the wrong width");
  Gathered g = gather(data, paths);
  return gamma_of(g.inputs, g.coefs, g.row_path, std::move(g.base), control);
}

std::vector<double> replay_gamma_brownian(const ReplayData& data, const ControlField& control,
                                          std::span<const std::size_t> paths) {
  if (data.mode != ControlMode::Brownian) throw std::invalid_argument("replay data is not Brownian");
  return replay_gamma(data, control, paths);
}

std::vector<double> replay_gamma_levy(const ReplayData& data, const ControlField& control,
                                      std::span<const std::size_t> paths) {
  if (data.mode != ControlMode::Levy) throw std::invalid_argument("replay data is not Levy");
  return replay_gamma(data, control, paths);
}

double variance_loss(std::span<const double> gamma) {
  if (gamma.size() < 2) throw std::invalid_argument("variance needs at least two samples");
  const double mean = mean_of(gamma);
  double ss = 0.0;
  for (double g : gamma) ss += (g - mean) * (g - mean);
  return ss / static_cast<double>(gamma.size() - 1);
}

void variance_loss_grad(std::span<const double> gamma, std::span<double> out) {
  if (gamma.size() < 2) throw std::invalid_argument("variance needs at least two samples");
  const double mean = mean_of(gamma);
  const double scale = 2.0 / static_cast<double>(gamma.size() - 1);
  for (std::size_t i = 0; i < gamma.size(); ++i) out[i] = scale * (gamma[i] - mean);
}

std::vector<double> controlled_gamma(const ModelSpec& model, const SchemeSpec& scheme,
                                     const Payoff& payoff, const ControlField& control,
                                     std::size_t M, std::uint64_t seed, StreamDomain domain,
                                     std::uint64_t first_index) {
  std::vector<double> out;
  out.reserve(M);
  for (std::size_t done = 0; done < M; done += kReplayPaths) {
    const std::size_t n = std::min(kReplayPaths, M - done);
    SimResult sim = simulate_batch(model, scheme, payoff, n, seed, true, domain, first_index + done);
    const ReplayData data = make_replay(model, *sim.records);
    const auto g = replay_gamma(data, control);
    out.insert(out.end(), g.begin(), g.end());
  }
  return out;
}

// ---------------------------------------------------------------------------

TrainingDataset first_pass(const ModelSpec& model, const Payoff& payoff, const SchemeSpec& scheme_r,
                           std::size_t M_r, std::uint64_t seed, bool keep_records) {
  if (M_r < 2) throw std::invalid_argument("first pass needs at least two paths");
  TrainingDataset data;
  SimResult sim = simulate_batch(model, scheme_r, payoff, M_r, seed, true, StreamDomain::FirstPass);
  data.replay = make_replay(model, *sim.records);
  if (keep_records) data.records = std::move(sim.records);
  data.scheme = scheme_r;
  data.paths = M_r;
  data.seed = seed;
  return data;
}

double cost_constant(double cost_batch, double sample_batch, double alpha, double tol) {
  const double z = boost::math::quantile(boost::math::normal(), 1.0 - alpha / 2.0);
  return z * z * cost_batch / (tol * tol * sample_batch);
}

bool stopping_rule(double var_prev_prev, double var_prev, double cost_train_epoch,
                   double cost_batch, double sample_batch, double alpha, double tol) {
  const double K = cost_constant(cost_batch, sample_batch, alpha, tol);
  return (var_prev_prev - var_prev) < cost_train_epoch / K;
}

bool stop_after_epoch(std::span<const double> history, double cost_train_epoch, double cost_batch,
                      double sample_batch, double alpha, double tol) {
  const std::size_t n = history.size();
  if (n < 2) return false;
  return stopping_rule(history[n - 2], history[n - 1], cost_train_epoch, cost_batch, sample_batch,
                       alpha, tol);
}

Architecture control_architecture(const ModelSpec& model, const TrainConfig& config) {
  return make_architecture(model.dim(), control_outputs(model), config.hidden_layers,
                           config.hidden_size);
}

namespace {

// Nominal flops of one simulation step outside the network.
double step_flops(const ModelSpec& model) {
  const double d = model.dim();
  return 20.0 * d * d + 50.0;
}

double expected_steps(const ModelSpec& model, double h) {
  const double lambda = model.levy() ? model.levy()->lambda_eps : 0.0;
  return model.maturity() / h + lambda * model.maturity();
}

}  // namespace

double batch_cost(const ModelSpec& model, const Payoff& payoff, const Architecture& arch,
                  const TrainConfig& config) {
  const double h = config.second_pass_h;
  if (!(h > 0.0)) throw std::invalid_argument("second-pass step size must be positive");
  if (config.cost_model == CostModel::Work) {
    return static_cast<double>(config.sample_batch) * expected_steps(model, h) *
           (arch.forward_flops() + step_flops(model));
  }
  Network probe(arch);
  RandomStream rng(config.seed, StreamDomain::NetworkInit, 1);
  probe.initialize(rng);
  const NetworkControl control(probe);
  const std::size_t n = std::min<std::size_t>(1000, config.sample_batch);
  const auto start = Clock::now();
  controlled_gamma(model, default_scheme(model, h), payoff, control, n, config.seed,
                   StreamDomain::Pilot);
  return seconds_since(start) * static_cast<double>(config.sample_batch) / static_cast<double>(n);
}

TrainedControls train(const ModelSpec& model, const Payoff& payoff, const TrainingDataset& data,
                      const TrainConfig& config, const Network* warm_start) {
  const ReplayData& D = data.replay;
  if (D.paths() < 2) throw std::invalid_argument("training needs at least two paths");
  if (config.batch_size < 2) throw std::invalid_argument("batch size must be at least two");

  TrainedControls result;
  result.mode = D.mode;
  if (warm_start) {
    if (warm_start->arch().inputs() != D.inputs.cols() ||
        warm_start->arch().outputs() != D.coefs.cols())
      throw std::invalid_argument("warm-start network does not match the problem dimensions");
    result.net = *warm_start;
  } else {
    result.net = Network(control_architecture(model, config));
    RandomStream rng(config.seed, StreamDomain::NetworkInit, 0);
    result.net.initialize(rng);
    const BatchNormStats s = batch_stats(D.inputs);
    const double n = static_cast<double>(D.rows());
    result.net.running_mean() = s.mean;
    result.net.running_var() = s.var * (n > 1 ? n / (n - 1.0) : 1.0);
  }
  Network& net = result.net;

  // A variance at rounding level means every path gave the same value.
  result.zero_variance = variance_loss(D.base);
  const double level = mean_of(D.base);
  if (result.zero_variance <= 1e-24 * level * level) {
    result.best_variance = 0.0;
    return result;
  }

  const Architecture& arch = net.arch();
  result.cost_batch = batch_cost(model, payoff, arch, config);
  const double work_epoch = 4.0 * arch.forward_flops() * static_cast<double>(D.rows());

  Network best = net;
  result.best_variance = variance_loss(replay_gamma(D, NetworkControl(net)));
  result.best_epoch = 0;

  AdamState adam(net.params().size(), config.learning_rate);
  std::vector<std::size_t> order(D.paths());
  std::iota(order.begin(), order.end(), 0);
  ParamVector grad(net.params().size());
  std::vector<double> dgamma, variances;
  RowMatrix out, d_out;
  std::vector<Network::Tape> tapes;
  double tape_width = 2.0 * arch.inputs();
  for (int l = 1; l < arch.depth(); ++l) tape_width += arch.layers[l];

  for (int epoch = 1; epoch <= config.max_epochs; ++epoch) {
    const auto start = Clock::now();
    RandomStream shuffle(config.seed, StreamDomain::Training, static_cast<std::uint64_t>(epoch));
    for (std::size_t i = order.size(); i > 1; --i) {
      const std::size_t j = shuffle.next_u64() % i;
      std::swap(order[i - 1], order[j]);
    }

    for (std::size_t b = 0; b < order.size(); b += config.batch_size) {
      const std::size_t n = std::min(config.batch_size, order.size() - b);
      if (n < 2) break;
      Gathered g = gather(D, std::span<const std::size_t>(order.data() + b, n));
      const BatchNormStats stats = batch_stats(g.inputs);

      // Keep the forward intermediates for backward() when they fit in memory,
      // otherwise recompute them chunk by chunk.
      const Eigen::Index rows = g.inputs.rows();
      const bool keep = static_cast<double>(rows) * tape_width * sizeof(double) <= kTapeBytes;
      const std::size_t chunks = static_cast<std::size_t>((rows + kChunkRows - 1) / kChunkRows);
      if (keep && tapes.size() < chunks) tapes.resize(chunks);

      std::vector<double> gamma = g.base;
      for (Eigen::Index r = 0, c = 0; r < rows; r += kChunkRows, ++c) {
        const Eigen::Index m = std::min(kChunkRows, rows - r);
        if (keep)
          net.forward_tape(g.inputs.middleRows(r, m), stats, out, tapes[c]);
        else
          net.forward_with(g.inputs.middleRows(r, m), stats, out);
        accumulate(out, g.coefs.middleRows(r, m), g.row_path.data() + r, gamma);
      }
      dgamma.resize(n);
      variance_loss_grad(gamma, dgamma);

      std::fill(grad.begin(), grad.end(), 0.0);
      for (Eigen::Index r = 0, c = 0; r < rows; r += kChunkRows, ++c) {
        const Eigen::Index m = std::min(kChunkRows, rows - r);
        d_out = g.coefs.middleRows(r, m);
        for (Eigen::Index k = 0; k < m; ++k) d_out.row(k) *= dgamma[g.row_path[r + k]];
        if (keep)
          net.backward(tapes[c], d_out, grad);
        else
          net.backward(g.inputs.middleRows(r, m), stats, d_out, grad);
      }
      net.update_running(stats, static_cast<std::size_t>(g.inputs.rows()));
      adam_step(adam, net.params(), grad);
    }

    EpochRecord rec;
    rec.variance = variance_loss(replay_gamma(D, NetworkControl(net)));
    rec.wall_s = seconds_since(start);
    rec.cost = config.cost_model == CostModel::Work ? work_epoch : rec.wall_s;
    result.history.push_back(rec);
    result.epochs = epoch;
    if (std::isfinite(rec.variance) && rec.variance < result.best_variance) {
      result.best_variance = rec.variance;
      result.best_epoch = epoch;
      best = net;
    }
    variances.push_back(rec.variance);
    if (config.use_stopping_rule) {
      if (stop_after_epoch(variances, rec.cost, result.cost_batch,
                           static_cast<double>(config.sample_batch), config.alpha, config.tolerance)) {
        result.stopped_by_rule = true;
        break;
      }
    }
  }
  result.net = std::move(best);
  return result;
}

double relative_error(double mean, double variance) {
  if (mean == 0.0) throw std::domain_error("relative error is undefined for a zero mean");
  return std::sqrt(variance) / mean;
}

std::string controls_to_json(const Network& net, const ControlsManifest& m) {
  nlohmann::json j;
  j["model"] = m.model_fingerprint;
  j["payoff"] = m.payoff;
  j["strike"] = m.strike;
  j["h_r"] = m.h_r;
  j["M_r"] = m.M_r;
  j["seed"] = m.seed;
  j["mode"] = to_string(m.mode);
  j["network"] = nlohmann::json::parse(network_to_json(net));
  return j.dump(1);
}

Network controls_from_json(const std::string& text, const ModelSpec& model) {
  const auto j = nlohmann::json::parse(text);
  if (j.at("mode").get<std::string>() != to_string(control_mode(model)))
    throw std::invalid_argument("stored controls were trained for the other noise type");
  Network net = network_from_json(j.at("network").dump());
  if (net.arch().inputs() != 1 + model.dim() || net.arch().outputs() != control_outputs(model))
    throw std::invalid_argument("stored controls do not match the model dimensions");
  return net;
}

}  // namespace ncv
