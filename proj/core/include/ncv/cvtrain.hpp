#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "ncv/adam.hpp"
#include "ncv/models.hpp"
#include "ncv/network.hpp"
#include "ncv/schemes.hpp"
#include "ncv/trajectory.hpp"

namespace ncv {

/// Brownian: one network G(t, x) paired with dw.
/// Levy: heads [G_w (d), G_W (q), g_N (q)] paired with [dw, dW, J 1{jump} - Lambda theta].
enum class ControlMode { Brownian, Levy };

std::string to_string(ControlMode mode);

ControlMode control_mode(const ModelSpec& model);
int control_outputs(const ModelSpec& model);

/// Stored trajectories flattened for replay: one row per step, with the
/// network input (t_k, X_k) and the coefficient Y_k xi_k the network output
/// is dotted with. Gamma_m = base_m + sum_{rows of m} <out_row, coef_row>.
struct ReplayData {
  ControlMode mode = ControlMode::Brownian;
  RowMatrix inputs;
  RowMatrix coefs;
  std::vector<std::uint32_t> row_path;
  std::vector<std::size_t> offsets{0};
  std::vector<double> base;

  std::size_t paths() const { return base.size(); }
  std::size_t rows() const { return static_cast<std::size_t>(inputs.rows()); }
};

ReplayData make_replay(const ModelSpec& model, const TrajectoryBatch& records);

/// A control G(t, x) evaluated row-wise on (t, x) inputs.
class ControlField {
 public:
  virtual ~ControlField() = default;
  virtual int outputs() const = 0;
  virtual void evaluate(const Eigen::Ref<const RowMatrix>& inputs, RowMatrix& out) const = 0;
};

class ZeroControl final : public ControlField {
 public:
  explicit ZeroControl(int outputs) : outputs_(outputs) {}
  int outputs() const override { return outputs_; }
  void evaluate(const Eigen::Ref<const RowMatrix>& inputs, RowMatrix& out) const override;

 private:
  int outputs_;
};

/// Network in inference mode (running batchnorm statistics).
class NetworkControl final : public ControlField {
 public:
  explicit NetworkControl(const Network& net) : net_(&net) {}
  int outputs() const override { return net_->arch().outputs(); }
  void evaluate(const Eigen::Ref<const RowMatrix>& inputs, RowMatrix& out) const override;

 private:
  const Network* net_;
};

/// Pointwise function of (t, x).
class FunctionControl final : public ControlField {
 public:
  using Fn = std::function<void(double t, std::span<const double> x, std::span<double> out)>;
  FunctionControl(int outputs, Fn fn) : outputs_(outputs), fn_(std::move(fn)) {}
  int outputs() const override { return outputs_; }
  void evaluate(const Eigen::Ref<const RowMatrix>& inputs, RowMatrix& out) const override;

 private:
  int outputs_;
  Fn fn_;
};

/// Gamma for every path (or the listed paths) of the replay data.
std::vector<double> replay_gamma(const ReplayData& data, const ControlField& control);
std::vector<double> replay_gamma(const ReplayData& data, const ControlField& control,
                                 std::span<const std::size_t> paths);
/// Same, but refuse data of the other mode.
std::vector<double> replay_gamma_brownian(const ReplayData& data, const ControlField& control,
                                          std::span<const std::size_t> paths);
std::vector<double> replay_gamma_levy(const ReplayData& data, const ControlField& control,
                                      std::span<const std::size_t> paths);

/// Unbiased sample variance; throws for fewer than two entries.
double variance_loss(std::span<const double> gamma);
/// d variance / d gamma_i = 2 (gamma_i - mean) / (n - 1)
void variance_loss_grad(std::span<const double> gamma, std::span<double> out);

/// Controlled samples for M fresh paths, simulated in recorded chunks and
/// replayed with `control`. Zero control reproduces simulate_batch exactly.
std::vector<double> controlled_gamma(const ModelSpec& model, const SchemeSpec& scheme,
                                     const Payoff& payoff, const ControlField& control,
                                     std::size_t M, std::uint64_t seed, StreamDomain domain,
                                     std::uint64_t first_index = 0);

// ---------------------------------------------------------------------------

struct TrainingDataset {
  ReplayData replay;
  std::optional<TrajectoryBatch> records;
  SchemeSpec scheme;
  std::size_t paths = 0;
  std::uint64_t seed = 0;
};

/// M_r recorded paths with all controls off on the coarse scheme.
TrainingDataset first_pass(const ModelSpec& model, const Payoff& payoff, const SchemeSpec& scheme_r,
                           std::size_t M_r, std::uint64_t seed, bool keep_records = false);

enum class CostModel { Work, Wall };

struct TrainConfig {
  int max_epochs = 20;
  std::size_t batch_size = 2000;
  int step_factor = 5;
  double learning_rate = 1e-3;
  int hidden_layers = 3;
  int hidden_size = 50;
  double alpha = 0.05;
  double tolerance = 1e-4;  ///< MC tolerance of the second pass
  std::size_t sample_batch = 10000;  ///< S_batch
  double second_pass_h = 0.0;        ///< h of the second pass (for C_batch)
  CostModel cost_model = CostModel::Work;
  bool use_stopping_rule = true;
  std::uint64_t seed = 0;
};

struct EpochRecord {
  double variance = 0.0;
  double wall_s = 0.0;
  double cost = 0.0;
};

struct TrainedControls {
  Network net;
  ControlMode mode = ControlMode::Brownian;
  double zero_variance = 0.0;
  double best_variance = 0.0;
  int best_epoch = 0;  ///< 0 means the initialisation was best
  int epochs = 0;
  bool stopped_by_rule = false;
  double cost_batch = 0.0;
  std::vector<EpochRecord> history;
};

/// Cost constant K = Phi^{-1}(1 - alpha/2)^2 C_batch / (tol^2 S_batch).
double cost_constant(double cost_batch, double sample_batch, double alpha, double tol);

/// Stop iff var_prev_prev - var_prev < cost_train_epoch / K.
bool stopping_rule(double var_prev_prev, double var_prev, double cost_train_epoch,
                   double cost_batch, double sample_batch, double alpha, double tol);

/// Decision after the last epoch of `history` (full-dataset variances of
/// epochs 1..n): never before two epochs, then stopping_rule on the last two.
bool stop_after_epoch(std::span<const double> history, double cost_train_epoch, double cost_batch,
                      double sample_batch, double alpha, double tol);

/// C_batch in the configured units: expected work (or measured seconds) to
/// simulate S_batch controlled paths at the second-pass step.
double batch_cost(const ModelSpec& model, const Payoff& payoff, const Architecture& arch,
                  const TrainConfig& config);

Architecture control_architecture(const ModelSpec& model, const TrainConfig& config);

/// Minimises the replayed variance with Adam; returns the best parameters seen.
TrainedControls train(const ModelSpec& model, const Payoff& payoff, const TrainingDataset& data,
                      const TrainConfig& config, const Network* warm_start = nullptr);

/// sqrt(var) / mean; throws std::domain_error for mean == 0.
double relative_error(double mean, double variance);

/// Network blob together with the identity of the problem it was trained on.
struct ControlsManifest {
  std::string model_fingerprint;
  std::string payoff;
  double strike = 0.0;
  double h_r = 0.0;
  std::size_t M_r = 0;
  std::uint64_t seed = 0;
  ControlMode mode = ControlMode::Brownian;
};

std::string controls_to_json(const Network& net, const ControlsManifest& manifest);
/// Throws std::invalid_argument when the blob's model or mode does not match.
Network controls_from_json(const std::string& text, const ModelSpec& model);

}  // namespace ncv
