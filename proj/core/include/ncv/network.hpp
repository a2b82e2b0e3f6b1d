#pragma once

#include <Eigen/Dense>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "ncv/rng.hpp"

namespace ncv {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Flat parameter storage. The aligned allocator fixes the SIMD peeling of
/// Eigen maps into it, which keeps results bit-identical between runs.
using ParamVector = std::vector<double, Eigen::aligned_allocator<double>>;

/// Layer widths N_0 (input) ... N_L (output); ReLU between affine maps.
struct Architecture {
  std::vector<int> layers;
  bool input_batchnorm = true;

  int depth() const { return static_cast<int>(layers.size()) - 1; }
  int inputs() const { return layers.front(); }
  int outputs() const { return layers.back(); }
  /// P(N) = sum_l N_l N_{l-1} + N_l
  std::size_t affine_parameter_count() const;
  /// P(N) plus the batchnorm scale and shift.
  std::size_t parameter_count() const;
  /// Multiply-adds times two for one input row.
  double forward_flops() const;

  bool operator==(const Architecture&) const = default;
};

/// Input (t, x) of width 1 + state_dim, `hidden_layers` layers of
/// hidden_size + state_dim units.
Architecture make_architecture(int state_dim, int output_dim, int hidden_layers, int hidden_size);

struct BatchNormStats {
  Eigen::VectorXd mean;
  Eigen::VectorXd var;  ///< biased (divisor n)
};

BatchNormStats batch_stats(const Eigen::Ref<const RowMatrix>& inputs);

/// Fully connected network with optional batch normalisation of the input.
///
/// Flat parameter order: W_1..W_L (row-major, N_l x N_{l-1}), b_1..b_L,
/// batchnorm scale, batchnorm shift. Running mean/variance are kept apart
/// since they are not trained by gradient descent.
class Network {
 public:
  static constexpr double kBatchNormEps = 1e-5;
  static constexpr double kMomentum = 0.1;

  Network() = default;
  explicit Network(Architecture arch);

  /// Normal(0, 2 / fan_in) weights, zero biases, unit scale, zero shift.
  void initialize(RandomStream& rng);

  const Architecture& arch() const { return arch_; }
  ParamVector& params() { return params_; }
  const ParamVector& params() const { return params_; }
  Eigen::VectorXd& running_mean() { return running_mean_; }
  Eigen::VectorXd& running_var() { return running_var_; }
  const Eigen::VectorXd& running_mean() const { return running_mean_; }
  const Eigen::VectorXd& running_var() const { return running_var_; }

  /// Training mode normalises by the batch statistics and updates the
  /// running statistics; inference mode uses the running statistics.
  RowMatrix forward(const Eigen::Ref<const RowMatrix>& inputs, bool training);

  /// Inference-mode forward pass.
  void infer(const Eigen::Ref<const RowMatrix>& inputs, RowMatrix& out) const;

  /// Forward pass with fixed normalisation statistics.
  void forward_with(const Eigen::Ref<const RowMatrix>& inputs, const BatchNormStats& stats,
                    RowMatrix& out) const;

  /// Adds d loss / d params into `grad` given d loss / d outputs, for the
  /// forward pass with the same inputs and statistics.
  void backward(const Eigen::Ref<const RowMatrix>& inputs, const BatchNormStats& stats,
                const Eigen::Ref<const RowMatrix>& d_out, std::span<double> grad) const;

  /// Intermediate values of one forward pass, kept for backward().
  struct Tape {
    RowMatrix xhat;
    std::vector<RowMatrix> activations;  ///< input of each affine layer
  };
  void forward_tape(const Eigen::Ref<const RowMatrix>& inputs, const BatchNormStats& stats,
                    RowMatrix& out, Tape& tape) const;
  void backward(const Tape& tape, const Eigen::Ref<const RowMatrix>& d_out,
                std::span<double> grad) const;

  void update_running(const BatchNormStats& stats, std::size_t batch_rows);

  /// Upper bound on the Lipschitz constant in the inference-mode input.
  double lipschitz_bound() const;

 private:
  struct Layer {
    std::size_t w = 0, b = 0;
    int in = 0, out = 0;
  };
  void normalise(const Eigen::Ref<const RowMatrix>& inputs, const Eigen::VectorXd& mean,
                 const Eigen::VectorXd& var, RowMatrix& out, RowMatrix* xhat) const;
  void run(RowMatrix& a, RowMatrix& out, std::vector<RowMatrix>* tape) const;

  Architecture arch_;
  std::vector<Layer> layers_;
  std::size_t gamma_ = 0, beta_ = 0;
  ParamVector params_;
  Eigen::VectorXd running_mean_, running_var_;
};

/// Loss as a function of the network outputs; writes d loss / d outputs.
using OutputLoss = std::function<double(const RowMatrix& outputs, RowMatrix& d_outputs)>;

/// Exact gradient of loss(forward(inputs)) in training mode (batch statistics).
double gradient(const Network& net, const Eigen::Ref<const RowMatrix>& inputs,
                const OutputLoss& loss, std::vector<double>& grad);

/// JSON blob: architecture, flat params, running statistics.
std::string network_to_json(const Network& net);
Network network_from_json(const std::string& text);

}  // namespace ncv
