#include "ncv/models.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace ncv {

namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};

void require(bool ok, const char* message) {
  if (!ok) throw ModelError(message);
}

}  // namespace

std::string to_string(ModelKind kind) {
  switch (kind) {
    case ModelKind::Gbm: return "gbm";
    case ModelKind::Heston: return "heston";
    case ModelKind::ExpLevy: return "exp_levy";
    case ModelKind::Merton: return "merton";
  }
  return "unknown";
}

std::string to_string(PayoffKind kind) {
  return kind == PayoffKind::Call ? "call" : "call_on_max";
}

ModelSpec::ModelSpec(Params params, int dim, double maturity, std::vector<double> x0,
                     std::optional<LevyMeasureSpec> measure)
    : params_(std::move(params)),
      dim_(dim),
      maturity_(maturity),
      x0_(std::move(x0)),
      measure_(std::move(measure)) {
  require(dim_ >= 1, "model dimension must be positive");
  require(static_cast<int>(x0_.size()) == dim_, "initial state has the wrong dimension");
  require(maturity_ > 0.0, "maturity must be positive");
  if (measure_) derived_ = levy_derive(*measure_);
}

ModelKind ModelSpec::kind() const {
  return std::visit(overloaded{[](const GbmParams&) { return ModelKind::Gbm; },
                               [](const HestonParams&) { return ModelKind::Heston; },
                               [](const ExpLevyParams&) { return ModelKind::ExpLevy; },
                               [](const MertonParams&) { return ModelKind::Merton; }},
                    params_);
}

double ModelSpec::rate() const {
  return std::visit([](const auto& p) { return p.rate; }, params_);
}

void ModelSpec::drift(double, std::span<const double> x, std::span<double> out) const {
  std::visit(overloaded{
                 [&](const GbmParams& p) {
                   for (int i = 0; i < dim_; ++i) out[i] = p.rate * x[i];
                 },
                 [&](const HestonParams& p) {
                   out[0] = p.rate * x[0];
                   out[1] = p.kappa * (p.theta - x[1]);
                 },
                 [&](const ExpLevyParams& p) {
                   for (int i = 0; i < dim_; ++i) out[i] = p.drift(i);
                 },
                 [&](const MertonParams& p) {
                   out[0] = (p.rate - derived_->lambda_eps * p.mean_jump) * x[0];
                 }},
             params_);
}

void ModelSpec::diffuse(double, std::span<const double> x, std::span<const double> dw,
                        std::span<double> out) const {
  std::visit(overloaded{
                 [&](const GbmParams& p) {
                   const auto& L = p.correlation_factor;
                   for (int i = 0; i < dim_; ++i) {
                     double acc = 0.0;
                     for (int j = 0; j <= i; ++j) acc += L(i, j) * dw[j];
                     out[i] = p.volatility * x[i] * acc;
                   }
                 },
                 [&](const HestonParams& p) {
                   const double sv = std::sqrt(std::max(x[1], 0.0));
                   out[0] = sv * x[0] * dw[0];
                   out[1] = p.vol_of_vol * sv *
                            (p.rho * dw[0] + std::sqrt(1.0 - p.rho * p.rho) * dw[1]);
                 },
                 [&](const ExpLevyParams& p) {
                   for (int i = 0; i < dim_; ++i) {
                     double acc = 0.0;
                     for (int j = 0; j < dim_; ++j) acc += p.sigma(i, j) * dw[j];
                     out[i] = acc;
                   }
                 },
                 [&](const MertonParams& p) { out[0] = p.volatility * x[0] * dw[0]; }},
             params_);
}

Eigen::MatrixXd ModelSpec::diffusion_matrix(double t, std::span<const double> x) const {
  Eigen::MatrixXd m(dim_, dim_);
  std::vector<double> unit(dim_, 0.0), column(dim_, 0.0);
  for (int j = 0; j < dim_; ++j) {
    std::fill(unit.begin(), unit.end(), 0.0);
    unit[j] = 1.0;
    diffuse(t, x, unit, column);
    for (int i = 0; i < dim_; ++i) m(i, j) = column[i];
  }
  return m;
}

double ModelSpec::discount_rate(double, std::span<const double>) const { return -rate(); }

double ModelSpec::running_cost(double, std::span<const double>) const { return 0.0; }

Eigen::MatrixXd ModelSpec::jump_matrix(double, std::span<const double> x) const {
  Eigen::MatrixXd F = Eigen::MatrixXd::Zero(dim_, jump_dim());
  if (jump_dim() == 0) return F;
  if (const auto* p = std::get_if<ExpLevyParams>(&params_)) F.col(0) = p->loadings;
  if (std::holds_alternative<MertonParams>(params_)) F(0, 0) = x[0];
  return F;
}

void ModelSpec::add_jump(double, std::span<const double> x, std::span<const double> z,
                         std::span<double> out) const {
  if (const auto* p = std::get_if<ExpLevyParams>(&params_)) {
    for (int i = 0; i < dim_; ++i) out[i] += p->loadings(i) * z[0];
  } else if (std::holds_alternative<MertonParams>(params_)) {
    out[0] += x[0] * z[0];
  }
}

int ModelSpec::underlier_dim() const {
  return std::holds_alternative<HestonParams>(params_) ? 1 : dim_;
}

void ModelSpec::underlier(double t, std::span<const double> x, std::span<double> out) const {
  if (const auto* p = std::get_if<ExpLevyParams>(&params_)) {
    for (int i = 0; i < dim_; ++i) out[i] = p->spot0(i) * std::exp(p->rate * t + x[i]);
    return;
  }
  const int n = underlier_dim();
  for (int i = 0; i < n; ++i) out[i] = x[i];
}

std::string ModelSpec::fingerprint() const {
  std::ostringstream os;
  os.precision(17);
  os << to_string(kind()) << ";d=" << dim_ << ";T=" << maturity_ << ";x0=";
  for (double v : x0_) os << v << ',';
  std::visit(overloaded{
                 [&](const GbmParams& p) {
                   os << ";r=" << p.rate << ";sigma=" << p.volatility << ";L=";
                   for (Eigen::Index i = 0; i < p.correlation_factor.size(); ++i)
                     os << p.correlation_factor.data()[i] << ',';
                 },
                 [&](const HestonParams& p) {
                   os << ";r=" << p.rate << ";kappa=" << p.kappa << ";theta=" << p.theta
                      << ";sv=" << p.vol_of_vol << ";rho=" << p.rho << ";v0=" << p.v0;
                 },
                 [&](const ExpLevyParams& p) {
                   os << ";r=" << p.rate << ";sigma=";
                   for (Eigen::Index i = 0; i < p.sigma.size(); ++i) os << p.sigma.data()[i] << ',';
                   os << ";F=";
                   for (Eigen::Index i = 0; i < p.loadings.size(); ++i) os << p.loadings(i) << ',';
                 },
                 [&](const MertonParams& p) {
                   os << ";r=" << p.rate << ";sigma=" << p.volatility << ";beta=" << p.mean_jump;
                 }},
             params_);
  if (measure_) {
    std::visit(overloaded{[&](const MertonJumps& m) {
                            os << ";jumps=merton," << m.intensity << ',' << m.log_mean << ','
                               << m.log_stdev;
                          },
                          [&](const TemperedStableJumps& s) {
                            os << ";jumps=tempered," << s.c_minus << ',' << s.c_plus << ','
                               << s.alpha << ',' << s.mu << ",eps=" << measure_->truncation;
                          }},
               measure_->kind);
  }
  return os.str();
}

// ---------------------------------------------------------------------------

Eigen::MatrixXd cholesky_factor(const Eigen::MatrixXd& correlation) {
  require(correlation.rows() == correlation.cols(), "correlation matrix must be square");
  require(correlation.isApprox(correlation.transpose(), 1e-12), "correlation matrix must be symmetric");
  for (Eigen::Index i = 0; i < correlation.rows(); ++i)
    require(std::abs(correlation(i, i) - 1.0) < 1e-12, "correlation matrix must have unit diagonal");
  Eigen::LLT<Eigen::MatrixXd> llt(correlation);
  require(llt.info() == Eigen::Success, "correlation matrix is not positive definite");
  return llt.matrixL();
}

ModelSpec build_gbm(double rate, double volatility, const std::optional<Eigen::MatrixXd>& correlation,
                    int dim, double maturity, double x0) {
  require(volatility >= 0.0, "GBM volatility must be non-negative");
  require(dim >= 1, "GBM dimension must be positive");
  GbmParams p{rate, volatility, Eigen::MatrixXd::Identity(dim, dim)};
  if (correlation) {
    require(correlation->rows() == dim, "correlation matrix does not match the dimension");
    p.correlation_factor = cholesky_factor(*correlation);
  }
  return ModelSpec(p, dim, maturity, std::vector<double>(dim, x0));
}

ModelSpec build_heston(const HestonParams& p, double maturity, double x0) {
  require(p.kappa > 0.0 && p.theta > 0.0, "Heston kappa and theta must be positive");
  require(p.vol_of_vol >= 0.0, "Heston vol-of-vol must be non-negative");
  require(p.rho > -1.0 && p.rho < 1.0, "Heston correlation must lie in (-1, 1)");
  require(p.v0 >= 0.0, "Heston initial variance must be non-negative");
  require(2.0 * p.kappa * p.theta > p.vol_of_vol * p.vol_of_vol,
          "Heston parameters violate 2 kappa theta > sigma_v^2");
  return ModelSpec(p, 2, maturity, {x0, p.v0});
}

ModelSpec build_exp_levy(double rate, const Eigen::MatrixXd& sigma, const Eigen::VectorXd& loadings,
                         const LevyMeasureSpec& measure, double maturity, double spot0) {
  const int d = static_cast<int>(sigma.rows());
  require(d >= 1 && sigma.cols() == d, "sigma must be a square matrix");
  require(loadings.size() == d, "loadings must have one entry per asset");
  require(!measure.is_merton(), "exponential Levy models take a tempered-stable measure");
  measure.validate();

  ExpLevyParams p{rate, sigma, loadings, Eigen::VectorXd(d), Eigen::VectorXd::Constant(d, spot0)};
  for (int i = 0; i < d; ++i) {
    p.drift(i) = -0.5 * sigma.row(i).squaredNorm() - exponential_compensator(measure, loadings(i));
  }
  return ModelSpec(p, d, maturity, std::vector<double>(d, 0.0), measure);
}

ModelSpec build_merton(double rate, double volatility, double intensity, double jump_log_mean,
                       double jump_log_stdev, double maturity, double x0) {
  require(volatility >= 0.0, "Merton volatility must be non-negative");
  require(intensity >= 0.0, "Merton intensity must be non-negative");
  require(jump_log_stdev >= 0.0, "Merton jump stdev must be non-negative");
  MertonParams p{rate, volatility,
                 std::exp(jump_log_mean + 0.5 * jump_log_stdev * jump_log_stdev) - 1.0};
  LevyMeasureSpec measure{MertonJumps{intensity, jump_log_mean, jump_log_stdev}, 1e-3};
  return ModelSpec(p, 1, maturity, {x0}, measure);
}

double Payoff::operator()(std::span<const double> spot) const {
  if (kind == PayoffKind::Call) return std::max(spot[0] - strike, 0.0);
  return std::max(*std::max_element(spot.begin(), spot.end()) - strike, 0.0);
}

}  // namespace ncv
