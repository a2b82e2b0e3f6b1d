#include <benchmark/benchmark.h>

#include "ncv/cvtrain.hpp"
#include "ncv/network.hpp"
#include "ncv/schemes.hpp"

using namespace ncv;

namespace {

ModelSpec bs_model() { return build_gbm(0.02, 0.3, std::nullopt, 1); }

ModelSpec levy_model() {
  Eigen::MatrixXd sigma(2, 2);
  sigma << 0.15, 0.0, 0.06, 0.1375;
  Eigen::VectorXd f(2);
  f << 0.2, 0.2;
  return build_exp_levy(0.02, sigma, f, {TemperedStableJumps{1.0, 1.0, 0.5, 2.0}, 1e-3});
}

void BM_NetworkInfer(benchmark::State& state) {
  Network net(make_architecture(1, 1, 3, 50));
  RandomStream rng(1, StreamDomain::Test, 0);
  net.initialize(rng);
  RowMatrix x(state.range(0), 2), out;
  for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = rng.normal();
  for (auto _ : state) {
    net.infer(x, out);
    benchmark::DoNotOptimize(out.data());
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
  state.counters["flops"] = benchmark::Counter(
      net.arch().forward_flops() * static_cast<double>(state.range(0)) * state.iterations(),
      benchmark::Counter::kIsRate);
}
BENCHMARK(BM_NetworkInfer)->Arg(256)->Arg(4096);

void BM_NetworkGradient(benchmark::State& state) {
  Network net(make_architecture(1, 1, 3, 50));
  RandomStream rng(2, StreamDomain::Test, 0);
  net.initialize(rng);
  RowMatrix x(4096, 2);
  for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = rng.normal();
  std::vector<double> grad;
  auto loss = [](const RowMatrix& o, RowMatrix& d) {
    d = o;
    return 0.5 * o.squaredNorm();
  };
  for (auto _ : state) benchmark::DoNotOptimize(gradient(net, x, loss, grad));
  state.SetItemsProcessed(state.iterations() * x.rows());
}
BENCHMARK(BM_NetworkGradient);

void BM_SimulateGbm(benchmark::State& state) {
  const auto m = bs_model();
  const Payoff call{PayoffKind::Call, 1.0};
  const SchemeSpec scheme{SchemeKind::EulerExplicit, 3.0 / 500};
  for (auto _ : state)
    benchmark::DoNotOptimize(simulate_batch(m, scheme, call, 1000, 1, state.range(0) != 0));
  state.SetItemsProcessed(state.iterations() * 1000 * 500);
}
BENCHMARK(BM_SimulateGbm)->Arg(0)->Arg(1);

void BM_SimulateLevy(benchmark::State& state) {
  const auto m = levy_model();
  const Payoff call{PayoffKind::CallOnMax, 1.0};
  const auto scheme = default_scheme(m, 3.0 / 256);
  for (auto _ : state) benchmark::DoNotOptimize(simulate_batch(m, scheme, call, 100, 1, false));
  state.SetItemsProcessed(state.iterations() * 100);
}
BENCHMARK(BM_SimulateLevy);

void BM_ReplayNetwork(benchmark::State& state) {
  const auto m = bs_model();
  const Payoff call{PayoffKind::Call, 1.0};
  const auto data = first_pass(m, call, {SchemeKind::EulerExplicit, 0.03}, 2000, 3);
  TrainConfig cfg;
  Network net(control_architecture(m, cfg));
  RandomStream rng(3, StreamDomain::Test, 0);
  net.initialize(rng);
  const NetworkControl control(net);
  for (auto _ : state) benchmark::DoNotOptimize(replay_gamma(data.replay, control));
  state.SetItemsProcessed(state.iterations() * data.replay.rows());
}
BENCHMARK(BM_ReplayNetwork);

}  // namespace

BENCHMARK_MAIN();
