#include "ncv/experiment.hpp"

#include <boost/version.hpp>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <json.hpp>
#include <set>
#include <sstream>

#include "ncv/oracles.hpp"

namespace ncv {

using nlohmann::json;

namespace {

constexpr const char* kVersion = "0.1.0";

void check_keys(const json& j, const std::string& where, std::initializer_list<const char*> allowed) {
  if (!j.is_object()) throw ConfigError(where + " must be an object");
  std::set<std::string> ok(allowed.begin(), allowed.end());
  for (const auto& [key, value] : j.items()) {
    if (!ok.count(key)) throw ConfigError("unknown key " + where + "." + key);
  }
}

template <class T>
void read(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

Eigen::MatrixXd to_matrix(const std::vector<std::vector<double>>& rows) {
  const auto n = static_cast<Eigen::Index>(rows.size());
  const auto m = n ? static_cast<Eigen::Index>(rows[0].size()) : 0;
  Eigen::MatrixXd out(n, m);
  for (Eigen::Index i = 0; i < n; ++i) {
    if (static_cast<Eigen::Index>(rows[i].size()) != m) throw ModelError("matrix rows differ in length");
    for (Eigen::Index k = 0; k < m; ++k) out(i, k) = rows[i][k];
  }
  return out;
}

json model_to_json(const ModelConfig& m) {
  json j{{"kind", m.kind}, {"rate", m.rate}, {"maturity", m.maturity}};
  if (m.kind == "gbm") {
    j["volatility"] = m.volatility;
    j["dim"] = m.dim;
    j["x0"] = m.x0;
    if (!m.correlation.empty()) j["correlation"] = m.correlation;
  } else if (m.kind == "heston") {
    j.update({{"kappa", m.kappa}, {"theta", m.theta}, {"vol_of_vol", m.vol_of_vol},
              {"rho", m.rho}, {"v0", m.v0}, {"x0", m.x0}});
  } else if (m.kind == "exp_levy") {
    j["sigma"] = m.sigma;
    j["loadings"] = m.loadings;
    j["spot0"] = m.x0;
    j["jumps"] = {{"c_minus", m.c_minus}, {"c_plus", m.c_plus}, {"alpha", m.alpha}, {"mu", m.mu}};
  } else {
    j.update({{"volatility", m.volatility}, {"intensity", m.intensity},
              {"jump_log_mean", m.jump_log_mean}, {"jump_log_stdev", m.jump_log_stdev},
              {"x0", m.x0}});
  }
  return j;
}

ModelConfig model_from_json(const json& j) {
  ModelConfig m;
  if (!j.is_object() || !j.contains("kind")) throw ConfigError("model.kind is required");
  m.kind = j.at("kind").get<std::string>();
  if (m.kind == "gbm") {
    check_keys(j, "model", {"kind", "rate", "maturity", "volatility", "dim", "x0", "correlation"});
    read(j, "volatility", m.volatility);
    read(j, "dim", m.dim);
    read(j, "x0", m.x0);
    read(j, "correlation", m.correlation);
  } else if (m.kind == "heston") {
    check_keys(j, "model", {"kind", "rate", "maturity", "kappa", "theta", "vol_of_vol", "rho", "v0", "x0"});
    read(j, "kappa", m.kappa);
    read(j, "theta", m.theta);
    read(j, "vol_of_vol", m.vol_of_vol);
    read(j, "rho", m.rho);
    read(j, "v0", m.v0);
    read(j, "x0", m.x0);
  } else if (m.kind == "exp_levy") {
    check_keys(j, "model", {"kind", "rate", "maturity", "sigma", "loadings", "spot0", "jumps"});
    read(j, "sigma", m.sigma);
    read(j, "loadings", m.loadings);
    read(j, "spot0", m.x0);
    if (j.contains("jumps")) {
      const json& s = j.at("jumps");
      check_keys(s, "model.jumps", {"c_minus", "c_plus", "alpha", "mu"});
      read(s, "c_minus", m.c_minus);
      read(s, "c_plus", m.c_plus);
      read(s, "alpha", m.alpha);
      read(s, "mu", m.mu);
    }
    m.dim = static_cast<int>(m.loadings.size());
  } else if (m.kind == "merton") {
    check_keys(j, "model", {"kind", "rate", "maturity", "volatility", "intensity", "jump_log_mean",
                            "jump_log_stdev", "x0"});
    read(j, "volatility", m.volatility);
    read(j, "intensity", m.intensity);
    read(j, "jump_log_mean", m.jump_log_mean);
    read(j, "jump_log_stdev", m.jump_log_stdev);
    read(j, "x0", m.x0);
  } else {
    throw ConfigError("unknown model kind '" + m.kind + "'");
  }
  read(j, "rate", m.rate);
  read(j, "maturity", m.maturity);
  return m;
}

json config_to_json(const ExperimentConfig& c) {
  const auto& t = c.training;
  const auto& e = c.estimation;
  return json{
      {"model", model_to_json(c.model)},
      {"payoff", {{"kind", c.payoff.kind}, {"strikes", c.payoff.strikes}}},
      {"scheme", {{"h", c.scheme.h}, {"step_factor", c.scheme.step_factor}, {"epsilon", c.scheme.epsilon}}},
      {"training",
       {{"enabled", t.enabled}, {"max_epochs", t.max_epochs}, {"batch_size", t.batch_size},
        {"learning_rate", t.learning_rate}, {"hidden_layers", t.hidden_layers},
        {"hidden_size", t.hidden_size}, {"trajectories", t.trajectories},
        {"warm_start", t.warm_start}, {"transfer", t.transfer}, {"cost_model", t.cost_model},
        {"stopping_rule", t.stopping_rule}}},
      {"estimation",
       {{"tolerance", e.tolerance}, {"alpha", e.alpha}, {"max_paths", e.max_paths},
        {"batch_paths", e.batch_paths}, {"baselines", e.baselines}, {"crude_pilot", e.crude_pilot},
        {"mlmc", {{"levels", e.mlmc.levels}, {"factor", e.mlmc.factor}, {"pilot_paths", e.mlmc.pilot_paths}}}}},
      {"output", c.output},
      {"seed", c.seed}};
}

ExperimentConfig config_from_json(const json& root) {
  check_keys(root, "config", {"model", "payoff", "scheme", "training", "estimation", "output", "seed"});
  ExperimentConfig c;
  if (!root.contains("model")) throw ConfigError("model section is required");
  if (!root.contains("payoff")) throw ConfigError("payoff section is required");
  c.model = model_from_json(root.at("model"));

  const json& p = root.at("payoff");
  check_keys(p, "payoff", {"kind", "strikes"});
  read(p, "kind", c.payoff.kind);
  read(p, "strikes", c.payoff.strikes);

  if (root.contains("scheme")) {
    const json& s = root.at("scheme");
    check_keys(s, "scheme", {"h", "step_factor", "epsilon"});
    read(s, "h", c.scheme.h);
    read(s, "step_factor", c.scheme.step_factor);
    read(s, "epsilon", c.scheme.epsilon);
  }
  if (root.contains("training")) {
    const json& t = root.at("training");
    check_keys(t, "training", {"enabled", "max_epochs", "batch_size", "learning_rate", "hidden_layers",
                               "hidden_size", "trajectories", "warm_start", "transfer", "cost_model",
                               "stopping_rule"});
    auto& o = c.training;
    read(t, "enabled", o.enabled);
    read(t, "max_epochs", o.max_epochs);
    read(t, "batch_size", o.batch_size);
    read(t, "learning_rate", o.learning_rate);
    read(t, "hidden_layers", o.hidden_layers);
    read(t, "hidden_size", o.hidden_size);
    read(t, "trajectories", o.trajectories);
    read(t, "warm_start", o.warm_start);
    read(t, "transfer", o.transfer);
    read(t, "cost_model", o.cost_model);
    read(t, "stopping_rule", o.stopping_rule);
  }
  if (root.contains("estimation")) {
    const json& e = root.at("estimation");
    check_keys(e, "estimation", {"tolerance", "alpha", "max_paths", "batch_paths", "baselines",
                                 "crude_pilot", "mlmc"});
    auto& o = c.estimation;
    read(e, "tolerance", o.tolerance);
    read(e, "alpha", o.alpha);
    read(e, "max_paths", o.max_paths);
    read(e, "batch_paths", o.batch_paths);
    read(e, "baselines", o.baselines);
    read(e, "crude_pilot", o.crude_pilot);
    if (e.contains("mlmc")) {
      const json& m = e.at("mlmc");
      check_keys(m, "estimation.mlmc", {"levels", "factor", "pilot_paths"});
      read(m, "levels", o.mlmc.levels);
      read(m, "factor", o.mlmc.factor);
      read(m, "pilot_paths", o.mlmc.pilot_paths);
    }
  }
  read(root, "output", c.output);
  read(root, "seed", c.seed);
  return c;
}

bool divides(double T, double h) {
  if (!(h > 0.0)) return false;
  const double n = T / h;
  return n >= 1.0 - 1e-12 && std::abs(n - std::round(n)) <= 1e-9 * std::max(1.0, n);
}

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

std::string strike_tag(double k) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%g", k);
  return buf;
}

}  // namespace

ExperimentConfig parse_config(const std::string& text) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  try {
    if (root.is_object() && root.contains("config") && root.contains("manifest_version"))
      return config_from_json(root.at("config"));
    return config_from_json(root);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config has a value of the wrong type: ") + e.what());
  }
}

std::string serialize_config(const ExperimentConfig& config) { return config_to_json(config).dump(2); }

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

std::vector<std::string> validate_config(const ExperimentConfig& c) {
  std::vector<std::string> out;
  const auto& m = c.model;
  bool model_ok = true;
  auto bad = [&](std::string s, bool model_issue = true) {
    out.push_back(std::move(s));
    if (model_issue) model_ok = false;
  };

  if (!(m.maturity > 0.0)) bad("model.maturity must be positive");
  if (!(m.x0 > 0.0)) bad("initial spot must be positive");
  if (m.kind == "gbm") {
    if (!(m.volatility >= 0.0)) bad("model.volatility must be non-negative");
    if (m.dim < 1 || m.dim > 16) bad("model.dim must lie in [1, 16]");
    if (!m.correlation.empty() && static_cast<int>(m.correlation.size()) != m.dim)
      bad("model.correlation must be dim x dim");
  } else if (m.kind == "heston") {
    if (!(m.kappa > 0.0 && m.theta > 0.0)) bad("model.kappa and model.theta must be positive");
    if (!(m.vol_of_vol >= 0.0)) bad("model.vol_of_vol must be non-negative");
    if (!(m.rho > -1.0 && m.rho < 1.0)) bad("model.rho must lie in (-1, 1)");
    if (!(m.v0 >= 0.0)) bad("model.v0 must be non-negative");
    if (!(2.0 * m.kappa * m.theta > m.vol_of_vol * m.vol_of_vol))
      bad("Feller-type condition 2 kappa theta > vol_of_vol^2 is violated");
  } else if (m.kind == "exp_levy") {
    if (m.loadings.empty() || m.loadings.size() > 16) bad("model.loadings must have 1 to 16 entries");
    if (m.sigma.size() != m.loadings.size()) bad("model.sigma must be d x d with d = len(loadings)");
    for (const auto& row : m.sigma)
      if (row.size() != m.loadings.size()) bad("model.sigma must be d x d with d = len(loadings)");
    if (!(m.c_minus >= 0.0 && m.c_plus >= 0.0)) bad("jump constants c_minus, c_plus must be >= 0");
    if (!(m.alpha > 0.0 && m.alpha < 2.0)) bad("jump alpha must lie in (0, 2)");
    if (!(m.mu > 0.0)) bad("jump tempering mu must be positive");
    for (double f : m.loadings)
      if (std::abs(f) >= m.mu) bad("each |loading| must be below mu for the drift integral to converge");
    if (!(c.scheme.epsilon > 0.0 && c.scheme.epsilon < 1.0)) bad("scheme.epsilon must lie in (0, 1)");
  } else if (m.kind == "merton") {
    if (!(m.volatility >= 0.0)) bad("model.volatility must be non-negative");
    if (!(m.intensity >= 0.0)) bad("model.intensity must be non-negative");
    if (!(m.jump_log_stdev >= 0.0)) bad("model.jump_log_stdev must be non-negative");
  } else {
    bad("unknown model kind '" + m.kind + "'");
  }

  if (c.payoff.kind != "call" && c.payoff.kind != "call_on_max")
    bad("payoff.kind must be call or call_on_max", false);
  if (c.payoff.strikes.empty()) bad("payoff.strikes must not be empty", false);
  for (double k : c.payoff.strikes)
    if (!(k > 0.0)) bad("strikes must be positive", false);

  if (!divides(m.maturity, c.scheme.h)) bad("scheme.h must divide the maturity", false);
  if (c.scheme.step_factor < 1) bad("scheme.step_factor must be at least 1", false);
  else if (c.training.enabled && !divides(m.maturity, c.scheme.h * c.scheme.step_factor))
    bad("step_factor * h must divide the maturity", false);

  const auto& t = c.training;
  if (t.enabled) {
    if (t.max_epochs < 1) bad("training.max_epochs must be at least 1", false);
    if (t.batch_size < 2) bad("training.batch_size must be at least 2", false);
    if (t.trajectories < t.batch_size) bad("training.trajectories must be at least batch_size", false);
    if (!(t.learning_rate > 0.0)) bad("training.learning_rate must be positive", false);
    if (t.hidden_layers < 1 || t.hidden_size < 1) bad("training needs hidden layers of positive width", false);
    if (t.cost_model != "work" && t.cost_model != "wall") bad("training.cost_model must be work or wall", false);
    if (!t.warm_start.empty() && !std::filesystem::exists(t.warm_start))
      bad("training.warm_start file does not exist: " + t.warm_start, false);
  }

  const auto& e = c.estimation;
  if (!(e.tolerance > 0.0)) bad("estimation.tolerance must be positive", false);
  if (!(e.alpha > 0.0 && e.alpha < 1.0)) bad("estimation.alpha must lie in (0, 1)", false);
  if (e.batch_paths < 2) bad("estimation.batch_paths must be at least 2", false);
  if (e.max_paths < e.batch_paths) bad("estimation.max_paths must be at least batch_paths", false);
  for (const auto& b : e.baselines) {
    if (b != "vanilla" && b != "mlmc" && b != "crude_cv") bad("unknown baseline '" + b + "'", false);
    if (b == "mlmc") {
      if (e.mlmc.factor < 2) bad("estimation.mlmc.factor must be at least 2", false);
      if (e.mlmc.levels < 1) bad("estimation.mlmc.levels must be at least 1", false);
      if (e.mlmc.factor >= 2 && e.mlmc.levels >= 1 &&
          !divides(m.maturity, c.scheme.h * std::pow(e.mlmc.factor, e.mlmc.levels - 1)))
        bad("coarsest MLMC step h * factor^(levels-1) must divide the maturity", false);
    }
    if (b == "crude_cv" && e.crude_pilot < 2) bad("estimation.crude_pilot must be at least 2", false);
  }
  if (c.output.empty()) bad("output directory must be named", false);

  if (model_ok) {
    try {
      build_model(m, c.scheme.epsilon);
    } catch (const std::exception& ex) {
      out.push_back(std::string("model: ") + ex.what());
    }
  }
  return out;
}

std::vector<std::string> validate_config_text(const std::string& text) {
  try {
    return validate_config(parse_config(text));
  } catch (const ConfigError& e) {
    return {e.what()};
  }
}

ModelSpec build_model(const ModelConfig& m, double epsilon) {
  if (m.kind == "gbm") {
    std::optional<Eigen::MatrixXd> corr;
    if (!m.correlation.empty()) corr = to_matrix(m.correlation);
    return build_gbm(m.rate, m.volatility, corr, m.dim, m.maturity, m.x0);
  }
  if (m.kind == "heston") {
    return build_heston({m.rate, m.kappa, m.theta, m.vol_of_vol, m.rho, m.v0}, m.maturity, m.x0);
  }
  if (m.kind == "exp_levy") {
    const Eigen::VectorXd f = Eigen::Map<const Eigen::VectorXd>(m.loadings.data(), m.loadings.size());
    LevyMeasureSpec measure{TemperedStableJumps{m.c_minus, m.c_plus, m.alpha, m.mu}, epsilon};
    return build_exp_levy(m.rate, to_matrix(m.sigma), f, measure, m.maturity, m.x0);
  }
  if (m.kind == "merton") {
    return build_merton(m.rate, m.volatility, m.intensity, m.jump_log_mean, m.jump_log_stdev,
                        m.maturity, m.x0);
  }
  throw ModelError("unknown model kind '" + m.kind + "'");
}

Payoff build_payoff(const PayoffConfig& config, double strike) {
  return {config.kind == "call_on_max" ? PayoffKind::CallOnMax : PayoffKind::Call, strike};
}

std::optional<ReferencePrice> reference_price(const ModelConfig& m, const PayoffConfig& payoff,
                                              double strike) {
  const bool vanilla_call = payoff.kind == "call" || (payoff.kind == "call_on_max" && m.dim == 1);
  if (!vanilla_call) return std::nullopt;
  if (m.kind == "gbm" && m.dim == 1 && m.volatility > 0.0)
    return ReferencePrice{bs_call(m.x0, strike, m.rate, m.volatility, m.maturity),
                          ReferenceMethod::BlackScholesClosed, 0};
  if (m.kind == "merton")
    return merton_call(m.x0, strike, m.rate, m.volatility, m.intensity, m.jump_log_mean,
                       m.jump_log_stdev, m.maturity);
  if (m.kind == "heston" && m.rate == 0.02 && m.kappa == 0.25 && m.theta == 0.5 &&
      m.vol_of_vol == 0.3 && m.rho == -0.3 && m.v0 == 0.15 && m.maturity == 3.0 && m.x0 == 1.0)
    return heston_table_reference(strike);
  return std::nullopt;
}

std::string csv_header() { return "strike,reference,mean,half_width,time_s,M,rel_err,method,seed,tol_met"; }

std::string csv_row(const ResultRow& r) {
  std::ostringstream os;
  const Estimate& e = r.estimate;
  os << fmt(r.strike) << ',' << (r.reference ? fmt(*r.reference) : "") << ',' << fmt(e.mean) << ','
     << fmt(e.half_width) << ',' << fmt(e.wall_time) << ',' << e.M << ','
     << (e.rel_err ? fmt(*e.rel_err) : "") << ',' << e.method << ',' << r.seed << ','
     << (e.tol_met ? 1 : 0);
  return os.str();
}

RunSummary run_experiment(const ExperimentConfig& c) {
  if (auto diags = validate_config(c); !diags.empty()) {
    std::string all;
    for (const auto& d : diags) all += (all.empty() ? "" : "; ") + d;
    throw StageError("validate", all);
  }
  namespace fs = std::filesystem;
  const fs::path dir(c.output);
  try {
    fs::create_directories(dir);
  } catch (const std::exception& e) {
    throw StageError("output", e.what());
  }

  RunSummary summary;
  summary.csv = dir / "results.csv";
  summary.manifest = dir / "manifest.json";

  auto stage = [](const char* name, auto&& fn) {
    try {
      return fn();
    } catch (const StageError&) {
      throw;
    } catch (const std::exception& e) {
      throw StageError(name, e.what());
    }
  };

  const ModelSpec model = stage("model", [&] { return build_model(c.model, c.scheme.epsilon); });
  const SchemeSpec scheme = default_scheme(model, c.scheme.h);
  const SchemeSpec scheme_r = default_scheme(model, c.scheme.h * c.scheme.step_factor);

  json manifest{{"manifest_version", 1},
                {"config", config_to_json(c)},
                {"versions",
                 {{"ncv", kVersion},
                  {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) +
                                "." + std::to_string(EIGEN_MINOR_VERSION)},
                  {"boost", BOOST_LIB_VERSION},
                  {"compiler", __VERSION__}}},
                {"seed", c.seed},
                {"model_fingerprint", model.fingerprint()},
                {"results", "results.csv"},
                {"strikes", json::array()}};
  auto write_manifest = [&](const std::string& status) {
    manifest["status"] = status;
    std::ofstream out(summary.manifest);
    out << manifest.dump(2) << '\n';
  };

  std::ofstream csv(summary.csv);
  if (!csv) throw StageError("output", "cannot write " + summary.csv.string());
  csv << csv_header() << '\n' << std::flush;

  auto emit = [&](ResultRow row) {
    csv << csv_row(row) << '\n' << std::flush;
    summary.rows.push_back(std::move(row));
  };

  try {
    std::optional<Network> carry;
    if (c.training.enabled && !c.training.warm_start.empty()) {
      carry = stage("warm_start", [&] {
        std::ifstream in(c.training.warm_start);
        std::stringstream ss;
        ss << in.rdbuf();
        return controls_from_json(ss.str(), model);
      });
    }

    EstimationConfig ec;
    ec.tol = c.estimation.tolerance;
    ec.alpha = c.estimation.alpha;
    ec.max_paths = c.estimation.max_paths;
    ec.batch_paths = c.estimation.batch_paths;
    ec.seed = c.seed;

    for (std::size_t i = 0; i < c.payoff.strikes.size(); ++i) {
      const double K = c.payoff.strikes[i];
      const Payoff payoff = build_payoff(c.payoff, K);
      const auto ref = reference_price(c.model, c.payoff, K);
      const std::optional<double> refv = ref ? std::optional<double>(ref->value) : std::nullopt;

      if (c.training.enabled) {
        const auto start = std::chrono::steady_clock::now();
        TrainConfig tc;
        tc.max_epochs = c.training.max_epochs;
        tc.batch_size = c.training.batch_size;
        tc.step_factor = c.scheme.step_factor;
        tc.learning_rate = c.training.learning_rate;
        tc.hidden_layers = c.training.hidden_layers;
        tc.hidden_size = c.training.hidden_size;
        tc.alpha = c.estimation.alpha;
        tc.tolerance = c.estimation.tolerance;
        tc.sample_batch = c.estimation.batch_paths;
        tc.second_pass_h = c.scheme.h;
        tc.cost_model = c.training.cost_model == "wall" ? CostModel::Wall : CostModel::Work;
        tc.use_stopping_rule = c.training.stopping_rule;
        tc.seed = c.seed;

        TrainedControls trained = stage("train", [&] {
          const TrainingDataset data = stage("first_pass", [&] {
            return first_pass(model, payoff, scheme_r, c.training.trajectories, c.seed);
          });
          return train(model, payoff, data, tc, carry ? &*carry : nullptr);
        });
        const double train_s =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

        StrikeTraining info{K, trained.epochs, trained.best_epoch, trained.stopped_by_rule,
                            trained.zero_variance, trained.best_variance, train_s,
                            "controls_K" + strike_tag(K) + ".json"};
        {
          ControlsManifest cm{model.fingerprint(), to_string(payoff.kind), K,
                              scheme_r.h, c.training.trajectories, c.seed, trained.mode};
          std::ofstream blob(dir / info.blob);
          blob << controls_to_json(trained.net, cm) << '\n';
        }
        manifest["strikes"].push_back({{"strike", K},
                                       {"epochs", info.epochs},
                                       {"best_epoch", info.best_epoch},
                                       {"stopped_by_rule", info.stopped_by_rule},
                                       {"zero_variance", info.zero_variance},
                                       {"best_variance", info.best_variance},
                                       {"controls", info.blob}});
        summary.training.push_back(info);

        const NetworkControl control(trained.net);
        Estimate est = stage("cv_mc", [&] { return cv_mc(model, control, scheme, payoff, ec); });
        est.wall_time += train_s;
        emit({K, refv, est, c.seed});
        if (c.training.transfer) carry = trained.net;
      }

      for (const auto& b : c.estimation.baselines) {
        if (b == "vanilla") {
          emit({K, refv, stage("vanilla_mc", [&] { return vanilla_mc(model, scheme, payoff, ec); }), c.seed});
        } else if (b == "crude_cv") {
          emit({K, refv,
                stage("crude_cv_mc",
                      [&] { return crude_cv_mc(model, scheme, payoff, ec, c.estimation.crude_pilot); }),
                c.seed});
        } else if (b == "mlmc") {
          MlmcConfig mc;
          mc.h_finest = c.scheme.h;
          mc.factor = c.estimation.mlmc.factor;
          mc.levels = c.estimation.mlmc.levels;
          mc.tol = c.estimation.tolerance;
          mc.alpha = c.estimation.alpha;
          mc.pilot_paths = c.estimation.mlmc.pilot_paths;
          mc.seed = c.seed;
          emit({K, refv, stage("mlmc", [&] { return mlmc(model, payoff, mc).estimate; }), c.seed});
        }
      }
    }
  } catch (const StageError& e) {
    manifest["failed_stage"] = e.stage;
    write_manifest("failed");
    throw;
  }
  write_manifest("ok");
  return summary;
}

}  // namespace ncv
