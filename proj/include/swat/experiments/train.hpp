#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "swat/core/errors.hpp"
#include "swat/experiments/data.hpp"
#include "swat/experiments/model.hpp"
#include "swat/util/rng.hpp"

namespace swat {

struct TrainConfig {
  long steps = 600;
  long batch = 0;               // 0: full batch
  double lr = 1e-2;
  std::string schedule = "cosine";  // "constant" | "cosine" (to lr * final_lr_fraction)
  double final_lr_fraction = 0.01;
  double init_scale = 1.0;
  bool gradient_check = false;  // run gradient_check on the initial model
  long eval_every = 10;         // full empirical risk recorded every k steps (and at the last step)
  std::optional<double> bound;  // projection |theta| <= B after each step
  std::set<ParamKind> frozen;
  std::uint64_t seed = 0;

  void validate() const {
    if (steps <= 0 || batch < 0 || eval_every <= 0) throw UsageError("training counts must be positive");
    if (!(lr > 0.0)) throw UsageError("learning rate must be positive");
    if (schedule != "constant" && schedule != "cosine") throw UsageError("unknown schedule '" + schedule + "'");
    if (bound && !(*bound > 0.0)) throw UsageError("projection bound must be positive");
  }

  double lr_at(long step) const {
    if (schedule == "constant") return lr;
    const double t = static_cast<double>(step) / static_cast<double>(std::max<long>(steps - 1, 1));
    const double lo = lr * final_lr_fraction;
    return lo + 0.5 * (lr - lo) * (1.0 + std::cos(std::numbers::pi * t));
  }
};

inline nlohmann::json to_json(const TrainConfig& c) {
  nlohmann::json frozen = nlohmann::json::array();
  for (auto k : c.frozen) frozen.push_back(to_string(k));
  return {{"steps", c.steps},          {"batch", c.batch},
          {"lr", c.lr},                {"schedule", c.schedule},
          {"final_lr_fraction", c.final_lr_fraction},
          {"init_scale", c.init_scale}, {"gradient_check", c.gradient_check},
          {"eval_every", c.eval_every}, {"bound", c.bound ? nlohmann::json(*c.bound) : nlohmann::json(nullptr)},
          {"frozen", frozen},          {"seed", c.seed}};
}

inline ParamKind param_kind_from_string(const std::string& s) {
  for (ParamKind k : {ParamKind::embedding, ParamKind::key, ParamKind::query, ParamKind::value, ParamKind::fnn_weight,
                      ParamKind::fnn_bias})
    if (s == to_string(k)) return k;
  throw UsageError("unknown parameter kind '" + s + "'");
}

inline TrainConfig train_config_from_json(const nlohmann::json& j) {
  TrainConfig c;
  c.steps = j.value("steps", c.steps);
  c.batch = j.value("batch", c.batch);
  c.lr = j.value("lr", c.lr);
  c.schedule = j.value("schedule", c.schedule);
  c.final_lr_fraction = j.value("final_lr_fraction", c.final_lr_fraction);
  c.init_scale = j.value("init_scale", c.init_scale);
  c.gradient_check = j.value("gradient_check", c.gradient_check);
  c.eval_every = j.value("eval_every", c.eval_every);
  if (j.contains("bound") && !j.at("bound").is_null()) c.bound = j.at("bound").get<double>();
  if (j.contains("frozen"))
    for (const auto& k : j.at("frozen")) c.frozen.insert(param_kind_from_string(k.get<std::string>()));
  c.seed = j.value("seed", c.seed);
  c.validate();
  return c;
}

struct TracePoint {
  long step = 0;
  double lr = 0.0;
  double risk = 0.0;  // full empirical risk of the current iterate
};

struct TrainResult {
  DenseModel model;  // best iterate
  std::vector<TracePoint> trace;
  double initial_risk = 0.0;
  double final_risk = 0.0;  // empirical risk of `model`
  long best_step = 0;
  std::optional<GradientCheckResult> gradient_check;
};

inline Predictor as_predictor(DenseModel m) {
  return [m = std::move(m)](const TokenWindow& x, IndexRange out) -> Eigen::VectorXd {
    return dense_forward(m, x, out).row(0).transpose();
  };
}

/// Adam on the empirical squared loss. The returned model is the best
/// iterate among the recorded checkpoints, so it is never worse than the
/// initial model on the training data.
inline TrainResult train_erm(DenseModel model, const RegressionDataset& ds, const TrainConfig& cfg) {
  cfg.validate();
  if (ds.inputs.empty()) throw UsageError("cannot train on an empty dataset");
  const LossBatch data{&ds.inputs, &ds.outputs, ds.output_range};
  std::vector<long> all(static_cast<std::size_t>(ds.size()));
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = static_cast<long>(i);

  TrainResult res;
  if (cfg.gradient_check) res.gradient_check = gradient_check(model, data, 10, cfg.seed);

  auto project = [&](DenseModel& m) {
    if (!cfg.bound) return;
    const double b = *cfg.bound;
    m.for_each([&](ParamKind k, Eigen::Map<Eigen::VectorXd> v) {
      if (!cfg.frozen.count(k)) v = v.cwiseMax(-b).cwiseMin(b);
    });
  };
  project(model);

  DenseModel m1 = model.zeros_like(), m2 = model.zeros_like();
  Rng rng = make_rng(cfg.seed, {0x7a});
  const double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;

  auto fail = [&](long step, double loss) {
    std::ostringstream os;
    os << "training diverged at step " << step << " (loss " << loss << "); trace:";
    for (const auto& p : res.trace) os << " [" << p.step << ": " << p.risk << "]";
    throw TrainingError(os.str());
  };

  res.initial_risk = squared_loss(model, data, all, nullptr);
  if (!std::isfinite(res.initial_risk)) fail(0, res.initial_risk);
  res.trace.push_back({0, cfg.lr_at(0), res.initial_risk});
  res.model = model;
  res.final_risk = res.initial_risk;

  // Shapes were validated by the initial evaluation, so a UsageError from
  // here on means non-finite activations (softmax of overflowing logits).
  auto loss_at = [&](long step, const std::vector<long>& rows, DenseModel* grad) {
    double v = std::numeric_limits<double>::quiet_NaN();
    try {
      v = squared_loss(model, data, rows, grad);
    } catch (const UsageError&) {
    }
    if (!std::isfinite(v)) fail(step, v);
    return v;
  };

  std::vector<long> idx;
  for (long step = 1; step <= cfg.steps; ++step) {
    if (cfg.batch == 0 || cfg.batch >= ds.size()) {
      idx = all;
    } else {
      idx.resize(static_cast<std::size_t>(cfg.batch));
      for (auto& i : idx) i = uniform_int(rng, 0, ds.size() - 1);
    }
    DenseModel g = model.zeros_like();
    loss_at(step, idx, &g);
    const double lr = cfg.lr_at(step - 1);
    const double c1 = 1.0 - std::pow(beta1, static_cast<double>(step));
    const double c2 = 1.0 - std::pow(beta2, static_cast<double>(step));
    std::vector<Eigen::Map<Eigen::VectorXd>> gv, a, b;
    g.for_each([&](ParamKind, Eigen::Map<Eigen::VectorXd> v) { gv.push_back(v); });
    m1.for_each([&](ParamKind, Eigen::Map<Eigen::VectorXd> v) { a.push_back(v); });
    m2.for_each([&](ParamKind, Eigen::Map<Eigen::VectorXd> v) { b.push_back(v); });
    std::size_t t = 0;
    model.for_each([&](ParamKind k, Eigen::Map<Eigen::VectorXd> p) {
      const std::size_t i = t++;
      if (cfg.frozen.count(k)) return;
      a[i] = beta1 * a[i] + (1.0 - beta1) * gv[i];
      b[i] = beta2 * b[i] + (1.0 - beta2) * gv[i].cwiseAbs2();
      p.array() -= lr * (a[i].array() / c1) / ((b[i].array() / c2).sqrt() + eps);
    });
    project(model);
    bool finite = true;
    model.for_each([&](ParamKind, Eigen::Map<Eigen::VectorXd> v) { finite = finite && v.allFinite(); });
    if (!finite) fail(step, std::numeric_limits<double>::quiet_NaN());

    if (step % cfg.eval_every == 0 || step == cfg.steps) {
      const double risk = loss_at(step, all, nullptr);
      res.trace.push_back({step, lr, risk});
      if (risk < res.final_risk) {
        res.final_risk = risk;
        res.model = model;
        res.best_step = step;
      }
    }
  }
  return res;
}

}  // namespace swat
