#include "dln/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <queue>
#include <random>
#include <set>
#include <sstream>

#include "dln/errors.hpp"

namespace dln {

namespace {

constexpr double kLogitInitStd = 0.1;
constexpr double kCoefInitStd = 0.1;
constexpr double kInitSlope = 2.0;

unsigned group_bit(ParamGroup g) {
  return 1u << static_cast<unsigned>(g);
}

std::vector<std::uint32_t> sample_subset(std::size_t n, std::size_t k, std::mt19937_64& rng) {
  std::vector<std::uint32_t> all(n);
  std::iota(all.begin(), all.end(), 0u);
  for (std::size_t i = 0; i < k; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, n - 1);
    std::swap(all[i], all[pick(rng)]);
  }
  all.resize(k);
  std::sort(all.begin(), all.end());
  return all;
}

// Best split of sorted range [lo, hi): returns (gain, position) where the
// split puts [lo, pos) left.
struct SplitCandidate {
  double gain = 0.0;
  std::size_t lo = 0, hi = 0, pos = 0;
  bool operator<(const SplitCandidate& o) const {
    if (gain != o.gain)
      return gain < o.gain;
    return lo > o.lo;
  }
};

SplitCandidate best_split(const std::vector<double>& xs, const std::vector<double>& prefix,
                          const std::vector<double>& prefix_sq, std::size_t lo, std::size_t hi) {
  SplitCandidate best{0.0, lo, hi, lo};
  auto sse = [&](std::size_t a, std::size_t b) {
    double n = static_cast<double>(b - a);
    double s = prefix[b] - prefix[a];
    return (prefix_sq[b] - prefix_sq[a]) - s * s / n;
  };
  if (hi - lo < 2)
    return best;
  const double parent = sse(lo, hi);
  for (std::size_t pos = lo + 1; pos < hi; ++pos) {
    if (xs[pos] == xs[pos - 1])
      continue;
    double gain = parent - sse(lo, pos) - sse(pos, hi);
    if (gain > best.gain + 1e-12) {
      best.gain = gain;
      best.pos = pos;
    }
  }
  return best;
}

}  // namespace

void TrainConfig::validate() const {
  auto fail = [](const std::string& what) { throw ConfigError(what); };
  if (!(tau_init > 0.0) || !std::isfinite(tau_init))
    fail("tau must be positive");
  if (!(tau_min > 0.0))
    fail("tau_min must be positive");
  if (tau_min > tau_init)
    fail("tau_min must not exceed tau");
  if (!(gamma > 0.0 && gamma <= 1.0))
    fail("gamma must lie in (0, 1]");
  if (epochs < 1)
    fail("epochs must be at least 1");
  if (batch_size < 1)
    fail("batch size must be at least 1");
  if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate))
    fail("learning rate must be non-negative");
  if (subspace_size != 4 && subspace_size != 8 && subspace_size != 16)
    fail("subspace size must be 4, 8 or 16");
  if (thresholds_per_feature < 1)
    fail("thresholds per feature must be at least 1");
  for (auto w : widths)
    if (w < 1)
      fail("layer widths must be at least 1");
  if (!(sum_threshold > 0.0 && sum_threshold < 1.0))
    fail("sum threshold must lie in (0, 1)");
}

std::string TrainConfig::digest() const {
  std::ostringstream s;
  s.precision(17);
  s << tau_init << '|' << gamma << '|' << tau_min << '|' << tau_schedule << '|'
    << static_cast<int>(decay) << '|' << epochs << '|' << batch_size << '|' << learning_rate << '|';
  for (auto w : widths)
    s << w << ',';
  s << '|' << thresholds_per_feature << '|' << subspace_size << '|' << concat_inputs << '|'
    << two_phase << '|' << ste.threshold << ste.gate_select << ste.link_select << ste.sum_gate << '|'
    << sum_threshold << '|' << seed;
  // FNV-1a
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : s.str()) {
    h ^= c;
    h *= 1099511628211ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::vector<double> tree_split_points(std::span<const double> x, std::span<const double> y,
                                      std::size_t max_leaves) {
  if (x.size() != y.size())
    throw DataError("tree input lengths differ");
  std::vector<std::size_t> order(x.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return x[a] < x[b]; });
  std::vector<double> xs(x.size()), prefix(x.size() + 1, 0.0), prefix_sq(x.size() + 1, 0.0);
  for (std::size_t i = 0; i < order.size(); ++i) {
    xs[i] = x[order[i]];
    double v = y[order[i]];
    prefix[i + 1] = prefix[i] + v;
    prefix_sq[i + 1] = prefix_sq[i] + v * v;
  }

  std::vector<double> splits;
  if (x.empty() || max_leaves < 2)
    return splits;
  std::priority_queue<SplitCandidate> frontier;
  frontier.push(best_split(xs, prefix, prefix_sq, 0, xs.size()));
  std::size_t leaves = 1;
  while (leaves < max_leaves && !frontier.empty()) {
    auto c = frontier.top();
    frontier.pop();
    if (c.gain <= 0.0)
      break;
    splits.push_back(0.5 * (xs[c.pos - 1] + xs[c.pos]));
    ++leaves;
    frontier.push(best_split(xs, prefix, prefix_sq, c.lo, c.pos));
    frontier.push(best_split(xs, prefix, prefix_sq, c.pos, c.hi));
  }
  return splits;
}

NetworkParams init_params(const Dataset& data, const TrainConfig& config) {
  config.validate();
  if (data.n_rows == 0)
    throw DataError("cannot initialize from an empty dataset");
  if (data.n_features == 0)
    throw DataError("dataset has no feature columns");

  auto infos = data.schema.features();
  if (infos.size() != data.n_features)
    throw DataError("dataset schema does not describe its feature columns");

  std::vector<double> column(data.n_rows);
  bool any_varying = false;
  NetworkParams p;
  p.n_features = data.n_features;
  p.concat_inputs = config.concat_inputs;
  const auto per_feature = static_cast<std::size_t>(config.thresholds_per_feature);
  for (std::size_t f = 0; f < data.n_features; ++f) {
    for (std::size_t r = 0; r < data.n_rows; ++r)
      column[r] = data.features[r * data.n_features + f];
    auto [lo, hi] = std::minmax_element(column.begin(), column.end());
    if (*lo != *hi)
      any_varying = true;

    if (infos[f].category) {
      p.threshold.source_feature.push_back(f);
      p.threshold.bias.push_back(0.5);
      p.threshold.slope.push_back(kInitSlope);
      continue;
    }
    auto biases = tree_split_points(column, data.target, per_feature);
    const std::size_t missing = per_feature - biases.size();
    for (std::size_t k = 1; k <= missing; ++k)
      biases.push_back(static_cast<double>(k) / static_cast<double>(missing + 1));
    for (double b : biases) {
      p.threshold.source_feature.push_back(f);
      p.threshold.bias.push_back(b);
      p.threshold.slope.push_back(kInitSlope);
    }
  }
  if (!any_varying)
    throw DataError("every feature has fewer than two distinct values");

  std::mt19937_64 rng(config.seed);
  std::normal_distribution<double> logit(0.0, kLogitInitStd);
  const auto n_thr = p.threshold.size();
  std::size_t prev = n_thr;
  const auto subspace = static_cast<std::size_t>(config.subspace_size);
  for (std::size_t l = 0; l < config.widths.size(); ++l) {
    LogicLayer layer;
    layer.in_dim = l == 0 ? n_thr : prev + (config.concat_inputs ? n_thr : 0);
    layer.out_dim = config.widths[l];
    layer.gate_choices = std::min<std::size_t>(subspace, kGateCount);
    layer.link_choices = std::min(subspace, layer.in_dim);
    for (std::size_t i = 0; i < layer.out_dim; ++i) {
      for (auto k : sample_subset(kGateCount, layer.gate_choices, rng))
        layer.gate_subset.push_back(static_cast<std::uint8_t>(k));
      for (auto j : sample_subset(layer.in_dim, layer.link_choices, rng))
        layer.link_subset_a.push_back(j);
      for (auto j : sample_subset(layer.in_dim, layer.link_choices, rng))
        layer.link_subset_b.push_back(j);
    }
    layer.gate_logits.resize(layer.gate_subset.size());
    layer.link_a_logits.resize(layer.link_subset_a.size());
    layer.link_b_logits.resize(layer.link_subset_b.size());
    for (auto& w : layer.gate_logits)
      w = logit(rng);
    for (auto& w : layer.link_a_logits)
      w = logit(rng);
    for (auto& w : layer.link_b_logits)
      w = logit(rng);
    prev = layer.out_dim;
    p.logic.push_back(std::move(layer));
  }

  std::normal_distribution<double> coef(0.0, kCoefInitStd);
  const auto sum_in = p.sum_in_dim();
  p.sum.threshold = config.sum_threshold;
  p.sum.link_logits.assign(sum_in, 0.0);
  p.sum.coefficients.resize(sum_in);
  for (auto& c : p.sum.coefficients)
    c = coef(rng);
  p.validate();
  return p;
}

double mse_loss(std::span<const double> predictions, std::span<const double> targets) {
  if (predictions.size() != targets.size())
    throw DataError("prediction and target lengths differ");
  if (predictions.empty())
    throw DataError("mse of empty vectors");
  double total = 0.0;
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    double d = predictions[i] - targets[i];
    total += d * d;
  }
  return total / static_cast<double>(predictions.size());
}

double decay_temperature(double tau, double gamma, double tau_min) {
  return std::max(tau * gamma, tau_min);
}

Adam::Adam(const NetworkParams& params, double learning_rate)
    : lr_(learning_rate),
      m_(ParamTensors::zeros_like(params)),
      v_(ParamTensors::zeros_like(params)) {}

void Adam::step(NetworkParams& params, ParamTensors& grads, unsigned groups) {
  constexpr double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
  ++t_;
  const double c1 = 1.0 - std::pow(beta1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2, static_cast<double>(t_));
  auto values = trainable_tensors(params);
  auto g = tensor_views(grads);
  auto m = tensor_views(m_);
  auto v = tensor_views(v_);
  if (values.size() != g.size())
    throw ShapeError("gradient shape does not match the network");
  for (std::size_t k = 0; k < values.size(); ++k) {
    if (!(groups & group_bit(values[k].group)))
      continue;
    auto w = values[k].values;
    auto gk = g[k].values;
    auto mk = m[k].values;
    auto vk = v[k].values;
    for (std::size_t i = 0; i < w.size(); ++i) {
      mk[i] = beta1 * mk[i] + (1.0 - beta1) * gk[i];
      vk[i] = beta2 * vk[i] + (1.0 - beta2) * gk[i] * gk[i];
      w[i] -= lr_ * (mk[i] / c1) / (std::sqrt(vk[i] / c2) + eps);
    }
  }
  ++params.revision;
}

TrainResult train(const Dataset& data, const TrainConfig& config, const Dataset* validation,
                  const ProgressFn& progress) {
  config.validate();
  if (data.n_rows == 0)
    throw DataError("training set is empty");

  TrainResult result;
  result.params = init_params(data, config);
  NetworkParams& params = result.params;
  Adam optimizer(params, config.learning_rate);

  const unsigned all_groups = 0x7f;
  const unsigned phase_one = group_bit(ParamGroup::bias) | group_bit(ParamGroup::slope) |
                             group_bit(ParamGroup::gate) | group_bit(ParamGroup::sum_coef);
  const unsigned phase_two = group_bit(ParamGroup::link_a) | group_bit(ParamGroup::link_b) |
                             group_bit(ParamGroup::sum_link);
  const int phase_one_epochs = (config.epochs + 1) / 2;

  double tau = config.tau_schedule ? config.tau_init : 1.0;
  auto decay = [&] {
    if (config.tau_schedule)
      tau = decay_temperature(tau, config.gamma, config.tau_min);
  };

  // Shuffling uses its own stream so that it does not depend on how many
  // draws initialization consumed.
  std::mt19937_64 rng(config.seed ^ 0x9e3779b97f4a7c15ull);
  std::vector<std::size_t> order(data.n_rows);
  std::iota(order.begin(), order.end(), std::size_t{0});
  const auto batch = static_cast<std::size_t>(config.batch_size);
  Tape tape;

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    unsigned groups = all_groups;
    if (config.two_phase)
      groups = epoch < phase_one_epochs ? phase_one : phase_two;

    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < order.size(); start += batch) {
      const std::size_t end = std::min(order.size(), start + batch);
      const double scale = 2.0 / static_cast<double>(end - start);
      SoftPass pass(params, tau, config.ste);
      auto acc = pass.make_accumulator();
      for (std::size_t i = start; i < end; ++i) {
        const auto r = order[i];
        const double err = pass.forward(data.row(r), tape) - data.target[r];
        epoch_loss += err * err;
        pass.backward(tape, scale * err, *acc);
      }
      if (!std::isfinite(epoch_loss))
        throw DivergenceError("training diverged in epoch " + std::to_string(epoch + 1) +
                              " (non-finite loss)");
      auto grads = pass.gradients(*acc);
      optimizer.step(params, grads, groups);
      if (config.decay == DecayGranularity::per_batch)
        decay();
    }
    if (config.decay == DecayGranularity::per_epoch)
      decay();

    const double mse = epoch_loss / static_cast<double>(data.n_rows);
    result.report.epoch_mse.push_back(mse);
    result.report.tau.push_back(tau);
    if (progress)
      progress({epoch + 1, mse, tau});
  }

  result.tau_final = tau;
  if (validation && validation->n_rows > 0) {
    std::vector<double> pred(validation->n_rows);
    for (std::size_t i = 0; i < validation->n_rows; ++i)
      pred[i] = network_forward_hard_params(validation->row(i), params, tau);
    result.report.validation_mse = mse_loss(pred, validation->target);
  }
  return result;
}

Metrics regression_metrics(std::span<const double> predictions, std::span<const double> targets) {
  if (predictions.size() != targets.size())
    throw MetricError("prediction and target lengths differ");
  if (predictions.empty())
    throw MetricError("no rows to score");
  const double n = static_cast<double>(targets.size());
  double mean = std::accumulate(targets.begin(), targets.end(), 0.0) / n;
  double ss_res = 0.0, ss_tot = 0.0, abs_err = 0.0;
  for (std::size_t i = 0; i < targets.size(); ++i) {
    double e = predictions[i] - targets[i];
    ss_res += e * e;
    abs_err += std::abs(e);
    double d = targets[i] - mean;
    ss_tot += d * d;
  }
  Metrics m;
  m.rmse = std::sqrt(ss_res / n);
  m.mae = abs_err / n;
  if (ss_tot > 0.0)
    m.r2 = 1.0 - ss_res / ss_tot;
  return m;
}

Metrics evaluate_predictions(std::span<const double> predictions_std, const Dataset& data) {
  if (predictions_std.size() != data.n_rows)
    throw MetricError("prediction count does not match the dataset");
  std::vector<double> pred(data.n_rows), truth(data.n_rows);
  for (std::size_t i = 0; i < data.n_rows; ++i) {
    pred[i] = data.schema.destandardize(predictions_std[i]);
    truth[i] = data.schema.destandardize(data.target[i]);
  }
  auto m = regression_metrics(pred, truth);
  if (!m.r2)
    throw MetricError("R² is undefined: target has zero variance");
  return m;
}

Metrics evaluate(const HardCircuit& circuit, const Dataset& data) {
  return evaluate_predictions(predict_standardized(circuit, data), data);
}

Metrics evaluate(const NetworkParams& params, double tau_final, const Dataset& data) {
  std::vector<double> pred(data.n_rows);
  for (std::size_t i = 0; i < data.n_rows; ++i)
    pred[i] = network_forward_hard_params(data.row(i), params, tau_final);
  return evaluate_predictions(pred, data);
}

}  // namespace dln
