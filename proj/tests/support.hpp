#pragma once

// Helpers shared by the unit tests and the acceptance runner.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "dln/circuit.hpp"
#include "dln/data.hpp"
#include "dln/network.hpp"
#include "dln/trainer.hpp"

namespace dln::testing {

inline Dataset random_dataset(std::mt19937_64& rng, std::size_t rows, std::size_t features) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::normal_distribution<double> n(0.0, 1.0);
  std::vector<double> x(rows * features), y(rows);
  for (auto& v : x)
    v = u(rng);
  for (auto& v : y)
    v = n(rng);
  return make_dataset(features, std::move(x), std::move(y));
}

/// y = 1 if x > cut else 0 on one uniform feature, standardized.
inline Dataset step_dataset(std::size_t rows, double cut, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> x(rows), y(rows);
  for (std::size_t i = 0; i < rows; ++i) {
    x[i] = u(rng);
    y[i] = x[i] > cut ? 1.0 : 0.0;
  }
  double mean = 0.0, var = 0.0;
  for (double v : y)
    mean += v;
  mean /= static_cast<double>(rows);
  for (double v : y)
    var += (v - mean) * (v - mean);
  const double sd = std::sqrt(var / static_cast<double>(rows));
  for (double& v : y)
    v = (v - mean) / sd;
  return make_dataset(1, std::move(x), std::move(y));
}

/// Network with every trainable value drawn at random.
inline NetworkParams random_params(std::mt19937_64& rng, std::size_t n_features,
                                   std::vector<std::size_t> widths, int subspace = 8,
                                   bool concat = true, int thresholds_per_feature = 2) {
  Dataset d = random_dataset(rng, 16, n_features);
  TrainConfig c;
  c.widths = std::move(widths);
  c.subspace_size = subspace;
  c.concat_inputs = concat;
  c.thresholds_per_feature = thresholds_per_feature;
  c.seed = rng();
  NetworkParams p = init_params(d, c);
  std::uniform_real_distribution<double> bias(0.05, 0.95), slope(-4.0, 4.0);
  std::normal_distribution<double> n(0.0, 1.0);
  for (auto& b : p.threshold.bias)
    b = bias(rng);
  for (auto& s : p.threshold.slope)
    s = slope(rng);
  for (auto& l : p.logic) {
    for (auto& w : l.gate_logits)
      w = n(rng);
    for (auto& w : l.link_a_logits)
      w = n(rng);
    for (auto& w : l.link_b_logits)
      w = n(rng);
  }
  for (auto& s : p.sum.link_logits)
    s = n(rng);
  for (auto& c2 : p.sum.coefficients)
    c2 = n(rng);
  return p;
}

struct FdReport {
  double worst = 0.0;
  ParamGroup group = ParamGroup::bias;
  std::size_t checked = 0;
  std::vector<bool> group_seen = std::vector<bool>(kParamGroupCount, false);
};

/// Compares analytic gradients of the prediction with central differences.
/// Relative error is |a - n| / max(|a|, |n|, floor).
inline FdReport finite_difference_check(const NetworkParams& params, std::span<const double> x,
                                         double tau, SteConfig ste, double h = 1e-6,
                                         double floor = 1e-4) {
  FdReport rep;
  NetworkParams work = params;
  auto fwd = network_forward_soft(x, work, tau, ste);
  ParamTensors grad = network_backward(work, fwd, 1.0);
  auto values = trainable_tensors(work);
  auto g = tensor_views(grad);
  for (std::size_t k = 0; k < values.size(); ++k) {
    auto v = values[k].values;
    for (std::size_t i = 0; i < v.size(); ++i) {
      const double orig = v[i];
      v[i] = orig + h;
      const double up = network_forward_soft(x, work, tau, ste).prediction;
      v[i] = orig - h;
      const double down = network_forward_soft(x, work, tau, ste).prediction;
      v[i] = orig;
      const double numeric = (up - down) / (2.0 * h);
      const double analytic = g[k].values[i];
      const double rel =
          std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), floor});
      ++rep.checked;
      rep.group_seen[static_cast<int>(values[k].group)] = true;
      if (rel > rep.worst) {
        rep.worst = rel;
        rep.group = values[k].group;
      }
    }
  }
  return rep;
}

/// Random circuit whose threshold atoms each read their own feature at
/// bias 0.5, so binary feature vectors enumerate atom assignments. A few
/// duplicate atoms, out-of-range atoms and constants are mixed in.
inline HardCircuit random_circuit(std::mt19937_64& rng, std::size_t n_atoms, std::size_t n_gates,
                                  std::size_t n_links) {
  HardCircuit c;
  c.n_features = n_atoms;
  std::uniform_int_distribution<int> coin(0, 1);
  std::uniform_int_distribution<int> gate(0, 15);
  std::normal_distribution<double> coef(0.0, 1.0);
  for (std::size_t f = 0; f < n_atoms; ++f)
    c.nodes.push_back(CircuitNode::threshold(f, 0.5, coin(rng) ? 1 : -1));
  c.nodes.push_back(CircuitNode::threshold(0, 0.5, 1));   // duplicate of atom 0 or its mirror
  c.nodes.push_back(CircuitNode::threshold(0, 1.5, 1));   // never fires
  c.nodes.push_back(CircuitNode::threshold(0, -0.5, 1));  // always fires
  c.nodes.push_back(CircuitNode::constant(false));
  c.nodes.push_back(CircuitNode::constant(true));
  int layer = 1;
  for (std::size_t g = 0; g < n_gates; ++g) {
    std::uniform_int_distribution<std::size_t> pick(0, c.nodes.size() - 1);
    // Bias operand choice toward recent nodes to get depth.
    auto choose = [&] {
      if (coin(rng))
        return pick(rng);
      std::uniform_int_distribution<std::size_t> recent(c.nodes.size() > 6 ? c.nodes.size() - 6 : 0,
                                                        c.nodes.size() - 1);
      return recent(rng);
    };
    const std::size_t a = choose();
    const std::size_t b = coin(rng) && coin(rng) ? a : choose();
    if (g % 8 == 7)
      ++layer;
    c.nodes.push_back(CircuitNode::gate_of(gate(rng), a, b, layer));
  }
  std::vector<std::size_t> candidates(c.nodes.size());
  for (std::size_t i = 0; i < candidates.size(); ++i)
    candidates[i] = i;
  std::shuffle(candidates.begin(), candidates.end(), rng);
  // Links favour late nodes like a trained network's sum layer.
  std::size_t index = 0;
  for (std::size_t j = 0; j < n_links && j < candidates.size(); ++j) {
    std::uniform_int_distribution<std::size_t> late(c.nodes.size() / 2, c.nodes.size() - 1);
    const std::size_t node = coin(rng) ? late(rng) : candidates[j];
    index += 1 + static_cast<std::size_t>(coin(rng));
    c.links.push_back({node, coef(rng), index});
  }
  std::uniform_real_distribution<double> mean(-5.0, 5.0), sd(0.5, 3.0);
  c.target_mean = mean(rng);
  c.target_std = sd(rng);
  return c;
}

/// Feature vector realising atom assignment `bits` for random_circuit.
inline std::vector<double> assignment(std::uint64_t bits, std::size_t n) {
  std::vector<double> x(n);
  for (std::size_t f = 0; f < n; ++f)
    x[f] = (bits >> f) & 1u ? 1.0 : 0.0;
  return x;
}

/// Best single split of (x, y) by exhaustive search over all cut positions.
inline double brute_force_best_cut(std::vector<double> x, std::vector<double> y) {
  std::vector<std::size_t> order(x.size());
  for (std::size_t i = 0; i < order.size(); ++i)
    order[i] = i;
  std::sort(order.begin(), order.end(), [&](auto a, auto b) { return x[a] < x[b]; });
  double best = -1.0, best_cut = 0.0;
  for (std::size_t k = 1; k < order.size(); ++k) {
    if (x[order[k]] == x[order[k - 1]])
      continue;
    double sl = 0, sr = 0, ql = 0, qr = 0;
    for (std::size_t i = 0; i < order.size(); ++i) {
      double v = y[order[i]];
      (i < k ? sl : sr) += v;
      (i < k ? ql : qr) += v * v;
    }
    const double nl = static_cast<double>(k), nr = static_cast<double>(order.size() - k);
    const double sse = (ql - sl * sl / nl) + (qr - sr * sr / nr);
    if (best < 0 || sse < best) {
      best = sse;
      best_cut = 0.5 * (x[order[k - 1]] + x[order[k]]);
    }
  }
  return best_cut;
}

}  // namespace dln::testing
