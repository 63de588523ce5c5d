#include "dln/network.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "dln/errors.hpp"

namespace dln {

double sigmoid(double z) {
  if (z >= 0.0)
    return 1.0 / (1.0 + std::exp(-z));
  double e = std::exp(z);
  return e / (1.0 + e);
}

namespace {

// First maximum wins, so ties resolve toward the lowest candidate position;
// candidate lists are ascending, which makes that the lowest original index.
std::size_t argmax(std::span<const double> values) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < values.size(); ++i)
    if (values[i] > values[best])
      best = i;
  return best;
}

void softmax(std::span<const double> logits, double tau, std::span<double> out) {
  double hi = -std::numeric_limits<double>::infinity();
  for (double w : logits)
    hi = std::max(hi, w);
  double total = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    out[i] = std::exp((logits[i] - hi) / tau);
    total += out[i];
  }
  for (auto& p : out)
    p /= total;
}

bool heaviside(double slope, double x, double bias) {
  return slope * (x - bias) >= 0.0;
}

void require(bool ok, const std::string& what) {
  if (!ok)
    throw ShapeError(what);
}

}  // namespace

// ---------------------------------------------------------------------------
// Parameter containers

std::vector<double> LogicLayer::dense_gate_logits(std::size_t neuron) const {
  std::vector<double> dense(kGateCount, -std::numeric_limits<double>::infinity());
  for (std::size_t q = 0; q < gate_choices; ++q)
    dense[gate_subset[neuron * gate_choices + q]] = gate_logits[neuron * gate_choices + q];
  return dense;
}

int LogicLayer::selected_gate(std::size_t neuron) const {
  return gate_subset[neuron * gate_choices + argmax(gate_row(neuron))];
}

std::size_t LogicLayer::selected_link_a(std::size_t neuron) const {
  return link_subset_a[neuron * link_choices + argmax(link_a_row(neuron))];
}

std::size_t LogicLayer::selected_link_b(std::size_t neuron) const {
  return link_subset_b[neuron * link_choices + argmax(link_b_row(neuron))];
}

std::vector<std::size_t> NetworkParams::widths() const {
  std::vector<std::size_t> out;
  out.push_back(threshold.size());
  for (const auto& layer : logic)
    out.push_back(layer.out_dim);
  return out;
}

std::size_t NetworkParams::sum_in_dim() const {
  return logic.empty() ? threshold.size() : logic.back().out_dim;
}

void NetworkParams::validate() const {
  const auto n_thr = threshold.size();
  require(threshold.slope.size() == n_thr && threshold.source_feature.size() == n_thr,
          "threshold layer tensors disagree in size");
  for (auto f : threshold.source_feature)
    require(f < n_features, "threshold neuron reads a feature outside the input");
  std::size_t prev = n_thr;
  for (std::size_t l = 0; l < logic.size(); ++l) {
    const auto& layer = logic[l];
    const auto expected = l == 0 ? n_thr : prev + (concat_inputs ? n_thr : 0);
    require(layer.in_dim == expected, "logic layer " + std::to_string(l) + " expects " +
                                          std::to_string(expected) + " inputs, has " +
                                          std::to_string(layer.in_dim));
    require(layer.gate_choices >= 1 && layer.gate_choices <= kGateCount,
            "empty or oversized gate subset");
    require(layer.link_choices >= 1 && layer.link_choices <= layer.in_dim,
            "empty or oversized link subset");
    require(layer.gate_subset.size() == layer.out_dim * layer.gate_choices &&
                layer.gate_logits.size() == layer.gate_subset.size(),
            "gate tensors disagree in size");
    require(layer.link_subset_a.size() == layer.out_dim * layer.link_choices &&
                layer.link_subset_b.size() == layer.link_subset_a.size() &&
                layer.link_a_logits.size() == layer.link_subset_a.size() &&
                layer.link_b_logits.size() == layer.link_subset_a.size(),
            "link tensors disagree in size");
    for (auto k : layer.gate_subset)
      require(k < kGateCount, "gate subset entry out of range");
    for (auto j : layer.link_subset_a)
      require(j < layer.in_dim, "link subset entry out of range");
    for (auto j : layer.link_subset_b)
      require(j < layer.in_dim, "link subset entry out of range");
    prev = layer.out_dim;
  }
  require(sum.link_logits.size() == sum.coefficients.size(), "sum tensors disagree in size");
  require(sum.size() == sum_in_dim(), "sum layer width does not match its input");
  require(sum.threshold > 0.0 && sum.threshold < 1.0, "sum threshold outside (0, 1)");
}

ParamTensors ParamTensors::zeros_like(const NetworkParams& params) {
  ParamTensors t;
  t.bias.assign(params.threshold.size(), 0.0);
  t.slope.assign(params.threshold.size(), 0.0);
  for (const auto& layer : params.logic) {
    t.logic.push_back({std::vector<double>(layer.gate_logits.size(), 0.0),
                       std::vector<double>(layer.link_a_logits.size(), 0.0),
                       std::vector<double>(layer.link_b_logits.size(), 0.0)});
  }
  t.sum_link.assign(params.sum.size(), 0.0);
  t.sum_coef.assign(params.sum.size(), 0.0);
  return t;
}

double ParamTensors::max_abs() const {
  double m = 0.0;
  auto scan = [&m](const std::vector<double>& v) {
    for (double x : v)
      m = std::max(m, std::abs(x));
  };
  scan(bias);
  scan(slope);
  for (const auto& l : logic) {
    scan(l.gate);
    scan(l.link_a);
    scan(l.link_b);
  }
  scan(sum_link);
  scan(sum_coef);
  return m;
}

const char* to_string(ParamGroup group) {
  switch (group) {
    case ParamGroup::bias: return "bias";
    case ParamGroup::slope: return "slope";
    case ParamGroup::gate: return "gate_logits";
    case ParamGroup::link_a: return "link_a_logits";
    case ParamGroup::link_b: return "link_b_logits";
    case ParamGroup::sum_link: return "sum_link_logits";
    case ParamGroup::sum_coef: return "sum_coefficients";
  }
  return "?";
}

std::vector<TensorRef> trainable_tensors(NetworkParams& params) {
  std::vector<TensorRef> out;
  out.push_back({ParamGroup::bias, params.threshold.bias});
  out.push_back({ParamGroup::slope, params.threshold.slope});
  for (auto& layer : params.logic) {
    out.push_back({ParamGroup::gate, layer.gate_logits});
    out.push_back({ParamGroup::link_a, layer.link_a_logits});
    out.push_back({ParamGroup::link_b, layer.link_b_logits});
  }
  out.push_back({ParamGroup::sum_link, params.sum.link_logits});
  out.push_back({ParamGroup::sum_coef, params.sum.coefficients});
  return out;
}

std::vector<TensorRef> tensor_views(ParamTensors& t) {
  std::vector<TensorRef> out;
  out.push_back({ParamGroup::bias, t.bias});
  out.push_back({ParamGroup::slope, t.slope});
  for (auto& layer : t.logic) {
    out.push_back({ParamGroup::gate, layer.gate});
    out.push_back({ParamGroup::link_a, layer.link_a});
    out.push_back({ParamGroup::link_b, layer.link_b});
  }
  out.push_back({ParamGroup::sum_link, t.sum_link});
  out.push_back({ParamGroup::sum_coef, t.sum_coef});
  return out;
}

// ---------------------------------------------------------------------------
// Layer-level passes

std::vector<double> threshold_forward_soft(std::span<const double> features,
                                           const ThresholdLayer& layer, double tau, bool ste) {
  if (!(tau > 0.0))
    throw ShapeError("temperature must be positive");
  std::vector<double> out(layer.size());
  for (std::size_t t = 0; t < layer.size(); ++t) {
    double x = features[layer.source_feature[t]];
    if (ste)
      out[t] = heaviside(layer.slope[t], x, layer.bias[t]) ? 1.0 : 0.0;
    else
      out[t] = sigmoid(layer.slope[t] * (x - layer.bias[t]) / tau);
  }
  return out;
}

std::vector<std::uint8_t> threshold_forward_hard(std::span<const double> features,
                                                 const ThresholdLayer& layer) {
  std::vector<std::uint8_t> out(layer.size());
  for (std::size_t t = 0; t < layer.size(); ++t)
    out[t] = heaviside(layer.slope[t], features[layer.source_feature[t]], layer.bias[t]);
  return out;
}

std::vector<double> logic_forward_soft(std::span<const double> x, const LogicLayer& layer,
                                       double tau, bool ste_select) {
  if (!(tau > 0.0))
    throw ShapeError("temperature must be positive");
  if (layer.gate_choices == 0 || layer.link_choices == 0)
    throw ShapeError("logic neuron has an empty candidate subset");
  require(x.size() == layer.in_dim, "logic layer input width mismatch");
  std::vector<double> out(layer.out_dim);
  std::vector<double> p_gate(layer.gate_choices), p_a(layer.link_choices), p_b(layer.link_choices);
  for (std::size_t i = 0; i < layer.out_dim; ++i) {
    if (ste_select) {
      std::fill(p_gate.begin(), p_gate.end(), 0.0);
      std::fill(p_a.begin(), p_a.end(), 0.0);
      std::fill(p_b.begin(), p_b.end(), 0.0);
      p_gate[argmax(layer.gate_row(i))] = 1.0;
      p_a[argmax(layer.link_a_row(i))] = 1.0;
      p_b[argmax(layer.link_b_row(i))] = 1.0;
    } else {
      softmax(layer.gate_row(i), tau, p_gate);
      softmax(layer.link_a_row(i), tau, p_a);
      softmax(layer.link_b_row(i), tau, p_b);
    }
    double a = 0.0, b = 0.0;
    for (std::size_t t = 0; t < layer.link_choices; ++t) {
      a += p_a[t] * x[layer.link_subset_a[i * layer.link_choices + t]];
      b += p_b[t] * x[layer.link_subset_b[i * layer.link_choices + t]];
    }
    double y = 0.0;
    for (std::size_t q = 0; q < layer.gate_choices; ++q)
      y += p_gate[q] * soft_gate_eval(layer.gate_subset[i * layer.gate_choices + q], a, b);
    out[i] = y;
  }
  return out;
}

std::vector<std::uint8_t> logic_forward_hard(std::span<const std::uint8_t> x,
                                             const LogicLayer& layer) {
  require(x.size() == layer.in_dim, "logic layer input width mismatch");
  std::vector<std::uint8_t> out(layer.out_dim);
  for (std::size_t i = 0; i < layer.out_dim; ++i) {
    bool a = x[layer.selected_link_a(i)] != 0;
    bool b = x[layer.selected_link_b(i)] != 0;
    out[i] = hard_gate_eval(layer.selected_gate(i), a, b);
  }
  return out;
}

double sum_forward_soft(std::span<const double> x, const SumLayer& layer, double tau) {
  require(x.size() == layer.size(), "sum layer input width mismatch");
  double y = 0.0;
  for (std::size_t j = 0; j < layer.size(); ++j)
    y += sigmoid(layer.link_logits[j] / tau) * layer.coefficients[j] * x[j];
  return y;
}

bool sum_link_retained(const SumLayer& layer, std::size_t j, double tau) {
  return sigmoid(layer.link_logits[j] / tau) >= layer.threshold;
}

double sum_forward_hard(std::span<const std::uint8_t> x, const SumLayer& layer, double tau_final) {
  require(x.size() == layer.size(), "sum layer input width mismatch");
  double y = 0.0;
  for (std::size_t j = 0; j < layer.size(); ++j)
    if (sum_link_retained(layer, j, tau_final))
      y += layer.coefficients[j] * (x[j] ? 1.0 : 0.0);
  return y;
}

double network_forward_hard_params(std::span<const double> features, const NetworkParams& params,
                                   double tau_final) {
  require(features.size() == params.n_features, "feature vector width mismatch");
  auto thr = threshold_forward_hard(features, params.threshold);
  std::vector<std::uint8_t> x = thr;
  for (std::size_t l = 0; l < params.logic.size(); ++l) {
    if (l > 0 && params.concat_inputs)
      x.insert(x.end(), thr.begin(), thr.end());
    x = logic_forward_hard(x, params.logic[l]);
  }
  return sum_forward_hard(x, params.sum, tau_final);
}

// ---------------------------------------------------------------------------
// Fused soft pass

struct SoftPass::Impl {
  struct Layer {
    std::vector<double> gate_prob;  // [out * gate_choices]
    std::vector<double> mix_soft;   // [out * 4]
    std::vector<double> mix_fwd;    // [out * 4]
    std::vector<double> prob_a;     // [out * link_choices]
    std::vector<double> prob_b;
    std::vector<std::uint32_t> pick_a;  // selected input index
    std::vector<std::uint32_t> pick_b;
  };
  std::vector<Layer> layers;
  std::vector<double> sum_soft;
  std::vector<double> sum_fwd;
  std::uint64_t revision = 0;
  // Scratch space for backward; SoftPass::backward is not reentrant across
  // threads on the same pass.
  mutable std::vector<std::vector<double>> d_layer;
  mutable std::vector<double> d_threshold;
};

SoftPass::SoftPass(const NetworkParams& params, double tau, SteConfig ste)
    : params_(params), tau_(tau), ste_(ste), impl_(std::make_unique<Impl>()) {
  if (!(tau > 0.0) || !std::isfinite(tau))
    throw ShapeError("temperature must be positive");
  params.validate();
  impl_->revision = params.revision;
  for (const auto& layer : params.logic) {
    Impl::Layer st;
    const auto g = layer.gate_choices;
    const auto l = layer.link_choices;
    st.gate_prob.resize(layer.out_dim * g);
    st.mix_soft.assign(layer.out_dim * 4, 0.0);
    st.mix_fwd.assign(layer.out_dim * 4, 0.0);
    st.prob_a.resize(layer.out_dim * l);
    st.prob_b.resize(layer.out_dim * l);
    st.pick_a.resize(layer.out_dim);
    st.pick_b.resize(layer.out_dim);
    for (std::size_t i = 0; i < layer.out_dim; ++i) {
      std::span<double> p(st.gate_prob.data() + i * g, g);
      softmax(layer.gate_row(i), tau, p);
      for (std::size_t q = 0; q < g; ++q) {
        const auto& c = gate_coefficients(layer.gate_subset[i * g + q]);
        for (int m = 0; m < 4; ++m)
          st.mix_soft[i * 4 + m] += p[q] * c[m];
      }
      if (ste.gate_select) {
        const auto& c = gate_coefficients(layer.selected_gate(i));
        std::copy(c.begin(), c.end(), st.mix_fwd.begin() + static_cast<std::ptrdiff_t>(i * 4));
      } else {
        std::copy_n(st.mix_soft.begin() + static_cast<std::ptrdiff_t>(i * 4), 4,
                    st.mix_fwd.begin() + static_cast<std::ptrdiff_t>(i * 4));
      }
      softmax(layer.link_a_row(i), tau, {st.prob_a.data() + i * l, l});
      softmax(layer.link_b_row(i), tau, {st.prob_b.data() + i * l, l});
      st.pick_a[i] = static_cast<std::uint32_t>(layer.selected_link_a(i));
      st.pick_b[i] = static_cast<std::uint32_t>(layer.selected_link_b(i));
    }
    impl_->layers.push_back(std::move(st));
    impl_->d_layer.emplace_back(layer.out_dim);
  }
  const auto& sum = params.sum;
  impl_->sum_soft.resize(sum.size());
  impl_->sum_fwd.resize(sum.size());
  for (std::size_t j = 0; j < sum.size(); ++j) {
    impl_->sum_soft[j] = sigmoid(sum.link_logits[j] / tau);
    impl_->sum_fwd[j] = ste.sum_gate ? (impl_->sum_soft[j] >= sum.threshold ? 1.0 : 0.0)
                                     : impl_->sum_soft[j];
  }
  impl_->d_threshold.resize(params.threshold.size());
}

SoftPass::~SoftPass() = default;

double SoftPass::forward(std::span<const double> features, Tape& tape) const {
  const auto& p = params_;
  if (p.revision != impl_->revision)
    throw ShapeError("parameters changed after the soft pass was prepared");
  require(features.size() == p.n_features, "feature vector width mismatch");

  tape.owner = this;
  tape.revision = impl_->revision;
  tape.features.assign(features.begin(), features.end());

  const auto& thr = p.threshold;
  const auto n_thr = thr.size();
  tape.threshold_soft.resize(n_thr);
  tape.threshold_out.resize(n_thr);
  for (std::size_t t = 0; t < n_thr; ++t) {
    double x = features[thr.source_feature[t]];
    double s = sigmoid(thr.slope[t] * (x - thr.bias[t]) / tau_);
    tape.threshold_soft[t] = s;
    tape.threshold_out[t] = ste_.threshold ? (heaviside(thr.slope[t], x, thr.bias[t]) ? 1.0 : 0.0) : s;
  }

  tape.logic.resize(p.logic.size());
  const std::vector<double>* prev = &tape.threshold_out;
  for (std::size_t l = 0; l < p.logic.size(); ++l) {
    const auto& layer = p.logic[l];
    const auto& st = impl_->layers[l];
    auto& rec = tape.logic[l];
    rec.input.assign(prev->begin(), prev->end());
    if (l > 0 && p.concat_inputs)
      rec.input.insert(rec.input.end(), tape.threshold_out.begin(), tape.threshold_out.end());
    rec.a.resize(layer.out_dim);
    rec.b.resize(layer.out_dim);
    rec.out.resize(layer.out_dim);
    const auto lc = layer.link_choices;
    const double* in = rec.input.data();
    for (std::size_t i = 0; i < layer.out_dim; ++i) {
      double a = 0.0, b = 0.0;
      if (ste_.link_select) {
        a = in[st.pick_a[i]];
        b = in[st.pick_b[i]];
      } else {
        const auto* sa = &layer.link_subset_a[i * lc];
        const auto* sb = &layer.link_subset_b[i * lc];
        const auto* pa = &st.prob_a[i * lc];
        const auto* pb = &st.prob_b[i * lc];
        for (std::size_t t = 0; t < lc; ++t) {
          a += pa[t] * in[sa[t]];
          b += pb[t] * in[sb[t]];
        }
      }
      const double* m = &st.mix_fwd[i * 4];
      rec.a[i] = a;
      rec.b[i] = b;
      rec.out[i] = m[0] + m[1] * a + m[2] * b + m[3] * a * b;
    }
    prev = &rec.out;
  }

  double y = 0.0;
  const auto& sum = p.sum;
  for (std::size_t j = 0; j < sum.size(); ++j)
    y += impl_->sum_fwd[j] * sum.coefficients[j] * (*prev)[j];
  tape.prediction = y;
  return y;
}

std::unique_ptr<GradientAccumulator> SoftPass::make_accumulator() const {
  auto acc = std::make_unique<GradientAccumulator>();
  acc->bias.assign(params_.threshold.size(), 0.0);
  acc->slope.assign(params_.threshold.size(), 0.0);
  for (const auto& layer : params_.logic) {
    acc->logic.push_back({std::vector<double>(layer.out_dim * 4, 0.0),
                          std::vector<double>(layer.out_dim * layer.link_choices, 0.0),
                          std::vector<double>(layer.out_dim * layer.link_choices, 0.0)});
  }
  acc->sum_gate.assign(params_.sum.size(), 0.0);
  acc->sum_coef.assign(params_.sum.size(), 0.0);
  return acc;
}

void GradientAccumulator::clear() {
  std::fill(bias.begin(), bias.end(), 0.0);
  std::fill(slope.begin(), slope.end(), 0.0);
  for (auto& l : logic) {
    std::fill(l.moments.begin(), l.moments.end(), 0.0);
    std::fill(l.prob_a.begin(), l.prob_a.end(), 0.0);
    std::fill(l.prob_b.begin(), l.prob_b.end(), 0.0);
  }
  std::fill(sum_gate.begin(), sum_gate.end(), 0.0);
  std::fill(sum_coef.begin(), sum_coef.end(), 0.0);
}

void SoftPass::backward(const Tape& tape, double d_prediction, GradientAccumulator& acc) const {
  const auto& p = params_;
  if (tape.owner != this || tape.revision != impl_->revision || p.revision != impl_->revision)
    throw ShapeError("tape does not belong to this soft pass (stale or mismatched)");
  require(acc.sum_coef.size() == p.sum.size() && acc.logic.size() == p.logic.size(),
          "gradient accumulator shaped for a different network");

  auto& d_thr = impl_->d_threshold;
  std::fill(d_thr.begin(), d_thr.end(), 0.0);

  // SumLayer
  const auto& last_in = p.logic.empty() ? tape.threshold_out : tape.logic.back().out;
  std::vector<double>* d_out = p.logic.empty() ? &d_thr : &impl_->d_layer.back();
  if (!p.logic.empty())
    d_out->assign(p.logic.back().out_dim, 0.0);
  for (std::size_t j = 0; j < p.sum.size(); ++j) {
    const double g = impl_->sum_soft[j];
    const double c = p.sum.coefficients[j];
    const double x = last_in[j];
    acc.sum_coef[j] += d_prediction * g * x;
    acc.sum_gate[j] += d_prediction * c * x;
    (*d_out)[j] = d_prediction * g * c;
  }

  // LogicLayers, last to first. d_layer[l] holds d(loss)/d(output of layer l)
  // on entry and is reused for the input gradient of layer l.
  std::vector<double> d_in;
  for (std::size_t li = p.logic.size(); li-- > 0;) {
    const auto& layer = p.logic[li];
    const auto& st = impl_->layers[li];
    const auto& rec = tape.logic[li];
    auto& ga = acc.logic[li];
    const std::vector<double>& dy = impl_->d_layer[li];
    d_in.assign(layer.in_dim, 0.0);
    const auto lc = layer.link_choices;
    for (std::size_t i = 0; i < layer.out_dim; ++i) {
      const double d = dy[i];
      if (d == 0.0)
        continue;
      const double a = rec.a[i];
      const double b = rec.b[i];
      double* mom = &ga.moments[i * 4];
      mom[0] += d;
      mom[1] += d * a;
      mom[2] += d * b;
      mom[3] += d * a * b;
      const double* m = &st.mix_soft[i * 4];
      const double da = d * (m[1] + m[3] * b);
      const double db = d * (m[2] + m[3] * a);
      const auto* sa = &layer.link_subset_a[i * lc];
      const auto* sb = &layer.link_subset_b[i * lc];
      const auto* pa = &st.prob_a[i * lc];
      const auto* pb = &st.prob_b[i * lc];
      double* gpa = &ga.prob_a[i * lc];
      double* gpb = &ga.prob_b[i * lc];
      for (std::size_t t = 0; t < lc; ++t) {
        gpa[t] += da * rec.input[sa[t]];
        gpb[t] += db * rec.input[sb[t]];
        d_in[sa[t]] += da * pa[t];
        d_in[sb[t]] += db * pb[t];
      }
    }
    // Route the input gradient to the previous layer and, for concatenated
    // inputs, to the threshold outputs.
    if (li == 0) {
      for (std::size_t t = 0; t < d_thr.size(); ++t)
        d_thr[t] += d_in[t];
    } else {
      const auto prev_width = p.logic[li - 1].out_dim;
      auto& d_prev = impl_->d_layer[li - 1];
      d_prev.assign(d_in.begin(), d_in.begin() + static_cast<std::ptrdiff_t>(prev_width));
      if (p.concat_inputs)
        for (std::size_t t = 0; t < d_thr.size(); ++t)
          d_thr[t] += d_in[prev_width + t];
    }
  }

  // ThresholdLayer
  const auto& thr = p.threshold;
  for (std::size_t t = 0; t < thr.size(); ++t) {
    const double d = d_thr[t];
    if (d == 0.0)
      continue;
    const double s = tape.threshold_soft[t];
    const double ds = s * (1.0 - s) / tau_;
    const double x = tape.features[thr.source_feature[t]];
    acc.slope[t] += d * ds * (x - thr.bias[t]);
    acc.bias[t] -= d * ds * thr.slope[t];
  }
}

ParamTensors SoftPass::gradients(const GradientAccumulator& acc) const {
  const auto& p = params_;
  ParamTensors g = ParamTensors::zeros_like(p);
  g.bias = acc.bias;
  g.slope = acc.slope;

  // d/dlogit_j of sum_t dP_t p_t with p = softmax(logit / tau).
  auto softmax_backward = [this](const double* prob, const double* d_prob, double* out,
                                 std::size_t n) {
    double dot = 0.0;
    for (std::size_t t = 0; t < n; ++t)
      dot += prob[t] * d_prob[t];
    for (std::size_t t = 0; t < n; ++t)
      out[t] = prob[t] * (d_prob[t] - dot) / tau_;
  };

  std::vector<double> d_gate;
  for (std::size_t l = 0; l < p.logic.size(); ++l) {
    const auto& layer = p.logic[l];
    const auto& st = impl_->layers[l];
    const auto& ga = acc.logic[l];
    auto& out = g.logic[l];
    const auto gc = layer.gate_choices;
    const auto lc = layer.link_choices;
    d_gate.resize(gc);
    for (std::size_t i = 0; i < layer.out_dim; ++i) {
      const double* mom = &ga.moments[i * 4];
      for (std::size_t q = 0; q < gc; ++q) {
        const auto& c = gate_coefficients(layer.gate_subset[i * gc + q]);
        d_gate[q] = c[0] * mom[0] + c[1] * mom[1] + c[2] * mom[2] + c[3] * mom[3];
      }
      softmax_backward(&st.gate_prob[i * gc], d_gate.data(), &out.gate[i * gc], gc);
      softmax_backward(&st.prob_a[i * lc], &ga.prob_a[i * lc], &out.link_a[i * lc], lc);
      softmax_backward(&st.prob_b[i * lc], &ga.prob_b[i * lc], &out.link_b[i * lc], lc);
    }
  }

  for (std::size_t j = 0; j < p.sum.size(); ++j) {
    const double s = impl_->sum_soft[j];
    g.sum_link[j] = acc.sum_gate[j] * s * (1.0 - s) / tau_;
    g.sum_coef[j] = acc.sum_coef[j];
  }
  return g;
}

SoftResult network_forward_soft(std::span<const double> features, const NetworkParams& params,
                                double tau, SteConfig ste) {
  auto pass = std::make_shared<const SoftPass>(params, tau, ste);
  SoftResult result{0.0, {}, pass};
  result.prediction = pass->forward(features, result.tape);
  return result;
}

ParamTensors network_backward(const NetworkParams& params, const SoftResult& forward,
                              double d_prediction) {
  if (!forward.pass)
    throw ShapeError("forward result carries no soft pass");
  if (params.revision != forward.tape.revision)
    throw ShapeError("tape recorded against a different parameter revision");
  auto acc = forward.pass->make_accumulator();
  forward.pass->backward(forward.tape, d_prediction, *acc);
  return forward.pass->gradients(*acc);
}

}  // namespace dln
