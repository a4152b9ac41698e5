#include "greendc/nn.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include <json.hpp>

#include "greendc/util.hpp"

namespace greendc::nn {

LayerSpec LayerSpec::conv(int filters, int width, int stride, Activation act) {
  return LayerSpec{LayerKind::conv1d, filters, width, stride, act, RecurrentCell::gated};
}

LayerSpec LayerSpec::recurrent(int units, RecurrentCell cell) {
  return LayerSpec{LayerKind::recurrent, units, 1, 1, Activation::tanh, cell};
}

LayerSpec LayerSpec::dense(int units, Activation act) {
  return LayerSpec{LayerKind::dense, units, 1, 1, act, RecurrentCell::gated};
}

void NetworkConfig::validate() const {
  if (window < 1 || features < 1) throw ShapeError("window and feature count must be >= 1");
  if (actions < 2) throw ShapeError("policy head needs at least 2 actions");
  if (hidden.empty()) throw ShapeError("network needs at least one hidden layer");
  bool collapsed = false;
  for (std::size_t i = 0; i < hidden.size(); ++i) {
    const auto& l = hidden[i];
    if (l.units < 1) throw ShapeError("layer " + std::to_string(i) + " has no units");
    if (l.kind == LayerKind::conv1d && (l.width < 1 || l.stride < 1))
      throw ShapeError("conv layer " + std::to_string(i) + " needs width and stride >= 1");
    if (collapsed && l.kind != LayerKind::dense)
      throw ShapeError("layer " + std::to_string(i) +
                       ": sequence layers cannot follow a recurrent or dense layer");
    if (l.kind != LayerKind::conv1d) collapsed = true;
  }
}

NetworkConfig NetworkConfig::desk_default(int window, int features, int actions) {
  NetworkConfig c;
  c.window = window;
  c.features = features;
  c.actions = actions;
  c.hidden = {LayerSpec::conv(8, 3, 1), LayerSpec::conv(16, 3, 2), LayerSpec::recurrent(16),
              LayerSpec::dense(32), LayerSpec::dense(16)};
  return c;
}

NetworkConfig NetworkConfig::dense_only(int window, int features, int actions, std::vector<int> units,
                                        Activation act) {
  NetworkConfig c;
  c.window = window;
  c.features = features;
  c.actions = actions;
  for (int u : units) c.hidden.push_back(LayerSpec::dense(u, act));
  return c;
}

std::string to_string(LayerKind k) {
  switch (k) {
    case LayerKind::conv1d: return "conv1d";
    case LayerKind::recurrent: return "recurrent";
    case LayerKind::dense: return "dense";
  }
  return "?";
}

std::string to_string(Activation a) {
  switch (a) {
    case Activation::relu: return "relu";
    case Activation::tanh: return "tanh";
    case Activation::linear: return "linear";
  }
  return "?";
}

std::string to_string(RecurrentCell c) { return c == RecurrentCell::gated ? "gated" : "elman"; }

LayerKind layer_kind_from(const std::string& s) {
  if (s == "conv1d") return LayerKind::conv1d;
  if (s == "recurrent") return LayerKind::recurrent;
  if (s == "dense") return LayerKind::dense;
  throw ShapeError("unknown layer kind '" + s + "'");
}

Activation activation_from(const std::string& s) {
  if (s == "relu") return Activation::relu;
  if (s == "tanh") return Activation::tanh;
  if (s == "linear") return Activation::linear;
  throw ShapeError("unknown activation '" + s + "'");
}

RecurrentCell recurrent_cell_from(const std::string& s) {
  if (s == "gated") return RecurrentCell::gated;
  if (s == "elman") return RecurrentCell::elman;
  throw ShapeError("unknown recurrent cell '" + s + "'");
}

std::size_t TensorShape::size() const {
  return std::accumulate(dims.begin(), dims.end(), std::size_t{1}, std::multiplies<>());
}

void GradientSet::zero() { std::fill(values.begin(), values.end(), 0.0); }

namespace {

inline double activate(Activation a, double x) {
  switch (a) {
    case Activation::relu: return x > 0.0 ? x : 0.0;
    case Activation::tanh: return std::tanh(x);
    case Activation::linear: return x;
  }
  return x;
}

// Derivative expressed through the pre-activation and the output.
inline double activate_grad(Activation a, double pre, double out) {
  switch (a) {
    case Activation::relu: return pre > 0.0 ? 1.0 : 0.0;
    case Activation::tanh: return 1.0 - out * out;
    case Activation::linear: return 1.0;
  }
  return 1.0;
}

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// Four interleaved partial sums; the fixed order keeps results reproducible.
inline double dot(const double* a, const double* b, std::size_t n) {
  double s0 = 0.0, s1 = 0.0, s2 = 0.0, s3 = 0.0;
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    s0 += a[i] * b[i];
    s1 += a[i + 1] * b[i + 1];
    s2 += a[i + 2] * b[i + 2];
    s3 += a[i + 3] * b[i + 3];
  }
  for (; i < n; ++i) s0 += a[i] * b[i];
  return (s0 + s1) + (s2 + s3);
}

// y += a * x
inline void axpy(double a, const double* x, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += a * x[i];
}

// y[r] += sum_c m[r*cols + c] * x[c]
inline void matvec_add(const double* m, const double* x, double* y, std::size_t rows, std::size_t cols) {
  for (std::size_t r = 0; r < rows; ++r) y[r] += dot(m + r * cols, x, cols);
}

// Valid kernel taps [k0, k1) for output position o of a padded conv.
inline void tap_range(std::size_t o, std::size_t stride, std::size_t pad, std::size_t width, std::size_t len,
                      std::size_t& k0, std::size_t& k1) {
  const std::ptrdiff_t start = static_cast<std::ptrdiff_t>(o * stride) - static_cast<std::ptrdiff_t>(pad);
  k0 = start < 0 ? static_cast<std::size_t>(-start) : 0;
  const std::ptrdiff_t end = std::min<std::ptrdiff_t>(start + static_cast<std::ptrdiff_t>(width),
                                                      static_cast<std::ptrdiff_t>(len));
  k1 = end > start ? static_cast<std::size_t>(end - start) : 0;
  if (k1 < k0) k1 = k0;
}

// x[c] += sum_r m[r*cols + c] * y[r]
inline void matvec_t_add(const double* m, const double* y, double* x, std::size_t rows, std::size_t cols) {
  for (std::size_t r = 0; r < rows; ++r) {
    const double* row = m + r * cols;
    const double yr = y[r];
    if (yr == 0.0) continue;
    for (std::size_t c = 0; c < cols; ++c) x[c] += row[c] * yr;
  }
}

// g[r*cols + c] += y[r] * x[c]
inline void outer_add(double* g, const double* y, const double* x, std::size_t rows, std::size_t cols) {
  for (std::size_t r = 0; r < rows; ++r) {
    const double yr = y[r];
    if (yr == 0.0) continue;
    double* row = g + r * cols;
    for (std::size_t c = 0; c < cols; ++c) row[c] += yr * x[c];
  }
}

}  // namespace

void softmax(std::span<const double> logits, std::span<double> probs) {
  const double mx = *std::max_element(logits.begin(), logits.end());
  double sum = 0.0;
  for (std::size_t k = 0; k < logits.size(); ++k) {
    probs[k] = std::exp(logits[k] - mx);
    sum += probs[k];
  }
  for (double& p : probs) p /= sum;
}

Network::Network(NetworkConfig config) : config_(std::move(config)) {
  config_.validate();
  std::size_t len = static_cast<std::size_t>(config_.window);
  std::size_t ch = static_cast<std::size_t>(config_.features);
  std::size_t offset = 0;
  auto add = [&](const std::string& name, std::vector<std::size_t> dims, const std::string& group) {
    TensorShape s{name, std::move(dims), offset};
    offset += s.size();
    shapes_.push_back(s);
    groups_.push_back(group);
    return s.offset;
  };
  for (std::size_t i = 0; i < config_.hidden.size(); ++i) {
    const auto& spec = config_.hidden[i];
    const auto units = static_cast<std::size_t>(spec.units);
    const std::string p = std::to_string(i) + ".";
    Layout l{};
    l.in_len = len;
    l.in_ch = ch;
    switch (spec.kind) {
      case LayerKind::conv1d: {
        const auto width = static_cast<std::size_t>(spec.width);
        const auto stride = static_cast<std::size_t>(spec.stride);
        l.out_len = (len + stride - 1) / stride;
        const std::size_t needed = (l.out_len - 1) * stride + width;
        l.pad_left = needed > len ? (needed - len) / 2 : 0;
        l.out_ch = units;
        l.w = add(p + "conv.weight", {units, width, ch}, "conv");
        l.b = add(p + "conv.bias", {units}, "conv");
        break;
      }
      case LayerKind::recurrent:
        l.out_len = 1;
        l.out_ch = units;
        l.w = add(p + "recurrent.input_weight", {units, ch}, "recurrent");
        l.u = add(p + "recurrent.hidden_weight", {units, units}, "recurrent");
        l.b = add(p + "recurrent.bias", {units}, "recurrent");
        if (spec.cell == RecurrentCell::gated) {
          l.gw = add(p + "recurrent.gate_input_weight", {units, ch}, "recurrent");
          l.gu = add(p + "recurrent.gate_hidden_weight", {units, units}, "recurrent");
          l.gb = add(p + "recurrent.gate_bias", {units}, "recurrent");
        }
        break;
      case LayerKind::dense:
        l.in_ch = len * ch;
        l.in_len = 1;
        l.out_len = 1;
        l.out_ch = units;
        l.w = add(p + "dense.weight", {units, len * ch}, "dense");
        l.b = add(p + "dense.bias", {units}, "dense");
        break;
    }
    layout_.push_back(l);
    len = l.out_len;
    ch = l.out_ch;
  }
  trunk_size_ = len * ch;
  const auto k = static_cast<std::size_t>(config_.actions);
  policy_w_ = add("policy.weight", {k, trunk_size_}, "policy");
  policy_b_ = add("policy.bias", {k}, "policy");
  value_w_ = add("value.weight", {1, trunk_size_}, "value");
  value_b_ = add("value.bias", {1}, "value");
  count_ = offset;
}

std::string Network::group_of(const TensorShape& shape) const {
  for (std::size_t i = 0; i < shapes_.size(); ++i)
    if (shapes_[i].offset == shape.offset && shapes_[i].name == shape.name) return groups_[i];
  return "";
}

ParameterSet Network::initialize(std::uint64_t seed) const {
  ParameterSet ps;
  ps.values.assign(count_, 0.0);
  ps.shapes = shapes_;
  ps.optimizer.m.assign(count_, 0.0);
  ps.optimizer.v.assign(count_, 0.0);
  Rng rng(seed);
  for (const auto& s : shapes_) {
    if (s.dims.size() < 2) continue;  // biases start at zero
    // dims: [out, ..., in]; receptive field folded into both fans for conv.
    const std::size_t out = s.dims.front();
    const std::size_t in = s.size() / out;
    const std::size_t field = s.dims.size() == 3 ? s.dims[1] : 1;
    const double limit = std::sqrt(6.0 / static_cast<double>(in + out * field));
    for (std::size_t i = 0; i < s.size(); ++i)
      ps.values[s.offset + i] = (2.0 * rng.uniform() - 1.0) * limit;
  }
  return ps;
}

const Output& Network::forward(std::span<const double> params, std::span<const double> obs,
                               ForwardCache& cache) const {
  if (params.size() != count_)
    throw ShapeError("parameter vector has " + std::to_string(params.size()) + " entries, expected " +
                     std::to_string(count_));
  if (obs.size() != input_size())
    throw ShapeError("observation has " + std::to_string(obs.size()) + " entries, expected " +
                     std::to_string(input_size()));
  const double* P = params.data();
  cache.layers.resize(layout_.size());
  std::span<const double> x = obs;
  for (std::size_t i = 0; i < layout_.size(); ++i) {
    const auto& l = layout_[i];
    const auto& spec = config_.hidden[i];
    auto& c = cache.layers[i];
    c.in_len = l.in_len;
    c.in_ch = l.in_ch;
    c.out_len = l.out_len;
    c.out_ch = l.out_ch;
    c.input.assign(x.begin(), x.end());
    switch (spec.kind) {
      case LayerKind::conv1d: {
        const auto width = static_cast<std::size_t>(spec.width);
        const auto stride = static_cast<std::size_t>(spec.stride);
        c.pre.assign(l.out_len * l.out_ch, 0.0);
        c.output.resize(l.out_len * l.out_ch);
        for (std::size_t o = 0; o < l.out_len; ++o) {
          std::size_t k0, k1;
          tap_range(o, stride, l.pad_left, width, l.in_len, k0, k1);
          // Taps k0..k1 cover contiguous input rows and contiguous weights.
          const double* in = c.input.data() + (o * stride + k0 - l.pad_left) * l.in_ch;
          const std::size_t n = (k1 - k0) * l.in_ch;
          for (std::size_t f = 0; f < l.out_ch; ++f) {
            const double acc = P[l.b + f] + dot(P + l.w + (f * width + k0) * l.in_ch, in, n);
            c.pre[o * l.out_ch + f] = acc;
            c.output[o * l.out_ch + f] = activate(spec.activation, acc);
          }
        }
        break;
      }
      case LayerKind::recurrent: {
        const std::size_t n = l.out_ch, steps = l.in_len;
        const bool gated = spec.cell == RecurrentCell::gated;
        c.states.assign((steps + 1) * n, 0.0);
        c.pre.assign(steps * n, 0.0);
        c.gates.assign(gated ? steps * n : 0, 0.0);
        std::vector<double> mixed(n), gate_pre(n);
        for (std::size_t t = 0; t < steps; ++t) {
          const double* xt = c.input.data() + t * l.in_ch;
          const double* hprev = c.states.data() + t * n;
          double* a = c.pre.data() + t * n;
          if (gated) {
            double* g = c.gates.data() + t * n;
            for (std::size_t u = 0; u < n; ++u) gate_pre[u] = P[l.gb + u];
            matvec_add(P + l.gw, xt, gate_pre.data(), n, l.in_ch);
            matvec_add(P + l.gu, hprev, gate_pre.data(), n, n);
            for (std::size_t u = 0; u < n; ++u) {
              g[u] = sigmoid(gate_pre[u]);
              mixed[u] = g[u] * hprev[u];
            }
          } else {
            std::copy(hprev, hprev + n, mixed.begin());
          }
          for (std::size_t u = 0; u < n; ++u) a[u] = P[l.b + u];
          matvec_add(P + l.w, xt, a, n, l.in_ch);
          matvec_add(P + l.u, mixed.data(), a, n, n);
          double* h = c.states.data() + (t + 1) * n;
          for (std::size_t u = 0; u < n; ++u) h[u] = std::tanh(a[u]);
        }
        c.output.assign(c.states.end() - static_cast<std::ptrdiff_t>(n), c.states.end());
        break;
      }
      case LayerKind::dense: {
        c.pre.assign(P + l.b, P + l.b + l.out_ch);
        matvec_add(P + l.w, c.input.data(), c.pre.data(), l.out_ch, l.in_ch);
        c.output.resize(l.out_ch);
        for (std::size_t u = 0; u < l.out_ch; ++u) c.output[u] = activate(spec.activation, c.pre[u]);
        break;
      }
    }
    x = c.output;
  }
  cache.trunk.assign(x.begin(), x.end());
  const auto K = static_cast<std::size_t>(config_.actions);
  auto& out = cache.out;
  out.logits.assign(P + policy_b_, P + policy_b_ + K);
  matvec_add(P + policy_w_, cache.trunk.data(), out.logits.data(), K, trunk_size_);
  out.probs.resize(K);
  softmax(out.logits, out.probs);
  double v = P[value_b_];
  for (std::size_t i = 0; i < trunk_size_; ++i) v += P[value_w_ + i] * cache.trunk[i];
  out.value = v;
  return out;
}

Output Network::forward(std::span<const double> params, std::span<const double> obs) const {
  ForwardCache cache;
  return forward(params, obs, cache);
}

void Network::backward(std::span<const double> params, const ForwardCache& cache,
                       std::span<const double> dlogits, double dvalue, std::span<double> grad) const {
  if (params.size() != count_ || grad.size() != count_)
    throw ShapeError("backward: parameter/gradient size mismatch");
  const auto K = static_cast<std::size_t>(config_.actions);
  if (dlogits.size() != K) throw ShapeError("backward: dlogits has wrong size");
  if (cache.layers.size() != layout_.size() || cache.trunk.size() != trunk_size_)
    throw ShapeError("backward: cache does not match this network");
  const double* P = params.data();
  double* G = grad.data();

  // Heads.
  std::vector<double> dy(trunk_size_, 0.0);
  outer_add(G + policy_w_, dlogits.data(), cache.trunk.data(), K, trunk_size_);
  for (std::size_t k = 0; k < K; ++k) G[policy_b_ + k] += dlogits[k];
  matvec_t_add(P + policy_w_, dlogits.data(), dy.data(), K, trunk_size_);
  if (dvalue != 0.0) {
    for (std::size_t i = 0; i < trunk_size_; ++i) {
      G[value_w_ + i] += dvalue * cache.trunk[i];
      dy[i] += dvalue * P[value_w_ + i];
    }
    G[value_b_] += dvalue;
  }

  std::vector<double> dx;
  for (std::size_t i = layout_.size(); i-- > 0;) {
    const auto& l = layout_[i];
    const auto& spec = config_.hidden[i];
    const auto& c = cache.layers[i];
    const bool need_dx = i > 0;
    dx.assign(need_dx ? l.in_len * l.in_ch : 0, 0.0);
    switch (spec.kind) {
      case LayerKind::conv1d: {
        const auto width = static_cast<std::size_t>(spec.width);
        const auto stride = static_cast<std::size_t>(spec.stride);
        for (std::size_t o = 0; o < l.out_len; ++o) {
          std::size_t k0, k1;
          tap_range(o, stride, l.pad_left, width, l.in_len, k0, k1);
          const std::size_t row = (o * stride + k0 - l.pad_left) * l.in_ch;
          const std::size_t n = (k1 - k0) * l.in_ch;
          for (std::size_t f = 0; f < l.out_ch; ++f) {
            const std::size_t idx = o * l.out_ch + f;
            const double d = dy[idx] * activate_grad(spec.activation, c.pre[idx], c.output[idx]);
            if (d == 0.0) continue;
            G[l.b + f] += d;
            const std::size_t wo = l.w + (f * width + k0) * l.in_ch;
            axpy(d, c.input.data() + row, G + wo, n);
            if (need_dx) axpy(d, P + wo, dx.data() + row, n);
          }
        }
        break;
      }
      case LayerKind::recurrent: {
        const std::size_t n = l.out_ch, steps = l.in_len;
        const bool gated = spec.cell == RecurrentCell::gated;
        std::vector<double> dh(dy.begin(), dy.end()), da(n), dmixed(n), dgate(n), mixed(n);
        for (std::size_t t = steps; t-- > 0;) {
          const double* xt = c.input.data() + t * l.in_ch;
          const double* hprev = c.states.data() + t * n;
          const double* h = c.states.data() + (t + 1) * n;
          for (std::size_t u = 0; u < n; ++u) da[u] = dh[u] * (1.0 - h[u] * h[u]);
          const double* g = gated ? c.gates.data() + t * n : nullptr;
          for (std::size_t u = 0; u < n; ++u) mixed[u] = gated ? g[u] * hprev[u] : hprev[u];
          outer_add(G + l.w, da.data(), xt, n, l.in_ch);
          outer_add(G + l.u, da.data(), mixed.data(), n, n);
          for (std::size_t u = 0; u < n; ++u) G[l.b + u] += da[u];
          if (need_dx) matvec_t_add(P + l.w, da.data(), dx.data() + t * l.in_ch, n, l.in_ch);
          std::fill(dmixed.begin(), dmixed.end(), 0.0);
          matvec_t_add(P + l.u, da.data(), dmixed.data(), n, n);
          if (gated) {
            for (std::size_t u = 0; u < n; ++u) {
              dh[u] = dmixed[u] * g[u];
              dgate[u] = dmixed[u] * hprev[u] * g[u] * (1.0 - g[u]);
            }
            outer_add(G + l.gw, dgate.data(), xt, n, l.in_ch);
            outer_add(G + l.gu, dgate.data(), hprev, n, n);
            for (std::size_t u = 0; u < n; ++u) G[l.gb + u] += dgate[u];
            if (need_dx) matvec_t_add(P + l.gw, dgate.data(), dx.data() + t * l.in_ch, n, l.in_ch);
            matvec_t_add(P + l.gu, dgate.data(), dh.data(), n, n);
          } else {
            dh = dmixed;
          }
        }
        break;
      }
      case LayerKind::dense: {
        std::vector<double> d(l.out_ch);
        for (std::size_t u = 0; u < l.out_ch; ++u)
          d[u] = dy[u] * activate_grad(spec.activation, c.pre[u], c.output[u]);
        outer_add(G + l.w, d.data(), c.input.data(), l.out_ch, l.in_ch);
        for (std::size_t u = 0; u < l.out_ch; ++u) G[l.b + u] += d[u];
        if (need_dx) matvec_t_add(P + l.w, d.data(), dx.data(), l.out_ch, l.in_ch);
        break;
      }
    }
    dy.swap(dx);
  }
}

bool adam_step(ParameterSet& ps, std::span<const double> grads, const AdamConfig& cfg) {
  const std::size_t n = ps.values.size();
  if (grads.size() != n) throw ShapeError("adam_step: gradient size mismatch");
  auto& st = ps.optimizer;
  if (st.m.size() != n) st.m.assign(n, 0.0);
  if (st.v.size() != n) st.v.assign(n, 0.0);
  if (!std::all_of(grads.begin(), grads.end(), [](double g) { return std::isfinite(g); })) {
    ++st.skipped;
    return false;
  }
  ++st.step;
  const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(st.step));
  const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(st.step));
  for (std::size_t i = 0; i < n; ++i) {
    st.m[i] = cfg.beta1 * st.m[i] + (1.0 - cfg.beta1) * grads[i];
    st.v[i] = cfg.beta2 * st.v[i] + (1.0 - cfg.beta2) * grads[i] * grads[i];
    const double mhat = st.m[i] / c1;
    const double vhat = st.v[i] / c2;
    ps.values[i] -= cfg.learning_rate * mhat / (std::sqrt(vhat) + cfg.epsilon);
  }
  return true;
}

// ---------------------------------------------------------------------------
// Finite-difference check

double relative_error(double analytic, double numeric) {
  const double diff = std::abs(analytic - numeric);
  return diff / std::max(std::abs(analytic) + std::abs(numeric), 1e-6);
}

double GradCheckReport::max_rel_error() const {
  double m = 0.0;
  for (const auto& g : groups) m = std::max(m, g.max_rel_error);
  return m;
}

GradCheckReport grad_check(const NetworkConfig& config, std::uint64_t seed, std::size_t coords_per_group,
                           double h) {
  Network net(config);
  Rng rng(seed);
  auto ps = net.initialize(seed);
  // Nonzero biases and jittered weights exercise every term.
  for (double& v : ps.values) v += 0.1 * rng.normal();
  std::vector<double> obs(net.input_size());
  for (double& o : obs) o = rng.uniform();
  const auto K = static_cast<std::size_t>(config.actions);
  std::vector<double> coef(K);
  for (double& c : coef) c = 2.0 * rng.uniform() - 1.0;
  const double value_coef = 2.0 * rng.uniform() - 1.0;

  auto loss = [&](std::span<const double> p) {
    const auto out = net.forward(p, obs);
    double l = value_coef * out.value;
    for (std::size_t k = 0; k < K; ++k) l += coef[k] * out.probs[k];
    return l;
  };

  ForwardCache cache;
  const auto& out = net.forward(ps.values, obs, cache);
  double mean = 0.0;
  for (std::size_t k = 0; k < K; ++k) mean += out.probs[k] * coef[k];
  std::vector<double> dlogits(K);
  for (std::size_t k = 0; k < K; ++k) dlogits[k] = out.probs[k] * (coef[k] - mean);
  std::vector<double> grad(net.parameter_count(), 0.0);
  net.backward(ps.values, cache, dlogits, value_coef, grad);

  GradCheckReport report;
  for (const std::string group : {"conv", "recurrent", "dense", "policy", "value"}) {
    std::vector<std::size_t> idx;
    for (const auto& s : net.shapes())
      if (net.group_of(s) == group)
        for (std::size_t i = 0; i < s.size(); ++i) idx.push_back(s.offset + i);
    if (idx.empty()) continue;
    GradCheckGroup g{group, 0, 0.0};
    const std::size_t n = std::min(coords_per_group, idx.size());
    std::vector<double> p = ps.values;
    for (std::size_t j = 0; j < n; ++j) {
      const std::size_t at = idx.size() <= coords_per_group ? idx[j] : idx[rng.below(idx.size())];
      const double orig = p[at];
      p[at] = orig + h;
      const double up = loss(p);
      p[at] = orig - h;
      const double down = loss(p);
      p[at] = orig;
      const double numeric = (up - down) / (2.0 * h);
      g.max_rel_error = std::max(g.max_rel_error, relative_error(grad[at], numeric));
      ++g.coordinates;
    }
    report.groups.push_back(g);
  }
  return report;
}

// ---------------------------------------------------------------------------
// Checkpoints

namespace {

constexpr const char* kCheckpointFormat = "greendc.parameters";
constexpr int kCheckpointVersion = 1;

nlohmann::json config_to_json(const NetworkConfig& c) {
  nlohmann::json layers = nlohmann::json::array();
  for (const auto& l : c.hidden) {
    layers.push_back({{"kind", to_string(l.kind)},
                      {"units", l.units},
                      {"width", l.width},
                      {"stride", l.stride},
                      {"activation", to_string(l.activation)},
                      {"cell", to_string(l.cell)}});
  }
  return {{"window", c.window}, {"features", c.features}, {"actions", c.actions}, {"hidden", layers}};
}

NetworkConfig config_from_json(const nlohmann::json& j) {
  NetworkConfig c;
  c.window = j.at("window").get<int>();
  c.features = j.at("features").get<int>();
  c.actions = j.at("actions").get<int>();
  for (const auto& l : j.at("hidden")) {
    LayerSpec s;
    s.kind = layer_kind_from(l.at("kind").get<std::string>());
    s.units = l.at("units").get<int>();
    s.width = l.at("width").get<int>();
    s.stride = l.at("stride").get<int>();
    s.activation = activation_from(l.at("activation").get<std::string>());
    s.cell = recurrent_cell_from(l.at("cell").get<std::string>());
    c.hidden.push_back(s);
  }
  return c;
}

}  // namespace

std::string checkpoint_to_json(const NetworkConfig& config, const ParameterSet& ps) {
  nlohmann::ordered_json j;
  j["format"] = kCheckpointFormat;
  j["version"] = kCheckpointVersion;
  j["config"] = config_to_json(config);
  nlohmann::json shapes = nlohmann::json::array();
  for (const auto& s : ps.shapes) shapes.push_back({{"name", s.name}, {"dims", s.dims}, {"offset", s.offset}});
  j["shapes"] = shapes;
  j["values"] = ps.values;
  j["optimizer"] = {{"step", ps.optimizer.step},
                    {"skipped", ps.optimizer.skipped},
                    {"m", ps.optimizer.m},
                    {"v", ps.optimizer.v}};
  return j.dump();
}

void checkpoint_from_json(const std::string& text, NetworkConfig& config, ParameterSet& ps) {
  try {
    const auto j = nlohmann::json::parse(text);
    if (j.at("format").get<std::string>() != kCheckpointFormat)
      throw ShapeError("not a parameter checkpoint");
    if (j.at("version").get<int>() != kCheckpointVersion)
      throw ShapeError("unsupported checkpoint version " + std::to_string(j.at("version").get<int>()));
    NetworkConfig cfg = config_from_json(j.at("config"));
    Network net(cfg);
    ParameterSet out;
    for (const auto& s : j.at("shapes"))
      out.shapes.push_back({s.at("name").get<std::string>(), s.at("dims").get<std::vector<std::size_t>>(),
                            s.at("offset").get<std::size_t>()});
    if (out.shapes != net.shapes()) throw ShapeError("checkpoint shape table does not match its config");
    out.values = j.at("values").get<std::vector<double>>();
    if (out.values.size() != net.parameter_count()) throw ShapeError("checkpoint value count mismatch");
    const auto& opt = j.at("optimizer");
    out.optimizer.step = opt.at("step").get<std::int64_t>();
    out.optimizer.skipped = opt.at("skipped").get<std::int64_t>();
    out.optimizer.m = opt.at("m").get<std::vector<double>>();
    out.optimizer.v = opt.at("v").get<std::vector<double>>();
    config = std::move(cfg);
    ps = std::move(out);
  } catch (const nlohmann::json::exception& e) {
    throw ShapeError(std::string("malformed checkpoint: ") + e.what());
  }
}

void save_checkpoint(const std::string& path, const NetworkConfig& config, const ParameterSet& params) {
  write_file(path, checkpoint_to_json(config, params));
}

void load_checkpoint(const std::string& path, NetworkConfig& config, ParameterSet& params) {
  checkpoint_from_json(read_file(path), config, params);
}

}  // namespace greendc::nn
