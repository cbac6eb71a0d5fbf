#pragma once

// Fully connected feedforward network: ReLU hidden layers, softmax output,
// hand-written backpropagation and plain SGD. Parameters live in one flat
// vector in canonical order (layer-major; row-major weights, then biases).

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "cachenet/core.hpp"

namespace cachenet {

/// Widths [n_1, ..., n_L]: input, hidden..., output.
struct LayerSpec {
  std::vector<std::size_t> sizes;

  LayerSpec() = default;
  LayerSpec(std::initializer_list<std::size_t> il) : sizes(il) { validate(); }
  explicit LayerSpec(std::vector<std::size_t> s) : sizes(std::move(s)) { validate(); }

  void validate() const {
    detail::require(sizes.size() >= 2, "a network needs at least an input and an output layer");
    for (auto n : sizes) detail::require(n >= 1, "layer widths must be >= 1");
  }

  std::size_t layers() const { return sizes.size() - 1; }  // weight layers
  std::size_t input_width() const { return sizes.front(); }
  std::size_t output_width() const { return sizes.back(); }

  std::size_t param_count() const {
    std::size_t n = 0;
    for (std::size_t l = 0; l + 1 < sizes.size(); ++l) n += sizes[l + 1] * sizes[l] + sizes[l + 1];
    return n;
  }

  friend bool operator==(const LayerSpec&, const LayerSpec&) = default;
};

class NetParams {
 public:
  NetParams() = default;
  explicit NetParams(LayerSpec spec) : spec_(std::move(spec)), flat_(spec_.param_count(), 0.0) { index(); }
  NetParams(LayerSpec spec, std::vector<double> flat) : spec_(std::move(spec)), flat_(std::move(flat)) {
    detail::require_same_length(flat_.size(), spec_.param_count(), "NetParams flat view");
    index();
  }

  const LayerSpec& spec() const { return spec_; }
  std::span<const double> flat() const { return flat_; }
  std::span<double> flat() { return flat_; }

  std::size_t fan_in(std::size_t l) const { return spec_.sizes[l]; }
  std::size_t fan_out(std::size_t l) const { return spec_.sizes[l + 1]; }

  /// Row-major [out][in] weight block of layer l.
  std::span<double> weights(std::size_t l) { return {flat_.data() + offsets_[l], fan_out(l) * fan_in(l)}; }
  std::span<const double> weights(std::size_t l) const {
    return {flat_.data() + offsets_[l], fan_out(l) * fan_in(l)};
  }
  std::span<double> biases(std::size_t l) {
    return {flat_.data() + offsets_[l] + fan_out(l) * fan_in(l), fan_out(l)};
  }
  std::span<const double> biases(std::size_t l) const {
    return {flat_.data() + offsets_[l] + fan_out(l) * fan_in(l), fan_out(l)};
  }

  double& weight(std::size_t l, std::size_t out, std::size_t in) { return weights(l)[out * fan_in(l) + in]; }
  double weight(std::size_t l, std::size_t out, std::size_t in) const { return weights(l)[out * fan_in(l) + in]; }

  friend bool operator==(const NetParams& a, const NetParams& b) {
    return a.spec_ == b.spec_ && a.flat_ == b.flat_;
  }

 private:
  void index() {
    offsets_.clear();
    std::size_t off = 0;
    for (std::size_t l = 0; l < spec_.layers(); ++l) {
      offsets_.push_back(off);
      off += fan_out(l) * fan_in(l) + fan_out(l);
    }
  }

  LayerSpec spec_;
  std::vector<double> flat_;
  std::vector<std::size_t> offsets_;
};

namespace detail {

inline void softmax_inplace(std::span<double> z) {
  const double m = *std::max_element(z.begin(), z.end());
  double total = 0.0;
  for (auto& x : z) {
    x = std::exp(x - m);
    total += x;
  }
  for (auto& x : z) x /= total;
}

/// Activations per layer: acts[0] is the input, acts[L] the softmax output.
/// pre[l] holds the pre-activation of weight layer l.
struct ForwardTrace {
  std::vector<std::vector<double>> acts;
  std::vector<std::vector<double>> pre;
};

inline ForwardTrace forward_trace(const NetParams& p, std::span<const double> input) {
  const auto& spec = p.spec();
  require_same_length(input.size(), spec.input_width(), "forward input");
  for (double x : input) require(std::isfinite(x), "forward: non-finite input");
  ForwardTrace tr;
  tr.acts.emplace_back(input.begin(), input.end());
  for (std::size_t l = 0; l < spec.layers(); ++l) {
    const auto w = p.weights(l);
    const auto b = p.biases(l);
    const auto& a = tr.acts.back();
    const std::size_t in = p.fan_in(l), out = p.fan_out(l);
    std::vector<double> z(out);
    for (std::size_t i = 0; i < out; ++i) {
      double acc = b[i];
      const double* row = w.data() + i * in;
      for (std::size_t j = 0; j < in; ++j) acc += row[j] * a[j];
      z[i] = acc;
    }
    tr.pre.push_back(z);
    if (l + 1 < spec.layers()) {
      for (auto& x : z) x = std::max(0.0, x);
    } else {
      softmax_inplace(z);
    }
    tr.acts.push_back(std::move(z));
  }
  return tr;
}

}  // namespace detail

/// Network output: ReLU hidden layers, softmax over the final layer.
inline std::vector<double> forward(const NetParams& p, std::span<const double> input) {
  return std::move(detail::forward_trace(p, input).acts.back());
}

inline std::vector<double> forward(const NetParams& p, const StateVector& input) {
  return forward(p, input.span());
}

/// Pre-softmax logits of the output layer.
inline std::vector<double> logits(const NetParams& p, std::span<const double> input) {
  return std::move(detail::forward_trace(p, input).pre.back());
}

/// dLoss/dtheta given dLoss/do at the softmax output.
inline NetParams backward(const NetParams& p, std::span<const double> input, std::span<const double> output_error) {
  const auto& spec = p.spec();
  detail::require_same_length(output_error.size(), spec.output_width(), "backward output error");
  const auto tr = detail::forward_trace(p, input);
  NetParams grad(spec);

  // Through the softmax: dz_i = o_i (g_i - sum_j g_j o_j).
  const auto& o = tr.acts.back();
  double dot = 0.0;
  for (std::size_t i = 0; i < o.size(); ++i) dot += output_error[i] * o[i];
  std::vector<double> delta(o.size());
  for (std::size_t i = 0; i < o.size(); ++i) delta[i] = o[i] * (output_error[i] - dot);

  for (std::size_t l = spec.layers(); l-- > 0;) {
    const std::size_t in = p.fan_in(l), out = p.fan_out(l);
    const auto& a = tr.acts[l];
    auto gw = grad.weights(l);
    auto gb = grad.biases(l);
    for (std::size_t i = 0; i < out; ++i) {
      gb[i] = delta[i];
      if (delta[i] == 0.0) continue;
      double* row = gw.data() + i * in;
      for (std::size_t j = 0; j < in; ++j) row[j] = delta[i] * a[j];
    }
    if (l == 0) break;
    const auto w = p.weights(l);
    std::vector<double> prev(in, 0.0);
    for (std::size_t i = 0; i < out; ++i) {
      if (delta[i] == 0.0) continue;
      const double* row = w.data() + i * in;
      for (std::size_t j = 0; j < in; ++j) prev[j] += row[j] * delta[i];
    }
    const auto& z = tr.pre[l - 1];
    for (std::size_t j = 0; j < in; ++j) prev[j] = z[j] > 0.0 ? prev[j] : 0.0;
    delta = std::move(prev);
  }
  return grad;
}

inline void add_scaled(NetParams& p, const NetParams& g, double scale) {
  detail::require(p.spec() == g.spec(), "parameter shapes differ");
  auto dst = p.flat();
  auto src = g.flat();
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += scale * src[i];
}

/// theta - beta * grad
inline NetParams sgd_step(NetParams p, const NetParams& grad, double beta) {
  detail::require(beta > 0.0, "learning rate must be > 0");
  add_scaled(p, grad, -beta);
  return p;
}

/// Euclidean distance between flat views.
inline double param_distance(const NetParams& a, const NetParams& b) {
  detail::require(a.spec() == b.spec(), "param_distance: layer specs differ");
  double s = 0.0;
  auto x = a.flat();
  auto y = b.flat();
  for (std::size_t i = 0; i < x.size(); ++i) s += (x[i] - y[i]) * (x[i] - y[i]);
  return std::sqrt(s);
}

/// Glorot-uniform weights, zero biases.
inline NetParams init_params(const LayerSpec& spec, SeededRng& rng) {
  spec.validate();
  NetParams p(spec);
  for (std::size_t l = 0; l < spec.layers(); ++l) {
    const double limit = std::sqrt(6.0 / static_cast<double>(p.fan_in(l) + p.fan_out(l)));
    for (auto& w : p.weights(l)) w = rng.uniform(-limit, limit);
  }
  return p;
}

// Checkpoint layout, all little-endian:
//   u64 width_count, u64 widths[width_count], f64 params[param_count]
// Agent checkpoints prefix a u64 section count and concatenate sections.

namespace detail {

inline void write_u64(std::ostream& out, std::uint64_t v) {
  unsigned char buf[8];
  for (int i = 0; i < 8; ++i) buf[i] = static_cast<unsigned char>(v >> (8 * i));
  out.write(reinterpret_cast<const char*>(buf), 8);
}

inline std::uint64_t read_u64(std::istream& in) {
  unsigned char buf[8];
  if (!in.read(reinterpret_cast<char*>(buf), 8)) throw InvalidInput("checkpoint: truncated stream");
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(buf[i]) << (8 * i);
  return v;
}

}  // namespace detail

inline void save_params(std::ostream& out, const NetParams& p) {
  const auto& sizes = p.spec().sizes;
  detail::write_u64(out, sizes.size());
  for (auto n : sizes) detail::write_u64(out, n);
  for (double x : p.flat()) detail::write_u64(out, std::bit_cast<std::uint64_t>(x));
}

inline NetParams load_params(std::istream& in) {
  const auto count = detail::read_u64(in);
  detail::require(count >= 2 && count <= 1024, "checkpoint: implausible layer count");
  std::vector<std::size_t> sizes(count);
  for (auto& n : sizes) n = detail::read_u64(in);
  LayerSpec spec(std::move(sizes));
  std::vector<double> flat(spec.param_count());
  for (auto& x : flat) x = std::bit_cast<double>(detail::read_u64(in));
  return NetParams(std::move(spec), std::move(flat));
}

}  // namespace cachenet
