#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace greendc::nn {

class ShapeError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class LayerKind { conv1d, recurrent, dense };
enum class Activation { relu, tanh, linear };

// gated:  g = sigmoid(Wg x + Ug h + bg),  h' = tanh(W x + U (g * h) + b)
// elman:  h' = tanh(W x + U h + b)
enum class RecurrentCell { gated, elman };

struct LayerSpec {
  LayerKind kind = LayerKind::dense;
  int units = 0;  // filters for conv1d
  int width = 3;
  int stride = 1;
  Activation activation = Activation::relu;
  RecurrentCell cell = RecurrentCell::gated;

  static LayerSpec conv(int filters, int width, int stride, Activation act = Activation::relu);
  static LayerSpec recurrent(int units, RecurrentCell cell = RecurrentCell::gated);
  static LayerSpec dense(int units, Activation act = Activation::relu);
};

// Hidden stack over a window x features input, followed by a softmax policy
// head with `actions` outputs and a linear scalar value head.
struct NetworkConfig {
  int window = 8;
  int features = 11;
  int actions = 11;
  std::vector<LayerSpec> hidden;

  void validate() const;

  // Conv1D 8/w3/s1, Conv1D 16/w3/s2, gated recurrent 16, Dense 32, Dense 16.
  static NetworkConfig desk_default(int window, int features, int actions);
  static NetworkConfig dense_only(int window, int features, int actions,
                                  std::vector<int> units = {32, 16},
                                  Activation act = Activation::tanh);
};

std::string to_string(LayerKind k);
std::string to_string(Activation a);
std::string to_string(RecurrentCell c);
LayerKind layer_kind_from(const std::string& s);
Activation activation_from(const std::string& s);
RecurrentCell recurrent_cell_from(const std::string& s);

struct TensorShape {
  std::string name;  // e.g. "0.conv.weight", "policy.bias"
  std::vector<std::size_t> dims;
  std::size_t offset = 0;

  std::size_t size() const;
  bool operator==(const TensorShape&) const = default;
};

struct AdamState {
  std::vector<double> m;
  std::vector<double> v;
  std::int64_t step = 0;
  std::int64_t skipped = 0;  // updates rejected for non-finite gradients

  bool operator==(const AdamState&) const = default;
};

struct ParameterSet {
  std::vector<double> values;
  std::vector<TensorShape> shapes;
  AdamState optimizer;

  bool operator==(const ParameterSet&) const = default;
};

struct GradientSet {
  std::vector<double> values;

  void zero();
};

struct Output {
  std::vector<double> logits;
  std::vector<double> probs;
  double value = 0.0;
};

// Activations kept by `forward` for the matching `backward` call.
struct ForwardCache {
  struct Layer {
    std::size_t in_len = 0, in_ch = 0, out_len = 0, out_ch = 0;
    std::vector<double> input;   // in_len x in_ch
    std::vector<double> pre;     // pre-activations
    std::vector<double> output;  // out_len x out_ch
    std::vector<double> gates;   // recurrent gate values per step
    std::vector<double> states;  // recurrent hidden states h_0..h_T
  };
  std::vector<Layer> layers;
  std::vector<double> trunk;  // input to the heads
  Output out;
};

class Network {
 public:
  explicit Network(NetworkConfig config);

  const NetworkConfig& config() const { return config_; }
  std::size_t parameter_count() const { return count_; }
  std::size_t input_size() const {
    return static_cast<std::size_t>(config_.window) * static_cast<std::size_t>(config_.features);
  }
  const std::vector<TensorShape>& shapes() const { return shapes_; }
  // Layer-type group of each tensor: "conv", "recurrent", "dense", "policy", "value".
  std::string group_of(const TensorShape& shape) const;

  // Glorot-uniform weights, zero biases.
  ParameterSet initialize(std::uint64_t seed) const;

  const Output& forward(std::span<const double> params, std::span<const double> observation,
                        ForwardCache& cache) const;
  Output forward(std::span<const double> params, std::span<const double> observation) const;

  // Accumulates gradients of a scalar loss given dL/dlogits and dL/dvalue.
  void backward(std::span<const double> params, const ForwardCache& cache,
                std::span<const double> dlogits, double dvalue, std::span<double> grad) const;

 private:
  struct Layout {
    std::size_t in_len, in_ch, out_len, out_ch;
    std::size_t w, b;       // offsets: input weights, bias
    std::size_t u = 0;      // recurrent weights
    std::size_t gw = 0, gu = 0, gb = 0;  // gate weights
    std::size_t pad_left = 0;
  };
  NetworkConfig config_;
  std::vector<Layout> layout_;
  std::vector<TensorShape> shapes_;
  std::vector<std::string> groups_;
  std::size_t trunk_size_ = 0;
  std::size_t policy_w_ = 0, policy_b_ = 0, value_w_ = 0, value_b_ = 0;
  std::size_t count_ = 0;
};

void softmax(std::span<const double> logits, std::span<double> probs);

struct AdamConfig {
  double learning_rate = 3e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

// Bias-corrected adaptive-moment step. A gradient with any non-finite entry
// is rejected: parameters stay unchanged and `skipped` is incremented.
// Returns whether the update was applied.
bool adam_step(ParameterSet& params, std::span<const double> grads, const AdamConfig& config);

struct GradCheckGroup {
  std::string group;
  std::size_t coordinates = 0;
  double max_rel_error = 0.0;
};

struct GradCheckReport {
  std::vector<GradCheckGroup> groups;
  double max_rel_error() const;
};

// Compares `backward` with central finite differences on a random scalar
// loss of the softmax probabilities and the value, over up to
// `coords_per_group` random coordinates of each layer-type group.
GradCheckReport grad_check(const NetworkConfig& config, std::uint64_t seed,
                           std::size_t coords_per_group = 100, double step = 1e-4);

// Relative error used by grad_check.
double relative_error(double analytic, double numeric);

// Versioned JSON checkpoint with config, shape table, weights and optimizer
// moments. Round trips bit-exactly.
std::string checkpoint_to_json(const NetworkConfig& config, const ParameterSet& params);
void checkpoint_from_json(const std::string& text, NetworkConfig& config, ParameterSet& params);
void save_checkpoint(const std::string& path, const NetworkConfig& config, const ParameterSet& params);
void load_checkpoint(const std::string& path, NetworkConfig& config, ParameterSet& params);

}  // namespace greendc::nn
