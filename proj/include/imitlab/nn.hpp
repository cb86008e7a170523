// Feedforward networks with exact reverse-mode gradients and Adam.
//
// A Network is a stack of affine layers with ReLU between hidden layers and a
// configurable output head. All arithmetic is double precision. Batches are
// row-major in the sense that each row of an input matrix is one example.
#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace imitlab {

using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vec = Eigen::VectorXd;
using RowVec = Eigen::RowVectorXd;

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ShapeError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Raised when a loss or gradient stops being finite. `batch_index` is the
// first offending row, or -1 when the failure is not tied to a row.
struct NumericalError : std::runtime_error {
  NumericalError(const std::string& what, long batch_index)
      : std::runtime_error(what), batch_index(batch_index) {}
  long batch_index;
};

enum class Head { kIdentity, kSigmoid, kSoftmaxLogits, kTanhScaled };

std::string to_string(Head head);
Head head_from_string(const std::string& name);

struct Layer {
  Mat weight;  // out x in
  Vec bias;    // out
};

class Network {
 public:
  Network() = default;
  Network(std::vector<int> layer_sizes, Head head, double head_scale = 1.0);

  const std::vector<int>& layer_sizes() const { return layer_sizes_; }
  Head head() const { return head_; }
  double head_scale() const { return head_scale_; }
  int input_size() const { return layer_sizes_.front(); }
  int output_size() const { return layer_sizes_.back(); }
  std::size_t num_layers() const { return layers_.size(); }
  std::size_t parameter_count() const;

  const Layer& layer(std::size_t i) const { return layers_[i]; }
  Layer& layer(std::size_t i) { return layers_[i]; }
  const std::vector<Layer>& layers() const { return layers_; }

  // Flat view in layer order: W0 (row-major), b0, W1, b1, ...
  std::vector<double> flat_parameters() const;
  void set_flat_parameters(const std::vector<double>& flat);

  bool all_finite() const;

 private:
  std::vector<int> layer_sizes_;
  Head head_ = Head::kIdentity;
  double head_scale_ = 1.0;
  std::vector<Layer> layers_;
};

// Uniform in [-1/sqrt(fan_in), 1/sqrt(fan_in)], deterministic in `seed`.
Network init_network(const std::vector<int>& layer_sizes, Head head,
                     std::uint64_t seed, double head_scale = 1.0);

// Activations kept for the backward pass. `pre_head` holds the last affine
// output (logits) and `output` the head applied to it.
struct ForwardCache {
  std::vector<Mat> inputs;  // input to layer l (post-ReLU for l > 0)
  Mat pre_head;
  Mat output;
};

Mat forward(const Network& net, const Mat& input);
Mat forward(const Network& net, const Mat& input, ForwardCache& cache);
Vec forward_one(const Network& net, const Vec& input);

// Applies the output head elementwise / rowwise.
Mat apply_head(Head head, double head_scale, const Mat& logits);

struct Gradients {
  std::vector<Mat> weight;
  std::vector<Vec> bias;

  static Gradients zeros_like(const Network& net);
  Gradients& operator+=(const Gradients& other);
  Gradients& operator*=(double c);
  double max_abs() const;
  bool all_finite() const;
  std::vector<double> flat() const;
};

// Reverse-mode pass given dLoss/dOutput, chained through the output head.
// When `input_grad` is non-null it receives dLoss/dInput.
Gradients backward(const Network& net, const ForwardCache& cache,
                   const Mat& d_output, Mat* input_grad = nullptr);

// Like backward() but d_logits is always with respect to the pre-head values.
Gradients backward_from_logits(const Network& net, const ForwardCache& cache,
                               const Mat& d_logits, Mat* input_grad = nullptr);

struct AdamState {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::uint64_t step = 0;
  Gradients m;
  Gradients v;

  static AdamState for_network(const Network& net);
};

// Descends along `grads` (callers maximizing an objective pass its negation).
void adam_step(Network& net, const Gradients& grads, AdamState& state, double lr);

// Structured-text checkpoint (JSON) with a format version; parameters are
// written with round-trip precision so a save/load cycle is bit-exact.
inline constexpr int kCheckpointVersion = 1;
void save_checkpoint(const Network& net, const std::filesystem::path& path);
Network load_checkpoint(const std::filesystem::path& path);
std::string to_checkpoint_text(const Network& net);
Network from_checkpoint_text(const std::string& text);

}  // namespace imitlab
