#include "imitlab/nn.hpp"

#include <cmath>
#include <fstream>
#include <random>
#include <sstream>

#include <nlohmann/json.hpp>

namespace imitlab {

std::string to_string(Head head) {
  switch (head) {
    case Head::kIdentity: return "identity";
    case Head::kSigmoid: return "sigmoid";
    case Head::kSoftmaxLogits: return "softmax_logits";
    case Head::kTanhScaled: return "tanh_scaled";
  }
  return "identity";
}

Head head_from_string(const std::string& name) {
  if (name == "identity") return Head::kIdentity;
  if (name == "sigmoid") return Head::kSigmoid;
  if (name == "softmax_logits") return Head::kSoftmaxLogits;
  if (name == "tanh_scaled") return Head::kTanhScaled;
  throw ConfigError("unknown head '" + name + "'");
}

Network::Network(std::vector<int> layer_sizes, Head head, double head_scale)
    : layer_sizes_(std::move(layer_sizes)), head_(head), head_scale_(head_scale) {
  if (layer_sizes_.size() < 2) {
    throw ConfigError("network needs at least an input and an output size");
  }
  for (int s : layer_sizes_) {
    if (s <= 0) throw ConfigError("zero-sized layer in network layout");
  }
  layers_.resize(layer_sizes_.size() - 1);
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    layers_[l].weight = Mat::Zero(layer_sizes_[l + 1], layer_sizes_[l]);
    layers_[l].bias = Vec::Zero(layer_sizes_[l + 1]);
  }
}

std::size_t Network::parameter_count() const {
  std::size_t n = 0;
  for (const auto& layer : layers_) n += layer.weight.size() + layer.bias.size();
  return n;
}

std::vector<double> Network::flat_parameters() const {
  std::vector<double> out;
  out.reserve(parameter_count());
  for (const auto& layer : layers_) {
    out.insert(out.end(), layer.weight.data(), layer.weight.data() + layer.weight.size());
    out.insert(out.end(), layer.bias.data(), layer.bias.data() + layer.bias.size());
  }
  return out;
}

void Network::set_flat_parameters(const std::vector<double>& flat) {
  if (flat.size() != parameter_count()) throw ShapeError("flat parameter length mismatch");
  std::size_t k = 0;
  for (auto& layer : layers_) {
    for (Eigen::Index i = 0; i < layer.weight.size(); ++i) layer.weight.data()[i] = flat[k++];
    for (Eigen::Index i = 0; i < layer.bias.size(); ++i) layer.bias[i] = flat[k++];
  }
}

bool Network::all_finite() const {
  for (const auto& layer : layers_) {
    if (!layer.weight.allFinite() || !layer.bias.allFinite()) return false;
  }
  return true;
}

Network init_network(const std::vector<int>& layer_sizes, Head head, std::uint64_t seed,
                     double head_scale) {
  if (layer_sizes.empty()) throw ConfigError("empty layer size list");
  Network net(layer_sizes, head, head_scale);
  std::mt19937_64 rng(seed);
  for (std::size_t l = 0; l < net.num_layers(); ++l) {
    Layer& layer = net.layer(l);
    const double bound = 1.0 / std::sqrt(static_cast<double>(layer_sizes[l]));
    std::uniform_real_distribution<double> dist(-bound, bound);
    for (Eigen::Index i = 0; i < layer.weight.size(); ++i) layer.weight.data()[i] = dist(rng);
    for (Eigen::Index i = 0; i < layer.bias.size(); ++i) layer.bias[i] = dist(rng);
  }
  return net;
}

Mat apply_head(Head head, double head_scale, const Mat& logits) {
  switch (head) {
    case Head::kIdentity:
      return logits;
    case Head::kSigmoid:
      return logits.unaryExpr([](double x) {
        // Split by sign so exp never overflows.
        if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
        const double e = std::exp(x);
        return e / (1.0 + e);
      });
    case Head::kTanhScaled:
      return logits.unaryExpr([head_scale](double x) { return head_scale * std::tanh(x); });
    case Head::kSoftmaxLogits: {
      Mat out(logits.rows(), logits.cols());
      for (Eigen::Index r = 0; r < logits.rows(); ++r) {
        const double mx = logits.row(r).maxCoeff();
        RowVec e = (logits.row(r).array() - mx).exp();
        out.row(r) = e / e.sum();
      }
      return out;
    }
  }
  return logits;
}

Mat forward(const Network& net, const Mat& input, ForwardCache& cache) {
  if (input.cols() != net.input_size()) {
    throw ShapeError("forward: input width " + std::to_string(input.cols()) +
                     " != network input " + std::to_string(net.input_size()));
  }
  const std::size_t n_layers = net.num_layers();
  cache.inputs.resize(n_layers);
  cache.inputs[0] = input;
  for (std::size_t l = 0; l < n_layers; ++l) {
    const Layer& layer = net.layer(l);
    Mat z = cache.inputs[l] * layer.weight.transpose();
    z.rowwise() += layer.bias.transpose();
    if (l + 1 < n_layers) {
      cache.inputs[l + 1] = z.cwiseMax(0.0);
    } else {
      cache.pre_head = std::move(z);
    }
  }
  cache.output = apply_head(net.head(), net.head_scale(), cache.pre_head);
  return cache.output;
}

Mat forward(const Network& net, const Mat& input) {
  ForwardCache cache;
  return forward(net, input, cache);
}

Vec forward_one(const Network& net, const Vec& input) {
  Mat x = input.transpose();
  Mat y = forward(net, x);
  return y.row(0).transpose();
}

Gradients Gradients::zeros_like(const Network& net) {
  Gradients g;
  for (const auto& layer : net.layers()) {
    g.weight.push_back(Mat::Zero(layer.weight.rows(), layer.weight.cols()));
    g.bias.push_back(Vec::Zero(layer.bias.size()));
  }
  return g;
}

Gradients& Gradients::operator+=(const Gradients& other) {
  if (other.weight.size() != weight.size()) throw ShapeError("gradient layer count mismatch");
  for (std::size_t l = 0; l < weight.size(); ++l) {
    weight[l] += other.weight[l];
    bias[l] += other.bias[l];
  }
  return *this;
}

Gradients& Gradients::operator*=(double c) {
  for (std::size_t l = 0; l < weight.size(); ++l) {
    weight[l] *= c;
    bias[l] *= c;
  }
  return *this;
}

double Gradients::max_abs() const {
  double m = 0.0;
  for (std::size_t l = 0; l < weight.size(); ++l) {
    if (weight[l].size() > 0) m = std::max(m, weight[l].cwiseAbs().maxCoeff());
    if (bias[l].size() > 0) m = std::max(m, bias[l].cwiseAbs().maxCoeff());
  }
  return m;
}

bool Gradients::all_finite() const {
  for (std::size_t l = 0; l < weight.size(); ++l) {
    if (!weight[l].allFinite() || !bias[l].allFinite()) return false;
  }
  return true;
}

std::vector<double> Gradients::flat() const {
  std::vector<double> out;
  for (std::size_t l = 0; l < weight.size(); ++l) {
    out.insert(out.end(), weight[l].data(), weight[l].data() + weight[l].size());
    out.insert(out.end(), bias[l].data(), bias[l].data() + bias[l].size());
  }
  return out;
}

namespace {

Mat chain_through_head(const Network& net, const ForwardCache& cache, const Mat& d_output) {
  const Mat& y = cache.output;
  switch (net.head()) {
    case Head::kIdentity:
      return d_output;
    case Head::kSigmoid:
      return d_output.cwiseProduct(y.cwiseProduct((1.0 - y.array()).matrix()));
    case Head::kTanhScaled: {
      const double s = net.head_scale();
      // y = s tanh(x)  =>  dy/dx = s (1 - tanh^2) = s - y^2 / s
      Mat dydx = (s - y.array().square() / s).matrix();
      return d_output.cwiseProduct(dydx);
    }
    case Head::kSoftmaxLogits: {
      Mat d(y.rows(), y.cols());
      for (Eigen::Index r = 0; r < y.rows(); ++r) {
        const double dot = d_output.row(r).dot(y.row(r));
        d.row(r) = y.row(r).cwiseProduct((d_output.row(r).array() - dot).matrix());
      }
      return d;
    }
  }
  return d_output;
}

}  // namespace

Gradients backward_from_logits(const Network& net, const ForwardCache& cache, const Mat& d_logits,
                               Mat* input_grad) {
  const std::size_t n_layers = net.num_layers();
  if (cache.inputs.size() != n_layers || d_logits.rows() != cache.pre_head.rows() ||
      d_logits.cols() != net.output_size()) {
    throw ShapeError("backward: gradient shape does not match forward cache");
  }
  Gradients g;
  g.weight.resize(n_layers);
  g.bias.resize(n_layers);
  Mat delta = d_logits;
  for (std::size_t i = n_layers; i-- > 0;) {
    const Layer& layer = net.layer(i);
    g.weight[i] = delta.transpose() * cache.inputs[i];
    g.bias[i] = delta.colwise().sum().transpose();
    if (i > 0 || input_grad != nullptr) {
      Mat d_in = delta * layer.weight;
      if (i > 0) {
        // ReLU derivative, using the post-activation as the mask.
        d_in = d_in.cwiseProduct(
            cache.inputs[i].unaryExpr([](double a) { return a > 0.0 ? 1.0 : 0.0; }));
        delta = std::move(d_in);
      } else {
        *input_grad = std::move(d_in);
      }
    }
  }
  return g;
}

Gradients backward(const Network& net, const ForwardCache& cache, const Mat& d_output,
                   Mat* input_grad) {
  if (d_output.rows() != cache.output.rows() || d_output.cols() != cache.output.cols()) {
    throw ShapeError("backward: d_output shape mismatch");
  }
  return backward_from_logits(net, cache, chain_through_head(net, cache, d_output), input_grad);
}

AdamState AdamState::for_network(const Network& net) {
  AdamState s;
  s.m = Gradients::zeros_like(net);
  s.v = Gradients::zeros_like(net);
  return s;
}

void adam_step(Network& net, const Gradients& grads, AdamState& state, double lr) {
  if (grads.weight.size() != net.num_layers()) throw ShapeError("adam: gradient layer mismatch");
  if (state.m.weight.size() != net.num_layers()) {
    state.m = Gradients::zeros_like(net);
    state.v = Gradients::zeros_like(net);
  }
  state.step += 1;
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(state.beta1, t);
  const double c2 = 1.0 - std::pow(state.beta2, t);
  const double b1 = state.beta1, b2 = state.beta2, eps = state.epsilon;
  auto update = [&](auto& param, const auto& g, auto& m, auto& v) {
    if (param.rows() != g.rows() || param.cols() != g.cols()) {
      throw ShapeError("adam: gradient shape mismatch");
    }
    m = b1 * m + (1.0 - b1) * g;
    v = b2 * v + (1.0 - b2) * g.cwiseProduct(g);
    param.array() -= lr * (m.array() / c1) / ((v.array() / c2).sqrt() + eps);
  };
  for (std::size_t l = 0; l < net.num_layers(); ++l) {
    Layer& layer = net.layer(l);
    update(layer.weight, grads.weight[l], state.m.weight[l], state.v.weight[l]);
    update(layer.bias, grads.bias[l], state.m.bias[l], state.v.bias[l]);
  }
}

std::string to_checkpoint_text(const Network& net) {
  nlohmann::json j;
  j["format_version"] = kCheckpointVersion;
  j["layer_sizes"] = net.layer_sizes();
  j["head"] = to_string(net.head());
  j["head_scale"] = net.head_scale();
  nlohmann::json layers = nlohmann::json::array();
  for (const auto& layer : net.layers()) {
    std::vector<double> w(layer.weight.data(), layer.weight.data() + layer.weight.size());
    std::vector<double> b(layer.bias.data(), layer.bias.data() + layer.bias.size());
    layers.push_back({{"weight", w}, {"bias", b}});
  }
  j["layers"] = std::move(layers);
  return j.dump();
}

Network from_checkpoint_text(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("checkpoint parse error: ") + e.what());
  }
  if (j.value("format_version", -1) != kCheckpointVersion) {
    throw ConfigError("unsupported checkpoint format version");
  }
  Network net(j.at("layer_sizes").get<std::vector<int>>(),
              head_from_string(j.at("head").get<std::string>()), j.at("head_scale").get<double>());
  const auto& layers = j.at("layers");
  if (layers.size() != net.num_layers()) throw ShapeError("checkpoint layer count mismatch");
  for (std::size_t l = 0; l < net.num_layers(); ++l) {
    auto w = layers[l].at("weight").get<std::vector<double>>();
    auto b = layers[l].at("bias").get<std::vector<double>>();
    Layer& layer = net.layer(l);
    if (w.size() != static_cast<std::size_t>(layer.weight.size()) ||
        b.size() != static_cast<std::size_t>(layer.bias.size())) {
      throw ShapeError("checkpoint parameter shape mismatch in layer " + std::to_string(l));
    }
    std::copy(w.begin(), w.end(), layer.weight.data());
    std::copy(b.begin(), b.end(), layer.bias.data());
  }
  return net;
}

void save_checkpoint(const Network& net, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write checkpoint " + path.string());
  out << to_checkpoint_text(net) << '\n';
}

Network load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read checkpoint " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return from_checkpoint_text(ss.str());
}

}  // namespace imitlab
