#include "clover/nn.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

namespace clover {
namespace {

struct Trace {
  std::vector<std::vector<double>> pre;   // logits of every layer
  std::vector<std::vector<double>> post;  // post[0] is the input, post.back() the probabilities
};

void softmax_inplace(std::vector<double>& z) {
  const double peak = *std::max_element(z.begin(), z.end());
  double total = 0.0;
  for (double& v : z) {
    v = std::exp(v - peak);
    total += v;
  }
  for (double& v : z) v /= total;
}

Trace run(const std::vector<DenseLayer>& layers, std::span<const double> x) {
  Trace trace;
  trace.pre.reserve(layers.size());
  trace.post.reserve(layers.size() + 1);
  trace.post.emplace_back(x.begin(), x.end());
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const DenseLayer& layer = layers[l];
    const std::vector<double>& a = trace.post.back();
    std::vector<double> z(layer.bias);
    for (std::size_t o = 0; o < layer.out; ++o) {
      const double* row = layer.weights.data() + o * layer.in;
      double acc = 0.0;
      for (std::size_t i = 0; i < layer.in; ++i) acc += row[i] * a[i];
      z[o] += acc;
    }
    trace.pre.push_back(z);
    if (l + 1 < layers.size()) {
      for (double& v : z) v = std::max(v, 0.0);
    } else {
      softmax_inplace(z);
    }
    trace.post.push_back(std::move(z));
  }
  return trace;
}

double cross_entropy(const std::vector<double>& logits, ClassId label) {
  const double peak = *std::max_element(logits.begin(), logits.end());
  double total = 0.0;
  for (double v : logits) total += std::exp(v - peak);
  return peak + std::log(total) - logits[static_cast<std::size_t>(label)];
}

// Per-layer parameter gradients, same shapes as the layers.
struct ParamGrads {
  std::vector<std::vector<double>> weights;
  std::vector<std::vector<double>> bias;

  explicit ParamGrads(const std::vector<DenseLayer>& layers) {
    for (const auto& layer : layers) {
      weights.emplace_back(layer.weights.size(), 0.0);
      bias.emplace_back(layer.bias.size(), 0.0);
    }
  }
  void clear() {
    for (auto& w : weights) std::fill(w.begin(), w.end(), 0.0);
    for (auto& b : bias) std::fill(b.begin(), b.end(), 0.0);
  }
};

// Propagates dL/dlogits of the output layer back to dL/dx, accumulating
// parameter gradients when `grads` is non-null.
std::vector<double> backprop(const std::vector<DenseLayer>& layers, const Trace& trace,
                             std::vector<double> delta, ParamGrads* grads) {
  for (std::size_t l = layers.size(); l-- > 0;) {
    const DenseLayer& layer = layers[l];
    const std::vector<double>& a = trace.post[l];
    if (grads != nullptr) {
      auto& gw = grads->weights[l];
      auto& gb = grads->bias[l];
      for (std::size_t o = 0; o < layer.out; ++o) {
        gb[o] += delta[o];
        double* row = gw.data() + o * layer.in;
        for (std::size_t i = 0; i < layer.in; ++i) row[i] += delta[o] * a[i];
      }
    }
    std::vector<double> upstream(layer.in, 0.0);
    for (std::size_t o = 0; o < layer.out; ++o) {
      const double* row = layer.weights.data() + o * layer.in;
      for (std::size_t i = 0; i < layer.in; ++i) upstream[i] += row[i] * delta[o];
    }
    if (l > 0) {
      const std::vector<double>& z = trace.pre[l - 1];
      for (std::size_t i = 0; i < layer.in; ++i) {
        if (z[i] <= 0.0) upstream[i] = 0.0;
      }
    }
    delta = std::move(upstream);
  }
  return delta;
}

std::vector<double> output_delta(const Trace& trace, ClassId label) {
  std::vector<double> delta = trace.post.back();
  delta[static_cast<std::size_t>(label)] -= 1.0;
  return delta;
}

void check_label(ClassId label, std::size_t num_classes) {
  if (label < 0 || static_cast<std::size_t>(label) >= num_classes) {
    throw InputError("label " + std::to_string(label) + " out of range for " +
                     std::to_string(num_classes) + " classes");
  }
}

}  // namespace

std::size_t argmax(std::span<const double> values) {
  return static_cast<std::size_t>(std::max_element(values.begin(), values.end()) - values.begin());
}

ClassId Classifier::predict_label(std::span<const double> x) const {
  const auto probs = predict(x);
  return static_cast<ClassId>(argmax(probs));
}

double Classifier::loss(std::span<const double> x, ClassId label) const {
  check_label(label, num_classes());
  const auto probs = predict(x);
  return -std::log(std::max(probs[static_cast<std::size_t>(label)], 1e-300));
}

Mlp::Mlp(std::vector<DenseLayer> layers) : layers_(std::move(layers)) {
  if (layers_.empty()) throw InputError("Mlp needs at least one layer");
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    const DenseLayer& layer = layers_[l];
    if (layer.in == 0 || layer.out == 0) throw InputError("Mlp layer with zero width");
    if (layer.weights.size() != layer.in * layer.out || layer.bias.size() != layer.out) {
      throw InputError("Mlp layer " + std::to_string(l) + " has inconsistent weight shapes");
    }
    if (l > 0 && layers_[l - 1].out != layer.in) {
      throw InputError("Mlp layer " + std::to_string(l) + " input width does not match previous output");
    }
  }
}

Mlp Mlp::random(std::span<const std::size_t> dims, Rng& rng) {
  if (dims.size() < 2) throw InputError("Mlp needs at least input and output dims");
  std::vector<DenseLayer> layers;
  for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
    DenseLayer layer{dims[l], dims[l + 1], {}, std::vector<double>(dims[l + 1], 0.0)};
    const double scale = std::sqrt(6.0 / static_cast<double>(layer.in + layer.out));
    layer.weights.resize(layer.in * layer.out);
    for (double& w : layer.weights) w = rng.uniform(-scale, scale);
    layers.push_back(std::move(layer));
  }
  return Mlp(std::move(layers));
}

Mlp Mlp::zeros(std::span<const std::size_t> dims) {
  if (dims.size() < 2) throw InputError("Mlp needs at least input and output dims");
  std::vector<DenseLayer> layers;
  for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
    layers.push_back(DenseLayer{dims[l], dims[l + 1], std::vector<double>(dims[l] * dims[l + 1], 0.0),
                                std::vector<double>(dims[l + 1], 0.0)});
  }
  return Mlp(std::move(layers));
}

std::vector<std::size_t> Mlp::dims() const {
  std::vector<std::size_t> out{layers_.front().in};
  for (const auto& layer : layers_) out.push_back(layer.out);
  return out;
}

void Mlp::check_input(std::span<const double> x) const {
  if (x.size() != input_dim()) {
    throw InputError("input has dimension " + std::to_string(x.size()) + ", model expects " +
                     std::to_string(input_dim()));
  }
}

std::vector<double> Mlp::predict(std::span<const double> x) const {
  check_input(x);
  return run(layers_, x).post.back();
}

std::vector<double> Mlp::loss_gradient(std::span<const double> x, ClassId label) const {
  check_input(x);
  check_label(label, num_classes());
  const Trace trace = run(layers_, x);
  return backprop(layers_, trace, output_delta(trace, label), nullptr);
}

std::vector<std::vector<double>> forward(const Classifier& model, std::span<const Sample> batch) {
  if (batch.empty()) throw InputError("forward: empty batch");
  std::vector<std::vector<double>> out;
  out.reserve(batch.size());
  for (const Sample& s : batch) out.push_back(model.predict(s.features));
  return out;
}

TrainResult train(const Mlp& model, const Dataset& data, const TrainOptions& options, Rng& rng) {
  if (data.empty()) throw InputError("train: empty dataset");
  if (!data.fully_labeled()) throw InputError("train: dataset has unlabeled samples");
  if (options.batch_size == 0) throw InputError("train: batch_size must be >= 1");
  for (const Sample& s : data.samples) {
    if (s.features.size() != model.input_dim()) throw InputError("train: sample dimension mismatch");
    check_label(*s.label, model.num_classes());
  }

  TrainResult result{model, {}};
  std::vector<DenseLayer>& layers = result.model.mutable_layers();
  ParamGrads grads(layers);
  std::vector<std::size_t> order(data.size());

  for (std::size_t epoch = 0; epoch < options.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    rng.shuffle(std::span<std::size_t>(order));
    double total_loss = 0.0;
    for (std::size_t start = 0; start < order.size(); start += options.batch_size) {
      const std::size_t stop = std::min(order.size(), start + options.batch_size);
      grads.clear();
      for (std::size_t b = start; b < stop; ++b) {
        const Sample& s = data.samples[order[b]];
        const Trace trace = run(layers, s.features);
        total_loss += cross_entropy(trace.pre.back(), *s.label);
        backprop(layers, trace, output_delta(trace, *s.label), &grads);
      }
      const double scale = options.lr / static_cast<double>(stop - start);
      if (scale == 0.0) continue;
      for (std::size_t l = 0; l < layers.size(); ++l) {
        for (std::size_t i = 0; i < layers[l].weights.size(); ++i) {
          layers[l].weights[i] -= scale * grads.weights[l][i];
        }
        for (std::size_t i = 0; i < layers[l].bias.size(); ++i) {
          layers[l].bias[i] -= scale * grads.bias[l][i];
        }
      }
    }
    result.epoch_loss.push_back(total_loss / static_cast<double>(data.size()));
  }
  return result;
}

double accuracy(const Classifier& model, const Dataset& data) {
  if (data.empty()) throw InputError("accuracy: empty dataset");
  std::size_t correct = 0;
  for (const Sample& s : data.samples) {
    if (!s.label) throw InputError("accuracy: unlabeled sample");
    if (model.predict_label(s.features) == *s.label) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(data.size());
}

std::vector<double> numeric_loss_gradient(const Classifier& model, std::span<const double> x,
                                          ClassId label, double h) {
  if (!(h > 0.0)) throw InputError("numeric_loss_gradient: h must be positive");
  std::vector<double> probe(x.begin(), x.end());
  std::vector<double> grad(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    probe[i] = x[i] + h;
    const double up = model.loss(probe, label);
    probe[i] = x[i] - h;
    const double down = model.loss(probe, label);
    probe[i] = x[i];
    grad[i] = (up - down) / (2.0 * h);
  }
  return grad;
}

double max_relative_error(std::span<const double> analytic, std::span<const double> numeric) {
  if (analytic.size() != numeric.size()) throw InputError("max_relative_error: size mismatch");
  double worst = 0.0;
  for (std::size_t i = 0; i < analytic.size(); ++i) {
    const double diff = std::abs(analytic[i] - numeric[i]);
    const double scale = std::max(std::abs(analytic[i]), std::abs(numeric[i]));
    worst = std::max(worst, scale < 1e-12 ? diff : diff / scale);
  }
  return worst;
}

double gradient_check(const Classifier& model, std::span<const double> x, ClassId label, double h) {
  const auto analytic = model.loss_gradient(x, label);
  const auto numeric = numeric_loss_gradient(model, x, label, h);
  return max_relative_error(analytic, numeric);
}

nlohmann::json model_to_json(const Mlp& model) {
  nlohmann::json weights = nlohmann::json::array();
  nlohmann::json biases = nlohmann::json::array();
  for (const auto& layer : model.layers()) {
    weights.push_back(layer.weights);
    biases.push_back(layer.bias);
  }
  return nlohmann::json{{"format_version", kModelFormatVersion},
                        {"layer_dims", model.dims()},
                        {"weights", std::move(weights)},
                        {"biases", std::move(biases)},
                        {"activation", "relu_softmax"}};
}

Mlp model_from_json(const nlohmann::json& doc) {
  try {
    const int version = doc.at("format_version").get<int>();
    if (version != kModelFormatVersion) {
      throw ParseError("unsupported model format_version " + std::to_string(version), 0);
    }
    if (doc.at("activation").get<std::string>() != "relu_softmax") {
      throw ParseError("unsupported activation '" + doc.at("activation").get<std::string>() + "'", 0);
    }
    const auto dims = doc.at("layer_dims").get<std::vector<std::size_t>>();
    const auto& weights = doc.at("weights");
    const auto& biases = doc.at("biases");
    if (dims.size() < 2 || weights.size() + 1 != dims.size() || biases.size() + 1 != dims.size()) {
      throw ParseError("layer_dims does not match weights/biases", 0);
    }
    std::vector<DenseLayer> layers;
    for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
      layers.push_back(DenseLayer{dims[l], dims[l + 1], weights[l].get<std::vector<double>>(),
                                  biases[l].get<std::vector<double>>()});
    }
    return Mlp(std::move(layers));
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("malformed model document: ") + e.what(), 0);
  } catch (const InputError& e) {
    throw ParseError(std::string("invalid model: ") + e.what(), 0);
  }
}

void save_model(const Mlp& model, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write model file " + path.string());
  out << model_to_json(model).dump() << '\n';
  if (!out) throw std::runtime_error("failed writing model file " + path.string());
}

Mlp load_model(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open model file " + path.string());
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(path.string() + ": " + e.what(), 0);
  }
  return model_from_json(doc);
}

}  // namespace clover
