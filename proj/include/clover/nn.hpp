#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "clover/rng.hpp"
#include "clover/sample.hpp"
#include "clover/types.hpp"

namespace clover {

// Anything the fuzzer can query: class probabilities and the input gradient
// of the cross-entropy loss. Implementations must be safe to call
// concurrently through a const reference.
class Classifier {
 public:
  virtual ~Classifier() = default;

  virtual std::size_t input_dim() const = 0;
  virtual std::size_t num_classes() const = 0;
  virtual std::vector<double> predict(std::span<const double> x) const = 0;
  // d/dx of -log p_label(x).
  virtual std::vector<double> loss_gradient(std::span<const double> x, ClassId label) const = 0;

  ClassId predict_label(std::span<const double> x) const;
  double loss(std::span<const double> x, ClassId label) const;
};

std::size_t argmax(std::span<const double> values);

// One fully connected layer; weights are row-major with shape out x in.
struct DenseLayer {
  std::size_t in = 0;
  std::size_t out = 0;
  std::vector<double> weights;
  std::vector<double> bias;

  bool operator==(const DenseLayer&) const = default;
};

// Dense ReLU network with a softmax head.
class Mlp final : public Classifier {
 public:
  explicit Mlp(std::vector<DenseLayer> layers);

  // Glorot-uniform weights, zero biases.
  static Mlp random(std::span<const std::size_t> dims, Rng& rng);
  static Mlp zeros(std::span<const std::size_t> dims);

  std::size_t input_dim() const override { return layers_.front().in; }
  std::size_t num_classes() const override { return layers_.back().out; }
  std::vector<double> predict(std::span<const double> x) const override;
  std::vector<double> loss_gradient(std::span<const double> x, ClassId label) const override;

  std::vector<std::size_t> dims() const;
  const std::vector<DenseLayer>& layers() const { return layers_; }
  std::vector<DenseLayer>& mutable_layers() { return layers_; }

  bool operator==(const Mlp& other) const { return layers_ == other.layers_; }

 private:
  void check_input(std::span<const double> x) const;

  std::vector<DenseLayer> layers_;
};

// Batched inference over samples; order-preserving.
std::vector<std::vector<double>> forward(const Classifier& model, std::span<const Sample> batch);

struct TrainOptions {
  std::size_t epochs = 40;
  double lr = 0.05;
  std::size_t batch_size = 32;
};

struct TrainResult {
  Mlp model;
  std::vector<double> epoch_loss;  // mean cross-entropy per epoch
};

// Mini-batch SGD with seeded shuffling. Requires a fully labeled dataset.
TrainResult train(const Mlp& model, const Dataset& data, const TrainOptions& options, Rng& rng);

double accuracy(const Classifier& model, const Dataset& data);

// Central-difference estimate of the input loss gradient.
std::vector<double> numeric_loss_gradient(const Classifier& model, std::span<const double> x,
                                          ClassId label, double h);

// max_i |a_i - n_i| / max(|a_i|, |n_i|); absolute error where both are below 1e-12.
double max_relative_error(std::span<const double> analytic, std::span<const double> numeric);

double gradient_check(const Classifier& model, std::span<const double> x, ClassId label, double h);

// Versioned JSON weight file.
inline constexpr int kModelFormatVersion = 1;
nlohmann::json model_to_json(const Mlp& model);
Mlp model_from_json(const nlohmann::json& doc);
void save_model(const Mlp& model, const std::filesystem::path& path);
Mlp load_model(const std::filesystem::path& path);

}  // namespace clover
