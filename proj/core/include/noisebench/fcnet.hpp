#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <vector>

#include "noisebench/dataset.hpp"

namespace noisebench {

/// inputs -> relu(hidden) -> classes.
struct FcShape {
  std::size_t inputs = kCanvasPixels;
  std::size_t hidden = kCanvasPixels;
  std::size_t classes = kNumClasses;

  std::size_t parameter_count() const noexcept {
    return hidden * inputs + hidden + classes * hidden + classes;
  }
  bool operator==(const FcShape&) const = default;
};

/// Dense weights, row-major: w1 is hidden x inputs, w2 is classes x hidden.
template <class Scalar>
struct BasicFcParams {
  FcShape shape;
  std::vector<Scalar> w1;
  std::vector<Scalar> b1;
  std::vector<Scalar> w2;
  std::vector<Scalar> b2;

  BasicFcParams() = default;
  explicit BasicFcParams(FcShape s)
      : shape(s),
        w1(s.hidden * s.inputs),
        b1(s.hidden),
        w2(s.classes * s.hidden),
        b2(s.classes) {}

  /// Calls fn(span) on w1, b1, w2, b2 in storage order.
  template <class Fn>
  void for_each_tensor(Fn&& fn) {
    fn(std::span<Scalar>(w1));
    fn(std::span<Scalar>(b1));
    fn(std::span<Scalar>(w2));
    fn(std::span<Scalar>(b2));
  }
  template <class Fn>
  void for_each_tensor(Fn&& fn) const {
    fn(std::span<const Scalar>(w1));
    fn(std::span<const Scalar>(b1));
    fn(std::span<const Scalar>(w2));
    fn(std::span<const Scalar>(b2));
  }

  bool operator==(const BasicFcParams&) const = default;
};

using FcParams = BasicFcParams<float>;

/// W ~ U(-sqrt(6 / fan_in), +sqrt(6 / fan_in)) from SplitMix64(seed), w1 then
/// w2 in row-major order; biases zero.
FcParams init_params(std::uint64_t seed, FcShape shape = {});

template <class Scalar>
struct ForwardPass {
  std::size_t batch = 0;
  std::vector<Scalar> hidden;  // batch x hidden, post-relu
  std::vector<Scalar> logits;  // batch x classes
};

/// `inputs` holds batch x shape.inputs values (brightness / 255 for images).
template <class Scalar>
ForwardPass<Scalar> forward(const BasicFcParams<Scalar>& params, std::span<const Scalar> inputs,
                            std::size_t batch);

/// Mean softmax cross-entropy over the batch; gradients written into `grads`
/// (reshaped as needed).
template <class Scalar>
double loss_and_grad(const BasicFcParams<Scalar>& params, std::span<const Scalar> inputs,
                     std::span<const std::uint8_t> labels, BasicFcParams<Scalar>& grads);

template <class Scalar>
struct LossAndGrad {
  double loss = 0.0;
  BasicFcParams<Scalar> grads;
};

template <class Scalar>
LossAndGrad<Scalar> loss_and_grad(const BasicFcParams<Scalar>& params,
                                  std::span<const Scalar> inputs,
                                  std::span<const std::uint8_t> labels);

/// Row-wise softmax of a batch x classes matrix in double precision.
std::vector<double> softmax_rows(std::span<const double> logits, std::size_t classes);

/// Classical momentum: v <- momentum * v - lr * g; w <- w + v.
template <class Scalar>
void sgd_momentum_step(BasicFcParams<Scalar>& params, BasicFcParams<Scalar>& velocity,
                       const BasicFcParams<Scalar>& grads, Scalar lr, Scalar momentum);

/// Brightness bytes scaled to [0, 1].
std::vector<float> normalize_pixels(std::span<const std::uint8_t> pixels);

/// Argmax over logits per image, lowest index on ties. Processed in fixed
/// chunks of `chunk` images so results never depend on how callers batch.
std::vector<int> predict(const FcParams& params, std::span<const std::uint8_t> pixels,
                         std::size_t count, std::size_t chunk = 256);
std::vector<int> predict(const FcParams& params, const ImageSet& images);

/// Argmax of one logits row, lowest index on ties.
template <class Scalar>
int argmax(std::span<const Scalar> row) noexcept;

double accuracy(std::span<const int> predictions, std::span<const std::uint8_t> labels);

struct TrainConfig {
  double lr0 = 0.01;
  double momentum = 0.9;
  double decay_factor = 10.0;
  int max_epochs = 5;
  std::size_t batch_size = 64;
  std::uint64_t seed = 42;
  double target_val_acc = 0.97;
  FcShape shape = {};

  /// Throws ContractViolation on out-of-range fields.
  void validate() const;
  double learning_rate(int epoch) const;
};

struct EpochRecord {
  int epoch = 0;
  double train_loss = 0.0;
  double val_accuracy = 0.0;
  double learning_rate = 0.0;
  bool operator==(const EpochRecord&) const = default;
};

struct TrainHistory {
  std::vector<EpochRecord> epochs;
  int best_epoch = -1;
  bool target_reached = false;
  bool operator==(const TrainHistory&) const = default;
};

struct TrainResult {
  FcParams params;  // best validation epoch
  TrainHistory history;
};

using EpochCallback = std::function<void(const EpochRecord&)>;

/// Mini-batch SGD with momentum, per-epoch decay lr0 / decay^e, and a fresh
/// shuffle each epoch. Stops once validation accuracy reaches the target or
/// after max_epochs. Throws NumericError on a non-finite loss.
TrainResult train(const ImageSet& train_set, const ImageSet& val_set, const TrainConfig& config,
                  const EpochCallback& on_epoch = {});

struct WeightsMetadata {
  FcShape shape;
  std::uint64_t seed = 0;
  int epochs = 0;
  double val_accuracy = 0.0;
};

struct LoadedWeights {
  FcParams params;
  WeightsMetadata metadata;
};

/// FCW1 layout: "FCW1", one JSON metadata line, then f32le w1, b1, w2, b2.
std::vector<std::uint8_t> encode_weights(const FcParams& params, const WeightsMetadata& metadata);
/// Throws FormatError on bad magic/metadata/shape and LengthError on size mismatch.
/// When `expected` is given the stored shape must equal it.
LoadedWeights decode_weights(std::span<const std::uint8_t> bytes, const FcShape* expected = nullptr);
void save_weights(const FcParams& params, const WeightsMetadata& metadata,
                  const std::filesystem::path& destination);
LoadedWeights load_weights(const std::filesystem::path& source, const FcShape* expected = nullptr);

}  // namespace noisebench
