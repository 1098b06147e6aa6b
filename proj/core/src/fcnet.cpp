#include "noisebench/fcnet.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <numeric>
#include <string>

#include <Eigen/Dense>
#include <fmt/format.h>

#include "json.hpp"
#include "noisebench/errors.hpp"
#include "noisebench/rng.hpp"

namespace noisebench {
namespace {

template <class S>
using RowMatrix = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <class S>
using ConstMatrixMap = Eigen::Map<const RowMatrix<S>>;
template <class S>
using MatrixMap = Eigen::Map<RowMatrix<S>>;

constexpr std::string_view kWeightsMagic = "FCW1";
constexpr std::size_t kMaxMetadataLine = 1 << 16;
constexpr std::uint64_t kShuffleSalt = 0x5348554646'4C4531ULL;

template <class S>
void check_input(const BasicFcParams<S>& params, std::span<const S> inputs, std::size_t batch) {
  const FcShape& s = params.shape;
  if (params.w1.size() != s.hidden * s.inputs || params.b1.size() != s.hidden ||
      params.w2.size() != s.classes * s.hidden || params.b2.size() != s.classes) {
    throw ContractViolation("fcnet: parameter tensors do not match their declared shape");
  }
  if (inputs.size() != batch * s.inputs) {
    throw ContractViolation(fmt::format("fcnet: {} input values for a batch of {} x {}",
                                        inputs.size(), batch, s.inputs));
  }
}

/// Column sums accumulated in double, row order fixed.
template <class S>
void column_sums(const RowMatrix<S>& m, std::vector<S>& out) {
  std::vector<double> acc(static_cast<std::size_t>(m.cols()), 0.0);
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) acc[c] += m(r, c);
  }
  out.resize(acc.size());
  std::transform(acc.begin(), acc.end(), out.begin(), [](double v) { return static_cast<S>(v); });
}

template <class S>
void forward_into(const BasicFcParams<S>& params, std::span<const S> inputs, std::size_t batch,
                  RowMatrix<S>& hidden, RowMatrix<S>& logits) {
  const FcShape& s = params.shape;
  const auto rows = static_cast<Eigen::Index>(batch);
  ConstMatrixMap<S> x(inputs.data(), rows, s.inputs);
  ConstMatrixMap<S> w1(params.w1.data(), s.hidden, s.inputs);
  ConstMatrixMap<S> w2(params.w2.data(), s.classes, s.hidden);
  Eigen::Map<const Eigen::Matrix<S, 1, Eigen::Dynamic>> b1(params.b1.data(), s.hidden);
  Eigen::Map<const Eigen::Matrix<S, 1, Eigen::Dynamic>> b2(params.b2.data(), s.classes);

  hidden.resize(rows, s.hidden);
  hidden.noalias() = x * w1.transpose();
  hidden.rowwise() += b1;
  hidden = hidden.cwiseMax(S(0));
  logits.resize(rows, s.classes);
  logits.noalias() = hidden * w2.transpose();
  logits.rowwise() += b2;
}

void write_f32le(std::vector<std::uint8_t>& out, std::span<const float> values) {
  const std::size_t start = out.size();
  out.resize(start + values.size() * sizeof(float));
  std::uint8_t* dst = out.data() + start;
  for (float v : values) {
    std::uint32_t bits = std::bit_cast<std::uint32_t>(v);
    for (int k = 0; k < 4; ++k) *dst++ = static_cast<std::uint8_t>(bits >> (8 * k));
  }
}

std::size_t read_f32le(std::span<const std::uint8_t> in, std::size_t offset, std::span<float> values) {
  const std::uint8_t* src = in.data() + offset;
  for (float& v : values) {
    const std::uint32_t bits = std::uint32_t{src[0]} | (std::uint32_t{src[1]} << 8) |
                               (std::uint32_t{src[2]} << 16) | (std::uint32_t{src[3]} << 24);
    v = std::bit_cast<float>(bits);
    src += 4;
  }
  return offset + values.size() * sizeof(float);
}

}  // namespace

FcParams init_params(std::uint64_t seed, FcShape shape) {
  FcParams p(shape);
  SplitMix64 rng(seed);
  auto fill = [&rng](std::vector<float>& w, std::size_t fan_in) {
    const double limit = std::sqrt(6.0 / static_cast<double>(fan_in));
    for (float& v : w) v = static_cast<float>((2.0 * rng.next_unit() - 1.0) * limit);
  };
  fill(p.w1, shape.inputs);
  fill(p.w2, shape.hidden);
  return p;
}

template <class S>
ForwardPass<S> forward(const BasicFcParams<S>& params, std::span<const S> inputs, std::size_t batch) {
  check_input(params, inputs, batch);
  RowMatrix<S> hidden, logits;
  forward_into(params, inputs, batch, hidden, logits);
  ForwardPass<S> out;
  out.batch = batch;
  out.hidden.assign(hidden.data(), hidden.data() + hidden.size());
  out.logits.assign(logits.data(), logits.data() + logits.size());
  return out;
}

std::vector<double> softmax_rows(std::span<const double> logits, std::size_t classes) {
  if (classes == 0 || logits.size() % classes != 0) {
    throw ContractViolation("softmax_rows: logits are not a whole number of rows");
  }
  std::vector<double> out(logits.size());
  for (std::size_t r = 0; r < logits.size(); r += classes) {
    const double mx = *std::max_element(logits.begin() + r, logits.begin() + r + classes);
    double sum = 0.0;
    for (std::size_t k = 0; k < classes; ++k) sum += out[r + k] = std::exp(logits[r + k] - mx);
    for (std::size_t k = 0; k < classes; ++k) out[r + k] /= sum;
  }
  return out;
}

template <class S>
double loss_and_grad(const BasicFcParams<S>& params, std::span<const S> inputs,
                     std::span<const std::uint8_t> labels, BasicFcParams<S>& grads) {
  const std::size_t batch = labels.size();
  if (batch == 0) throw ContractViolation("loss_and_grad: empty batch");
  check_input(params, inputs, batch);
  const FcShape& s = params.shape;
  for (std::size_t i = 0; i < batch; ++i) {
    if (labels[i] >= s.classes) {
      throw ContractViolation(fmt::format("loss_and_grad: label {} at {} exceeds {} classes",
                                          labels[i], i, s.classes));
    }
  }
  if (!(grads.shape == s) || grads.w1.size() != params.w1.size()) grads = BasicFcParams<S>(s);

  RowMatrix<S> hidden, logits;
  forward_into(params, inputs, batch, hidden, logits);

  // Softmax and loss in double; dlogits = (p - onehot) / batch.
  RowMatrix<S> dlogits(logits.rows(), logits.cols());
  double loss = 0.0;
  const double inv_batch = 1.0 / static_cast<double>(batch);
  std::vector<double> row(s.classes);
  for (std::size_t i = 0; i < batch; ++i) {
    double mx = -INFINITY;
    for (std::size_t k = 0; k < s.classes; ++k) mx = std::max(mx, row[k] = logits(i, k));
    double sum = 0.0;
    for (std::size_t k = 0; k < s.classes; ++k) sum += std::exp(row[k] - mx);
    const double log_sum = std::log(sum);
    loss -= row[labels[i]] - mx - log_sum;
    for (std::size_t k = 0; k < s.classes; ++k) {
      const double p = std::exp(row[k] - mx - log_sum);
      dlogits(i, k) = static_cast<S>((p - (k == labels[i] ? 1.0 : 0.0)) * inv_batch);
    }
  }

  ConstMatrixMap<S> x(inputs.data(), static_cast<Eigen::Index>(batch), s.inputs);
  ConstMatrixMap<S> w2(params.w2.data(), s.classes, s.hidden);
  MatrixMap<S> dw1(grads.w1.data(), s.hidden, s.inputs);
  MatrixMap<S> dw2(grads.w2.data(), s.classes, s.hidden);

  dw2.noalias() = dlogits.transpose() * hidden;
  column_sums(dlogits, grads.b2);
  RowMatrix<S> dhidden = dlogits * w2;
  dhidden = (hidden.array() > S(0)).select(dhidden, S(0));
  dw1.noalias() = dhidden.transpose() * x;
  column_sums(dhidden, grads.b1);
  return loss * inv_batch;
}

template <class S>
LossAndGrad<S> loss_and_grad(const BasicFcParams<S>& params, std::span<const S> inputs,
                             std::span<const std::uint8_t> labels) {
  LossAndGrad<S> out;
  out.grads = BasicFcParams<S>(params.shape);
  out.loss = loss_and_grad(params, inputs, labels, out.grads);
  return out;
}

template <class S>
void sgd_momentum_step(BasicFcParams<S>& params, BasicFcParams<S>& velocity,
                       const BasicFcParams<S>& grads, S lr, S momentum) {
  if (!(params.shape == velocity.shape) || !(params.shape == grads.shape)) {
    throw ContractViolation("sgd_momentum_step: shape mismatch");
  }
  auto update = [lr, momentum](std::vector<S>& w, std::vector<S>& v, const std::vector<S>& g) {
    if (w.size() != v.size() || w.size() != g.size()) {
      throw ContractViolation("sgd_momentum_step: tensor size mismatch");
    }
    S* wp = w.data();
    S* vp = v.data();
    const S* gp = g.data();
    for (std::size_t i = 0, n = w.size(); i < n; ++i) {
      vp[i] = momentum * vp[i] - lr * gp[i];
      wp[i] += vp[i];
    }
  };
  update(params.w1, velocity.w1, grads.w1);
  update(params.b1, velocity.b1, grads.b1);
  update(params.w2, velocity.w2, grads.w2);
  update(params.b2, velocity.b2, grads.b2);
}

template <class S>
int argmax(std::span<const S> row) noexcept {
  int best = 0;
  for (std::size_t k = 1; k < row.size(); ++k) {
    if (row[k] > row[best]) best = static_cast<int>(k);
  }
  return best;
}

std::vector<float> normalize_pixels(std::span<const std::uint8_t> pixels) {
  std::vector<float> out(pixels.size());
  std::transform(pixels.begin(), pixels.end(), out.begin(),
                 [](std::uint8_t b) { return static_cast<float>(b) / 255.0f; });
  return out;
}

std::vector<int> predict(const FcParams& params, std::span<const std::uint8_t> pixels,
                         std::size_t count, std::size_t chunk) {
  const std::size_t width = params.shape.inputs;
  if (pixels.size() != count * width) {
    throw ContractViolation(
        fmt::format("predict: {} pixel bytes for {} images of {}", pixels.size(), count, width));
  }
  if (chunk == 0) throw ContractViolation("predict: chunk must be positive");
  std::vector<int> labels;
  labels.reserve(count);
  RowMatrix<float> hidden, logits;
  for (std::size_t first = 0; first < count; first += chunk) {
    const std::size_t n = std::min(chunk, count - first);
    const auto x = normalize_pixels(pixels.subspan(first * width, n * width));
    check_input(params, std::span<const float>(x), n);
    forward_into(params, std::span<const float>(x), n, hidden, logits);
    for (std::size_t i = 0; i < n; ++i) {
      labels.push_back(argmax(std::span<const float>(logits.data() + i * logits.cols(),
                                                     static_cast<std::size_t>(logits.cols()))));
    }
  }
  return labels;
}

std::vector<int> predict(const FcParams& params, const ImageSet& images) {
  return predict(params, images.pixels(), images.size());
}

double accuracy(std::span<const int> predictions, std::span<const std::uint8_t> labels) {
  if (predictions.size() != labels.size() || labels.empty()) {
    throw ContractViolation("accuracy: prediction/label length mismatch or empty");
  }
  std::size_t correct = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) correct += predictions[i] == labels[i];
  return static_cast<double>(correct) / static_cast<double>(labels.size());
}

void TrainConfig::validate() const {
  if (!(lr0 > 0.0) || !std::isfinite(lr0)) throw ContractViolation("train: lr0 must be > 0");
  if (!(momentum >= 0.0 && momentum < 1.0)) throw ContractViolation("train: momentum must be in [0, 1)");
  if (!(decay_factor >= 1.0) || !std::isfinite(decay_factor)) {
    throw ContractViolation("train: decay factor must be >= 1");
  }
  if (max_epochs < 1) throw ContractViolation("train: max_epochs must be >= 1");
  if (batch_size < 1) throw ContractViolation("train: batch_size must be >= 1");
  if (shape.inputs == 0 || shape.hidden == 0 || shape.classes == 0) {
    throw ContractViolation("train: network dimensions must be positive");
  }
}

double TrainConfig::learning_rate(int epoch) const {
  return lr0 / std::pow(decay_factor, epoch);
}

TrainResult train(const ImageSet& train_set, const ImageSet& val_set, const TrainConfig& config,
                  const EpochCallback& on_epoch) {
  config.validate();
  if (train_set.empty() || val_set.empty()) {
    throw ContractViolation("train: training and validation sets must be non-empty");
  }
  const FcShape& shape = config.shape;
  if (train_set.image_pixels() != shape.inputs || val_set.image_pixels() != shape.inputs) {
    throw ContractViolation(fmt::format("train: images have {} pixels, network expects {}",
                                        train_set.image_pixels(), shape.inputs));
  }
  if (*std::max_element(train_set.labels().begin(), train_set.labels().end()) >= shape.classes) {
    throw ContractViolation("train: label exceeds the network's class count");
  }

  TrainResult result;
  FcParams params = init_params(config.seed, shape);
  FcParams velocity(shape);
  FcParams grads(shape);
  result.params = params;

  const std::size_t n = train_set.size();
  const std::size_t width = shape.inputs;
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  SplitMix64 shuffle_rng(mix64(config.seed ^ kShuffleSalt));

  std::vector<float> batch_inputs;
  std::vector<std::uint8_t> batch_labels;
  double best_acc = -1.0;

  for (int epoch = 0; epoch < config.max_epochs; ++epoch) {
    const double lr = config.learning_rate(epoch);
    for (std::size_t i = n - 1; i > 0; --i) {
      std::swap(order[i], order[uniform_below(shuffle_rng, i + 1)]);
    }

    double loss_sum = 0.0;
    for (std::size_t first = 0; first < n; first += config.batch_size) {
      const std::size_t count = std::min(config.batch_size, n - first);
      batch_inputs.resize(count * width);
      batch_labels.resize(count);
      for (std::size_t k = 0; k < count; ++k) {
        const std::size_t idx = order[first + k];
        auto px = train_set.image(idx);
        std::transform(px.begin(), px.end(), batch_inputs.begin() + k * width,
                       [](std::uint8_t b) { return static_cast<float>(b) / 255.0f; });
        batch_labels[k] = train_set.label(idx);
      }
      const double loss = loss_and_grad(params, std::span<const float>(batch_inputs),
                                        std::span<const std::uint8_t>(batch_labels), grads);
      if (!std::isfinite(loss)) {
        throw NumericError(fmt::format("non-finite training loss at epoch {}, sample {}", epoch, first));
      }
      loss_sum += loss * static_cast<double>(count);
      sgd_momentum_step(params, velocity, grads, static_cast<float>(lr),
                        static_cast<float>(config.momentum));
    }

    EpochRecord record;
    record.epoch = epoch;
    record.train_loss = loss_sum / static_cast<double>(n);
    record.learning_rate = lr;
    record.val_accuracy = accuracy(predict(params, val_set), val_set.labels());
    result.history.epochs.push_back(record);
    if (on_epoch) on_epoch(record);

    if (record.val_accuracy > best_acc) {
      best_acc = record.val_accuracy;
      result.params = params;
      result.history.best_epoch = epoch;
    }
    if (record.val_accuracy >= config.target_val_acc) {
      result.history.target_reached = true;
      break;
    }
  }
  return result;
}

std::vector<std::uint8_t> encode_weights(const FcParams& params, const WeightsMetadata& metadata) {
  if (!(params.shape == metadata.shape)) {
    throw ContractViolation("encode_weights: metadata shape differs from parameter shape");
  }
  nlohmann::ordered_json meta;
  meta["dims"] = {params.shape.inputs, params.shape.hidden, params.shape.classes};
  meta["seed"] = metadata.seed;
  meta["epochs"] = metadata.epochs;
  meta["val_accuracy"] = metadata.val_accuracy;
  const std::string line = meta.dump() + "\n";

  std::vector<std::uint8_t> out;
  out.reserve(kWeightsMagic.size() + line.size() + 4 * params.shape.parameter_count());
  out.insert(out.end(), kWeightsMagic.begin(), kWeightsMagic.end());
  out.insert(out.end(), line.begin(), line.end());
  params.for_each_tensor([&out](std::span<const float> t) { write_f32le(out, t); });
  return out;
}

LoadedWeights decode_weights(std::span<const std::uint8_t> bytes, const FcShape* expected) {
  if (bytes.size() < kWeightsMagic.size() ||
      !std::equal(kWeightsMagic.begin(), kWeightsMagic.end(), bytes.begin())) {
    throw FormatError("FCW1: missing magic");
  }
  const auto body = bytes.subspan(kWeightsMagic.size());
  const auto newline = std::find(body.begin(), body.begin() + std::min(body.size(), kMaxMetadataLine),
                                 std::uint8_t{'\n'});
  if (newline == body.end() || static_cast<std::size_t>(newline - body.begin()) >= kMaxMetadataLine) {
    throw FormatError("FCW1: metadata line is missing or unterminated");
  }
  const std::string line(body.begin(), newline);

  LoadedWeights out;
  try {
    const auto meta = nlohmann::json::parse(line);
    const auto& dims = meta.at("dims");
    if (!dims.is_array() || dims.size() != 3) throw FormatError("FCW1: dims must have 3 entries");
    for (const auto& d : dims) {
      if (!d.is_number_unsigned() || d.get<std::uint64_t>() == 0 || d.get<std::uint64_t>() > (1u << 20)) {
        throw FormatError("FCW1: dims must be positive integers");
      }
    }
    out.metadata.shape = {dims[0].get<std::size_t>(), dims[1].get<std::size_t>(), dims[2].get<std::size_t>()};
    out.metadata.seed = meta.value("seed", std::uint64_t{0});
    out.metadata.epochs = meta.value("epochs", 0);
    out.metadata.val_accuracy = meta.value("val_accuracy", 0.0);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(fmt::format("FCW1: malformed metadata line: {}", e.what()));
  }
  const FcShape& shape = out.metadata.shape;
  if (expected && !(shape == *expected)) {
    throw FormatError(fmt::format("FCW1: shape {}x{}x{} does not match expected {}x{}x{}", shape.inputs,
                                  shape.hidden, shape.classes, expected->inputs, expected->hidden,
                                  expected->classes));
  }
  const std::size_t header = kWeightsMagic.size() + line.size() + 1;
  const std::size_t need = header + 4 * shape.parameter_count();
  if (bytes.size() != need) {
    throw LengthError("FCW1 payload", need, bytes.size());
  }
  out.params = FcParams(shape);
  std::size_t offset = header;
  out.params.for_each_tensor([&](std::span<float> t) { offset = read_f32le(bytes, offset, t); });
  std::size_t index = 0;
  out.params.for_each_tensor([&](std::span<float> t) {
    for (float v : t) {
      if (!std::isfinite(v)) throw CorruptDataError("FCW1: non-finite weight", index);
      ++index;
    }
  });
  return out;
}

void save_weights(const FcParams& params, const WeightsMetadata& metadata,
                  const std::filesystem::path& destination) {
  write_file(destination, encode_weights(params, metadata));
}

LoadedWeights load_weights(const std::filesystem::path& source, const FcShape* expected) {
  return decode_weights(read_file(source), expected);
}

// Explicit instantiations: float for storage/training, double for gradient checks.
template ForwardPass<float> forward(const BasicFcParams<float>&, std::span<const float>, std::size_t);
template ForwardPass<double> forward(const BasicFcParams<double>&, std::span<const double>, std::size_t);
template double loss_and_grad(const BasicFcParams<float>&, std::span<const float>,
                              std::span<const std::uint8_t>, BasicFcParams<float>&);
template double loss_and_grad(const BasicFcParams<double>&, std::span<const double>,
                              std::span<const std::uint8_t>, BasicFcParams<double>&);
template LossAndGrad<float> loss_and_grad(const BasicFcParams<float>&, std::span<const float>,
                                          std::span<const std::uint8_t>);
template LossAndGrad<double> loss_and_grad(const BasicFcParams<double>&, std::span<const double>,
                                           std::span<const std::uint8_t>);
template void sgd_momentum_step(BasicFcParams<float>&, BasicFcParams<float>&, const BasicFcParams<float>&,
                                float, float);
template void sgd_momentum_step(BasicFcParams<double>&, BasicFcParams<double>&,
                                const BasicFcParams<double>&, double, double);
template int argmax(std::span<const float>) noexcept;
template int argmax(std::span<const double>) noexcept;

}  // namespace noisebench
