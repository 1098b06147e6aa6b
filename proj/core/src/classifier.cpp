#include "noisebench/classifier.hpp"

#include <fmt/format.h>

#include "noisebench/errors.hpp"

namespace noisebench {

BuiltinClassifier::BuiltinClassifier(std::shared_ptr<const FcParams> params, std::string name)
    : params_(std::move(params)), name_(std::move(name)) {
  if (!params_) throw ContractViolation("BuiltinClassifier: null parameters");
}

std::vector<int> BuiltinClassifier::predict(std::span<const std::uint8_t> pixels, std::size_t count,
                                            int height, int width) {
  if (static_cast<std::size_t>(height) * static_cast<std::size_t>(width) != params_->shape.inputs) {
    throw ContractViolation(fmt::format("builtin classifier expects {} pixels per image, got {}x{}",
                                        params_->shape.inputs, height, width));
  }
  return noisebench::predict(*params_, pixels, count);
}

std::vector<int> ExternalClassifier::predict(std::span<const std::uint8_t> pixels, std::size_t count,
                                             int height, int width) {
  return session_.predict_batch(pixels, count, height, width);
}

ClassifierFactory make_classifier_factory(const ClassifierEndpoint& endpoint) {
  if (const auto* builtin = std::get_if<BuiltinEndpoint>(&endpoint)) {
    const FcShape expected{};
    auto params = std::make_shared<const FcParams>(load_weights(builtin->weights, &expected).params);
    return [params] { return std::make_unique<BuiltinClassifier>(params); };
  }
  const ExternalEndpoint external = std::get<ExternalEndpoint>(endpoint);
  return [external]() -> std::unique_ptr<Classifier> {
    return std::make_unique<ExternalClassifier>(spawn_and_handshake(external));
  };
}

}  // namespace noisebench
