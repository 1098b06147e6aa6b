#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "noisebench/bridge.hpp"
#include "noisebench/fcnet.hpp"

namespace noisebench {

/// Anything that maps a batch of canvases to digit labels. One instance is
/// used by one thread at a time.
class Classifier {
 public:
  virtual ~Classifier() = default;
  /// `pixels` holds count x height x width bytes.
  virtual std::vector<int> predict(std::span<const std::uint8_t> pixels, std::size_t count, int height,
                                   int width) = 0;
  virtual std::string name() const = 0;
};

/// In-process FCN sharing immutable weights.
class BuiltinClassifier final : public Classifier {
 public:
  explicit BuiltinClassifier(std::shared_ptr<const FcParams> params, std::string name = "builtin-fcn");
  std::vector<int> predict(std::span<const std::uint8_t> pixels, std::size_t count, int height,
                           int width) override;
  std::string name() const override { return name_; }

 private:
  std::shared_ptr<const FcParams> params_;
  std::string name_;
};

/// External process reached via the line protocol.
class ExternalClassifier final : public Classifier {
 public:
  explicit ExternalClassifier(Session session) : session_(std::move(session)) {}
  std::vector<int> predict(std::span<const std::uint8_t> pixels, std::size_t count, int height,
                           int width) override;
  std::string name() const override { return session_.peer_name(); }
  Session& session() noexcept { return session_; }

 private:
  Session session_;
};

/// Creates one classifier per worker.
using ClassifierFactory = std::function<std::unique_ptr<Classifier>()>;

/// Builtin endpoints load the weights once and share them; external endpoints
/// spawn a fresh process per call.
ClassifierFactory make_classifier_factory(const ClassifierEndpoint& endpoint);

}  // namespace noisebench
