#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "noisebench/process.hpp"

namespace noisebench {

inline constexpr int kProtocolVersion = 1;
inline constexpr std::size_t kDefaultBridgeBatch = 256;

struct BuiltinEndpoint {
  std::filesystem::path weights;
};

struct ExternalEndpoint {
  std::string command;  // run through /bin/sh -c
  double timeout_seconds = 60.0;
};

using ClassifierEndpoint = std::variant<BuiltinEndpoint, ExternalEndpoint>;

/// "builtin:PATH" or "exec:COMMAND". Throws ContractViolation otherwise.
ClassifierEndpoint parse_endpoint(std::string_view text, double timeout_seconds = 60.0);
std::string describe(const ClassifierEndpoint& endpoint);

std::string base64_encode(std::span<const std::uint8_t> bytes);
/// Throws ProtocolError on malformed input.
std::vector<std::uint8_t> base64_decode(std::string_view text);

struct Hello {
  int protocol = 0;
  std::string name;
};

/// Wire messages, one JSON object per line.
namespace wire {
std::string hello(std::string_view name, int protocol = kProtocolVersion);
std::string ready();
std::string shutdown();
std::string predict(std::uint64_t id, std::size_t batch, int height, int width,
                    std::span<const std::uint8_t> pixels);
std::string prediction(std::uint64_t id, std::span<const int> labels);
std::string error(std::string_view message);

/// Throws ProtocolError naming the offending line.
Hello parse_hello(std::string_view line);
}  // namespace wire

/// One live connection to an external classifier. Strict request/response
/// alternation; not thread-safe.
class Session {
 public:
  /// Reads the peer's hello, checks the protocol version, replies ready.
  static Session handshake(std::unique_ptr<LineTransport> transport, double timeout_seconds);

  Session(Session&&) noexcept;
  Session& operator=(Session&&) noexcept;
  ~Session();

  /// `pixels` holds batch x height x width bytes, batch >= 1.
  std::vector<int> predict_batch(std::span<const std::uint8_t> pixels, std::size_t batch, int height,
                                 int width);

  /// Sends shutdown, closes the stream, reaps the peer. Second call is a no-op.
  /// Returns the peer's exit status (nullopt if already shut down).
  std::optional<int> shutdown();

  const std::string& peer_name() const noexcept;
  bool alive() const noexcept;
  /// Raw JSON text of the last response line.
  const std::string& last_response() const noexcept;

 private:
  struct State;
  explicit Session(std::unique_ptr<State> state);
  std::unique_ptr<State> state_;
};

/// Spawns the endpoint's command and performs the handshake.
Session spawn_and_handshake(const ExternalEndpoint& endpoint);

}  // namespace noisebench
