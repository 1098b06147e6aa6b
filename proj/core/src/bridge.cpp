#include "noisebench/bridge.hpp"

#include <openssl/evp.h>

#include <cmath>

#include <fmt/format.h>

#include "json.hpp"
#include "noisebench/errors.hpp"
#include "noisebench/log.hpp"

namespace noisebench {
namespace {

using nlohmann::json;
using nlohmann::ordered_json;

constexpr std::size_t kQuoteLimit = 200;

std::string quote(std::string_view line) {
  if (line.size() <= kQuoteLimit) return std::string(line);
  return std::string(line.substr(0, kQuoteLimit)) + "...";
}

Clock::time_point deadline_after(double seconds) {
  return Clock::now() + std::chrono::duration_cast<Clock::duration>(std::chrono::duration<double>(seconds));
}

json parse_object(std::string_view line, std::string_view what) {
  json j = json::parse(line, nullptr, false);
  if (j.is_discarded() || !j.is_object()) {
    throw ProtocolError(fmt::format("malformed {} line from classifier: '{}'", what, quote(line)));
  }
  return j;
}

std::string status_text(std::optional<int> status) {
  if (!status) return "still running";
  if (*status < 0) return fmt::format("killed by signal {}", -*status);
  return fmt::format("exit status {}", *status);
}

}  // namespace

ClassifierEndpoint parse_endpoint(std::string_view text, double timeout_seconds) {
  constexpr std::string_view kBuiltin = "builtin:";
  constexpr std::string_view kExec = "exec:";
  if (!(timeout_seconds > 0.0) || !std::isfinite(timeout_seconds)) {
    throw ContractViolation("classifier timeout must be positive");
  }
  if (text.starts_with(kBuiltin) && text.size() > kBuiltin.size()) {
    return BuiltinEndpoint{std::filesystem::path(std::string(text.substr(kBuiltin.size())))};
  }
  if (text.starts_with(kExec) && text.size() > kExec.size()) {
    return ExternalEndpoint{std::string(text.substr(kExec.size())), timeout_seconds};
  }
  throw ContractViolation(
      fmt::format("classifier must be 'builtin:PATH' or 'exec:COMMAND', got '{}'", text));
}

std::string describe(const ClassifierEndpoint& endpoint) {
  if (const auto* b = std::get_if<BuiltinEndpoint>(&endpoint)) return "builtin:" + b->weights.string();
  return "exec:" + std::get<ExternalEndpoint>(endpoint).command;
}

std::string base64_encode(std::span<const std::uint8_t> bytes) {
  std::string out(4 * ((bytes.size() + 2) / 3), '\0');
  if (bytes.empty()) return out;
  const int n = EVP_EncodeBlock(reinterpret_cast<unsigned char*>(out.data()), bytes.data(),
                                static_cast<int>(bytes.size()));
  out.resize(static_cast<std::size_t>(n));
  return out;
}

std::vector<std::uint8_t> base64_decode(std::string_view text) {
  if (text.size() % 4 != 0) throw ProtocolError("base64 payload length is not a multiple of 4");
  if (text.empty()) return {};
  std::vector<std::uint8_t> out(text.size() / 4 * 3);
  const int n = EVP_DecodeBlock(out.data(), reinterpret_cast<const unsigned char*>(text.data()),
                                static_cast<int>(text.size()));
  if (n < 0) throw ProtocolError("base64 payload contains invalid characters");
  std::size_t pad = 0;
  if (text.back() == '=') ++pad;
  if (text.size() >= 2 && text[text.size() - 2] == '=') ++pad;
  out.resize(static_cast<std::size_t>(n) - pad);
  return out;
}

namespace wire {

std::string hello(std::string_view name, int protocol) {
  ordered_json j;
  j["type"] = "hello";
  j["protocol"] = protocol;
  j["name"] = name;
  return j.dump();
}

std::string ready() { return R"({"type":"ready"})"; }
std::string shutdown() { return R"({"type":"shutdown"})"; }

std::string predict(std::uint64_t id, std::size_t batch, int height, int width,
                    std::span<const std::uint8_t> pixels) {
  ordered_json j;
  j["type"] = "predict";
  j["id"] = id;
  j["shape"] = {batch, height, width};
  j["pixels"] = base64_encode(pixels);
  return j.dump();
}

std::string prediction(std::uint64_t id, std::span<const int> labels) {
  ordered_json j;
  j["type"] = "prediction";
  j["id"] = id;
  j["labels"] = std::vector<int>(labels.begin(), labels.end());
  return j.dump();
}

std::string error(std::string_view message) {
  ordered_json j;
  j["type"] = "error";
  j["message"] = message;
  return j.dump();
}

Hello parse_hello(std::string_view line) {
  const json j = parse_object(line, "hello");
  if (j.value("type", "") != "hello" || !j.contains("protocol") || !j["protocol"].is_number_integer()) {
    throw ProtocolError(fmt::format("expected hello message, got '{}'", quote(line)));
  }
  Hello h;
  h.protocol = j["protocol"].get<int>();
  h.name = j.contains("name") && j["name"].is_string() ? j["name"].get<std::string>() : "";
  return h;
}

}  // namespace wire

struct Session::State {
  std::unique_ptr<LineTransport> transport;
  double timeout_seconds = 60.0;
  std::string name;
  std::uint64_t next_id = 1;
  bool broken = false;
  bool closed = false;
  std::string last_response;

  [[noreturn]] void fail_peer_gone(std::string_view during) {
    broken = true;
    // Short grace period so the exit status and final stderr are available.
    transport->finish(Clock::now() + std::chrono::milliseconds(200));
    std::string diag = transport->diagnostics();
    throw ClassifierError(fmt::format("classifier '{}' terminated {} ({}){}{}", name, during,
                                      status_text(transport->exit_status()),
                                      diag.empty() ? "" : "; stderr: ", diag));
  }
};

Session::Session(std::unique_ptr<State> state) : state_(std::move(state)) {}
Session::Session(Session&&) noexcept = default;
Session& Session::operator=(Session&& other) noexcept {
  if (this != &other) {
    try {
      shutdown();
    } catch (...) {
    }
    state_ = std::move(other.state_);
  }
  return *this;
}

Session::~Session() {
  try {
    shutdown();
  } catch (const std::exception& e) {
    log_message(LogLevel::Warn, fmt::format("classifier shutdown failed: {}", e.what()));
  }
}

Session Session::handshake(std::unique_ptr<LineTransport> transport, double timeout_seconds) {
  if (!transport) throw ContractViolation("Session::handshake: null transport");
  if (!(timeout_seconds > 0.0)) throw ContractViolation("Session::handshake: timeout must be positive");
  auto state = std::make_unique<State>();
  state->transport = std::move(transport);
  state->timeout_seconds = timeout_seconds;
  state->name = "<unnamed>";

  std::optional<std::string> line;
  try {
    line = state->transport->receive_line(deadline_after(timeout_seconds));
  } catch (const ClassifierError& e) {
    state->broken = true;
    state->transport->finish(Clock::now());
    throw ClassifierError(fmt::format("handshake failed: {}", e.what()));
  }
  if (!line) state->fail_peer_gone("before sending hello");

  try {
    const Hello hello = wire::parse_hello(*line);
    if (hello.protocol != kProtocolVersion) {
      throw ProtocolError(fmt::format("unsupported protocol version {} (driver speaks {})",
                                      hello.protocol, kProtocolVersion));
    }
    state->name = hello.name.empty() ? "<unnamed>" : hello.name;
    state->transport->send_line(wire::ready(), deadline_after(timeout_seconds));
  } catch (...) {
    state->broken = true;
    state->transport->finish(Clock::now() + std::chrono::milliseconds(200));
    throw;
  }
  return Session(std::move(state));
}

std::vector<int> Session::predict_batch(std::span<const std::uint8_t> pixels, std::size_t batch,
                                        int height, int width) {
  if (!state_ || state_->closed) throw ContractViolation("predict_batch: session is shut down");
  if (batch == 0) throw ContractViolation("predict_batch: batch must contain at least one image");
  if (height <= 0 || width <= 0 ||
      pixels.size() != batch * static_cast<std::size_t>(height) * static_cast<std::size_t>(width)) {
    throw ContractViolation(fmt::format("predict_batch: {} bytes do not match shape [{}, {}, {}]",
                                        pixels.size(), batch, height, width));
  }
  State& s = *state_;
  if (s.broken) throw ClassifierError(fmt::format("classifier '{}' session is no longer usable", s.name));

  const std::uint64_t id = s.next_id++;
  const auto deadline = deadline_after(s.timeout_seconds);
  try {
    s.transport->send_line(wire::predict(id, batch, height, width, pixels), deadline);
  } catch (const ClassifierError&) {
    if (s.transport->exit_status()) s.fail_peer_gone("while receiving a request");
    s.broken = true;
    throw;
  }

  std::optional<std::string> line;
  try {
    line = s.transport->receive_line(deadline);
  } catch (const ClassifierError&) {
    s.broken = true;
    throw;
  }
  if (!line) s.fail_peer_gone("mid-exchange");
  s.last_response = *line;

  try {
    const json j = parse_object(*line, "prediction");
    const std::string type = j.value("type", "");
    if (type == "error") {
      throw ClassifierError(
          fmt::format("classifier '{}' reported an error: {}", s.name, j.value("message", "")));
    }
    if (type != "prediction") {
      throw ProtocolError(fmt::format("expected prediction message, got '{}'", quote(*line)));
    }
    if (!j.contains("id") || !j["id"].is_number_unsigned() || j["id"].get<std::uint64_t>() != id) {
      throw ProtocolError(fmt::format("response id does not match request id {}: '{}'", id, quote(*line)));
    }
    const auto& labels = j.contains("labels") ? j["labels"] : json();
    if (!labels.is_array() || labels.size() != batch) {
      throw ProtocolError(fmt::format("expected {} labels in response {}, got {}", batch, id,
                                      labels.is_array() ? labels.size() : 0));
    }
    std::vector<int> out;
    out.reserve(batch);
    for (const auto& l : labels) {
      if (!l.is_number_integer() || l.get<long long>() < 0 || l.get<long long>() > 9) {
        throw ProtocolError(fmt::format("label {} in response {} is outside [0,9]", l.dump(), id));
      }
      out.push_back(l.get<int>());
    }
    return out;
  } catch (...) {
    s.broken = true;
    throw;
  }
}

std::optional<int> Session::shutdown() {
  if (!state_ || state_->closed) return std::nullopt;
  State& s = *state_;
  s.closed = true;
  const auto deadline = deadline_after(s.timeout_seconds);
  if (!s.broken) {
    try {
      s.transport->send_line(wire::shutdown(), deadline);
    } catch (const ClassifierError& e) {
      log_message(LogLevel::Warn, fmt::format("classifier '{}': {}", s.name, e.what()));
    }
  }
  const int status = s.transport->finish(deadline);
  if (status != 0) {
    log_message(LogLevel::Warn, fmt::format("classifier '{}' shut down with {}", s.name, status_text(status)));
  }
  return status;
}

const std::string& Session::peer_name() const noexcept { return state_->name; }
bool Session::alive() const noexcept { return state_ && !state_->closed && !state_->broken; }
const std::string& Session::last_response() const noexcept { return state_->last_response; }

Session spawn_and_handshake(const ExternalEndpoint& endpoint) {
  if (endpoint.command.empty()) throw ContractViolation("external classifier command is empty");
  return Session::handshake(ChildProcess::spawn_shell(endpoint.command), endpoint.timeout_seconds);
}

}  // namespace noisebench
