#pragma once

#include <chrono>
#include <cstdint>
#include <mutex>
#include <string>
#include <vector>

#include <sys/types.h>

#include "bpadv/classifier.hpp"

namespace bpadv {

/// Where an external model lives: a command to spawn (talks over its
/// stdin/stdout) or a TCP host:port. Exactly one must be set.
struct ExternalEndpoint {
  std::vector<std::string> command;
  std::string host;
  std::uint16_t port = 0;
  std::chrono::milliseconds timeout{10000};
};

/// Newline-delimited JSON model protocol.
///   request:  {"id": str, "items": [int...]}\n
///   response: {"id": str, "p_bf": float}\n
/// One request in flight per connection; predict() calls are serialized.
/// Throws BackendUnavailableError on spawn/connect failure, timeout,
/// disconnect or a malformed/mismatched response.
class ExternalBackend final : public Backend {
 public:
  explicit ExternalBackend(ExternalEndpoint endpoint);
  ~ExternalBackend() override;

  ExternalBackend(const ExternalBackend&) = delete;
  ExternalBackend& operator=(const ExternalBackend&) = delete;

 protected:
  double probability_bf(std::span<const int> items,
                        std::string_view instance_id) override;

 private:
  void spawn();
  void connect_tcp();
  void write_all(const std::string& data);
  std::string read_line();
  void shutdown() noexcept;

  ExternalEndpoint endpoint_;
  std::mutex mutex_;
  int write_fd_ = -1;
  int read_fd_ = -1;
  pid_t child_ = -1;
  std::string buffer_;
};

}  // namespace bpadv
