#include "bpadv/external_backend.hpp"

#include <cerrno>
#include <csignal>
#include <cstring>

#include <fcntl.h>
#include <netdb.h>
#include <poll.h>
#include <sys/socket.h>
#include <sys/wait.h>
#include <unistd.h>

#include "bpadv/errors.hpp"
#include "bpadv/json_util.hpp"

namespace bpadv {

namespace {

std::string errno_text(const char* what) {
  return std::string(what) + ": " + std::strerror(errno);
}

}  // namespace

ExternalBackend::ExternalBackend(ExternalEndpoint endpoint)
    : endpoint_(std::move(endpoint)) {
  const bool has_cmd = !endpoint_.command.empty();
  const bool has_tcp = !endpoint_.host.empty() || endpoint_.port != 0;
  if (has_cmd == has_tcp)
    throw ConfigError("external model needs exactly one of command or host:port");
  // A dead peer must surface as EPIPE, not kill the process.
  std::signal(SIGPIPE, SIG_IGN);
  if (has_cmd)
    spawn();
  else
    connect_tcp();
}

ExternalBackend::~ExternalBackend() { shutdown(); }

void ExternalBackend::shutdown() noexcept {
  if (write_fd_ >= 0) ::close(write_fd_);
  if (read_fd_ >= 0 && read_fd_ != write_fd_) ::close(read_fd_);
  write_fd_ = read_fd_ = -1;
  if (child_ > 0) {
    int status = 0;
    // Closing stdin normally ends the child; give it a moment, then kill.
    for (int i = 0; i < 50; ++i) {
      if (::waitpid(child_, &status, WNOHANG) == child_) {
        child_ = -1;
        return;
      }
      ::usleep(2000);
    }
    ::kill(child_, SIGKILL);
    ::waitpid(child_, &status, 0);
    child_ = -1;
  }
}

void ExternalBackend::spawn() {
  int to_child[2], from_child[2];
  if (::pipe2(to_child, O_CLOEXEC) != 0)
    throw BackendUnavailableError(errno_text("pipe"));
  if (::pipe2(from_child, O_CLOEXEC) != 0) {
    ::close(to_child[0]);
    ::close(to_child[1]);
    throw BackendUnavailableError(errno_text("pipe"));
  }
  std::vector<char*> argv;
  for (auto& a : endpoint_.command) argv.push_back(a.data());
  argv.push_back(nullptr);

  const pid_t pid = ::fork();
  if (pid < 0) throw BackendUnavailableError(errno_text("fork"));
  if (pid == 0) {
    ::dup2(to_child[0], STDIN_FILENO);
    ::dup2(from_child[1], STDOUT_FILENO);
    ::execvp(argv[0], argv.data());
    ::_exit(127);
  }
  ::close(to_child[0]);
  ::close(from_child[1]);
  child_ = pid;
  write_fd_ = to_child[1];
  read_fd_ = from_child[0];
}

void ExternalBackend::connect_tcp() {
  addrinfo hints{};
  hints.ai_family = AF_UNSPEC;
  hints.ai_socktype = SOCK_STREAM;
  addrinfo* res = nullptr;
  const std::string port = std::to_string(endpoint_.port);
  const std::string host = endpoint_.host.empty() ? "127.0.0.1" : endpoint_.host;
  if (int rc = ::getaddrinfo(host.c_str(), port.c_str(), &hints, &res); rc != 0)
    throw BackendUnavailableError("resolve " + host + ": " + gai_strerror(rc));
  int fd = -1;
  for (addrinfo* ai = res; ai; ai = ai->ai_next) {
    fd = ::socket(ai->ai_family, ai->ai_socktype | SOCK_CLOEXEC, ai->ai_protocol);
    if (fd < 0) continue;
    if (::connect(fd, ai->ai_addr, ai->ai_addrlen) == 0) break;
    ::close(fd);
    fd = -1;
  }
  ::freeaddrinfo(res);
  if (fd < 0)
    throw BackendUnavailableError("cannot connect to " + host + ":" + port);
  read_fd_ = write_fd_ = fd;
}

void ExternalBackend::write_all(const std::string& data) {
  std::size_t off = 0;
  while (off < data.size()) {
    const ssize_t n = ::write(write_fd_, data.data() + off, data.size() - off);
    if (n < 0) {
      if (errno == EINTR) continue;
      throw BackendUnavailableError(errno_text("write to external model"));
    }
    off += static_cast<std::size_t>(n);
  }
}

std::string ExternalBackend::read_line() {
  const auto deadline = std::chrono::steady_clock::now() + endpoint_.timeout;
  for (;;) {
    if (auto nl = buffer_.find('\n'); nl != std::string::npos) {
      std::string line = buffer_.substr(0, nl);
      buffer_.erase(0, nl + 1);
      return line;
    }
    const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(
        deadline - std::chrono::steady_clock::now());
    if (left.count() <= 0)
      throw BackendUnavailableError("external model timed out");
    pollfd pfd{read_fd_, POLLIN, 0};
    const int rc = ::poll(&pfd, 1, static_cast<int>(left.count()));
    if (rc < 0) {
      if (errno == EINTR) continue;
      throw BackendUnavailableError(errno_text("poll"));
    }
    if (rc == 0) throw BackendUnavailableError("external model timed out");
    char chunk[4096];
    const ssize_t n = ::read(read_fd_, chunk, sizeof chunk);
    if (n < 0) {
      if (errno == EINTR) continue;
      throw BackendUnavailableError(errno_text("read from external model"));
    }
    if (n == 0) throw BackendUnavailableError("external model disconnected");
    buffer_.append(chunk, static_cast<std::size_t>(n));
  }
}

double ExternalBackend::probability_bf(std::span<const int> items,
                                       std::string_view instance_id) {
  std::lock_guard lock(mutex_);
  if (write_fd_ < 0) throw BackendUnavailableError("external model is closed");
  std::string request = "{\"id\":" + quote(std::string(instance_id)) + ",\"items\":[";
  for (std::size_t j = 0; j < items.size(); ++j) {
    if (j) request += ',';
    request += std::to_string(items[j]);
  }
  request += "]}\n";
  write_all(request);
  const std::string line = read_line();
  Json j;
  try {
    j = Json::parse(line);
  } catch (const Json::parse_error&) {
    throw BackendUnavailableError("malformed response: " + line);
  }
  if (!j.is_object() || !j.contains("p_bf") || !j["p_bf"].is_number())
    throw BackendUnavailableError("response lacks numeric p_bf: " + line);
  if (j.contains("id") && j["id"] != std::string(instance_id))
    throw BackendUnavailableError("response id mismatch: " + line);
  return j["p_bf"].get<double>();
}

}  // namespace bpadv
