#include <doctest.h>

#include <arpa/inet.h>
#include <netinet/in.h>
#include <sys/socket.h>
#include <unistd.h>

#include <string>
#include <thread>

#include "bpadv/errors.hpp"
#include "bpadv/external_backend.hpp"

using namespace bpadv;
using namespace std::chrono_literals;

namespace {

ExternalEndpoint spawn(std::vector<std::string> args,
                       std::chrono::milliseconds timeout = 5000ms) {
  ExternalEndpoint e;
  e.command = {BPADV_FAKE_MODEL};
  e.command.insert(e.command.end(), args.begin(), args.end());
  e.timeout = timeout;
  return e;
}

}  // namespace

TEST_CASE("subprocess echo") {
  ExternalBackend b(spawn({"echo", "0.9"}));
  const auto v = b.predict(std::vector{20, 30}, "i1");
  CHECK(v.p_bf == 0.9);
  CHECK(v.p_ff == doctest::Approx(0.1));
  CHECK(b.queries().total() == 1);
  b.predict(std::vector{40}, "i1");
  CHECK(b.queries().count("i1") == 2);
}

TEST_CASE("subprocess sees the items") {
  ExternalBackend b(spawn({"mean"}));
  CHECK(b.predict(std::vector{60, 90}).p_bf == doctest::Approx(0.5));
}

TEST_CASE("failures surface as BackendUnavailableError") {
  {
    ExternalBackend b(spawn({"hang"}, 200ms));
    CHECK_THROWS_AS(b.predict(std::vector{20}), BackendUnavailableError);
    CHECK(b.queries().total() == 0);
  }
  {
    ExternalBackend b(spawn({"exit"}));
    CHECK_THROWS_AS(b.predict(std::vector{20}), BackendUnavailableError);
  }
  {
    ExternalBackend b(spawn({"garbage"}));
    CHECK_THROWS_AS(b.predict(std::vector{20}), BackendUnavailableError);
  }
  {
    ExternalBackend b(spawn({"wrong-id", "0.3"}));
    CHECK_THROWS_AS(b.predict(std::vector{20}, "mine"), BackendUnavailableError);
  }
  {
    ExternalBackend b(spawn({"echo", "1.5"}));
    CHECK_THROWS_AS(b.predict(std::vector{20}), NumericError);
  }
  ExternalEndpoint missing;
  missing.command = {"/nonexistent/model-binary"};
  CHECK_THROWS_AS(ExternalBackend{missing}.predict(std::vector{20}), BackendUnavailableError);
}

TEST_CASE("endpoint must name exactly one transport") {
  CHECK_THROWS_AS(ExternalBackend{ExternalEndpoint{}}, ConfigError);
  auto both = spawn({"echo"});
  both.host = "127.0.0.1";
  both.port = 1;
  CHECK_THROWS_AS(ExternalBackend{both}, ConfigError);
}

TEST_CASE("tcp endpoint") {
  const int srv = ::socket(AF_INET, SOCK_STREAM, 0);
  REQUIRE(srv >= 0);
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
  addr.sin_port = 0;
  REQUIRE(::bind(srv, reinterpret_cast<sockaddr*>(&addr), sizeof addr) == 0);
  socklen_t len = sizeof addr;
  ::getsockname(srv, reinterpret_cast<sockaddr*>(&addr), &len);
  REQUIRE(::listen(srv, 1) == 0);

  std::thread server([srv] {
    const int c = ::accept(srv, nullptr, nullptr);
    std::string buf;
    char ch;
    int answered = 0;
    while (answered < 2 && ::read(c, &ch, 1) == 1) {
      if (ch != '\n') continue;
      const std::string resp = answered == 0 ? "{\"p_bf\":0.25}\n" : "{\"p_bf\":0.75,\"id\":\"b\"}\n";
      (void)!::write(c, resp.data(), resp.size());
      ++answered;
    }
    ::close(c);
  });

  {
    ExternalEndpoint e;
    e.host = "127.0.0.1";
    e.port = ntohs(addr.sin_port);
    ExternalBackend b(e);
    CHECK(b.predict(std::vector{20}, "a").p_bf == 0.25);
    CHECK(b.predict(std::vector{20}, "b").p_bf == 0.75);
    CHECK(b.queries().total() == 2);
    server.join();
    CHECK_THROWS_AS(b.predict(std::vector{20}, "c"), BackendUnavailableError);
  }
  ::close(srv);
}
