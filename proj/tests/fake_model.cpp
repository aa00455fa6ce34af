// Line-protocol model used by the external backend tests.
//   fake_model echo P     answer p_bf = P to every request
//   fake_model mean       answer p_bf = mean(items) / 150
//   fake_model hang       read a request and never answer
//   fake_model exit       exit after reading one request
//   fake_model garbage    answer with a line that is not JSON
//   fake_model wrong-id   answer with a different id

#include <iostream>
#include <string>
#include <thread>

#include <nlohmann/json.hpp>

int main(int argc, char** argv) {
  const std::string mode = argc > 1 ? argv[1] : "echo";
  const double p = argc > 2 ? std::stod(argv[2]) : 0.5;
  for (std::string line; std::getline(std::cin, line);) {
    const auto req = nlohmann::json::parse(line);
    nlohmann::json resp{{"id", req["id"]}};
    if (mode == "echo") {
      resp["p_bf"] = p;
    } else if (mode == "mean") {
      double s = 0;
      for (int x : req["items"]) s += x;
      resp["p_bf"] = s / static_cast<double>(req["items"].size()) / 150.0;
    } else if (mode == "hang") {
      std::this_thread::sleep_for(std::chrono::seconds(30));
      return 0;
    } else if (mode == "exit") {
      return 0;
    } else if (mode == "garbage") {
      std::cout << "not json" << std::endl;
      continue;
    } else if (mode == "wrong-id") {
      resp["id"] = "someone-else";
      resp["p_bf"] = p;
    }
    std::cout << resp.dump() << std::endl;
  }
  return 0;
}
