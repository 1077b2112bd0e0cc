#pragma once

#include <atomic>
#include <filesystem>
#include <fstream>
#include <random>
#include <string>
#include <thread>

#include <unistd.h>

#include <httplib.h>
#include <json.hpp>

#include "cotstream/backend.hpp"
#include "cotstream/dataset.hpp"
#include "cotstream/error.hpp"
#include "cotstream/json_io.hpp"
#include "cotstream/simulate.hpp"

namespace testing {

namespace fs = std::filesystem;

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static std::atomic<int> counter{0};
    path_ = fs::temp_directory_path() /
            ("cotstream-" + tag + "-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const fs::path& path() const { return path_; }
  fs::path operator/(const std::string& name) const { return path_ / name; }

 private:
  fs::path path_;
};

inline void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << text;
}

inline std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

// Writes a dataset as the JSONL format load_dataset reads.
inline void write_dataset(const fs::path& path, const cotstream::Dataset& ds) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  for (const auto& s : ds.samples) {
    nlohmann::json rec{{"id", s.id}, {"question", s.question}, {"answer", s.gold}};
    out << rec.dump() << "\n";
  }
}

inline cotstream::Dataset small_dataset(std::size_t n, cotstream::TaskKind task = cotstream::TaskKind::Arithmetic,
                                        std::uint64_t seed = 0) {
  return cotstream::synthetic_dataset(task, n, seed);
}

// Counts calls before delegating.
class CountingBackend : public cotstream::Backend {
 public:
  explicit CountingBackend(cotstream::Backend& inner) : inner_(inner) {}
  cotstream::CompletionResponse complete(const cotstream::CompletionRequest& r) override {
    ++calls;
    return inner_.complete(r);
  }
  std::string identity() const override { return inner_.identity(); }
  std::size_t max_in_flight() const override { return inner_.max_in_flight(); }

  std::atomic<std::size_t> calls{0};

 private:
  cotstream::Backend& inner_;
};

// Backend that throws once a call budget is used up.
class FailingBackend : public cotstream::Backend {
 public:
  FailingBackend(cotstream::Backend& inner, std::size_t allowed) : inner_(inner), allowed_(allowed) {}
  cotstream::CompletionResponse complete(const cotstream::CompletionRequest& r) override {
    if (calls_.fetch_add(1) >= allowed_) throw cotstream::Error(cotstream::ErrorKind::Backend, "simulated outage");
    return inner_.complete(r);
  }
  std::string identity() const override { return "failing"; }

 private:
  cotstream::Backend& inner_;
  std::size_t allowed_;
  std::atomic<std::size_t> calls_{0};
};

// OpenAI-compatible completions endpoint on localhost, answered by a mock.
class FakeCompletionsServer {
 public:
  explicit FakeCompletionsServer(cotstream::Backend& model) : model_(model) {
    server_.Post("/v1/completions", [this](const httplib::Request& req, httplib::Response& res) {
      ++hits;
      last_auth = req.get_header_value("Authorization");
      if (fail_next > 0) {
        --fail_next;
        res.status = fail_status;
        res.set_content("{\"error\":\"try again\"}", "application/json");
        return;
      }
      auto body = nlohmann::json::parse(req.body);
      cotstream::CompletionRequest creq;
      creq.prompt = body.at("prompt").get<std::string>();
      creq.max_tokens = body.at("max_tokens").get<std::size_t>();
      creq.temperature = body.at("temperature").get<double>();
      creq.stop = body.at("stop").get<std::vector<std::string>>();
      creq.model_id = body.at("model").get<std::string>();
      auto out = model_.complete(creq);
      nlohmann::json reply{
          {"choices", {{{"text", out.text}, {"finish_reason", cotstream::to_string(out.finish_reason)}}}},
          {"usage", {{"prompt_tokens", out.prompt_tokens}, {"completion_tokens", out.completion_tokens}}}};
      res.set_content(reply.dump(), "application/json");
    });
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }
  ~FakeCompletionsServer() {
    server_.stop();
    if (thread_.joinable()) thread_.join();
  }

  std::string base_url() const { return "http://127.0.0.1:" + std::to_string(port_); }

  std::atomic<std::size_t> hits{0};
  std::atomic<int> fail_next{0};
  int fail_status = 503;
  std::string last_auth;

 private:
  cotstream::Backend& model_;
  httplib::Server server_;
  int port_ = 0;
  std::thread thread_;
};

}  // namespace testing
