#include <doctest.h>

#include <atomic>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "driveline/errors.hpp"
#include "driveline/judge.hpp"

using namespace driveline;

namespace {

// Local judge endpoint for exercising the wire protocol.
class LocalJudgeServer {
 public:
  LocalJudgeServer() {
    server_.Post("/judge", [this](const httplib::Request& req,
                                  httplib::Response& res) {
      ++hits_;
      if (fail_first_ && hits_ == 1) {
        res.status = 503;
        return;
      }
      if (malformed_) {
        res.set_content("{\"unexpected\":true}", "application/json");
        return;
      }
      const nlohmann::json body = nlohmann::json::parse(req.body);
      if (body.at("task") == "rubric") {
        res.set_content("{\"score\":4}", "application/json");
      } else {
        res.set_content("{\"answers\":[true,false,true]}",
                        "application/json");
      }
    });
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }

  ~LocalJudgeServer() {
    server_.stop();
    thread_.join();
  }

  std::string url() const {
    return "http://127.0.0.1:" + std::to_string(port_) + "/judge";
  }
  int hits() const { return hits_; }
  void set_fail_first(bool v) { fail_first_ = v; }
  void set_malformed(bool v) { malformed_ = v; }

 private:
  httplib::Server server_;
  std::thread thread_;
  int port_ = 0;
  std::atomic<int> hits_{0};
  bool fail_first_ = false;
  bool malformed_ = false;
};

HttpJudgeConfig config_for(const LocalJudgeServer& server) {
  HttpJudgeConfig cfg;
  cfg.url = server.url();
  cfg.timeout_ms = 2000;
  cfg.max_attempts = 3;
  cfg.backoff_base_ms = 10;
  return cfg;
}

}  // namespace

TEST_CASE("live rubric and triplet round-trips") {
  LocalJudgeServer server;
  HttpJudge judge(config_for(server));
  CHECK(judge.score_rubric("stopping", "slowing down") == 4);

  CocRecord rec;
  rec.decision.longitudinal = LonDecision::Yield;
  rec.trace = "yielding";
  const std::array<bool, 3> answers = judge.eval_triplet(rec, rec);
  CHECK(answers == std::array<bool, 3>{true, false, true});
}

TEST_CASE("a transient failure is retried") {
  LocalJudgeServer server;
  server.set_fail_first(true);
  HttpJudge judge(config_for(server));
  CHECK(judge.score_rubric("a", "b") == 4);
  CHECK(server.hits() == 2);
}

TEST_CASE("an unreachable endpoint raises a transport error") {
  HttpJudgeConfig cfg;
  cfg.url = "http://127.0.0.1:9/judge";  // discard port, nothing listens
  cfg.timeout_ms = 200;
  cfg.max_attempts = 2;
  cfg.backoff_base_ms = 1;
  HttpJudge judge(cfg);
  CHECK_THROWS_AS(judge.score_rubric("a", "b"), TransportError);
}

TEST_CASE("a malformed response raises a protocol error") {
  LocalJudgeServer server;
  server.set_malformed(true);
  HttpJudge judge(config_for(server));
  CHECK_THROWS_AS(judge.score_rubric("a", "b"), ProtocolError);
}

TEST_CASE("batches fan out and keep request order") {
  LocalJudgeServer server;
  HttpJudgeConfig cfg = config_for(server);
  cfg.max_in_flight = 4;
  HttpJudge judge(cfg);
  std::vector<RubricItem> items(10, RubricItem{"gt", "pred", ""});
  const std::vector<int> scores = judge.score_rubric_batch(items);
  CHECK(scores == std::vector<int>(10, 4));
  CHECK(server.hits() == 10);
}

TEST_CASE("environment configuration is honored") {
  setenv("COC_JUDGE_URL", "http://example.test/judge", 1);
  setenv("COC_JUDGE_TIMEOUT_MS", "1234", 1);
  const HttpJudgeConfig cfg = judge_config_from_env();
  CHECK(cfg.url == "http://example.test/judge");
  CHECK(cfg.timeout_ms == 1234);
  unsetenv("COC_JUDGE_URL");
  unsetenv("COC_JUDGE_TIMEOUT_MS");
  CHECK(judge_config_from_env().url.empty());
}
