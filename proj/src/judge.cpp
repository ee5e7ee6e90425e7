#include "driveline/judge.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <chrono>
#include <cstdlib>
#include <set>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "driveline/errors.hpp"
#include "driveline/json_io.hpp"

namespace driveline {

std::vector<int> Judge::score_rubric_batch(const std::vector<RubricItem>& items) {
  std::vector<int> out;
  out.reserve(items.size());
  for (const RubricItem& item : items) {
    out.push_back(score_rubric(item.gt_trace, item.pred_trace, item.image_ref));
  }
  return out;
}

namespace {

const char* kStopwords[] = {"a",   "an",  "the", "and", "to",  "is",   "are",
                            "for", "of",  "in",  "on",  "at",  "with", "from",
                            "by",  "its", "it",  "because", "while", "then"};

std::set<std::string> content_words(const std::string& text) {
  std::set<std::string> out;
  std::string word;
  auto flush = [&] {
    if (word.empty()) return;
    for (const char* stop : kStopwords) {
      if (word == stop) {
        word.clear();
        return;
      }
    }
    const auto& lex = lexicon_stem_words();
    if (std::find(lex.begin(), lex.end(), word) == lex.end()) {
      out.insert(word);
    }
    word.clear();
  };
  for (char ch : text) {
    if (std::isalnum(static_cast<unsigned char>(ch))) {
      word += static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
    } else {
      flush();
    }
  }
  flush();
  return out;
}

// Shared causal content: |gt n pred| / |gt|, vacuously 1 for an empty gt.
double content_overlap(const std::string& gt, const std::string& pred) {
  const std::set<std::string> g = content_words(gt);
  if (g.empty()) return 1.0;
  const std::set<std::string> p = content_words(pred);
  size_t common = 0;
  for (const std::string& w : g) common += p.count(w);
  return static_cast<double>(common) / static_cast<double>(g.size());
}

bool lon_opposite(LonIntent a, LonIntent b) {
  auto braking = [](LonIntent i) {
    return i == LonIntent::Decelerate || i == LonIntent::Stop;
  };
  return (a == LonIntent::Accelerate && braking(b)) ||
         (b == LonIntent::Accelerate && braking(a));
}

bool lat_opposite(LatIntent a, LatIntent b) {
  return (a == LatIntent::Left && b == LatIntent::Right) ||
         (a == LatIntent::Right && b == LatIntent::Left);
}

}  // namespace

int MockJudge::score_rubric(const std::string& gt_trace,
                            const std::string& pred_trace,
                            const std::string& /*image_ref*/) {
  if (gt_trace == pred_trace) return 5;
  const ParsedIntent gt = parse_intent(gt_trace);
  const ParsedIntent pred = parse_intent(pred_trace);
  if (lon_opposite(gt.longitudinal, pred.longitudinal) ||
      lat_opposite(gt.lateral, pred.lateral)) {
    return 0;
  }
  if (gt.longitudinal != pred.longitudinal) return 1;
  if (gt.lateral != pred.lateral) return 2;
  const double overlap = content_overlap(gt_trace, pred_trace);
  if (overlap >= 0.5) return 5;
  if (overlap > 0.0) return 4;
  return 3;
}

std::array<bool, 3> MockJudge::eval_triplet(const CocRecord& rec,
                                            const CocRecord& reference) {
  const bool decision_match = rec.decision == reference.decision;

  // All reference component categories must be present in the sample.
  bool factors_present = true;
  for (const CriticalComponent& ref : reference.components) {
    bool found = false;
    for (const CriticalComponent& c : rec.components) {
      if (c.category == ref.category) {
        found = true;
        break;
      }
    }
    if (!found) {
      factors_present = false;
      break;
    }
  }

  const bool cause_effect_valid = validate_record(rec).empty();
  return {decision_match, factors_present, cause_effect_valid};
}

HttpJudgeConfig judge_config_from_env() {
  HttpJudgeConfig cfg;
  if (const char* url = std::getenv("COC_JUDGE_URL")) cfg.url = url;
  if (const char* timeout = std::getenv("COC_JUDGE_TIMEOUT_MS")) {
    cfg.timeout_ms = std::atoi(timeout);
  }
  return cfg;
}

struct HttpJudge::Impl {
  HttpJudgeConfig cfg;
  std::string host;  // scheme://host:port
  std::string path;

  explicit Impl(HttpJudgeConfig config) : cfg(std::move(config)) {
    const size_t scheme = cfg.url.find("://");
    if (scheme == std::string::npos) {
      throw ValidationError("judge", "judge url must include a scheme: " +
                                         cfg.url);
    }
    const size_t slash = cfg.url.find('/', scheme + 3);
    if (slash == std::string::npos) {
      host = cfg.url;
      path = "/";
    } else {
      host = cfg.url.substr(0, slash);
      path = cfg.url.substr(slash);
    }
  }

  nlohmann::json post(const nlohmann::json& request) {
    std::string last_error = "no attempt made";
    for (int attempt = 0; attempt < cfg.max_attempts; ++attempt) {
      if (attempt > 0) {
        std::this_thread::sleep_for(std::chrono::milliseconds(
            cfg.backoff_base_ms * (1 << (attempt - 1))));
      }
      httplib::Client client(host);
      client.set_connection_timeout(0, cfg.timeout_ms * 1000);
      client.set_read_timeout(cfg.timeout_ms / 1000,
                              (cfg.timeout_ms % 1000) * 1000);
      auto res = client.Post(path, request.dump(), "application/json");
      if (!res) {
        last_error = "no response from " + host;
        continue;
      }
      if (res->status != 200) {
        last_error = "status " + std::to_string(res->status);
        continue;
      }
      try {
        return nlohmann::json::parse(res->body);
      } catch (const nlohmann::json::exception& e) {
        throw ProtocolError("judge", std::string("unparseable response: ") +
                                         e.what());
      }
    }
    throw TransportError("judge", "judge unreachable after " +
                                      std::to_string(cfg.max_attempts) +
                                      " attempts: " + last_error);
  }
};

HttpJudge::HttpJudge(HttpJudgeConfig config)
    : impl_(std::make_unique<Impl>(std::move(config))) {}

HttpJudge::~HttpJudge() = default;

int HttpJudge::score_rubric(const std::string& gt_trace,
                            const std::string& pred_trace,
                            const std::string& image_ref) {
  nlohmann::json request = {
      {"task", "rubric"}, {"gt", gt_trace}, {"pred", pred_trace}};
  if (!image_ref.empty()) request["image"] = image_ref;
  const nlohmann::json response = impl_->post(request);
  if (!response.contains("score") || !response.at("score").is_number_integer()) {
    throw ProtocolError("judge", "rubric response missing integer score");
  }
  const int score = response.at("score").get<int>();
  if (score < 0 || score > 5) {
    throw ProtocolError("judge", "rubric score outside 0..5: " +
                                     std::to_string(score));
  }
  return score;
}

std::array<bool, 3> HttpJudge::eval_triplet(const CocRecord& rec,
                                            const CocRecord& reference) {
  const nlohmann::json request = {{"task", "triplet"},
                                  {"gt", record_to_json(reference).dump()},
                                  {"pred", record_to_json(rec).dump()}};
  const nlohmann::json response = impl_->post(request);
  if (!response.contains("answers") || !response.at("answers").is_array() ||
      response.at("answers").size() != 3) {
    throw ProtocolError("judge", "triplet response missing three answers");
  }
  std::array<bool, 3> out{};
  for (int i = 0; i < 3; ++i) {
    if (!response.at("answers")[i].is_boolean()) {
      throw ProtocolError("judge", "triplet answers must be booleans");
    }
    out[i] = response.at("answers")[i].get<bool>();
  }
  return out;
}

std::vector<int> HttpJudge::score_rubric_batch(
    const std::vector<RubricItem>& items) {
  std::vector<int> results(items.size(), 0);
  std::vector<std::exception_ptr> errors(items.size());
  std::atomic<size_t> next{0};
  const int workers = std::max(
      1, std::min(impl_->cfg.max_in_flight, static_cast<int>(items.size())));
  auto run = [&] {
    for (;;) {
      const size_t i = next.fetch_add(1);
      if (i >= items.size()) return;
      try {
        results[i] =
            score_rubric(items[i].gt_trace, items[i].pred_trace,
                         items[i].image_ref);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (int w = 0; w < workers; ++w) pool.emplace_back(run);
  for (std::thread& t : pool) t.join();
  for (const std::exception_ptr& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return results;
}

std::unique_ptr<Judge> make_judge(bool allow_live) {
  if (allow_live) {
    const HttpJudgeConfig cfg = judge_config_from_env();
    if (!cfg.url.empty()) return std::make_unique<HttpJudge>(cfg);
  }
  return std::make_unique<MockJudge>();
}

}  // namespace driveline
