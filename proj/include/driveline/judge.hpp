#pragma once

#include <array>
#include <memory>
#include <string>
#include <vector>

#include "driveline/coc.hpp"

namespace driveline {

struct RubricItem {
  std::string gt_trace;
  std::string pred_trace;
  std::string image_ref;  // pass-through reference, may be empty
};

// Scores reasoning traces on the 0..5 rubric and answers the three dataset
// subtask questions (decision match, causal factors present, cause-effect
// valid).
class Judge {
 public:
  virtual ~Judge() = default;

  virtual int score_rubric(const std::string& gt_trace,
                           const std::string& pred_trace,
                           const std::string& image_ref = "") = 0;

  virtual std::array<bool, 3> eval_triplet(const CocRecord& rec,
                                           const CocRecord& reference) = 0;

  // Batch scoring; the HTTP client fans these out with its in-flight limit.
  virtual std::vector<int> score_rubric_batch(
      const std::vector<RubricItem>& items);
};

// Deterministic rule-based judge, the test-time default.
// Rubric tiers: opposite intent 0; longitudinal mismatch 1; lateral mismatch
// 2; intents match with no shared causal content 3; partial overlap 4;
// overlap >= 0.5 (or identical traces) 5.
class MockJudge : public Judge {
 public:
  int score_rubric(const std::string& gt_trace, const std::string& pred_trace,
                   const std::string& image_ref = "") override;
  std::array<bool, 3> eval_triplet(const CocRecord& rec,
                                   const CocRecord& reference) override;
};

struct HttpJudgeConfig {
  std::string url;          // e.g. http://127.0.0.1:8080/judge
  int timeout_ms = 10000;
  int max_attempts = 3;     // exponential backoff between attempts
  int backoff_base_ms = 100;
  int max_in_flight = 4;
};

// Reads COC_JUDGE_URL and COC_JUDGE_TIMEOUT_MS; url empty when unset.
HttpJudgeConfig judge_config_from_env();

// POSTs {"task":"rubric"|"triplet","gt":...,"pred":...} and expects
// {"score":int} or {"answers":[bool,bool,bool]}. Unreachable or non-200
// responses raise TransportError after the retry budget; malformed bodies
// raise ProtocolError.
class HttpJudge : public Judge {
 public:
  explicit HttpJudge(HttpJudgeConfig config);
  ~HttpJudge() override;

  int score_rubric(const std::string& gt_trace, const std::string& pred_trace,
                   const std::string& image_ref = "") override;
  std::array<bool, 3> eval_triplet(const CocRecord& rec,
                                   const CocRecord& reference) override;
  std::vector<int> score_rubric_batch(
      const std::vector<RubricItem>& items) override;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

// MockJudge unless COC_JUDGE_URL is set and live judging was requested.
std::unique_ptr<Judge> make_judge(bool allow_live);

}  // namespace driveline
