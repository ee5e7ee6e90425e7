// Command-line front end wiring the library modules together. Subcommands
// read JSON-Lines, write JSON reports, and exit 0 on success, 2 on
// validation errors, 3 on transport errors.

#include <algorithm>
#include <atomic>
#include <fstream>
#include <iostream>
#include <thread>

#include <CLI11.hpp>
#include <json.hpp>

#include "driveline/codec.hpp"
#include "driveline/coc.hpp"
#include "driveline/errors.hpp"
#include "driveline/flow.hpp"
#include "driveline/grpo.hpp"
#include "driveline/json_io.hpp"
#include "driveline/judge.hpp"
#include "driveline/meta.hpp"
#include "driveline/metrics.hpp"
#include "driveline/rewards.hpp"
#include "driveline/util.hpp"

namespace driveline {
namespace {

struct FlowCliConfig {
  int hidden = 256;
  int time_embed_dim = 32;
  int cond_dim = 2;
  int iterations = 400;
  int batch_size = 64;
  double learning_rate = 1e-3;
  double delta_t = 0.1;
};

struct JudgeCliConfig {
  bool live = false;
  int max_attempts = 3;
  int backoff_base_ms = 100;
  int max_in_flight = 4;
};

struct MetricsCliConfig {
  double a_comfort = 3.0;
  EpisodeMetricConfig episode;
};

struct CurationCliConfig {
  double beta = 1.0;
  double top_fraction = 0.25;
};

struct RunConfig {
  uint64_t seed = 0;
  FitConfig fit;
  QuantizerSpec quantizer;
  DetectorConfig detector;
  ScenarioConfig scenario;
  ScheduleSpec schedule;
  FlowCliConfig flow;
  RewardConfig rewards;
  GrpoDemoOptions grpo;
  CurationCliConfig curation;
  MetricsCliConfig metrics;
  JudgeCliConfig judge;
};

void check_keys(const Json& j, std::initializer_list<const char*> allowed,
                const char* section) {
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool known = false;
    for (const char* key : allowed) {
      if (it.key() == key) {
        known = true;
        break;
      }
    }
    if (!known) {
      throw ValidationError("config", std::string("unknown key \"") +
                                          it.key() + "\" in " + section);
    }
  }
}

template <typename T>
void get_if(const Json& j, const char* key, T* out) {
  if (j.contains(key)) *out = j.at(key).get<T>();
}

RunConfig load_config(const std::string& path) {
  RunConfig cfg;
  if (path.empty()) return cfg;
  std::ifstream in(path);
  if (!in) {
    throw ValidationError("config", "cannot open " + path);
  }
  Json j;
  try {
    in >> j;
  } catch (const Json::exception& e) {
    throw ValidationError("config", std::string("bad config: ") + e.what());
  }
  check_keys(j,
             {"seed", "fit", "quantizer", "detector", "scenario", "schedule",
              "flow", "rewards", "grpo", "curation", "metrics", "judge"},
             "config");
  get_if(j, "seed", &cfg.seed);
  if (j.contains("fit")) {
    const Json& s = j.at("fit");
    check_keys(s, {"tikhonov_lambda", "v_epsilon", "a_bound", "kappa_bound"},
               "fit");
    get_if(s, "tikhonov_lambda", &cfg.fit.tikhonov_lambda);
    get_if(s, "v_epsilon", &cfg.fit.v_epsilon);
    get_if(s, "a_bound", &cfg.fit.a_bound);
    get_if(s, "kappa_bound", &cfg.fit.kappa_bound);
  }
  if (j.contains("quantizer")) {
    const Json& s = j.at("quantizer");
    check_keys(s, {"a_lo", "a_hi", "kappa_lo", "kappa_hi", "bins"},
               "quantizer");
    get_if(s, "a_lo", &cfg.quantizer.a_lo);
    get_if(s, "a_hi", &cfg.quantizer.a_hi);
    get_if(s, "kappa_lo", &cfg.quantizer.kappa_lo);
    get_if(s, "kappa_hi", &cfg.quantizer.kappa_hi);
    get_if(s, "bins", &cfg.quantizer.bins);
  }
  if (j.contains("detector")) {
    const Json& s = j.at("detector");
    check_keys(s,
               {"a_gentle", "a_strong", "v_stop", "kappa_steer", "kappa_sharp",
                "hysteresis_frames"},
               "detector");
    get_if(s, "a_gentle", &cfg.detector.a_gentle);
    get_if(s, "a_strong", &cfg.detector.a_strong);
    get_if(s, "v_stop", &cfg.detector.v_stop);
    get_if(s, "kappa_steer", &cfg.detector.kappa_steer);
    get_if(s, "kappa_sharp", &cfg.detector.kappa_sharp);
    get_if(s, "hysteresis_frames", &cfg.detector.hysteresis_frames);
  }
  if (j.contains("scenario")) {
    const Json& s = j.at("scenario");
    check_keys(s,
               {"corridor_half_width", "corridor_length", "half_lane_width",
                "off_center_eps", "history_frames", "keyframe_buffer_s",
                "sustain_frames"},
               "scenario");
    get_if(s, "corridor_half_width", &cfg.scenario.corridor_half_width);
    get_if(s, "corridor_length", &cfg.scenario.corridor_length);
    get_if(s, "half_lane_width", &cfg.scenario.half_lane_width);
    get_if(s, "off_center_eps", &cfg.scenario.off_center_eps);
    get_if(s, "history_frames", &cfg.scenario.history_frames);
    get_if(s, "keyframe_buffer_s", &cfg.scenario.keyframe_buffer_s);
    get_if(s, "sustain_frames", &cfg.scenario.sustain_frames);
  }
  if (j.contains("schedule")) {
    const Json& s = j.at("schedule");
    check_keys(s, {"alpha", "beta", "shift"}, "schedule");
    get_if(s, "alpha", &cfg.schedule.alpha);
    get_if(s, "beta", &cfg.schedule.beta);
    get_if(s, "shift", &cfg.schedule.shift);
  }
  if (j.contains("flow")) {
    const Json& s = j.at("flow");
    check_keys(s,
               {"hidden", "time_embed_dim", "cond_dim", "iterations",
                "batch_size", "learning_rate", "delta_t"},
               "flow");
    get_if(s, "hidden", &cfg.flow.hidden);
    get_if(s, "time_embed_dim", &cfg.flow.time_embed_dim);
    get_if(s, "cond_dim", &cfg.flow.cond_dim);
    get_if(s, "iterations", &cfg.flow.iterations);
    get_if(s, "batch_size", &cfg.flow.batch_size);
    get_if(s, "learning_rate", &cfg.flow.learning_rate);
    get_if(s, "delta_t", &cfg.flow.delta_t);
  }
  if (j.contains("rewards")) {
    const Json& s = j.at("rewards");
    check_keys(s,
               {"lambda_l2", "lambda_coll", "lambda_jerk", "negated_penalty",
                "judge_weight", "consistency_weight", "ego_length",
                "ego_width", "consistency_window", "stop_override_frames"},
               "rewards");
    get_if(s, "negated_penalty", &cfg.rewards.weights.negated_penalty);
    get_if(s, "lambda_l2", &cfg.rewards.weights.lambda_l2);
    get_if(s, "lambda_coll", &cfg.rewards.weights.lambda_coll);
    get_if(s, "lambda_jerk", &cfg.rewards.weights.lambda_jerk);
    get_if(s, "judge_weight", &cfg.rewards.judge_weight);
    get_if(s, "consistency_weight", &cfg.rewards.consistency_weight);
    get_if(s, "ego_length", &cfg.rewards.ego_length);
    get_if(s, "ego_width", &cfg.rewards.ego_width);
    get_if(s, "consistency_window", &cfg.rewards.consistency_window);
    get_if(s, "stop_override_frames", &cfg.rewards.stop_override_frames);
  }
  if (j.contains("grpo")) {
    const Json& s = j.at("grpo");
    check_keys(s,
               {"vocab", "seq_len", "prefix_len", "group_size", "iterations",
                "beta", "lambda_kl", "learning_rate", "sft_corpus_size",
                "sft_target_fraction", "sft_iterations", "sft_learning_rate",
                "eval_groups", "num_seeds"},
               "grpo");
    get_if(s, "vocab", &cfg.grpo.vocab);
    get_if(s, "seq_len", &cfg.grpo.seq_len);
    get_if(s, "prefix_len", &cfg.grpo.prefix_len);
    get_if(s, "group_size", &cfg.grpo.group_size);
    get_if(s, "iterations", &cfg.grpo.iterations);
    get_if(s, "beta", &cfg.grpo.beta);
    get_if(s, "lambda_kl", &cfg.grpo.lambda_kl);
    get_if(s, "learning_rate", &cfg.grpo.learning_rate);
    get_if(s, "sft_corpus_size", &cfg.grpo.sft_corpus_size);
    get_if(s, "sft_target_fraction", &cfg.grpo.sft_target_fraction);
    get_if(s, "sft_iterations", &cfg.grpo.sft_iterations);
    get_if(s, "sft_learning_rate", &cfg.grpo.sft_learning_rate);
    get_if(s, "eval_groups", &cfg.grpo.eval_groups);
    get_if(s, "num_seeds", &cfg.grpo.num_seeds);
  }
  if (j.contains("curation")) {
    const Json& s = j.at("curation");
    check_keys(s, {"beta", "top_fraction"}, "curation");
    get_if(s, "beta", &cfg.curation.beta);
    get_if(s, "top_fraction", &cfg.curation.top_fraction);
  }
  if (j.contains("metrics")) {
    const Json& s = j.at("metrics");
    check_keys(s,
               {"a_comfort", "d_close_encounter", "deviation_limit",
                "ego_length", "ego_width", "rear_sector_deg"},
               "metrics");
    get_if(s, "a_comfort", &cfg.metrics.a_comfort);
    get_if(s, "d_close_encounter", &cfg.metrics.episode.d_close_encounter);
    get_if(s, "deviation_limit", &cfg.metrics.episode.deviation_limit);
    get_if(s, "ego_length", &cfg.metrics.episode.ego_length);
    get_if(s, "ego_width", &cfg.metrics.episode.ego_width);
    get_if(s, "rear_sector_deg", &cfg.metrics.episode.rear_sector_deg);
  }
  if (j.contains("judge")) {
    const Json& s = j.at("judge");
    check_keys(s, {"live", "max_attempts", "backoff_base_ms", "max_in_flight"},
               "judge");
    get_if(s, "live", &cfg.judge.live);
    get_if(s, "max_attempts", &cfg.judge.max_attempts);
    get_if(s, "backoff_base_ms", &cfg.judge.backoff_base_ms);
    get_if(s, "max_in_flight", &cfg.judge.max_in_flight);
  }
  return cfg;
}

std::unique_ptr<Judge> make_cli_judge(const RunConfig& cfg) {
  if (cfg.judge.live) {
    HttpJudgeConfig http = judge_config_from_env();
    if (http.url.empty()) {
      throw ValidationError("judge",
                            "judge.live set but COC_JUDGE_URL is not set");
    }
    http.max_attempts = cfg.judge.max_attempts;
    http.backoff_base_ms = cfg.judge.backoff_base_ms;
    http.max_in_flight = cfg.judge.max_in_flight;
    return std::make_unique<HttpJudge>(http);
  }
  return std::make_unique<MockJudge>();
}

// All numeric report output is rounded to 6 significant digits.
Json round_numbers(const Json& j) {
  if (j.is_object()) {
    Json out = Json::object();
    for (auto it = j.begin(); it != j.end(); ++it) {
      out[it.key()] = round_numbers(it.value());
    }
    return out;
  }
  if (j.is_array()) {
    Json out = Json::array();
    for (const Json& item : j) out.push_back(round_numbers(item));
    return out;
  }
  if (j.is_number_float()) return sig6(j.get<double>());
  return j;
}

Json with_version(Json j) {
  j["v"] = 1;
  return j;
}

void write_report(const std::string& path, const Json& report) {
  if (path.empty()) {
    throw ValidationError("cli", "--out is required");
  }
  std::ofstream out(path);
  if (!out) {
    throw ValidationError("cli", "cannot open " + path);
  }
  out << round_numbers(with_version(report)).dump(2) << "\n";
}

void write_lines(const std::string& path, const std::vector<Json>& lines) {
  if (path.empty()) {
    throw ValidationError("cli", "--out is required");
  }
  std::vector<Json> rounded;
  rounded.reserve(lines.size());
  for (const Json& j : lines) rounded.push_back(round_numbers(with_version(j)));
  write_jsonl(path, rounded);
}

// Index-ordered fan-out: output order matches input order regardless of
// scheduling, and the first worker exception is rethrown.
template <typename Fn>
std::vector<Json> parallel_map(const std::vector<Json>& inputs, int jobs,
                               Fn fn) {
  std::vector<Json> out(inputs.size());
  if (inputs.empty()) return out;
  jobs = std::max(1, std::min<int>(jobs, static_cast<int>(inputs.size())));
  if (jobs == 1) {
    for (size_t i = 0; i < inputs.size(); ++i) out[i] = fn(inputs[i], i);
    return out;
  }
  std::atomic<size_t> next{0};
  std::vector<std::exception_ptr> errors(inputs.size());
  auto worker = [&] {
    for (;;) {
      const size_t i = next.fetch_add(1);
      if (i >= inputs.size()) return;
      try {
        out[i] = fn(inputs[i], i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  for (int w = 0; w < jobs; ++w) pool.emplace_back(worker);
  for (std::thread& t : pool) t.join();
  for (const std::exception_ptr& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return out;
}

EgoState initial_from_json(const Json& j) {
  EgoState s;
  if (j.contains("initial")) {
    const Json& i = j.at("initial");
    s.x = i.value("x", 0.0);
    s.y = i.value("y", 0.0);
    s.theta = i.value("theta", 0.0);
    s.v = i.value("v", 0.0);
  }
  return s;
}

Eigen::VectorXd condition_from_json(const Json& j, int cond_dim) {
  Eigen::VectorXd cond = Eigen::VectorXd::Zero(cond_dim);
  if (j.contains("condition")) {
    const Json& c = j.at("condition");
    if (!c.is_array() || static_cast<int>(c.size()) != cond_dim) {
      throw ValidationError("cli", "condition must be an array of length " +
                                       std::to_string(cond_dim));
    }
    for (int i = 0; i < cond_dim; ++i) cond(i) = c[i].get<double>();
  }
  return cond;
}

std::vector<std::vector<AgentBox>> agents_from_json(const Json& j,
                                                    const char* context) {
  std::vector<std::vector<AgentBox>> agents;
  if (!j.contains("agents")) return agents;
  for (const Json& frame : j.at("agents")) {
    std::vector<AgentBox> boxes;
    for (const Json& a : frame) boxes.push_back(agent_from_json(a, context));
    agents.push_back(std::move(boxes));
  }
  return agents;
}

struct CommonArgs {
  std::string config_path;
  std::string in_path;
  std::string out_path;
  int64_t seed_override = -1;
  int jobs = 1;
};

RunConfig resolve_config(const CommonArgs& args) {
  RunConfig cfg = load_config(args.config_path);
  if (args.seed_override >= 0) {
    cfg.seed = static_cast<uint64_t>(args.seed_override);
  }
  return cfg;
}

int cmd_integrate(const CommonArgs& args) {
  const RunConfig cfg = resolve_config(args);
  const std::vector<Json> in = read_jsonl(args.in_path, "integrate");
  const std::vector<Json> out =
      parallel_map(in, args.jobs, [&](const Json& j, size_t) {
        const ControlSequence controls = controls_from_json(j, "integrate");
        return traj_to_json(
            integrate_controls(initial_from_json(j), controls, cfg.fit));
      });
  write_lines(args.out_path, out);
  return 0;
}

int cmd_fit(const CommonArgs& args) {
  const RunConfig cfg = resolve_config(args);
  const std::vector<Json> in = read_jsonl(args.in_path, "fit");
  const std::vector<Json> out =
      parallel_map(in, args.jobs, [&](const Json& j, size_t) {
        const Trajectory traj = traj_from_json(j, "fit");
        return controls_to_json(fit_controls(traj, cfg.fit));
      });
  write_lines(args.out_path, out);
  return 0;
}

int cmd_tokenize(const CommonArgs& args, const std::string& mode) {
  if (mode != "encode" && mode != "decode" && mode != "roundtrip") {
    throw ValidationError("tokenize", "mode must be encode, decode or "
                                      "roundtrip");
  }
  const RunConfig cfg = resolve_config(args);
  const std::vector<Json> in = read_jsonl(args.in_path, "tokenize");
  const std::vector<Json> out =
      parallel_map(in, args.jobs, [&](const Json& j, size_t) -> Json {
        if (mode == "decode") {
          ActionTokenSeq seq;
          seq.tokens = tokens_from_json(j, "tokenize");
          return controls_to_json(dequantize(seq, cfg.quantizer));
        }
        const ControlSequence controls = controls_from_json(j, "tokenize");
        const QuantizeResult q = quantize(controls, cfg.quantizer);
        if (mode == "roundtrip") {
          Json r = controls_to_json(
              dequantize(q.seq, cfg.quantizer, controls.dt));
          r["tokens"] = q.seq.tokens;
          r["saturated"] = q.saturated;
          return r;
        }
        Json r = tokens_to_json(q.seq.tokens);
        r["saturated"] = q.saturated;
        return r;
      });
  write_lines(args.out_path, out);
  return 0;
}

int cmd_detect_meta(const CommonArgs& args) {
  const RunConfig cfg = resolve_config(args);
  const std::vector<Json> in = read_jsonl(args.in_path, "detect-meta");
  const std::vector<Json> out =
      parallel_map(in, args.jobs, [&](const Json& j, size_t) {
        if (!j.contains("trajectory")) {
          throw ValidationError("detect-meta", "line needs a trajectory");
        }
        const Trajectory traj =
            traj_from_json(j.at("trajectory"), "detect-meta");
        const ControlSequence controls =
            j.contains("controls")
                ? controls_from_json(j.at("controls"), "detect-meta")
                : fit_controls(traj, cfg.fit);
        return profile_to_json(
            detect_meta_actions(traj, controls, cfg.detector));
      });
  write_lines(args.out_path, out);
  return 0;
}

int cmd_keyframes(const CommonArgs& args) {
  const RunConfig cfg = resolve_config(args);
  const std::vector<Json> in = read_jsonl(args.in_path, "keyframes");
  const std::vector<Json> out =
      parallel_map(in, args.jobs, [&](const Json& j, size_t) {
        const MetaActionProfile profile = profile_from_json(j, "keyframes");
        const std::vector<int> transitions = transition_frames(profile);
        Json keyframes = Json::array();
        for (int t : transitions) {
          const KeyframeResult kf = select_keyframe(
              t, cfg.scenario.history_frames, cfg.scenario.keyframe_buffer_s);
          keyframes.push_back({{"transition", t},
                               {"keyframe", kf.frame},
                               {"clamped", kf.clamped}});
        }
        return Json{{"transitions", transitions}, {"keyframes", keyframes}};
      });
  write_lines(args.out_path, out);
  return 0;
}

int cmd_tag_scenarios(const CommonArgs& args) {
  const RunConfig cfg = resolve_config(args);
  const std::vector<Json> in = read_jsonl(args.in_path, "tag-scenarios");
  const std::vector<Json> out =
      parallel_map(in, args.jobs, [&](const Json& j, size_t) {
        const Episode episode = episode_from_json(j, "tag-scenarios");
        Json reactive = Json::array();
        for (const ScenarioTag& t :
             tag_reactive_scenarios(episode, cfg.detector, cfg.scenario)) {
          reactive.push_back({{"tag", t.tag},
                              {"keyframe", t.keyframe},
                              {"clamped", t.clamped}});
        }
        Json proactive = Json::array();
        for (const ScenarioRange& r :
             tag_proactive_scenarios(episode, cfg.detector, cfg.scenario)) {
          proactive.push_back({{"tag", r.tag},
                               {"range_start", r.range_start},
                               {"range_end", r.range_end}});
        }
        return Json{{"id", episode.id},
                    {"reactive", reactive},
                    {"proactive", proactive}};
      });
  write_lines(args.out_path, out);
  return 0;
}

int cmd_compose_coc(const CommonArgs& args) {
  const RunConfig cfg = resolve_config(args);
  const std::vector<Json> in = read_jsonl(args.in_path, "compose-coc");
  const std::vector<Json> out =
      parallel_map(in, args.jobs, [&](const Json& j, size_t index) {
        CocRecord rec = record_from_json(j, "compose-coc");
        // Per-record seeding keeps --jobs runs byte-identical.
        std::mt19937_64 rng(cfg.seed + 0x9e3779b97f4a7c15ull * (index + 1));
        rec.trace = compose_trace(rec.decision, rec.components, rng);
        return record_to_json(rec);
      });
  write_lines(args.out_path, out);
  return 0;
}

int cmd_validate_coc(const CommonArgs& args) {
  const std::vector<Json> in = read_jsonl(args.in_path, "validate-coc");
  const std::vector<Json> out =
      parallel_map(in, args.jobs, [&](const Json& j, size_t) {
        const CocRecord rec = record_from_json(j, "validate-coc");
        Json violations = Json::array();
        for (Violation v : validate_record(rec)) {
          violations.push_back(to_string(v));
        }
        return Json{{"violations", violations}, {"valid", violations.empty()}};
      });
  write_lines(args.out_path, out);
  return 0;
}

int cmd_reward(const CommonArgs& args) {
  const RunConfig cfg = resolve_config(args);
  const std::vector<Json> in = read_jsonl(args.in_path, "reward");
  auto judge = make_cli_judge(cfg);
  const std::vector<Json> out =
      parallel_map(in, args.jobs, [&](const Json& j, size_t) {
        RewardRollout rollout;
        rollout.trace = j.value("trace", "");
        if (!j.contains("trajectory") || !j.contains("expert")) {
          throw ValidationError("reward",
                                "line needs trajectory and expert fields");
        }
        rollout.trajectory = traj_from_json(j.at("trajectory"), "reward");
        RewardReference gt;
        gt.trace = j.value("gt_trace", "");
        gt.expert = traj_from_json(j.at("expert"), "reward");
        const auto agents = agents_from_json(j, "reward");
        const RewardBreakdown b =
            total_reward(rollout, gt, agents, cfg.rewards, *judge);
        return Json{{"r_reason", b.r_reason},
                    {"r_consistency", b.r_consistency},
                    {"r_traj", b.r_traj},
                    {"total", b.total}};
      });
  write_lines(args.out_path, out);
  return 0;
}

int cmd_train_fm(const CommonArgs& args, const std::string& ckpt) {
  const RunConfig cfg = resolve_config(args);
  const std::vector<Json> in = read_jsonl(args.in_path, "train-fm");
  if (in.empty()) {
    throw ValidationError("train-fm", "empty dataset");
  }
  FlowDataset data;
  for (const Json& j : in) {
    const ControlSequence controls = controls_from_json(j, "train-fm");
    data.actions.push_back(flatten_controls(controls));
    data.conditions.push_back(condition_from_json(j, cfg.flow.cond_dim));
  }
  VectorFieldNet net(kTokensPerTrajectory, cfg.flow.cond_dim, cfg.flow.hidden,
                     cfg.flow.time_embed_dim);
  net.init_weights(cfg.seed);
  FlowTrainOptions opts;
  opts.iterations = cfg.flow.iterations;
  opts.batch_size = cfg.flow.batch_size;
  opts.learning_rate = cfg.flow.learning_rate;
  opts.seed = cfg.seed + 1;
  opts.schedule = cfg.schedule;
  const std::vector<double> losses = train_fm(&net, data, opts);
  save_checkpoint(net, ckpt + ".bin", ckpt + ".json");
  write_report(args.out_path, {{"iterations", opts.iterations},
                               {"samples", data.actions.size()},
                               {"initial_loss", losses.front()},
                               {"final_loss", losses.back()},
                               {"loss_curve", losses}});
  return 0;
}

int cmd_sample_fm(const CommonArgs& args, const std::string& ckpt, int n,
                  const std::string& cond_json) {
  const RunConfig cfg = resolve_config(args);
  const VectorFieldNet net = load_checkpoint(ckpt + ".bin", ckpt + ".json");
  Eigen::VectorXd cond = Eigen::VectorXd::Zero(net.cond_dim());
  if (!cond_json.empty()) {
    Json c;
    try {
      c = Json::parse(cond_json);
    } catch (const Json::exception& e) {
      throw ValidationError("sample-fm",
                            std::string("bad --cond: ") + e.what());
    }
    const Json wrapper = {{"condition", c}};
    cond = condition_from_json(wrapper, net.cond_dim());
  }
  std::vector<Json> out;
  for (int i = 0; i < n; ++i) {
    // Independent noise seed per sample.
    std::mt19937_64 rng(cfg.seed + 0x51ed2701ull + 7919ull * i);
    const ControlSequence controls =
        euler_sample(net, cond, cfg.flow.delta_t, rng, cfg.quantizer);
    out.push_back(controls_to_json(controls));
  }
  write_lines(args.out_path, out);
  return 0;
}

int cmd_sft_toy(const CommonArgs& args, int vocab, int iterations, double lr) {
  const RunConfig cfg = resolve_config(args);
  const std::vector<Json> in = read_jsonl(args.in_path, "sft-toy");
  if (in.empty()) {
    throw ValidationError("sft-toy", "empty dataset");
  }
  std::vector<std::vector<int>> sequences;
  for (const Json& j : in) {
    sequences.push_back(tokens_from_json(j, "sft-toy"));
  }
  const int seq_len = static_cast<int>(sequences.front().size());
  ToyPolicy policy(vocab, seq_len);
  policy.init_weights(cfg.seed, 0.05);
  const Eigen::VectorXd ctx = Eigen::VectorXd::Zero(policy.ctx_dim());

  Eigen::VectorXd grad(policy.params().size());
  Eigen::VectorXd m = Eigen::VectorXd::Zero(policy.params().size());
  Eigen::VectorXd v = Eigen::VectorXd::Zero(policy.params().size());
  std::vector<double> losses;
  for (int it = 0; it < iterations; ++it) {
    losses.push_back(sft_loss(policy, sequences, ctx, &grad));
    m = 0.9 * m + 0.1 * grad;
    v = 0.999 * v.array() + 0.001 * grad.array().square();
    const double c1 = 1.0 - std::pow(0.9, it + 1);
    const double c2 = 1.0 - std::pow(0.999, it + 1);
    policy.params().array() -=
        lr * (m.array() / c1) / ((v.array() / c2).sqrt() + 1e-8);
  }
  const double final_loss = sft_loss(policy, sequences, ctx);
  write_report(args.out_path, {{"iterations", iterations},
                               {"vocab", vocab},
                               {"seq_len", seq_len},
                               {"initial_loss", losses.front()},
                               {"final_loss", final_loss},
                               {"loss_curve", losses}});
  return 0;
}

int cmd_grpo_demo(const CommonArgs& args) {
  RunConfig cfg = resolve_config(args);
  cfg.grpo.seed = cfg.seed;
  const GrpoDemoReport report = run_grpo_demo(cfg.grpo);
  write_report(args.out_path,
               {{"iterations", report.iterations},
                {"mean_reward_curve", report.mean_reward_curve},
                {"initial_reward", report.initial_reward},
                {"final_reward", report.final_reward},
                {"final_consistency_rate", report.final_consistency_rate}});
  return 0;
}

int cmd_curate(const CommonArgs& args) {
  const RunConfig cfg = resolve_config(args);
  const std::vector<Json> in = read_jsonl(args.in_path, "curate");
  std::vector<RolloutGroup> groups;
  for (const Json& j : in) {
    if (!j.contains("rewards") || !j.contains("logprobs")) {
      throw ValidationError("curate", "line needs rewards and logprobs");
    }
    RolloutGroup group;
    const Json& rewards = j.at("rewards");
    const Json& logprobs = j.at("logprobs");
    if (rewards.size() != logprobs.size()) {
      throw ValidationError("curate", "rewards and logprobs length mismatch");
    }
    for (size_t k = 0; k < rewards.size(); ++k) {
      GrpoRollout r;
      r.reward = rewards[k].get<double>();
      r.logprob_theta = logprobs[k].get<double>();
      group.rollouts.push_back(r);
    }
    groups.push_back(std::move(group));
  }
  const auto ranked = curation_scores(groups, cfg.curation.beta);
  std::mt19937_64 rng(cfg.seed);
  const std::vector<size_t> selected = curation_select(
      groups, cfg.curation.top_fraction, cfg.curation.beta, rng);
  Json scores = Json::array();
  for (const auto& [index, score] : ranked) {
    scores.push_back({{"index", index}, {"score", score}});
  }
  write_report(args.out_path, {{"scores", scores}, {"selected", selected}});
  return 0;
}

int cmd_eval_open_loop(const CommonArgs& args) {
  const RunConfig cfg = resolve_config(args);
  const std::vector<Json> in = read_jsonl(args.in_path, "eval-open-loop");
  if (in.empty()) {
    throw ValidationError("eval-open-loop", "empty input");
  }
  double sum_ade = 0.0, sum_min3 = 0.0, sum_min6 = 0.0;
  std::vector<Trajectory> all_preds;
  Json records = Json::array();
  for (const Json& j : in) {
    if (!j.contains("gt")) {
      throw ValidationError("eval-open-loop", "line needs gt");
    }
    const Trajectory gt = traj_from_json(j.at("gt"), "eval-open-loop");
    std::vector<Trajectory> preds;
    if (j.contains("preds")) {
      for (const Json& p : j.at("preds")) {
        preds.push_back(traj_from_json(p, "eval-open-loop"));
      }
    } else if (j.contains("pred")) {
      preds.push_back(traj_from_json(j.at("pred"), "eval-open-loop"));
    }
    if (preds.empty()) {
      throw ValidationError("eval-open-loop", "line needs pred or preds");
    }
    const double a = ade(preds.front(), gt);
    const double m3 = min_ade(preds, gt, 3.0);
    const double m6 = min_ade(preds, gt, 6.0);
    sum_ade += a;
    sum_min3 += m3;
    sum_min6 += m6;
    for (Trajectory& p : preds) all_preds.push_back(std::move(p));
    records.push_back({{"ade", a}, {"min_ade_3s", m3}, {"min_ade_6s", m6}});
  }
  const double n = static_cast<double>(in.size());
  write_report(
      args.out_path,
      {{"records", records},
       {"summary",
        {{"ade", sum_ade / n},
         {"min_ade_3s", sum_min3 / n},
         {"min_ade_6s", sum_min6 / n},
         {"comfort_fraction",
          comfort_fraction(all_preds, cfg.metrics.a_comfort, cfg.fit)}}}});
  return 0;
}

int cmd_eval_closed_loop(const CommonArgs& args) {
  const RunConfig cfg = resolve_config(args);
  const std::vector<Json> in = read_jsonl(args.in_path, "eval-closed-loop");
  if (in.empty()) {
    throw ValidationError("eval-closed-loop", "empty input");
  }
  std::vector<EventLog> logs(in.size());
  const std::vector<Json> per_episode =
      parallel_map(in, args.jobs, [&](const Json& j, size_t index) {
        const Episode episode = episode_from_json(j, "eval-closed-loop");
        const Trajectory policy =
            j.contains("policy")
                ? traj_from_json(j.at("policy"), "eval-closed-loop")
                : episode.ego;
        const EventLog log =
            run_episode_metrics(episode, policy, cfg.metrics.episode);
        logs[index] = log;
        Json events = Json::array();
        for (const Event& e : log.events) {
          events.push_back({{"frame", e.frame},
                            {"kind", to_string(e.kind)},
                            {"at_fault", e.at_fault},
                            {"excluded", e.excluded}});
        }
        return Json{{"id", episode.id},
                    {"events", events},
                    {"km_driven", log.km_driven}};
      });
  const ClosedLoopSummary s = closed_loop_summary(logs);
  write_report(args.out_path,
               {{"episodes", per_episode},
                {"summary",
                 {{"offroad_rate", s.offroad_rate},
                  {"close_encounter_rate", s.close_encounter_rate},
                  {"score_km", s.score_km},
                  {"score_at_fault_km", s.score_at_fault_km}}}});
  return 0;
}

int cmd_token_budget(const CommonArgs& args, const std::string& mode, int w,
                     int h, int sx, int sy, int sz, int p, int cameras) {
  TokenBudget budget;
  if (mode == "single") {
    budget = single_image_token_budget(w, h, cameras);
  } else if (mode == "triplane") {
    budget = triplane_token_budget(sx, sy, sz, p, p, p, cameras);
  } else {
    throw ValidationError("token-budget", "mode must be single or triplane");
  }
  std::cout << budget.total_tokens << "\n";
  if (cameras > 1) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.6g", budget.per_image);
    std::cout << buf << "\n";
  }
  if (!args.out_path.empty()) {
    write_report(args.out_path, {{"mode", mode},
                                 {"total_tokens", budget.total_tokens},
                                 {"cameras", cameras},
                                 {"per_image", budget.per_image}});
  }
  return 0;
}

int run(int argc, char** argv) {
  CLI::App app{"action-side toolkit for a reasoning driving stack"};
  app.require_subcommand(1);

  CommonArgs args;
  std::string tokenize_mode = "encode";
  std::string ckpt;
  std::string cond_json;
  int sample_n = 1;
  int sft_vocab = 256;
  int sft_iterations = 200;
  double sft_lr = 0.05;
  std::string tb_mode = "single";
  int tb_w = 448, tb_h = 280, tb_sx = 96, tb_sy = 96, tb_sz = 48, tb_p = 8;
  int tb_cameras = 1;

  auto add_common = [&](CLI::App* sub, bool needs_in) {
    sub->add_option("--config", args.config_path, "RunConfig JSON path");
    sub->add_option("--seed", args.seed_override, "seed override");
    if (needs_in) {
      sub->add_option("--in", args.in_path, "input JSON-Lines path")
          ->required();
    }
    sub->add_option("--out", args.out_path, "output path")->required();
    sub->add_option("--jobs", args.jobs, "worker threads");
  };

  CLI::App* integrate =
      app.add_subcommand("integrate", "controls -> trajectories");
  add_common(integrate, true);
  CLI::App* fit = app.add_subcommand("fit", "trajectories -> controls");
  add_common(fit, true);
  CLI::App* tokenize =
      app.add_subcommand("tokenize", "controls <-> action tokens");
  add_common(tokenize, true);
  tokenize->add_option("--mode", tokenize_mode, "encode | decode | roundtrip");
  CLI::App* detect =
      app.add_subcommand("detect-meta", "label per-frame meta actions");
  add_common(detect, true);
  CLI::App* keyframes =
      app.add_subcommand("keyframes", "transitions and keyframes");
  add_common(keyframes, true);
  CLI::App* tag = app.add_subcommand("tag-scenarios",
                                     "episode scenario tagging");
  add_common(tag, true);
  CLI::App* compose =
      app.add_subcommand("compose-coc", "render reasoning traces");
  add_common(compose, true);
  CLI::App* validate_coc =
      app.add_subcommand("validate-coc", "record QA rules");
  add_common(validate_coc, true);
  CLI::App* reward = app.add_subcommand("reward", "per-rollout rewards");
  add_common(reward, true);
  CLI::App* train_fm_cmd =
      app.add_subcommand("train-fm", "train the action expert");
  add_common(train_fm_cmd, true);
  train_fm_cmd->add_option("--ckpt", ckpt, "checkpoint path prefix")
      ->required();
  CLI::App* sample_fm_cmd =
      app.add_subcommand("sample-fm", "denoise control samples");
  add_common(sample_fm_cmd, false);
  sample_fm_cmd->add_option("--ckpt", ckpt, "checkpoint path prefix")
      ->required();
  sample_fm_cmd->add_option("--n", sample_n, "number of samples");
  sample_fm_cmd->add_option("--cond", cond_json, "condition JSON array");
  CLI::App* sft = app.add_subcommand("sft-toy", "toy policy log-likelihood");
  add_common(sft, true);
  sft->add_option("--vocab", sft_vocab, "vocabulary size");
  sft->add_option("--iters", sft_iterations, "training iterations");
  sft->add_option("--lr", sft_lr, "learning rate");
  CLI::App* demo =
      app.add_subcommand("grpo-demo", "verifiable-reward improvement run");
  add_common(demo, false);
  CLI::App* curate =
      app.add_subcommand("curate", "disagreement-ranked selection");
  add_common(curate, true);
  CLI::App* open_loop =
      app.add_subcommand("eval-open-loop", "ADE / minADE / comfort");
  add_common(open_loop, true);
  CLI::App* closed_loop =
      app.add_subcommand("eval-closed-loop", "episode event metrics");
  add_common(closed_loop, true);
  CLI::App* token_budget =
      app.add_subcommand("token-budget", "vision token accounting");
  token_budget->add_option("--config", args.config_path, "RunConfig JSON");
  token_budget->add_option("--out", args.out_path, "optional report path");
  token_budget->add_option("--mode", tb_mode, "single | triplane");
  token_budget->add_option("--width", tb_w, "image width");
  token_budget->add_option("--height", tb_h, "image height");
  token_budget->add_option("--sx", tb_sx, "grid size x");
  token_budget->add_option("--sy", tb_sy, "grid size y");
  token_budget->add_option("--sz", tb_sz, "grid size z");
  token_budget->add_option("--p", tb_p, "patch size");
  token_budget->add_option("--cameras", tb_cameras, "camera count");

  CLI11_PARSE(app, argc, argv);

  if (integrate->parsed()) return cmd_integrate(args);
  if (fit->parsed()) return cmd_fit(args);
  if (tokenize->parsed()) return cmd_tokenize(args, tokenize_mode);
  if (detect->parsed()) return cmd_detect_meta(args);
  if (keyframes->parsed()) return cmd_keyframes(args);
  if (tag->parsed()) return cmd_tag_scenarios(args);
  if (compose->parsed()) return cmd_compose_coc(args);
  if (validate_coc->parsed()) return cmd_validate_coc(args);
  if (reward->parsed()) return cmd_reward(args);
  if (train_fm_cmd->parsed()) return cmd_train_fm(args, ckpt);
  if (sample_fm_cmd->parsed()) {
    return cmd_sample_fm(args, ckpt, sample_n, cond_json);
  }
  if (sft->parsed()) {
    return cmd_sft_toy(args, sft_vocab, sft_iterations, sft_lr);
  }
  if (demo->parsed()) return cmd_grpo_demo(args);
  if (curate->parsed()) return cmd_curate(args);
  if (open_loop->parsed()) return cmd_eval_open_loop(args);
  if (closed_loop->parsed()) return cmd_eval_closed_loop(args);
  if (token_budget->parsed()) {
    return cmd_token_budget(args, tb_mode, tb_w, tb_h, tb_sx, tb_sy, tb_sz,
                            tb_p, tb_cameras);
  }
  return 1;
}

}  // namespace
}  // namespace driveline

int main(int argc, char** argv) {
  using nlohmann::json;
  try {
    return driveline::run(argc, argv);
  } catch (const driveline::TransportError& e) {
    std::cout << json{{"error",
                       {{"code", "transport"},
                        {"message", e.what()},
                        {"context", e.context()}}}}
                     .dump()
              << "\n";
    return 3;
  } catch (const driveline::ProtocolError& e) {
    std::cout << json{{"error",
                       {{"code", "protocol"},
                        {"message", e.what()},
                        {"context", e.context()}}}}
                     .dump()
              << "\n";
    return 3;
  } catch (const driveline::ValidationError& e) {
    std::cout << json{{"error",
                       {{"code", "validation"},
                        {"message", e.what()},
                        {"context", e.context()}}}}
                     .dump()
              << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cout << json{{"error",
                       {{"code", "internal"},
                        {"message", e.what()},
                        {"context", ""}}}}
                     .dump()
              << "\n";
    return 1;
  }
}
