#pragma once

#include <array>
#include <cctype>
#include <string>

#include "relay/workloads/common.hpp"

namespace relay {

// Document curation cascade: filter -> score -> question, each stage able to
// drop the document with its own reason.

inline constexpr std::array<const char*, 4> kNrFilterReasons = {
    "filter_by_en", "filter_by_classifier", "filter_by_score", "filter_by_no_boxed_answer"};

/// Per-stage drop probabilities, each conditional on reaching that stage.
struct NrDropRates {
  double en = 0;
  double classifier = 0;
  double score = 0;
  double no_boxed = 0;

  /// Converts unconditional outcome fractions (the share of all documents
  /// ending at each stage; they sum to 1 with the success share) into
  /// conditional per-stage rates.
  static NrDropRates from_fractions(double en, double classifier, double score, double no_boxed) {
    NrDropRates r;
    double remaining = 1.0;
    auto take = [&remaining](double f) {
      const double p = remaining > 0 ? f / remaining : 0.0;
      remaining -= f;
      return p;
    };
    r.en = take(en);
    r.classifier = take(classifier);
    r.score = take(score);
    r.no_boxed = take(no_boxed);
    return r;
  }
};

struct NrParams {
  std::string classifier_service = "classifier";
  std::string llm_service = "llm";
  std::string document_field = "text";
  std::uint64_t max_tokens = 1024;
  std::uint32_t instances = 1;
  double min_quality_score = 3;  // model-scored documents below this are dropped
  double min_ascii_ratio = 0.9;  // language heuristic for real documents
  Budget budget;
  NrDropRates rates;

  static NrParams from_json(const Json& j, const std::string& path = "workload") {
    NrParams p;
    read_field(j, "classifier_service", p.classifier_service, path);
    read_field(j, "llm_service", p.llm_service, path);
    read_field(j, "document_field", p.document_field, path);
    read_field(j, "max_tokens", p.max_tokens, path);
    read_field(j, "instances", p.instances, path);
    read_field(j, "min_quality_score", p.min_quality_score, path);
    read_field(j, "min_ascii_ratio", p.min_ascii_ratio, path);
    if (j.contains("drop_fractions") && j.contains("drop_rates"))
      throw Error(Errc::config_error, path + ": give drop_fractions or drop_rates, not both");
    if (j.contains("drop_fractions")) {
      const auto& f = j["drop_fractions"];
      double en = 0, cls = 0, score = 0, boxed = 0;
      read_field(f, "filter_by_en", en, path + ".drop_fractions");
      read_field(f, "filter_by_classifier", cls, path + ".drop_fractions");
      read_field(f, "filter_by_score", score, path + ".drop_fractions");
      read_field(f, "filter_by_no_boxed_answer", boxed, path + ".drop_fractions");
      for (double v : {en, cls, score, boxed}) require_probability(v, path + ".drop_fractions");
      if (en + cls + score + boxed > 1.0 + 1e-9)
        throw Error(Errc::config_error, path + ".drop_fractions: fractions sum above 1");
      p.rates = NrDropRates::from_fractions(en, cls, score, boxed);
    } else if (j.contains("drop_rates")) {
      const auto& r = j["drop_rates"];
      read_field(r, "filter_by_en", p.rates.en, path + ".drop_rates");
      read_field(r, "filter_by_classifier", p.rates.classifier, path + ".drop_rates");
      read_field(r, "filter_by_score", p.rates.score, path + ".drop_rates");
      read_field(r, "filter_by_no_boxed_answer", p.rates.no_boxed, path + ".drop_rates");
    }
    require_probability(p.rates.en, path + ".drop_rates.filter_by_en");
    require_probability(p.rates.classifier, path + ".drop_rates.filter_by_classifier");
    require_probability(p.rates.score, path + ".drop_rates.filter_by_score");
    require_probability(p.rates.no_boxed, path + ".drop_rates.filter_by_no_boxed_answer");
    return p;
  }
};

/// Share of printable ASCII bytes; a cheap stand-in for language detection.
inline double ascii_ratio(const std::string& s) {
  if (s.empty()) return 1.0;
  std::size_t ascii = 0;
  for (unsigned char c : s) ascii += (c < 0x80);
  return static_cast<double>(ascii) / static_cast<double>(s.size());
}

/// First number after "score" (case-insensitive) in a model reply, or -1.
inline double parse_quality_score(const std::string& reply) {
  std::string lower(reply.size(), ' ');
  for (std::size_t i = 0; i < reply.size(); ++i) lower[i] = static_cast<char>(std::tolower(static_cast<unsigned char>(reply[i])));
  auto at = lower.find("score");
  if (at == std::string::npos) return -1;
  at = lower.find_first_of("0123456789", at);
  if (at == std::string::npos) return -1;
  return std::strtod(reply.c_str() + at, nullptr);
}

inline bool starts_with_yes(const std::string& reply) {
  const auto b = reply.find_first_not_of(" \t\r\n\"'");
  if (b == std::string::npos) return false;
  return reply.size() - b >= 3 && std::tolower(static_cast<unsigned char>(reply[b])) == 'y' &&
         std::tolower(static_cast<unsigned char>(reply[b + 1])) == 'e' &&
         std::tolower(static_cast<unsigned char>(reply[b + 2])) == 's';
}

class NrFilter final : public Behavior {
 public:
  NrFilter(NrParams p, bool simulated) : p_(std::move(p)), simulated_(simulated) {}

  void process(std::shared_ptr<const Orchestrator> orch, const StepContext& ctx, StepCallback done) override {
    const std::string doc = payload_string(*orch, p_.document_field);
    const bool non_english = simulated_ ? decision_draw(*orch, "filter", "en") < p_.rates.en
                                        : ascii_ratio(doc) < p_.min_ascii_ratio;
    if (non_english) {
      StepResult step{"filter", "lang: other", 0, false, FilterRoute{"filter_by_en"}, std::nullopt};
      ctx.executor->post([done, step = std::move(step)]() mutable { done(std::move(step)); });
      return;
    }
    std::string prompt = "Does the following document contain reasoning content? Answer Yes or No.\n\n" + doc;
    call_llm(ctx, *orch, std::move(prompt), 1, [this, orch, done](Result<GenerationResponse> r) {
      if (!r.ok()) return done(r.error());
      auto& resp = r.value();
      const bool keep = simulated_ ? decision_draw(*orch, "filter", "classifier") >= p_.rates.classifier
                                   : starts_with_yes(resp.content);
      StepResult step;
      step.author_role = "filter";
      step.content = keep ? "Yes" : "No";
      step.token_count = resp.output_token_count;
      step.route_hint = keep ? RouteHint{std::string("score")} : RouteHint{FilterRoute{"filter_by_classifier"}};
      done(std::move(step));
    });
  }

 private:
  NrParams p_;
  bool simulated_;
};

class NrScore final : public Behavior {
 public:
  NrScore(NrParams p, bool simulated) : p_(std::move(p)), simulated_(simulated) {}

  void process(std::shared_ptr<const Orchestrator> orch, const StepContext& ctx, StepCallback done) override {
    std::string prompt =
        "Rate the following document from 0 to 5 for reasoning depth, clarity and educational value. "
        "Reply as 'Score: <n>' followed by a short justification.\n\n" +
        payload_string(*orch, p_.document_field);
    call_llm(ctx, *orch, std::move(prompt), p_.max_tokens, [this, orch, done](Result<GenerationResponse> r) {
      if (!r.ok()) return done(r.error());
      auto& resp = r.value();
      const bool keep = simulated_ ? decision_draw(*orch, "score", "drop") >= p_.rates.score
                                   : parse_quality_score(resp.content) >= p_.min_quality_score;
      StepResult step;
      step.author_role = "score";
      step.token_count = resp.output_token_count;
      step.content = std::move(resp.content);
      step.route_hint = keep ? RouteHint{std::string("question")} : RouteHint{FilterRoute{"filter_by_score"}};
      done(std::move(step));
    });
  }

 private:
  NrParams p_;
  bool simulated_;
};

class NrQuestion final : public Behavior {
 public:
  NrQuestion(NrParams p, bool simulated) : p_(std::move(p)), simulated_(simulated) {}

  void process(std::shared_ptr<const Orchestrator> orch, const StepContext& ctx, StepCallback done) override {
    std::string prompt =
        "Extract a challenging, self-contained reasoning question from the document below, then solve it step by "
        "step and give the final answer in \\boxed{}.\n\n" +
        payload_string(*orch, p_.document_field);
    call_llm(ctx, *orch, std::move(prompt), p_.max_tokens, [this, orch, done](Result<GenerationResponse> r) {
      if (!r.ok()) return done(r.error());
      auto& resp = r.value();
      StepResult step;
      step.author_role = "question";
      step.token_count = resp.output_token_count;
      step.content = std::move(resp.content);
      bool boxed;
      if (simulated_) {
        boxed = decision_draw(*orch, "question", "boxed") >= p_.rates.no_boxed;
        if (boxed) step.content += "\n\\boxed{" + std::to_string(request_seed(*orch, "question") % 1000) + "}";
      } else {
        boxed = step.content.find("\\boxed{") != std::string::npos;
      }
      if (boxed)
        step.done_signal = true;
      else
        step.route_hint = FilterRoute{"filter_by_no_boxed_answer"};
      done(std::move(step));
    });
  }

 private:
  NrParams p_;
  bool simulated_;
};

inline Workload make_natural_reasoning(const NrParams& p, bool simulated, std::uint64_t run_seed) {
  Workload w;
  w.name = "natural_reasoning";
  w.roles = {RoleConfig{"filter", p.instances, std::make_shared<NrFilter>(p, simulated), p.classifier_service},
             RoleConfig{"score", p.instances, std::make_shared<NrScore>(p, simulated), p.llm_service},
             RoleConfig{"question", p.instances, std::make_shared<NrQuestion>(p, simulated), p.llm_service}};
  w.routes.roles = {"filter", "score", "question"};
  for (const char* r : kNrFilterReasons) w.routes.filter_reasons.insert(r);
  w.factory = [run_seed, budget = p.budget](const TaskInput& t) {
    return make_branching(t, "filter", budget, task_seed(run_seed, t.task_id));
  };
  return w;
}

}  // namespace relay
