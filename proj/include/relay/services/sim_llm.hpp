#pragma once

#include <string>
#include <utility>

#include "relay/services/backend.hpp"

namespace relay {

/// Stand-in for an inference server. Each request holds a slot for
/// `model.duration(tokens)` seconds on the executor's clock and returns
/// seeded filler text of `tokens * bytes_per_token` bytes. Identical seeds
/// give identical content and token counts regardless of replica.
class SimulatedLlm final : public SlotBackend {
 public:
  SimulatedLlm(Executor& executor, LatencyModel model) : SlotBackend(executor), model_(std::move(model)) {}

  const LatencyModel& model() const { return model_; }

 protected:
  void launch(const std::string& replica_id, std::uint64_t job_id, const GenerationRequest& req) override {
    const auto tokens = model_.sample_tokens(req.seed, req.max_tokens);
    const double latency = model_.duration(tokens);
    GenerationResponse resp;
    resp.content = pseudo_content(mix_seed(req.seed, "content"), tokens * model_.bytes_per_token);
    resp.output_token_count = tokens;
    resp.replica_id = replica_id;
    resp.latency_seconds = latency;
    resp.simulated = true;
    executor().post_after(latency, [this, replica_id, job_id, resp = std::move(resp)]() mutable {
      complete(replica_id, job_id, std::move(resp));
    });
  }

 private:
  LatencyModel model_;
};

}  // namespace relay
