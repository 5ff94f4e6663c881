#pragma once

#include <atomic>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "medvqa/tasks.hpp"
#include "medvqa/train/config.hpp"

namespace medvqa::model {

struct TokenProb {
    std::string token;
    double prob = 0.0;
    friend bool operator==(const TokenProb&, const TokenProb&) = default;
};

// Per emitted token, the k most probable entries of the final (post-softmax)
// distribution, most probable first.
struct DecodingTrace {
    int k = 5;
    std::vector<std::vector<TokenProb>> steps;

    std::size_t size() const { return steps.size(); }
    bool empty() const { return steps.empty(); }
    friend bool operator==(const DecodingTrace&, const DecodingTrace&) = default;
};

// Error(Generation) if k < 1, a step does not hold exactly k entries, a
// probability is outside [0,1], probabilities increase, or a step's mass
// exceeds 1 + 1e-6.
void validate_trace(const DecodingTrace& trace);

nlohmann::json to_json(const DecodingTrace& trace);
DecodingTrace trace_from_json(const nlohmann::json& j);

struct GenerationResult {
    std::string text;
    DecodingTrace trace;
};

struct ImageRef {
    std::string image_id;
    std::filesystem::path path;
};

struct DecodeParams {
    int max_tokens = 256;
    int top_k_record = 5;
};

struct FineTuneRequest {
    std::filesystem::path train_file;
    std::filesystem::path val_file;
    train::TrainConfig config;
    std::filesystem::path output_dir;  // where a backend may leave checkpoints
};

struct RunHandle {
    std::string run_id;
    nlohmann::json details = nlohmann::json::object();
};

// Boundary to any vision-language backend. The public calls check task
// tokens and decode parameters, validate every returned trace, and keep
// fine_tune exclusive; subclasses only implement do_generate/do_fine_tune.
class ModelAdapter {
public:
    virtual ~ModelAdapter() = default;

    // Error(Contract) for an unknown task token string.
    GenerationResult generate(const ImageRef& image, std::string_view task_token, const std::string& input_text,
                              const DecodeParams& params = {});
    GenerationResult generate(const ImageRef& image, TaskToken task, const std::string& input_text,
                              const DecodeParams& params = {});

    // Error(Contract) if another fine_tune on this adapter is in flight.
    RunHandle fine_tune(const FineTuneRequest& req);

    virtual std::string backend() const = 0;

protected:
    virtual GenerationResult do_generate(const ImageRef& image, TaskToken task, const std::string& input_text,
                                         const DecodeParams& params) = 0;
    virtual RunHandle do_fine_tune(const FineTuneRequest& req) = 0;

private:
    std::atomic<bool> tuning_{false};
};

}  // namespace medvqa::model
