#pragma once

#include <filesystem>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <tuple>
#include <vector>

#include "medvqa/model/adapter.hpp"

namespace medvqa::model {

// Word / markup tokenizer used by the toy backend: every "<...>" tag is one
// token, everything else splits on whitespace.
struct ToyToken {
    std::size_t offset = 0;
    std::size_t length = 0;
};
std::vector<ToyToken> toy_tokenize(std::string_view text);

// Shape of the recorded per-step distribution.
struct TraceProfile {
    enum class Kind { Peaked, Uniform };
    Kind kind = Kind::Peaked;
    double peak = 0.9;  // Peaked: top-1 probability (before per-step wobble)
    int vocab = 10;     // Uniform: 1/vocab per entry

    static TraceProfile peaked(double p) { return {Kind::Peaked, p, 10}; }
    static TraceProfile uniform(int v) { return {Kind::Uniform, 0.0, v}; }
    static TraceProfile one_hot() { return {Kind::Peaked, 1.0, 10}; }
};

// Deterministic lookup-table "model". generate() returns the stored target
// for (image_id, task, input) with a synthetic trace whose length equals the
// toy token count; fine_tune() memorizes every example in the train and
// validation files. Misses return the fallback text.
class ToyAdapter final : public ModelAdapter {
public:
    ToyAdapter();

    void add(const std::string& image_id, TaskToken task, const std::string& input, std::string text,
             TraceProfile profile = {});
    void set_fallback(std::string text, TraceProfile profile = TraceProfile::peaked(0.2));

    std::size_t size() const;
    std::optional<train::TrainConfig> last_config() const;

    // JSON checkpoint with entries sorted by key.
    void save(const std::filesystem::path& path) const;
    static std::unique_ptr<ToyAdapter> load(const std::filesystem::path& path);

    std::string backend() const override { return "toy"; }

    static constexpr std::string_view kCheckpointName = "toy_model.json";

protected:
    GenerationResult do_generate(const ImageRef& image, TaskToken task, const std::string& input_text,
                                 const DecodeParams& params) override;
    RunHandle do_fine_tune(const FineTuneRequest& req) override;

private:
    struct Entry {
        std::string text;
        TraceProfile profile;
    };
    using Key = std::tuple<std::string, TaskToken, std::string>;

    mutable std::mutex mu_;
    std::map<Key, Entry> table_;
    Entry fallback_;
    std::optional<train::TrainConfig> last_config_;
};

// Synthetic trace for a token sequence; exposed for tests.
DecodingTrace toy_trace(std::string_view text, const std::vector<ToyToken>& tokens, const TraceProfile& profile,
                        int k);

}  // namespace medvqa::model
