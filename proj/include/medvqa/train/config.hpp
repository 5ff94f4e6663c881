#pragma once

#include <cstdint>
#include <string>

#include <json.hpp>

namespace medvqa::train {

enum class Precision { Fp16, Fp32 };

struct TrainConfig {
    int lora_rank = 128;
    int lora_alpha = 256;
    std::string target_modules = "all attention modules";
    double learning_rate = 5e-5;
    double warmup_ratio = 0.1;
    Precision precision = Precision::Fp16;
    int per_device_batch = 2;
    int grad_accum_steps = 3;
    int num_devices = 2;
    int epochs = 1;
    std::uint64_t seed = 42;
    // Optimizer, scheduler tail, weight decay ... passed to the backend as-is.
    nlohmann::json backend_extras = nlohmann::json::object();

    int effective_batch() const { return per_device_batch * grad_accum_steps * num_devices; }

    // Error(Config) on counts < 1, warmup_ratio outside [0,1], lr <= 0.
    void validate() const;

    friend bool operator==(const TrainConfig&, const TrainConfig&) = default;
};

// LoRA r=128, alpha=256 on all attention modules, lr 5e-5, warmup 0.1,
// fp16, 2 per device x 3 accumulation x 2 devices, one epoch.
TrainConfig default_train_config();

// round(warmup_ratio * total_steps). Error(Contract) if total_steps < 1.
long long warmup_steps(const TrainConfig& config, long long total_steps);

nlohmann::json to_json(const TrainConfig& c);
// Unknown keys are rejected with Error(Config).
TrainConfig config_from_json(const nlohmann::json& j);

// FNV-1a over the canonical JSON form.
std::string config_hash(const TrainConfig& c);

}  // namespace medvqa::train
