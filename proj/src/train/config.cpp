#include "medvqa/train/config.hpp"

#include <cmath>
#include <set>

#include "medvqa/error.hpp"
#include "medvqa/util/hash.hpp"

namespace medvqa::train {

void TrainConfig::validate() const {
    auto positive = [](int v, const char* name) {
        if (v < 1) fail(ErrorKind::Config, std::string("train.") + name + " must be >= 1");
    };
    positive(lora_rank, "lora_rank");
    positive(lora_alpha, "lora_alpha");
    positive(per_device_batch, "per_device_batch");
    positive(grad_accum_steps, "grad_accum_steps");
    positive(num_devices, "num_devices");
    positive(epochs, "epochs");
    if (!(warmup_ratio >= 0.0 && warmup_ratio <= 1.0)) fail(ErrorKind::Config, "train.warmup_ratio must be in [0,1]");
    if (!(learning_rate > 0.0)) fail(ErrorKind::Config, "train.learning_rate must be > 0");
    if (!backend_extras.is_object()) fail(ErrorKind::Config, "train.backend_extras must be an object");
}

TrainConfig default_train_config() {
    TrainConfig c;
    c.lora_rank = 128;
    c.lora_alpha = 256;
    c.target_modules = "all attention modules";
    c.learning_rate = 5e-5;
    c.warmup_ratio = 0.1;
    c.precision = Precision::Fp16;
    c.per_device_batch = 2;
    c.grad_accum_steps = 3;
    c.num_devices = 2;
    c.epochs = 1;
    return c;
}

long long warmup_steps(const TrainConfig& config, long long total_steps) {
    if (total_steps < 1) fail(ErrorKind::Contract, "warmup_steps: total_steps must be >= 1");
    return std::llround(config.warmup_ratio * static_cast<double>(total_steps));
}

nlohmann::json to_json(const TrainConfig& c) {
    return {{"lora_rank", c.lora_rank},
            {"lora_alpha", c.lora_alpha},
            {"target_modules", c.target_modules},
            {"learning_rate", c.learning_rate},
            {"warmup_ratio", c.warmup_ratio},
            {"precision", c.precision == Precision::Fp16 ? "fp16" : "fp32"},
            {"per_device_batch", c.per_device_batch},
            {"grad_accum_steps", c.grad_accum_steps},
            {"num_devices", c.num_devices},
            {"epochs", c.epochs},
            {"seed", c.seed},
            {"backend_extras", c.backend_extras}};
}

TrainConfig config_from_json(const nlohmann::json& j) {
    static const std::set<std::string> kKeys{"lora_rank",        "lora_alpha",       "target_modules",
                                             "learning_rate",    "warmup_ratio",     "precision",
                                             "per_device_batch", "grad_accum_steps", "num_devices",
                                             "epochs",           "seed",             "backend_extras",
                                             "effective_batch"};
    if (!j.is_object()) fail(ErrorKind::Config, "train config must be an object");
    for (const auto& [k, v] : j.items())
        if (!kKeys.count(k)) fail(ErrorKind::Config, "unknown train config key '" + k + "'");
    TrainConfig c = default_train_config();
    try {
        c.lora_rank = j.value("lora_rank", c.lora_rank);
        c.lora_alpha = j.value("lora_alpha", c.lora_alpha);
        c.target_modules = j.value("target_modules", c.target_modules);
        c.learning_rate = j.value("learning_rate", c.learning_rate);
        c.warmup_ratio = j.value("warmup_ratio", c.warmup_ratio);
        c.per_device_batch = j.value("per_device_batch", c.per_device_batch);
        c.grad_accum_steps = j.value("grad_accum_steps", c.grad_accum_steps);
        c.num_devices = j.value("num_devices", c.num_devices);
        c.epochs = j.value("epochs", c.epochs);
        c.seed = j.value("seed", c.seed);
        if (j.contains("backend_extras")) c.backend_extras = j["backend_extras"];
        const std::string prec = j.value("precision", std::string("fp16"));
        if (prec == "fp16")
            c.precision = Precision::Fp16;
        else if (prec == "fp32")
            c.precision = Precision::Fp32;
        else
            fail(ErrorKind::Config, "train.precision must be fp16 or fp32");
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorKind::Config, std::string("train config: ") + e.what());
    }
    c.validate();
    return c;
}

std::string config_hash(const TrainConfig& c) { return util::hex64(util::fnv1a64(to_json(c).dump())); }

}  // namespace medvqa::train
