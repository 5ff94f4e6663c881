#include "medvqa/model/adapter.hpp"

#include "medvqa/error.hpp"

namespace medvqa::model {

void validate_trace(const DecodingTrace& trace) {
    if (trace.k < 1) fail(ErrorKind::Generation, "trace: k must be >= 1");
    for (std::size_t t = 0; t < trace.steps.size(); ++t) {
        const auto& step = trace.steps[t];
        const std::string where = "trace step " + std::to_string(t) + ": ";
        if (step.size() != static_cast<std::size_t>(trace.k))
            fail(ErrorKind::Generation, where + "expected " + std::to_string(trace.k) + " entries, got " +
                                            std::to_string(step.size()));
        double mass = 0.0;
        for (std::size_t i = 0; i < step.size(); ++i) {
            const double p = step[i].prob;
            if (!(p >= 0.0 && p <= 1.0)) fail(ErrorKind::Generation, where + "probability outside [0,1]");
            if (i > 0 && p > step[i - 1].prob) fail(ErrorKind::Generation, where + "probabilities not sorted");
            mass += p;
        }
        if (mass > 1.0 + 1e-6) fail(ErrorKind::Generation, where + "top-k mass exceeds 1");
    }
}

nlohmann::json to_json(const DecodingTrace& trace) {
    nlohmann::json steps = nlohmann::json::array();
    for (const auto& step : trace.steps) {
        nlohmann::json s = nlohmann::json::array();
        for (const auto& tp : step) s.push_back({{"token", tp.token}, {"prob", tp.prob}});
        steps.push_back(std::move(s));
    }
    return {{"k", trace.k}, {"steps", steps}};
}

DecodingTrace trace_from_json(const nlohmann::json& j) {
    DecodingTrace out;
    try {
        const nlohmann::json& steps = j.is_array() ? j : j.at("steps");
        if (j.is_object()) out.k = j.at("k").get<int>();
        for (const auto& s : steps) {
            std::vector<TokenProb> step;
            for (const auto& e : s) {
                if (e.is_array())
                    step.push_back({e.at(0).get<std::string>(), e.at(1).get<double>()});
                else
                    step.push_back({e.at("token").get<std::string>(), e.at("prob").get<double>()});
            }
            if (j.is_array()) out.k = static_cast<int>(step.size());
            out.steps.push_back(std::move(step));
        }
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorKind::Protocol, std::string("trace: ") + e.what());
    }
    return out;
}

GenerationResult ModelAdapter::generate(const ImageRef& image, std::string_view task_token,
                                        const std::string& input_text, const DecodeParams& params) {
    const auto task = parse_task_token(task_token);
    if (!task) fail(ErrorKind::Contract, "unknown task token '" + std::string(task_token) + "'");
    return generate(image, *task, input_text, params);
}

GenerationResult ModelAdapter::generate(const ImageRef& image, TaskToken task, const std::string& input_text,
                                        const DecodeParams& params) {
    if (params.max_tokens < 1) fail(ErrorKind::Contract, "max_tokens must be >= 1");
    if (params.top_k_record < 1) fail(ErrorKind::Contract, "top_k_record must be >= 1");
    GenerationResult res;
    try {
        res = do_generate(image, task, input_text, params);
    } catch (const Error& e) {
        if (e.kind() == ErrorKind::Contract || e.kind() == ErrorKind::Generation) throw;
        fail(ErrorKind::Generation, backend() + " generate failed: " + e.what());
    } catch (const std::exception& e) {
        fail(ErrorKind::Generation, backend() + " generate failed: " + e.what());
    }
    validate_trace(res.trace);
    if (res.trace.k != params.top_k_record)
        fail(ErrorKind::Generation, backend() + " recorded k=" + std::to_string(res.trace.k) + ", requested " +
                                        std::to_string(params.top_k_record));
    return res;
}

RunHandle ModelAdapter::fine_tune(const FineTuneRequest& req) {
    bool expected = false;
    if (!tuning_.compare_exchange_strong(expected, true))
        fail(ErrorKind::Contract, backend() + ": fine_tune already running on this adapter");
    struct Release {
        std::atomic<bool>& flag;
        ~Release() { flag = false; }
    } release{tuning_};
    req.config.validate();
    return do_fine_tune(req);
}

}  // namespace medvqa::model
