#include "medvqa/model/http_adapter.hpp"

#include "medvqa/error.hpp"
#include "medvqa/util/base64.hpp"
#include "medvqa/util/files.hpp"

namespace medvqa::model {

HttpModelAdapter::HttpModelAdapter(std::shared_ptr<gen::HttpTransport> transport,
                                   std::shared_ptr<gen::AuditLog> audit, gen::RetryPolicy policy,
                                   gen::Sleeper sleeper)
    : caller_("model", std::move(transport), std::move(audit), policy, 0.0, std::move(sleeper)) {}

GenerationResult HttpModelAdapter::do_generate(const ImageRef& image, TaskToken task, const std::string& input_text,
                                               const DecodeParams& params) {
    const nlohmann::json payload{{"image_b64", util::base64_encode(util::read_file(image.path))},
                                 {"task_token", to_string(task)},
                                 {"input_text", input_text},
                                 {"max_tokens", params.max_tokens},
                                 {"top_k_record", params.top_k_record}};
    const auto call = caller_.post_json("/generate", payload);
    if (!call.body.contains("text") || !call.body["text"].is_string() || !call.body.contains("trace"))
        fail(ErrorKind::Protocol, "model: /generate response needs 'text' and 'trace'");
    GenerationResult out;
    out.text = call.body["text"].get<std::string>();
    out.trace = trace_from_json(call.body["trace"]);
    return out;
}

RunHandle HttpModelAdapter::do_fine_tune(const FineTuneRequest& req) {
    nlohmann::json config = train::to_json(req.config);
    config["effective_batch"] = req.config.effective_batch();
    const auto call = caller_.post_json(
        "/finetune",
        {{"train_path", req.train_file.string()}, {"val_path", req.val_file.string()}, {"config", config}});
    if (!call.body.contains("run_id") || !call.body["run_id"].is_string())
        fail(ErrorKind::Protocol, "model: /finetune response lacks 'run_id'");
    RunHandle h;
    h.run_id = call.body["run_id"].get<std::string>();
    h.details = {{"request_id", call.request_id}, {"effective_batch", req.config.effective_batch()}};
    return h;
}

}  // namespace medvqa::model
