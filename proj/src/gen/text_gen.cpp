#include "medvqa/gen/text_gen.hpp"

#include <cstdlib>

#include "medvqa/error.hpp"

namespace medvqa::gen {

void TextGenRequest::validate() const {
    if (max_tokens < 1) fail(ErrorKind::Contract, "TextGenRequest.max_tokens must be >= 1");
    if (!(temperature >= 0.0)) fail(ErrorKind::Contract, "TextGenRequest.temperature must be >= 0");
}

nlohmann::json to_json(const TextGenRequest& req) {
    nlohmann::json shots = nlohmann::json::array();
    for (const auto& s : req.few_shot_examples) shots.push_back({{"input", s.input}, {"output", s.output}});
    return {{"system_prompt", req.system_prompt},
            {"few_shot", shots},
            {"user_prompt", req.user_prompt},
            {"max_tokens", req.max_tokens},
            {"temperature", req.temperature}};
}

HttpTextGenClient::HttpTextGenClient(std::shared_ptr<HttpTransport> transport, std::string api_key,
                                     std::shared_ptr<AuditLog> audit, RetryPolicy policy,
                                     double requests_per_minute, Sleeper sleeper)
    : api_key_(std::move(api_key)),
      caller_("textgen", std::move(transport), std::move(audit), policy, requests_per_minute,
              std::move(sleeper)) {
    if (api_key_.empty()) fail(ErrorKind::Config, "textgen: missing credential (MEDICO_TEXTGEN_KEY)");
}

std::unique_ptr<HttpTextGenClient> HttpTextGenClient::from_env(std::shared_ptr<AuditLog> audit,
                                                               double requests_per_minute) {
    const char* url = std::getenv("MEDICO_TEXTGEN_URL");
    const char* key = std::getenv("MEDICO_TEXTGEN_KEY");
    if (!key || !*key) fail(ErrorKind::Config, "textgen: missing credential (MEDICO_TEXTGEN_KEY)");
    if (!url || !*url) fail(ErrorKind::Config, "textgen: MEDICO_TEXTGEN_URL is not set");
    return std::make_unique<HttpTextGenClient>(std::make_shared<HttplibTransport>(url), key,
                                               std::move(audit), RetryPolicy{}, requests_per_minute);
}

TextGenResult HttpTextGenClient::generate_text(const TextGenRequest& req) {
    req.validate();
    const CallResult call =
        caller_.post_json("/generate", to_json(req), {{"Authorization", "Bearer " + api_key_}});
    TextGenResult out;
    out.request_id = call.request_id;
    out.attempts = call.attempts;
    if (!call.body.is_object() || !call.body.contains("text") || !call.body["text"].is_string())
        fail(ErrorKind::Protocol, "textgen: response lacks a string 'text' field");
    out.text = call.body["text"].get<std::string>();
    if (call.body.contains("usage") && call.body["usage"].is_object()) {
        out.usage.prompt_tokens = call.body["usage"].value("prompt_tokens", 0);
        out.usage.completion_tokens = call.body["usage"].value("completion_tokens", 0);
    }
    if (out.text.find_first_not_of(" \t\r\n") == std::string::npos)
        fail(ErrorKind::Content, "textgen: empty completion for " + out.request_id);
    return out;
}

}  // namespace medvqa::gen
