#pragma once

#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "medvqa/gen/service.hpp"

namespace medvqa::gen {

struct FewShotExample {
    std::string input;
    std::string output;
    friend bool operator==(const FewShotExample&, const FewShotExample&) = default;
};

struct TextGenRequest {
    std::string system_prompt;
    std::vector<FewShotExample> few_shot_examples;
    std::string user_prompt;
    int max_tokens = 512;
    double temperature = 0.0;

    void validate() const;  // Error(Contract) on max_tokens < 1 or temperature < 0
};

struct TextGenUsage {
    int prompt_tokens = 0;
    int completion_tokens = 0;
};

struct TextGenResult {
    std::string text;
    std::string request_id;
    int attempts = 1;
    TextGenUsage usage;
};

class TextGenClient {
public:
    virtual ~TextGenClient() = default;
    // Non-empty text or an Error (Content for empty completions).
    virtual TextGenResult generate_text(const TextGenRequest& req) = 0;
};

nlohmann::json to_json(const TextGenRequest& req);

// Env: MEDICO_TEXTGEN_URL, MEDICO_TEXTGEN_KEY.
class HttpTextGenClient final : public TextGenClient {
public:
    // Throws Error(Config) when api_key is empty, before any network use.
    HttpTextGenClient(std::shared_ptr<HttpTransport> transport, std::string api_key,
                      std::shared_ptr<AuditLog> audit, RetryPolicy policy = {},
                      double requests_per_minute = 0.0, Sleeper sleeper = {});

    static std::unique_ptr<HttpTextGenClient> from_env(std::shared_ptr<AuditLog> audit,
                                                       double requests_per_minute = 0.0);

    TextGenResult generate_text(const TextGenRequest& req) override;

private:
    std::string api_key_;
    ServiceCaller caller_;
};

}  // namespace medvqa::gen
