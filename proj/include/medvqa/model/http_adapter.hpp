#pragma once

#include <memory>

#include "medvqa/gen/service.hpp"
#include "medvqa/model/adapter.hpp"

namespace medvqa::model {

// Remote backend over HTTP+JSON:
//   POST /generate {image_b64, task_token, input_text, max_tokens, top_k_record} -> {text, trace}
//   POST /finetune {train_path, val_path, config} -> {run_id}
class HttpModelAdapter final : public ModelAdapter {
public:
    HttpModelAdapter(std::shared_ptr<gen::HttpTransport> transport, std::shared_ptr<gen::AuditLog> audit,
                     gen::RetryPolicy policy = {}, gen::Sleeper sleeper = {});

    std::string backend() const override { return "http"; }

protected:
    GenerationResult do_generate(const ImageRef& image, TaskToken task, const std::string& input_text,
                                 const DecodeParams& params) override;
    RunHandle do_fine_tune(const FineTuneRequest& req) override;

private:
    gen::ServiceCaller caller_;
};

}  // namespace medvqa::model
