#pragma once

#include <filesystem>
#include <memory>
#include <string>

#include "medvqa/gen/service.hpp"
#include "medvqa/imaging/binary_mask.hpp"

namespace medvqa::gen {

struct SegRequest {
    std::string image_id;
    std::filesystem::path image_path;
    std::string image_bytes;  // encoded image; read from image_path when empty
    int width = 0;
    int height = 0;
    std::string prompt;
};

class SegClient {
public:
    virtual ~SegClient() = default;
    // Heatmap in [0,1] with the request's dimensions.
    virtual imaging::Heatmap segment_by_text(const SegRequest& req) = 0;
};

// Error(Protocol) unless the heatmap matches the request size and range.
void check_heatmap(const imaging::Heatmap& map, const SegRequest& req);

// Env: MEDICO_SEG_URL. Wire: POST /segment {image_b64, prompt} ->
// {heatmap_png_b64}; heatmap pixels are 8-bit intensities mapped to [0,1].
class HttpSegClient final : public SegClient {
public:
    HttpSegClient(std::shared_ptr<HttpTransport> transport, std::shared_ptr<AuditLog> audit,
                  RetryPolicy policy = {}, double requests_per_minute = 0.0, Sleeper sleeper = {});

    static std::unique_ptr<HttpSegClient> from_env(std::shared_ptr<AuditLog> audit,
                                                   double requests_per_minute = 0.0);

    imaging::Heatmap segment_by_text(const SegRequest& req) override;

private:
    ServiceCaller caller_;
};

}  // namespace medvqa::gen
