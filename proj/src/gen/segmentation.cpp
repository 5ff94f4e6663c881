#include "medvqa/gen/segmentation.hpp"

#include <cstdlib>

#include "medvqa/error.hpp"
#include "medvqa/imaging/png.hpp"
#include "medvqa/util/base64.hpp"
#include "medvqa/util/files.hpp"

namespace medvqa::gen {

void check_heatmap(const imaging::Heatmap& map, const SegRequest& req) {
    if (map.width != req.width || map.height != req.height)
        fail(ErrorKind::Protocol, "segmentation: heatmap is " + std::to_string(map.width) + "x" +
                                      std::to_string(map.height) + " but image " + req.image_id + " is " +
                                      std::to_string(req.width) + "x" + std::to_string(req.height));
    for (float v : map.values)
        if (!(v >= 0.0f && v <= 1.0f)) fail(ErrorKind::Protocol, "segmentation: heatmap value outside [0,1]");
}

HttpSegClient::HttpSegClient(std::shared_ptr<HttpTransport> transport, std::shared_ptr<AuditLog> audit,
                             RetryPolicy policy, double requests_per_minute, Sleeper sleeper)
    : caller_("segment", std::move(transport), std::move(audit), policy, requests_per_minute,
              std::move(sleeper)) {}

std::unique_ptr<HttpSegClient> HttpSegClient::from_env(std::shared_ptr<AuditLog> audit,
                                                       double requests_per_minute) {
    const char* url = std::getenv("MEDICO_SEG_URL");
    if (!url || !*url) fail(ErrorKind::Config, "segment: MEDICO_SEG_URL is not set");
    return std::make_unique<HttpSegClient>(std::make_shared<HttplibTransport>(url), std::move(audit),
                                           RetryPolicy{}, requests_per_minute);
}

imaging::Heatmap HttpSegClient::segment_by_text(const SegRequest& req) {
    if (req.prompt.empty()) fail(ErrorKind::Contract, "segment: empty prompt");
    const std::string bytes = req.image_bytes.empty() ? util::read_file(req.image_path) : req.image_bytes;
    const CallResult call =
        caller_.post_json("/segment", {{"image_b64", util::base64_encode(bytes)}, {"prompt", req.prompt}});
    if (!call.body.is_object() || !call.body.contains("heatmap_png_b64") ||
        !call.body["heatmap_png_b64"].is_string())
        fail(ErrorKind::Protocol, "segment: response lacks 'heatmap_png_b64'");
    imaging::GrayImage gray;
    try {
        gray = imaging::decode_png(util::base64_decode(call.body["heatmap_png_b64"].get<std::string>()));
    } catch (const Error& e) {
        fail(ErrorKind::Protocol, std::string("segment: undecodable heatmap: ") + e.what());
    }
    imaging::Heatmap map(gray.width, gray.height);
    for (std::size_t i = 0; i < gray.pixels.size(); ++i) map.values[i] = gray.pixels[i] / 255.0f;
    check_heatmap(map, req);
    return map;
}

}  // namespace medvqa::gen
