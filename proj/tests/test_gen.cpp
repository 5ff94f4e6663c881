#include <chrono>
#include <deque>
#include <thread>
#include <variant>

#include <httplib.h>

#include "medvqa/gen/mock.hpp"
#include "medvqa/gen/segmentation.hpp"
#include "medvqa/gen/service.hpp"
#include "medvqa/gen/text_gen.hpp"
#include "medvqa/imaging/ops.hpp"
#include "medvqa/imaging/png.hpp"
#include "medvqa/util/base64.hpp"
#include "medvqa/util/files.hpp"
#include "support.hpp"

using namespace medvqa;
using namespace medvqa::gen;
using nlohmann::json;

namespace {

using testing::ScriptedTransport;
using testing::SleepLog;

HttpResponse ok(const json& body) { return {200, body.dump()}; }

std::vector<json> audit_lines(const std::filesystem::path& p) { return util::read_jsonl(p); }

}  // namespace

TEST_CASE("429 twice then success takes three attempts with growing backoff") {
    testing::TempDir dir("retry");
    auto audit = std::make_shared<AuditLog>(dir / "audit.jsonl");
    auto transport = std::make_shared<ScriptedTransport>(
        std::deque<ScriptedTransport::Step>{HttpResponse{429, ""}, HttpResponse{429, ""}, ok({{"x", 1}})});
    SleepLog sleeps;
    RetryPolicy policy;
    policy.jitter = 0.0;
    ServiceCaller caller("textgen", transport, audit, policy, 0.0, sleeps.sleeper());
    const auto res = caller.post_json("/generate", {{"q", "a"}});
    CHECK(res.attempts == 3);
    CHECK(res.body["x"] == 1);
    REQUIRE(sleeps.delays.size() == 2);
    CHECK(sleeps.delays[0] == std::chrono::milliseconds(1000));
    CHECK(sleeps.delays[1] == std::chrono::milliseconds(2000));
    const auto lines = audit_lines(dir / "audit.jsonl");
    REQUIRE(lines.size() == 1);
    CHECK(lines[0]["attempts"] == 3);
    CHECK(lines[0]["status"] == "ok");
    CHECK(lines[0]["service"] == "textgen");
    CHECK(lines[0]["request_id"] == res.request_id);
    for (const char* key : {"ts", "latency_ms"}) CHECK(lines[0].contains(key));
    // every attempt carries the same request id
    for (const auto& c : transport->calls) CHECK(c.headers.at("X-Request-Id") == res.request_id);
}

TEST_CASE("timeouts, resets and 5xx are retried until the attempt budget runs out") {
    testing::TempDir dir("exhaust");
    auto audit = std::make_shared<AuditLog>(dir / "audit.jsonl");
    auto transport = std::make_shared<ScriptedTransport>(std::deque<ScriptedTransport::Step>{
        std::string("timeout"), HttpResponse{503, ""}, std::string("connection reset"), HttpResponse{500, ""},
        HttpResponse{502, ""}});
    SleepLog sleeps;
    ServiceCaller caller("seg", transport, audit, RetryPolicy{}, 0.0, sleeps.sleeper());
    CHECK_ERROR_KIND(caller.post_json("/segment", json::object()), ErrorKind::Transport);
    CHECK(transport->calls.size() == 5);
    CHECK(sleeps.delays.size() == 4);
    for (std::size_t i = 0; i < sleeps.delays.size(); ++i) {
        const double base = 1000.0 * (1 << i);
        CHECK(sleeps.delays[i].count() >= base * 0.75 - 1);
        CHECK(sleeps.delays[i].count() <= base * 1.25 + 1);
    }
    const auto lines = audit_lines(dir / "audit.jsonl");
    REQUIRE(lines.size() == 1);
    CHECK(lines[0]["attempts"] == 5);
    CHECK(lines[0]["status"] != "ok");
}

TEST_CASE("non-retryable 4xx fails immediately with a configuration error") {
    for (int status : {400, 401, 403, 404}) {
        auto transport = std::make_shared<ScriptedTransport>(
            std::deque<ScriptedTransport::Step>{HttpResponse{status, "denied"}});
        SleepLog sleeps;
        ServiceCaller caller("textgen", transport, std::make_shared<AuditLog>(), RetryPolicy{}, 0.0,
                             sleeps.sleeper());
        CHECK_ERROR_KIND(caller.post_json("/generate", json::object()), ErrorKind::Config);
        CHECK(transport->calls.size() == 1);
        CHECK(sleeps.delays.empty());
    }
    CHECK(is_retryable_status(429));
    CHECK(is_retryable_status(500));
    CHECK_FALSE(is_retryable_status(404));
}

TEST_CASE("non-JSON success body is a protocol error") {
    auto transport = std::make_shared<ScriptedTransport>(
        std::deque<ScriptedTransport::Step>{HttpResponse{200, "<html>"}});
    ServiceCaller caller("textgen", transport, std::make_shared<AuditLog>());
    CHECK_ERROR_KIND(caller.post_json("/generate", json::object()), ErrorKind::Protocol);
}

TEST_CASE("request ids are content-derived") {
    CHECK(make_request_id("textgen", "abc") == make_request_id("textgen", "abc"));
    CHECK(make_request_id("textgen", "abc") != make_request_id("textgen", "abd"));
    CHECK(make_request_id("textgen", "abc") != make_request_id("seg", "abc"));
    CHECK(make_request_id("textgen", "abc").rfind("textgen-", 0) == 0);
}

TEST_CASE("rate limiter admits a burst then spaces requests") {
    RateLimiter unlimited(0.0);
    for (int i = 0; i < 1000; ++i) unlimited.acquire();

    RateLimiter limiter(600.0);  // 10 per second, burst of 600
    const auto t0 = std::chrono::steady_clock::now();
    for (int i = 0; i < 600; ++i) limiter.acquire();
    CHECK(std::chrono::steady_clock::now() - t0 < std::chrono::milliseconds(500));
    const auto t1 = std::chrono::steady_clock::now();
    limiter.acquire();
    limiter.acquire();
    CHECK(std::chrono::steady_clock::now() - t1 >= std::chrono::milliseconds(150));
}

TEST_CASE("text client: missing credential is a configuration error before any network use") {
    auto transport = std::make_shared<ScriptedTransport>(std::deque<ScriptedTransport::Step>{});
    CHECK_ERROR_KIND(HttpTextGenClient(transport, "", std::make_shared<AuditLog>()), ErrorKind::Config);
    CHECK(transport->calls.empty());
}

TEST_CASE("text client sends the bearer key and rejects empty completions") {
    auto transport = std::make_shared<ScriptedTransport>(
        std::deque<ScriptedTransport::Step>{ok({{"text", "A red patch."}}), ok({{"text", "  "}}), ok({{"foo", 1}})});
    HttpTextGenClient client(transport, "secret", std::make_shared<AuditLog>());
    TextGenRequest req;
    req.system_prompt = "sys";
    req.user_prompt = "describe";
    req.few_shot_examples = {{"in", "out"}};
    const auto res = client.generate_text(req);
    CHECK(res.text == "A red patch.");
    CHECK(transport->calls[0].path == "/generate");
    CHECK(transport->calls[0].headers.at("Authorization") == "Bearer secret");
    const auto sent = json::parse(transport->calls[0].body);
    CHECK(sent["user_prompt"] == "describe");
    CHECK(sent["few_shot_examples"].size() == 1);
    CHECK_ERROR_KIND(client.generate_text(req), ErrorKind::Content);
    CHECK_ERROR_KIND(client.generate_text(req), ErrorKind::Protocol);

    req.max_tokens = 0;
    CHECK_ERROR_KIND(client.generate_text(req), ErrorKind::Contract);
}

TEST_CASE("segmentation client decodes PNG heatmaps and checks their size") {
    imaging::GrayImage small(4, 3, 255);
    imaging::GrayImage wrong(300, 300, 10);
    auto transport = std::make_shared<ScriptedTransport>(std::deque<ScriptedTransport::Step>{
        ok({{"heatmap_png_b64", util::base64_encode(imaging::encode_png(small))}}),
        ok({{"heatmap_png_b64", util::base64_encode(imaging::encode_png(wrong))}}),
        ok({{"heatmap_png_b64", "!!!"}})});
    HttpSegClient client(transport, std::make_shared<AuditLog>());
    SegRequest req{"img", {}, "raw-bytes", 4, 3, "red patches"};
    const auto map = client.segment_by_text(req);
    CHECK(map.width == 4);
    CHECK(map.values[0] == doctest::Approx(1.0));
    CHECK(json::parse(transport->calls[0].body)["prompt"] == "red patches");
    CHECK(util::base64_decode(json::parse(transport->calls[0].body)["image_b64"].get<std::string>()) ==
          "raw-bytes");
    CHECK_ERROR_KIND(client.segment_by_text(req), ErrorKind::Protocol);
    CHECK_ERROR_KIND(client.segment_by_text(req), ErrorKind::Protocol);
}

TEST_CASE("check_heatmap rejects out-of-range values") {
    SegRequest req{"img", {}, "x", 2, 1, "p"};
    imaging::Heatmap hm(2, 1);
    hm.values = {0.5f, 1.5f};
    CHECK_ERROR_KIND(check_heatmap(hm, req), ErrorKind::Protocol);
    hm.values = {0.5f, 1.0f};
    CHECK_NOTHROW(check_heatmap(hm, req));
}

TEST_CASE("mock text client: exact, contains, default and capture") {
    auto mock = MockTextGenClient::from_json(
        {{"exact", {{"hello", "world"}}}, {"contains", json::array({json::array({"polyp", "a polyp"})})}, {"default", "fallback"}});
    TextGenRequest req;
    req.user_prompt = "hello";
    CHECK(mock->generate_text(req).text == "world");
    req.user_prompt = "is there a polyp?";
    CHECK(mock->generate_text(req).text == "a polyp");
    req.user_prompt = "other";
    CHECK(mock->generate_text(req).text == "fallback");
    CHECK(mock->captured().size() == 3);
    const auto id1 = mock->generate_text(req).request_id;
    CHECK(id1 == mock->generate_text(req).request_id);

    MockTextGenClient bare;
    CHECK_ERROR_KIND(bare.generate_text(req), ErrorKind::Content);
}

TEST_CASE("mock segmenter: a centered Gaussian thresholds to a centered disc") {
    MockSegClient seg;
    GaussianBump bump{0.5, 0.5, 0.1, 1.0};
    seg.add("img", "polyp", bump);
    SegRequest req{"img", {}, "x", 100, 100, "polyp"};
    const auto map = seg.segment_by_text(req);
    const auto mask = imaging::threshold_heatmap(map, 0.35);
    // exp(-r^2 / (2 s^2)) > 0.35  <=>  r < s * sqrt(2 ln(1/0.35)), s = 10 px
    const double radius = 10.0 * std::sqrt(2.0 * std::log(1.0 / 0.35));
    for (int y = 0; y < 100; ++y)
        for (int x = 0; x < 100; ++x) {
            const double r = std::hypot(x + 0.5 - 50.0, y + 0.5 - 50.0);
            if (std::abs(r - radius) > 1e-6) REQUIRE(mask.at(x, y) == (r < radius));
        }
    const auto comps = imaging::connected_components(mask);
    REQUIRE(comps.size() == 1);
    CHECK(comps[0].bounding_box.x0 + comps[0].bounding_box.x1 == 99);

    req.prompt = "unknown";
    CHECK(seg.segment_by_text(req).values == std::vector<float>(100 * 100, 0.0f));
    CHECK(seg.call_count() == 2);
}

TEST_CASE("httplib transport talks to a local server") {
    httplib::Server server;
    int hits = 0;
    server.Post("/api/generate", [&](const httplib::Request& req, httplib::Response& res) {
        ++hits;
        if (hits == 1) {
            res.status = 503;
            return;
        }
        const auto body = json::parse(req.body);
        res.set_content(json{{"text", "echo: " + body["user_prompt"].get<std::string>()}}.dump(),
                        "application/json");
    });
    const int port = server.bind_to_any_port("127.0.0.1");
    REQUIRE(port > 0);
    std::thread t([&] { server.listen_after_bind(); });
    server.wait_until_ready();

    auto transport = std::make_shared<HttplibTransport>("http://127.0.0.1:" + std::to_string(port) + "/api",
                                                        std::chrono::seconds(5));
    SleepLog sleeps;
    HttpTextGenClient client(transport, "k", std::make_shared<AuditLog>(), RetryPolicy{}, 0.0, sleeps.sleeper());
    TextGenRequest req;
    req.user_prompt = "ping";
    const auto res = client.generate_text(req);
    CHECK(res.text == "echo: ping");
    CHECK(res.attempts == 2);
    server.stop();
    t.join();

    CHECK_ERROR_KIND(HttplibTransport("localhost:8080"), ErrorKind::Config);
}
