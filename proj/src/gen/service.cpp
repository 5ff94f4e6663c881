#include "medvqa/gen/service.hpp"

#include <httplib.h>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <thread>

#include "medvqa/error.hpp"
#include "medvqa/util/files.hpp"
#include "medvqa/util/hash.hpp"

namespace medvqa::gen {

HttplibTransport::HttplibTransport(const std::string& base_url, std::chrono::seconds timeout)
    : timeout_(timeout) {
    const auto scheme = base_url.find("://");
    if (scheme == std::string::npos) fail(ErrorKind::Config, "service url needs a scheme: " + base_url);
    const auto slash = base_url.find('/', scheme + 3);
    origin_ = base_url.substr(0, slash);
    prefix_ = slash == std::string::npos ? "" : base_url.substr(slash);
    while (!prefix_.empty() && prefix_.back() == '/') prefix_.pop_back();
}

HttpResponse HttplibTransport::post(const std::string& path, const std::string& body,
                                    const std::map<std::string, std::string>& headers) {
    httplib::Client client(origin_);
    client.set_connection_timeout(timeout_);
    client.set_read_timeout(timeout_);
    client.set_write_timeout(timeout_);
    httplib::Headers hs;
    for (const auto& [k, v] : headers) hs.emplace(k, v);
    auto res = client.Post(prefix_ + path, hs, body, "application/json");
    if (!res) throw TransportFailure("http " + httplib::to_string(res.error()));
    return {res->status, res->body};
}

AuditLog::AuditLog(std::filesystem::path path) : path_(std::move(path)) {}

void AuditLog::append(const AuditRecord& r) {
    if (path_.empty()) return;
    nlohmann::json j{{"ts", r.ts},           {"service", r.service},
                     {"request_id", r.request_id}, {"attempts", r.attempts},
                     {"latency_ms", r.latency_ms}, {"status", r.status}};
    const std::string line = j.dump() + "\n";
    std::lock_guard lock(mu_);
    if (!out_) {
        if (path_.has_parent_path()) std::filesystem::create_directories(path_.parent_path());
        out_ = std::make_unique<std::ofstream>(path_, std::ios::app);
        if (!*out_) fail(ErrorKind::Io, "cannot open audit log " + path_.string());
    }
    *out_ << line;
    out_->flush();
}

RateLimiter::RateLimiter(double requests_per_minute)
    : rate_per_sec_(requests_per_minute / 60.0),
      capacity_(std::max(1.0, requests_per_minute)),
      tokens_(capacity_),
      last_(std::chrono::steady_clock::now()) {}

void RateLimiter::acquire() {
    if (rate_per_sec_ <= 0.0) return;
    std::unique_lock lock(mu_);
    for (;;) {
        const auto now = std::chrono::steady_clock::now();
        const double dt = std::chrono::duration<double>(now - last_).count();
        last_ = now;
        tokens_ = std::min(capacity_, tokens_ + dt * rate_per_sec_);
        if (tokens_ >= 1.0) {
            tokens_ -= 1.0;
            return;
        }
        const double wait = (1.0 - tokens_) / rate_per_sec_;
        lock.unlock();
        std::this_thread::sleep_for(std::chrono::duration<double>(wait));
        lock.lock();
    }
}

std::string make_request_id(const std::string& service, const std::string& payload) {
    return service + "-" + util::hex64(util::fnv1a64(payload, util::fnv1a64(service)));
}

bool is_retryable_status(int status) { return status == 429 || status >= 500; }

ServiceCaller::ServiceCaller(std::string service, std::shared_ptr<HttpTransport> transport,
                             std::shared_ptr<AuditLog> audit, RetryPolicy policy,
                             double requests_per_minute, Sleeper sleeper)
    : service_(std::move(service)),
      transport_(std::move(transport)),
      audit_(audit ? std::move(audit) : std::make_shared<AuditLog>()),
      policy_(policy),
      limiter_(requests_per_minute),
      sleeper_(sleeper ? std::move(sleeper)
                       : Sleeper([](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); })),
      rng_(policy.seed) {
    if (!transport_) fail(ErrorKind::Config, service_ + ": no transport configured");
    if (policy_.max_attempts < 1) fail(ErrorKind::Config, service_ + ": max_attempts must be >= 1");
}

std::chrono::milliseconds ServiceCaller::backoff(int attempt) {
    double u = 0.0;
    {
        std::lock_guard lock(rng_mu_);
        u = std::uniform_real_distribution<double>(-1.0, 1.0)(rng_);
    }
    const double base = static_cast<double>(policy_.base_delay.count()) * std::ldexp(1.0, attempt - 1);
    return std::chrono::milliseconds(static_cast<long long>(base * (1.0 + policy_.jitter * u)));
}

CallResult ServiceCaller::post_json(const std::string& path, const nlohmann::json& payload,
                                    const std::map<std::string, std::string>& headers) {
    const std::string body = payload.dump();
    CallResult out;
    out.request_id = make_request_id(service_, path + body);
    const auto t0 = std::chrono::steady_clock::now();

    auto audit = [&](const std::string& status) {
        out.latency_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
        audit_->append({util::utc_timestamp(), service_, out.request_id, out.attempts, out.latency_ms, status});
    };

    std::map<std::string, std::string> hs = headers;
    hs["X-Request-Id"] = out.request_id;
    std::string last_error;
    for (int attempt = 1; attempt <= policy_.max_attempts; ++attempt) {
        out.attempts = attempt;
        limiter_.acquire();
        HttpResponse res;
        try {
            res = transport_->post(path, body, hs);
        } catch (const TransportFailure& e) {
            last_error = e.what();
            spdlog::warn("{} {} attempt {} failed: {}", service_, out.request_id, attempt, last_error);
            if (attempt < policy_.max_attempts) sleeper_(backoff(attempt));
            continue;
        }
        if (res.status >= 200 && res.status < 300) {
            try {
                out.body = nlohmann::json::parse(res.body);
            } catch (const std::exception& e) {
                audit("protocol_error");
                fail(ErrorKind::Protocol, service_ + ": response is not JSON: " + e.what());
            }
            audit("ok");
            return out;
        }
        if (!is_retryable_status(res.status)) {
            audit("http_" + std::to_string(res.status));
            fail(ErrorKind::Config, service_ + ": HTTP " + std::to_string(res.status) +
                                        " (not retried): " + res.body.substr(0, 200));
        }
        last_error = "HTTP " + std::to_string(res.status);
        spdlog::warn("{} {} attempt {} got {}", service_, out.request_id, attempt, last_error);
        if (attempt < policy_.max_attempts) sleeper_(backoff(attempt));
    }
    audit("transport_error");
    fail(ErrorKind::Transport, service_ + ": giving up after " + std::to_string(out.attempts) +
                                   " attempts: " + last_error);
}

}  // namespace medvqa::gen
