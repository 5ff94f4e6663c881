#pragma once

// Shared plumbing for the remote generation services: transport, retry with
// backoff, admission rate limiting, and the JSONL audit trail.

#include <chrono>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <random>
#include <stdexcept>
#include <string>

#include <json.hpp>

namespace medvqa::gen {

struct HttpResponse {
    int status = 0;
    std::string body;
};

// Raised by transports for failures below HTTP (timeouts, resets, refused).
class TransportFailure : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class HttpTransport {
public:
    virtual ~HttpTransport() = default;
    virtual HttpResponse post(const std::string& path, const std::string& body,
                              const std::map<std::string, std::string>& headers) = 0;
};

// cpp-httplib backed transport. base_url is "http://host[:port][/prefix]".
class HttplibTransport final : public HttpTransport {
public:
    explicit HttplibTransport(const std::string& base_url,
                              std::chrono::seconds timeout = std::chrono::seconds(60));
    HttpResponse post(const std::string& path, const std::string& body,
                      const std::map<std::string, std::string>& headers) override;

private:
    std::string origin_;
    std::string prefix_;
    std::chrono::seconds timeout_;
};

struct RetryPolicy {
    int max_attempts = 5;
    std::chrono::milliseconds base_delay{1000};
    double jitter = 0.25;  // delay scaled by 1 + jitter * U(-1, 1)
    std::uint64_t seed = 0x5eed;
};

using Sleeper = std::function<void(std::chrono::milliseconds)>;

struct AuditRecord {
    std::string ts;
    std::string service;
    std::string request_id;
    int attempts = 0;
    double latency_ms = 0.0;
    std::string status;
};

class AuditLog {
public:
    AuditLog() = default;  // discards records
    // The file (and its directory) is created on the first record.
    explicit AuditLog(std::filesystem::path path);

    void append(const AuditRecord& record);
    bool enabled() const { return !path_.empty(); }

private:
    std::mutex mu_;
    std::filesystem::path path_;
    std::unique_ptr<std::ofstream> out_;
};

// Token bucket admitting at most requests_per_minute calls per minute with
// a burst of one minute's worth. Zero or negative disables limiting.
class RateLimiter {
public:
    explicit RateLimiter(double requests_per_minute = 0.0);
    void acquire();

private:
    std::mutex mu_;
    double rate_per_sec_;
    double capacity_;
    double tokens_;
    std::chrono::steady_clock::time_point last_;
};

// Content-derived id so that identical requests carry identical ids across runs.
std::string make_request_id(const std::string& service, const std::string& payload);

struct CallResult {
    nlohmann::json body;
    std::string request_id;
    int attempts = 0;
    double latency_ms = 0.0;
};

// One logical call: admission, retries on timeout / 5xx / 429 / reset,
// exactly one audit record per call whatever the outcome.
class ServiceCaller {
public:
    ServiceCaller(std::string service, std::shared_ptr<HttpTransport> transport,
                  std::shared_ptr<AuditLog> audit, RetryPolicy policy = {},
                  double requests_per_minute = 0.0, Sleeper sleeper = {});

    CallResult post_json(const std::string& path, const nlohmann::json& payload,
                         const std::map<std::string, std::string>& headers = {});

    const std::string& service() const { return service_; }

private:
    std::chrono::milliseconds backoff(int attempt);

    std::string service_;
    std::shared_ptr<HttpTransport> transport_;
    std::shared_ptr<AuditLog> audit_;
    RetryPolicy policy_;
    RateLimiter limiter_;
    Sleeper sleeper_;
    std::mutex rng_mu_;
    std::mt19937_64 rng_;
};

bool is_retryable_status(int status);

}  // namespace medvqa::gen
