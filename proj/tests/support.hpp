#pragma once

#include <chrono>
#include <cstdint>
#include <deque>
#include <filesystem>
#include <random>
#include <string>
#include <variant>
#include <vector>

#include <doctest.h>

#include "medvqa/error.hpp"
#include "medvqa/gen/service.hpp"
#include "medvqa/imaging/binary_mask.hpp"

namespace testing {

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
public:
    explicit TempDir(const std::string& tag) {
        static std::uint64_t counter = 0;
        std::random_device rd;
        path_ = std::filesystem::temp_directory_path() /
                ("medvqa-" + tag + "-" + std::to_string(rd()) + "-" + std::to_string(counter++));
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const { return path_; }
    std::filesystem::path operator/(const std::string& rel) const { return path_ / rel; }

private:
    std::filesystem::path path_;
};

inline medvqa::imaging::BinaryMask random_mask(std::mt19937_64& rng, int w, int h, double density) {
    medvqa::imaging::BinaryMask m(w, h);
    std::bernoulli_distribution on(density);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) m.set(x, y, on(rng));
    return m;
}

// Scripted transport: each post() consumes the next step, either an HTTP
// response or a transport failure message.
class ScriptedTransport final : public medvqa::gen::HttpTransport {
public:
    using Step = std::variant<medvqa::gen::HttpResponse, std::string>;
    explicit ScriptedTransport(std::deque<Step> steps) : steps_(std::move(steps)) {}

    medvqa::gen::HttpResponse post(const std::string& path, const std::string& body,
                                   const std::map<std::string, std::string>& headers) override {
        calls.push_back({path, body, headers});
        REQUIRE_FALSE(steps_.empty());
        Step s = steps_.front();
        steps_.pop_front();
        if (auto* failure = std::get_if<std::string>(&s)) throw medvqa::gen::TransportFailure(*failure);
        return std::get<medvqa::gen::HttpResponse>(s);
    }

    struct Call {
        std::string path;
        std::string body;
        std::map<std::string, std::string> headers;
    };
    std::vector<Call> calls;

private:
    std::deque<Step> steps_;
};

struct SleepLog {
    std::vector<std::chrono::milliseconds> delays;
    medvqa::gen::Sleeper sleeper() {
        return [this](std::chrono::milliseconds d) { delays.push_back(d); };
    }
};

}  // namespace testing

// Checks that expr throws medvqa::Error of the given kind.
#define CHECK_ERROR_KIND(expr, expected_kind)                                            \
    do {                                                                                 \
        bool thrown_ = false;                                                            \
        try {                                                                            \
            (void)(expr);                                                                \
        } catch (const medvqa::Error& e_) {                                              \
            thrown_ = true;                                                              \
            CHECK_MESSAGE(e_.kind() == (expected_kind), "kind: ", medvqa::to_string(e_.kind()), \
                          " message: ", std::string(e_.what()));                                      \
        }                                                                                \
        CHECK_MESSAGE(thrown_, "expected medvqa::Error from " #expr);                    \
    } while (false)
