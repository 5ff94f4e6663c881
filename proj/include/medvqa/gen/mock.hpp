#pragma once

#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "medvqa/gen/segmentation.hpp"
#include "medvqa/gen/text_gen.hpp"

namespace medvqa::gen {

// Canned replies keyed by the exact user prompt; falls back to substring
// rules in insertion order, then to an optional default. Records every
// request it sees.
class MockTextGenClient final : public TextGenClient {
public:
    MockTextGenClient() = default;
    explicit MockTextGenClient(std::map<std::string, std::string> canned);

    void add_exact(std::string prompt, std::string reply);
    void add_contains(std::string needle, std::string reply);
    void set_default(std::string reply);

    // {"exact": {prompt: reply}, "contains": [[needle, reply], ...], "default": reply}
    static std::unique_ptr<MockTextGenClient> from_json(const nlohmann::json& j);

    TextGenResult generate_text(const TextGenRequest& req) override;

    std::vector<TextGenRequest> captured() const;

private:
    std::map<std::string, std::string> exact_;
    std::vector<std::pair<std::string, std::string>> contains_;
    std::optional<std::string> default_;
    mutable std::mutex mu_;
    std::vector<TextGenRequest> captured_;
};

struct GaussianBump {
    double cx = 0.5;  // center, fraction of width
    double cy = 0.5;  // center, fraction of height
    double sigma = 0.1;  // fraction of min(width, height)
    double peak = 1.0;
};

// exp(-r^2 / (2 sigma^2)) * peak sampled at pixel centers.
imaging::Heatmap render_gaussian(int width, int height, const GaussianBump& bump);

// Canned heatmaps keyed by (image_id, prompt). Unknown keys get an all-zero
// map of the requested size.
class MockSegClient final : public SegClient {
public:
    void add(const std::string& image_id, const std::string& prompt, GaussianBump bump);
    void add(const std::string& image_id, const std::string& prompt, imaging::Heatmap map);

    // {"<image_id>": {"<prompt>": {"cx":..,"cy":..,"sigma":..,"peak":..}}}
    static std::unique_ptr<MockSegClient> from_json(const nlohmann::json& j);

    imaging::Heatmap segment_by_text(const SegRequest& req) override;

    std::size_t call_count() const;

private:
    using Source = std::variant<GaussianBump, imaging::Heatmap>;
    std::map<std::pair<std::string, std::string>, Source> table_;
    mutable std::mutex mu_;
    std::size_t calls_ = 0;
};

}  // namespace medvqa::gen
