#include "medvqa/gen/mock.hpp"

#include <algorithm>
#include <cmath>

#include "medvqa/error.hpp"

namespace medvqa::gen {

MockTextGenClient::MockTextGenClient(std::map<std::string, std::string> canned) : exact_(std::move(canned)) {}

void MockTextGenClient::add_exact(std::string prompt, std::string reply) {
    exact_[std::move(prompt)] = std::move(reply);
}

void MockTextGenClient::add_contains(std::string needle, std::string reply) {
    contains_.emplace_back(std::move(needle), std::move(reply));
}

void MockTextGenClient::set_default(std::string reply) { default_ = std::move(reply); }

std::unique_ptr<MockTextGenClient> MockTextGenClient::from_json(const nlohmann::json& j) {
    auto m = std::make_unique<MockTextGenClient>();
    if (j.contains("exact"))
        for (const auto& [k, v] : j.at("exact").items()) m->add_exact(k, v.get<std::string>());
    if (j.contains("contains"))
        for (const auto& pair : j.at("contains"))
            m->add_contains(pair.at(0).get<std::string>(), pair.at(1).get<std::string>());
    if (j.contains("default")) m->set_default(j.at("default").get<std::string>());
    return m;
}

TextGenResult MockTextGenClient::generate_text(const TextGenRequest& req) {
    req.validate();
    {
        std::lock_guard lock(mu_);
        captured_.push_back(req);
    }
    TextGenResult out;
    out.request_id = make_request_id("textgen", "/generate" + to_json(req).dump());
    if (auto it = exact_.find(req.user_prompt); it != exact_.end()) {
        out.text = it->second;
    } else {
        auto rule = std::find_if(contains_.begin(), contains_.end(), [&](const auto& r) {
            return req.user_prompt.find(r.first) != std::string::npos;
        });
        if (rule != contains_.end())
            out.text = rule->second;
        else if (default_)
            out.text = *default_;
    }
    if (out.text.find_first_not_of(" \t\r\n") == std::string::npos)
        fail(ErrorKind::Content, "textgen(mock): empty completion for " + out.request_id);
    out.usage.prompt_tokens = static_cast<int>(req.user_prompt.size() / 4);
    out.usage.completion_tokens = static_cast<int>(out.text.size() / 4);
    return out;
}

std::vector<TextGenRequest> MockTextGenClient::captured() const {
    std::lock_guard lock(mu_);
    return captured_;
}

imaging::Heatmap render_gaussian(int width, int height, const GaussianBump& b) {
    imaging::Heatmap map(width, height);
    const double cx = b.cx * width;
    const double cy = b.cy * height;
    const double s = b.sigma * std::min(width, height);
    const double denom = 2.0 * s * s;
    for (int y = 0; y < height; ++y) {
        for (int x = 0; x < width; ++x) {
            const double dx = x + 0.5 - cx;
            const double dy = y + 0.5 - cy;
            const double v = b.peak * std::exp(-(dx * dx + dy * dy) / denom);
            map.at(x, y) = static_cast<float>(std::clamp(v, 0.0, 1.0));
        }
    }
    return map;
}

void MockSegClient::add(const std::string& image_id, const std::string& prompt, GaussianBump bump) {
    table_[{image_id, prompt}] = bump;
}

void MockSegClient::add(const std::string& image_id, const std::string& prompt, imaging::Heatmap map) {
    table_[{image_id, prompt}] = std::move(map);
}

std::unique_ptr<MockSegClient> MockSegClient::from_json(const nlohmann::json& j) {
    auto m = std::make_unique<MockSegClient>();
    for (const auto& [image_id, prompts] : j.items()) {
        for (const auto& [prompt, spec] : prompts.items()) {
            GaussianBump b;
            b.cx = spec.value("cx", b.cx);
            b.cy = spec.value("cy", b.cy);
            b.sigma = spec.value("sigma", b.sigma);
            b.peak = spec.value("peak", b.peak);
            m->add(image_id, prompt, b);
        }
    }
    return m;
}

imaging::Heatmap MockSegClient::segment_by_text(const SegRequest& req) {
    if (req.prompt.empty()) fail(ErrorKind::Contract, "segment(mock): empty prompt");
    {
        std::lock_guard lock(mu_);
        ++calls_;
    }
    imaging::Heatmap map;
    auto it = table_.find({req.image_id, req.prompt});
    if (it == table_.end()) {
        map = imaging::Heatmap(req.width, req.height, 0.0f);
    } else if (const auto* bump = std::get_if<GaussianBump>(&it->second)) {
        map = render_gaussian(req.width, req.height, *bump);
    } else {
        map = std::get<imaging::Heatmap>(it->second);
    }
    check_heatmap(map, req);
    return map;
}

std::size_t MockSegClient::call_count() const {
    std::lock_guard lock(mu_);
    return calls_;
}

}  // namespace medvqa::gen
