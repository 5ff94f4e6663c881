#include "medvqa/cli/config.hpp"

#include <functional>
#include <set>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "medvqa/error.hpp"
#include "medvqa/util/files.hpp"

namespace medvqa::cli {

namespace fs = std::filesystem;
namespace pt = boost::property_tree;

namespace {

template <typename T>
T convert(const std::string& where, const std::string& raw) {
    std::istringstream in(raw);
    T v{};
    in >> v;
    if (in.fail() || !(in >> std::ws).eof()) fail(ErrorKind::Config, where + ": cannot parse '" + raw + "'");
    return v;
}

bool parse_bool(const std::string& where, const std::string& raw) {
    if (raw == "true" || raw == "1" || raw == "yes") return true;
    if (raw == "false" || raw == "0" || raw == "no") return false;
    fail(ErrorKind::Config, where + ": expected a boolean, got '" + raw + "'");
}

using Setter = std::function<void(const std::string& where, const std::string& value)>;

}  // namespace

PipelineConfig default_config(const fs::path& base_dir) {
    PipelineConfig c;
    c.paths.work_dir = util::resolve(base_dir, c.paths.work_dir);
    c.train.runs_dir = util::resolve(base_dir, c.train.runs_dir);
    return c;
}

PipelineConfig parse_config(const std::string& text, const fs::path& base_dir) {
    pt::ptree tree;
    try {
        std::istringstream in(text);
        pt::read_ini(in, tree);
    } catch (const pt::ini_parser_error& e) {
        fail(ErrorKind::Config, std::string("config: ") + e.what());
    }

    PipelineConfig c = default_config(base_dir);
    auto path = [&](fs::path& dst) {
        return [&dst, &base_dir](const std::string&, const std::string& v) { dst = util::resolve(base_dir, v); };
    };
    auto num = [](auto& dst) {
        return [&dst](const std::string& where, const std::string& v) {
            dst = convert<std::decay_t<decltype(dst)>>(where, v);
        };
    };
    auto str = [](std::string& dst) { return [&dst](const std::string&, const std::string& v) { dst = v; }; };

    auto& tc = c.train.config;
    const std::map<std::string, std::map<std::string, Setter>> schema = {
        {"", {{"seed", num(c.seed)}, {"workers", num(c.workers)}}},
        {"paths", {{"work_dir", path(c.paths.work_dir)}, {"images", path(c.paths.images)},
                   {"audit_log", path(c.paths.audit_log)}}},
        {"forge", {{"templates", path(c.forge.templates)},
                   {"mock_textgen", path(c.forge.mock_textgen)},
                   {"mock_seg", path(c.forge.mock_seg)},
                   {"heatmap_thresh", num(c.forge.heatmap_thresh)},
                   {"min_area_frac", num(c.forge.min_area_frac)},
                   {"dark_border_max_mean", num(c.forge.dark_border_max_mean)},
                   {"requests_per_minute", num(c.forge.requests_per_minute)}}},
        {"codec", {{"num_bins", num(c.codec.num_bins)}, {"simplify_eps", num(c.codec.simplify_eps)}}},
        {"train", {{"lora_rank", num(tc.lora_rank)},
                   {"lora_alpha", num(tc.lora_alpha)},
                   {"target_modules", str(tc.target_modules)},
                   {"learning_rate", num(tc.learning_rate)},
                   {"warmup_ratio", num(tc.warmup_ratio)},
                   {"fp16", [&tc](const std::string& w, const std::string& v) {
                        tc.precision = parse_bool(w, v) ? train::Precision::Fp16 : train::Precision::Fp32;
                    }},
                   {"per_device_batch", num(tc.per_device_batch)},
                   {"grad_accum_steps", num(tc.grad_accum_steps)},
                   {"num_devices", num(tc.num_devices)},
                   {"epochs", num(tc.epochs)},
                   {"split_ratio", num(c.train.split_ratio)},
                   {"adapter", str(c.train.adapter)},
                   {"runs_dir", path(c.train.runs_dir)}}},
        {"infer", {{"adapter", str(c.infer.adapter)},
                   {"checkpoint", path(c.infer.checkpoint)},
                   {"max_tokens", num(c.infer.max_tokens)},
                   {"top_k_record", num(c.infer.top_k_record)},
                   {"confidence_k", num(c.infer.confidence_k)}}},
        {"eval", {}},
    };

    for (const auto& [name, node] : tree) {
        const bool empty_section = node.empty() && node.data().empty() && !name.empty() && schema.contains(name);
        if (empty_section) continue;
        const bool is_section = !node.empty();
        const std::string section = is_section ? name : "";
        auto sec = schema.find(section);
        if (sec == schema.end()) fail(ErrorKind::Config, "config: unknown section [" + name + "]");
        auto apply = [&](const std::string& key, const std::string& value) {
            const std::string where = section.empty() ? key : section + "." + key;
            if (section == "eval" && key.rfind("ingested.", 0) == 0 && key.size() > 9) {
                c.eval.ingested[key.substr(9)] = convert<double>(where, value);
                return;
            }
            auto it = sec->second.find(key);
            if (it == sec->second.end()) fail(ErrorKind::Config, "config: unknown key " + where);
            it->second(where, value);
        };
        if (is_section) {
            for (const auto& [key, leaf] : node) apply(key, leaf.data());
        } else {
            apply(name, node.data());
        }
    }
    tc.seed = c.seed;
    tc.validate();
    if (c.workers < 1) fail(ErrorKind::Config, "config: workers must be >= 1");
    if (c.train.split_ratio <= 0.0 || c.train.split_ratio >= 1.0)
        fail(ErrorKind::Config, "config: train.split_ratio must be in (0,1)");
    if (c.codec.num_bins < 1) fail(ErrorKind::Config, "config: codec.num_bins must be >= 1");
    return c;
}

PipelineConfig load_config(const fs::path& file) {
    if (!fs::exists(file)) fail(ErrorKind::Config, "config file not found: " + file.string());
    const fs::path base = fs::absolute(file).parent_path();
    return parse_config(util::read_file(file), base);
}

}  // namespace medvqa::cli
