#include "medvqa/fixtures.hpp"

#include <cmath>
#include <random>

#include <json.hpp>

#include "medvqa/error.hpp"
#include "medvqa/forge/explanations.hpp"
#include "medvqa/forge/postprocess.hpp"
#include "medvqa/forge/records.hpp"
#include "medvqa/gen/mock.hpp"
#include "medvqa/imaging/ops.hpp"
#include "medvqa/imaging/png.hpp"
#include "medvqa/util/files.hpp"

namespace medvqa::fixtures {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// Uniform in [0,1) from the top 53 bits; independent of the standard
// library's distribution implementations.
class Uniform {
public:
    explicit Uniform(std::uint64_t seed) : rng_(seed) {}
    double next() { return static_cast<double>(rng_() >> 11) * 0x1.0p-53; }
    double range(double lo, double hi) { return lo + (hi - lo) * next(); }

private:
    std::mt19937_64 rng_;
};

struct Ellipse {
    double cx, cy, rx, ry;
    bool contains(int x, int y) const {
        const double dx = (x + 0.5 - cx) / rx, dy = (y + 0.5 - cy) / ry;
        return dx * dx + dy * dy <= 1.0;
    }
};

struct Bar {
    int x0, y0, x1, y1;  // half-open
    bool contains(int x, int y) const { return x >= x0 && x < x1 && y >= y0 && y < y1; }
};

struct Frame {
    imaging::GrayImage image;
    Ellipse polyp;
    std::optional<Bar> instrument;
};

Frame render_frame(int w, int h, Uniform& u, bool large_polyp, bool with_instrument) {
    Frame f;
    f.polyp.rx = large_polyp ? 30.0 : u.range(10.0, 24.0);
    f.polyp.ry = large_polyp ? 24.0 : u.range(10.0, 20.0);
    f.polyp.cx = u.range(0.35, 0.55) * w;
    f.polyp.cy = u.range(0.4, 0.6) * h;
    if (with_instrument) {
        const int y0 = static_cast<int>(u.range(0.15, 0.25) * h);
        f.instrument = Bar{w - 46, y0, w, y0 + 10};
    }
    f.image = imaging::GrayImage(w, h);
    const double fx = w / 2.0, fy = h / 2.0;
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const double nx = (x + 0.5 - fx) / fx, ny = (y + 0.5 - fy) / fy;
            double v = 110.0 + 20.0 * std::sin(x / 9.0) * std::cos(y / 7.0) + u.range(-8.0, 8.0);
            if (nx * nx + ny * ny > 1.15) v = 4.0;
            if (f.polyp.contains(x, y)) v = 200.0 + u.range(-10.0, 10.0);
            if (f.instrument && f.instrument->contains(x, y)) v = 235.0 + u.range(-5.0, 5.0);
            f.image.at(x, y) = static_cast<std::uint8_t>(std::clamp(v, 0.0, 255.0));
        }
    }
    return f;
}

template <typename Shape>
imaging::BinaryMask shape_mask(int w, int h, const Shape& s) {
    imaging::BinaryMask m(w, h);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            if (s.contains(x, y)) m.set(x, y);
    return m;
}

std::string size_answer(const Ellipse& e) {
    if (e.rx >= 26.0) return std::string(kShowcaseAnswer);
    if (e.rx >= 17.0) return "polyp measuring 11-20 millimeters";
    return "polyp measuring 5-10 millimeters";
}

struct Replies {
    std::string cue;
    std::string synth;
};

const std::vector<std::pair<std::string, gen::GaussianBump>> kColitisBumps = {
    {"red patches", {0.3, 0.35, 0.08, 1.0}},
    {"inflamed mucosa", {0.68, 0.62, 0.06, 0.9}},
};

}  // namespace

FixtureLayout write_fixtures(const fs::path& root, const FixtureOptions& opts) {
    if (opts.num_images < 1 || opts.width < 64 || opts.height < 64)
        fail(ErrorKind::Contract, "fixtures need at least one image of at least 64x64");
    FixtureLayout out;
    out.root = root;
    out.images = root / "images";
    out.qa = root / "qa.jsonl";
    out.cases = root / "cases.json";
    out.mock_textgen = root / "mock_textgen.json";
    out.mock_seg = root / "mock_seg.json";
    out.questions = root / "questions.jsonl";
    out.refs = root / "refs.jsonl";
    out.judge = root / "judge.json";
    out.config = root / "config.ini";
    fs::create_directories(out.images);
    fs::create_directories(root / "curated");
    fs::create_directories(root / "ref_masks");

    const auto templates = forge::PromptTemplates::defaults();
    const int w = opts.width, h = opts.height;
    Uniform u(opts.seed);

    std::vector<json> qa_lines, question_lines, ref_lines;
    json exact = json::object();
    json seg_table = json::object();
    json pseudo = json::array(), external = json::array();

    auto add_qa = [&](const forge::QASample& qa, const std::optional<Replies>& replies,
                      const std::optional<std::pair<std::string, std::string>>& ref_mask) {
        qa_lines.push_back(forge::to_json(qa));
        question_lines.push_back({{"sample_id", qa.sample_id}, {"image_id", qa.image_id}, {"question", qa.question}});
        json ref = {{"sample_id", qa.sample_id}, {"answer", qa.answer}};
        if (replies) {
            exact[forge::cue_request(qa, templates).user_prompt] = replies->cue;
            exact[forge::synthesis_request(qa, replies->cue, templates).user_prompt] = replies->synth;
            ref["explanation"] = forge::postprocess_explanation(replies->synth);
        }
        if (ref_mask) {
            ref["mask_path"] = ref_mask->first;
            ref["category"] = ref_mask->second;
        }
        ref_lines.push_back(std::move(ref));
    };

    for (int i = 0; i < opts.num_images; ++i) {
        char buf[32];
        std::snprintf(buf, sizeof buf, "img_%04d", i);
        const std::string id = buf;
        const bool with_instrument = i % 2 == 1;
        const bool colitis = i % 3 == 2;
        const Frame f = render_frame(w, h, u, i == 0, with_instrument);
        imaging::write_png(out.images / (id + ".png"), f.image);

        const auto polyp_mask = shape_mask(w, h, f.polyp);
        const std::string polyp_rel = "curated/" + id + "_polyp.png";
        imaging::write_mask(root / polyp_rel, polyp_mask);
        external.push_back({{"image_id", id}, {"mask_path", polyp_rel}, {"category", "polyp"}});

        forge::QASample q0{id + "_q0", id, "Is there a polyp in the image?", "yes", 1, {{"abnormality", "polyp"}}};
        add_qa(q0,
               Replies{"A rounded, raised growth stands out from the surrounding lining.",
                       "```\nYes, a polyp is present. A rounded, raised growth stands out from the surrounding "
                       "lining.\n```"},
               std::nullopt);

        forge::QASample q1{id + "_q1", id, std::string(kShowcaseQuestion), size_answer(f.polyp), 1,
                           {{"abnormality", "polyp"}}};
        const Replies size_replies =
            i == 0 ? Replies{"A large, rounded and irregular growth with red, pink and yellow colouring fills much "
                             "of the view.",
                             "Explanation: " + std::string(kShowcaseExplanation)}
                   : Replies{"A rounded growth of moderate size sits near the centre of the view.",
                             "The polyp is " + q1.answer.substr(std::string("polyp ").size()) +
                                 ". A rounded growth of moderate size sits near the centre of the view."};
        add_qa(q1, size_replies, std::pair{polyp_rel, std::string("polyp")});

        if (with_instrument) {
            const std::string inst_rel = "curated/" + id + "_instrument.png";
            imaging::write_mask(root / inst_rel, shape_mask(w, h, *f.instrument));
            external.push_back({{"image_id", id}, {"mask_path", inst_rel}, {"category", "instrument"}});
            forge::QASample q2{id + "_q2", id, "How many instruments are visible?", "one instrument", 1,
                               {{"instrument", "biopsy forceps"}}};
            add_qa(q2,
                   Replies{"A single bright metallic tool enters from the right edge.",
                           "Answer: One instrument is visible. A single bright metallic tool enters from the right "
                           "edge."},
                   std::pair{inst_rel, std::string("instrument")});
        }

        if (colitis) {
            pseudo.push_back({{"image_id", id}, {"label", "ulcerative colitis"}});
            json prompts = json::object();
            std::vector<imaging::BinaryMask> parts;
            for (const auto& [prompt, bump] : kColitisBumps) {
                prompts[prompt] = {{"cx", bump.cx}, {"cy", bump.cy}, {"sigma", bump.sigma}, {"peak", bump.peak}};
                parts.push_back(imaging::threshold_heatmap(gen::render_gaussian(w, h, bump), 0.35));
            }
            seg_table[id] = prompts;
            const auto pseudo_mask = imaging::refine_mask(imaging::union_masks(parts), f.image, {});
            const std::string ref_rel = "ref_masks/" + id + "_pseudo.png";
            imaging::write_mask(root / ref_rel, pseudo_mask);
            forge::QASample q3{id + "_q3", id, "Is there evidence of ulcerative colitis?",
                               "ulcerative colitis with red inflamed patches", 2,
                               {{"finding", "ulcerative colitis"}}};
            add_qa(q3, std::nullopt, std::pair{ref_rel, std::string("pseudo")});
        }
    }

    util::write_jsonl(out.qa, qa_lines);
    util::write_jsonl(out.questions, question_lines);
    util::write_jsonl(out.refs, ref_lines);

    json cases = {
        {"prompts", {{"ulcerative colitis", {"red patches", "inflamed mucosa"}}}},
        {"keywords",
         {{"ulcerative colitis", {"ulcerative colitis"}},
          {"polyp", {"size of the polyp"}},
          {"instrument", {"instrument"}}}},
        {"pseudo", pseudo},
        {"external", external},
    };
    util::write_file_atomic(out.cases, cases.dump(2) + "\n");
    util::write_file_atomic(out.mock_textgen, json{{"exact", exact}}.dump(2) + "\n");
    util::write_file_atomic(out.mock_seg, seg_table.dump(2) + "\n");

    const json judge = {
        {"yes/no", {{"answer correctness", 0.92}, {"clarity", 0.88}, {"completeness", 0.81}, {"faithfulness", 0.9}}},
        {"size", {{"answer correctness", 0.74}, {"clarity", 0.85}, {"completeness", 0.7}, {"faithfulness", 0.79}}},
        {"count", {{"answer correctness", 0.83}, {"clarity", 0.9}, {"completeness", 0.77}, {"faithfulness", 0.86}}},
    };
    util::write_file_atomic(out.judge, judge.dump(2) + "\n");

    util::write_file_atomic(out.config,
                            "seed = 42\n"
                            "workers = 4\n"
                            "\n[paths]\n"
                            "work_dir = work\n"
                            "images = images\n"
                            "\n[forge]\n"
                            "mock_textgen = mock_textgen.json\n"
                            "mock_seg = mock_seg.json\n"
                            "heatmap_thresh = 0.35\n"
                            "\n[codec]\n"
                            "num_bins = 1000\n"
                            "simplify_eps = 0\n"
                            "\n[train]\n"
                            "split_ratio = 0.75\n"
                            "adapter = toy\n"
                            "runs_dir = work/runs\n"
                            "\n[infer]\n"
                            "adapter = toy\n"
                            "\n[eval]\n"
                            "ingested.bertscore_f1 = 0.9479\n");
    return out;
}

}  // namespace medvqa::fixtures
