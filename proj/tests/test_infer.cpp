#include <map>
#include <random>

#include "medvqa/codec/loc_tokens.hpp"
#include "medvqa/imaging/png.hpp"
#include "medvqa/infer/confidence.hpp"
#include "medvqa/infer/pipeline.hpp"
#include "medvqa/model/toy_adapter.hpp"
#include "medvqa/util/files.hpp"
#include "support.hpp"

using namespace medvqa;
using namespace medvqa::infer;
using model::DecodingTrace;
using model::TokenProb;
using nlohmann::json;

namespace {

DecodingTrace trace_of(const std::vector<std::vector<double>>& steps) {
    DecodingTrace t;
    t.k = static_cast<int>(steps.front().size());
    for (const auto& s : steps) {
        std::vector<TokenProb> row;
        for (double p : s) row.push_back({"t", p});
        t.steps.push_back(row);
    }
    return t;
}

// Toy-backed adapter that fails on one chosen task.
class FailOnTask final : public model::ModelAdapter {
public:
    model::ToyAdapter inner;
    std::optional<TaskToken> fail_on;
    std::string backend() const override { return "fail-on-task"; }

protected:
    model::GenerationResult do_generate(const model::ImageRef& image, TaskToken task, const std::string& input,
                                        const model::DecodeParams& params) override {
        if (fail_on == task) fail(ErrorKind::Transport, "backend down");
        return inner.generate(image, task, input, params);
    }
    model::RunHandle do_fine_tune(const model::FineTuneRequest& req) override { return inner.fine_tune(req); }
};

imaging::BinaryMask square(int w, int h, int x0, int y0, int x1, int y1) {
    imaging::BinaryMask m(w, h);
    for (int y = y0; y < y1; ++y)
        for (int x = x0; x < x1; ++x) m.set(x, y);
    return m;
}

}  // namespace

TEST_CASE("confidence averages the top-k mass over steps") {
    // step masses 0.9 and 0.98
    const auto t = trace_of({{0.5, 0.2, 0.1, 0.05, 0.05}, {0.9, 0.05, 0.01, 0.01, 0.01}});
    CHECK(confidence(t, 5) == doctest::Approx(0.94).epsilon(1e-12));
    CHECK(confidence(t, 5, ConfidenceMode::Top1) == doctest::Approx(0.7).epsilon(1e-12));
    CHECK(confidence(t, 1) == doctest::Approx(0.7).epsilon(1e-12));
    const auto uniform = trace_of({{0.1, 0.1, 0.1, 0.1, 0.1}, {0.1, 0.1, 0.1, 0.1, 0.1}});
    CHECK(confidence(uniform, 5) == doctest::Approx(0.5).epsilon(1e-12));
    CHECK_ERROR_KIND(confidence(DecodingTrace{}, 5), ErrorKind::Contract);
    CHECK_ERROR_KIND(confidence(t, 6), ErrorKind::Contract);
    CHECK_ERROR_KIND(confidence(t, 0), ErrorKind::Contract);
}

TEST_CASE("confidence grows with the probability of any recorded entry") {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int trial = 0; trial < 200; ++trial) {
        std::vector<std::vector<double>> steps(3);
        for (auto& s : steps) {
            double rest = 1.0;
            for (int i = 0; i < 5; ++i) {
                const double p = rest * u(rng) * 0.5;
                s.push_back(p);
                rest -= p;
            }
            std::sort(s.rbegin(), s.rend());
        }
        const double before = confidence(trace_of(steps), 5);
        const std::size_t st = rng() % 3;
        steps[st][0] += 0.01;
        CHECK(confidence(trace_of(steps), 5) > before);
        CHECK(confidence(trace_of(steps), 5) >= 0.0);
        CHECK(confidence(trace_of(steps), 5) <= 1.0);
    }
}

TEST_CASE("subtask 2 chains answer, grounding and explanation") {
    model::ToyAdapter a;
    const auto m = square(64, 48, 10, 10, 30, 25);
    a.add("img", TaskToken::MedVQA, "Is there a polyp?", "one polyp");
    a.add("img", TaskToken::ReferringSegmentation, "one polyp",
          codec::render_tokens(codec::mask_to_tokens(m, 0.0, codec::kDefaultBins)));
    a.add("img", TaskToken::MedVQAExplain, "Is there a polyp? Explain in detail", "A raised bump is visible.",
          model::TraceProfile::uniform(10));
    const auto g = run_subtask2(a, {"img", "img.png"}, "Is there a polyp?", 64, 48);
    CHECK(g.answer == "one polyp");
    REQUIRE(g.mask.has_value());
    CHECK(*g.mask == m);
    CHECK(g.explanation == "A raised bump is visible.");
    CHECK(g.confidence == doctest::Approx(0.5));
    REQUIRE(g.traces.size() == 3);
    CHECK(g.traces[0].stage == Stage::Answer);
    CHECK(g.traces[1].stage == Stage::Ground);
    CHECK(g.traces[2].stage == Stage::Explain);
    CHECK_FALSE(g.failure_stage.has_value());
}

TEST_CASE("unusable grounding output is a soft miss") {
    model::ToyAdapter a;
    a.add("img", TaskToken::MedVQA, "q?", "yes");
    a.add("img", TaskToken::ReferringSegmentation, "yes", "no region here");
    a.add("img", TaskToken::MedVQAExplain, "q? Explain in detail", "Because.");
    const auto g = run_subtask2(a, {"img", "p"}, "q?", 32, 32);
    CHECK_FALSE(g.mask.has_value());
    CHECK(g.explanation == "Because.");
    CHECK_FALSE(g.failure_stage.has_value());
}

TEST_CASE("backend failures after the answer stage are recorded, not thrown") {
    FailOnTask a;
    a.inner.add("img", TaskToken::MedVQA, "q?", "yes");
    a.fail_on = TaskToken::ReferringSegmentation;
    auto g = run_subtask2(a, {"img", "p"}, "q?", 16, 16);
    CHECK(g.failure_stage == Stage::Ground);
    CHECK(g.answer == "yes");
    CHECK_FALSE(g.explanation.has_value());
    CHECK(g.traces.size() == 1);

    a.fail_on = TaskToken::MedVQAExplain;
    g = run_subtask2(a, {"img", "p"}, "q?", 16, 16);
    CHECK(g.failure_stage == Stage::Explain);
    CHECK(g.traces.size() == 2);

    a.fail_on = TaskToken::MedVQA;
    CHECK_ERROR_KIND(run_subtask2(a, {"img", "p"}, "q?", 16, 16), ErrorKind::Generation);
    CHECK_ERROR_KIND(answer_question(a.inner, {"img", "p"}, "  "), ErrorKind::Contract);
}

TEST_CASE("batch inference writes sorted predictions and masks") {
    testing::TempDir dir("batch");
    imaging::write_png(dir / "images/img.png", imaging::GrayImage(40, 30, 90));
    const auto m = square(40, 30, 5, 5, 20, 20);
    model::ToyAdapter a;
    a.add("img", TaskToken::MedVQA, "Where?", "left");
    a.add("img", TaskToken::ReferringSegmentation, "left",
          codec::render_tokens(codec::mask_to_tokens(m, 0.0, codec::kDefaultBins)));
    a.add("img", TaskToken::MedVQAExplain, "Where? Explain in detail", "On the left.");
    const std::vector<InferenceItem> items{{"s2", "img", "Where?"}, {"s1", "img", "Where?"}, {"s3", "ghost", "Where?"}};

    const auto s1 = run_batch(a, 1, items, dir / "images", dir / "out1");
    CHECK(s1.total == 3);
    CHECK(s1.failures == 1);
    const auto p1 = util::read_jsonl(dir / "out1/predictions.jsonl");
    REQUIRE(p1.size() == 3);
    CHECK(p1[0]["sample_id"] == "s1");
    CHECK(p1[0]["answer"] == "left");
    CHECK_FALSE(p1[0].contains("explanation"));
    CHECK(p1[2]["failure_stage"] == "answer");

    const auto s2 = run_batch(a, 2, items, dir / "images", dir / "out2");
    CHECK(s2.masks == 2);
    const auto p2 = util::read_jsonl(dir / "out2/predictions.jsonl");
    CHECK(p2[1]["explanation"] == "On the left.");
    CHECK(p2[1]["confidence"].get<double>() > 0.8);
    CHECK(imaging::read_mask(dir / "out2" / p2[1]["mask_path"].get<std::string>()) == m);

    CHECK_ERROR_KIND(run_batch(a, 3, items, dir / "images", dir / "out3"), ErrorKind::Contract);
}

TEST_CASE("inference items need all three fields") {
    testing::TempDir dir("items");
    util::write_jsonl(dir / "q.jsonl", {json{{"sample_id", "a"}, {"image_id", "i"}, {"question", "q"}}});
    CHECK(load_inference_items(dir / "q.jsonl").size() == 1);
    util::write_jsonl(dir / "bad.jsonl", {json{{"sample_id", "a"}, {"question", "q"}}});
    CHECK_ERROR_KIND(load_inference_items(dir / "bad.jsonl"), ErrorKind::Parse);
}
