#include <random>
#include <set>

#include "medvqa/forge/assemble.hpp"
#include "medvqa/forge/explanations.hpp"
#include "medvqa/forge/postprocess.hpp"
#include "medvqa/forge/regions.hpp"
#include "medvqa/gen/mock.hpp"
#include "medvqa/imaging/png.hpp"
#include "medvqa/util/files.hpp"
#include "support.hpp"

using namespace medvqa;
using namespace medvqa::forge;
using nlohmann::json;

namespace {

QASample qa(std::string id, std::string image, std::string q, std::string a, int complexity = 1,
            std::map<std::string, std::string> meta = {}) {
    return {std::move(id), std::move(image), std::move(q), std::move(a), complexity, std::move(meta)};
}

MultiTaskExample example(const std::string& sample, const std::string& image) {
    return {TaskToken::MedVQA, sample, image, "q", "a", ExampleSource::Vqa};
}

}  // namespace

TEST_CASE("postprocess strips fences and role labels, collapses whitespace and ends the sentence") {
    CHECK(postprocess_explanation("```text\nAssistant: The  polyp\n is red\n```") == "The polyp is red.");
    CHECK(postprocess_explanation("Explanation : it is round!") == "it is round!");
    CHECK(postprocess_explanation("Model: Answer: two tools") == "two tools.");
    CHECK(postprocess_explanation("A bump. A bump. A flat area.") == "A bump. A flat area.");
    CHECK(postprocess_explanation("A bump. A flat area. A bump.") == "A bump. A flat area. A bump.");
    CHECK(postprocess_explanation("Is it?") == "Is it?");
    CHECK(postprocess_explanation("") == "");
    CHECK(postprocess_explanation(" \n```\n``` ") == "");
    CHECK(postprocess_explanation("Modeled shape") == "Modeled shape.");
}

TEST_CASE("postprocess is idempotent on random inputs") {
    std::mt19937 rng(3);
    const std::vector<std::string> parts{"A red patch", ".", " ", "\n", "Assistant:", "```", "!", "x", "Y."};
    for (int i = 0; i < 500; ++i) {
        std::string s;
        const int n = static_cast<int>(rng() % 10);
        for (int k = 0; k < n; ++k) s += parts[rng() % parts.size()];
        const auto once = postprocess_explanation(s);
        CHECK(postprocess_explanation(once) == once);
    }
}

TEST_CASE("templates substitute placeholders and drop metadata lines when metadata is absent") {
    CHECK(expand_template("{a}-{b}-{c}", {{"a", "1"}, {"b", "{a}"}}) == "1-{a}-{c}");
    CHECK(render_metadata({{"location", "left"}, {"abnormality", "polyp"}}) == "abnormality: polyp; location: left");

    const auto t = PromptTemplates::defaults();
    const auto with = cue_request(qa("s", "i", "Is there a polyp?", "yes", 1, {{"abnormality", "polyp"}}), t);
    CHECK(with.user_prompt.find("Known findings: abnormality: polyp") != std::string::npos);
    const auto without = cue_request(qa("s", "i", "Is there a polyp?", "yes"), t);
    CHECK(without.user_prompt.find("Known findings") == std::string::npos);
    CHECK(without.user_prompt.find("Question: Is there a polyp?\nAnswer: yes\n") == 0);
    CHECK(without.few_shot_examples.empty());

    const auto synth = synthesis_request(qa("s", "i", "Q?", "A"), "round bump", t);
    CHECK(synth.few_shot_examples.size() == t.few_shots.size());
    CHECK(synth.user_prompt.find("Visual description: round bump") != std::string::npos);
}

TEST_CASE("templates load from a directory, falling back per slot") {
    testing::TempDir dir("tmpl");
    util::write_file_atomic(dir / "cue_user.txt", "Q={question}\n");
    util::write_jsonl(dir / "few_shot.jsonl", {json{{"input", "i"}, {"output", "o"}}});
    const auto t = PromptTemplates::from_directory(dir.path());
    CHECK(t.cue_user == "Q={question}");
    CHECK(t.cue_system == PromptTemplates::defaults().cue_system);
    REQUIRE(t.few_shots.size() == 1);
    CHECK(t.few_shots[0].output == "o");

    util::write_jsonl(dir / "few_shot.jsonl", {json{{"input", "i"}}});
    CHECK_ERROR_KIND(PromptTemplates::from_directory(dir.path()), ErrorKind::Parse);
}

TEST_CASE("shipped template files match the built-in defaults") {
    const auto t = PromptTemplates::from_directory(MEDVQA_SOURCE_DIR "/templates");
    const auto d = PromptTemplates::defaults();
    CHECK(t.cue_system == d.cue_system);
    CHECK(t.cue_user == d.cue_user);
    CHECK(t.synth_system == d.synth_system);
    CHECK(t.synth_user == d.synth_user);
    REQUIRE(t.few_shots.size() == d.few_shots.size());
    for (std::size_t i = 0; i < d.few_shots.size(); ++i) {
        CHECK(t.few_shots[i].input == d.few_shots[i].input);
        CHECK(t.few_shots[i].output == d.few_shots[i].output);
    }
}

TEST_CASE("forge_explanations runs both stages and skips complex questions") {
    const auto t = PromptTemplates::defaults();
    std::vector<QASample> qas{qa("b", "img1", "How many polyps?", "one", 1),
                              qa("a", "img1", "Is there a polyp?", "yes", 1, {{"abnormality", "polyp"}}),
                              qa("c", "img2", "Where and what size?", "left, 5mm", 2)};
    gen::MockTextGenClient mock;
    for (const auto& s : qas) {
        if (s.complexity != 1) continue;
        mock.add_exact(cue_request(s, t).user_prompt, "cue for " + s.sample_id);
        mock.add_exact(synthesis_request(s, "cue for " + s.sample_id, t).user_prompt,
                       "Answer: explanation for " + s.sample_id + "\n\n");
    }
    const auto res = forge_explanations(qas, mock, t);
    REQUIRE(res.samples.size() == 2);
    CHECK(res.samples[0].base.sample_id == "a");
    CHECK(res.samples[0].explanation == "explanation for a.");
    CHECK(res.samples[0].visual_cues == "cue for a");
    CHECK(res.samples[0].provenance.postprocessed);
    CHECK_FALSE(res.samples[0].provenance.metadata_missing);
    CHECK(res.samples[1].provenance.metadata_missing);
    CHECK_FALSE(res.samples[0].provenance.cue_request_id.empty());
    REQUIRE(res.skipped.size() == 1);
    CHECK(res.skipped[0].sample_id == "c");
    CHECK(res.skipped[0].reason == kComplexitySkipReason);
    CHECK(mock.captured().size() == 4);

    CHECK_ERROR_KIND(synthesize_explanation(qas[2], CueResult{"x", "id", false}, mock, t), ErrorKind::Contract);
    CHECK_ERROR_KIND(synthesize_explanation(qas[0], CueResult{"", "id", false}, mock, t), ErrorKind::Contract);
}

TEST_CASE("forge_explanations propagates client failures") {
    gen::MockTextGenClient silent;  // no rules: every call is a content error
    CHECK_ERROR_KIND(forge_explanations({qa("a", "i", "q?", "a")}, silent, PromptTemplates::defaults()),
                     ErrorKind::Content);
}

TEST_CASE("record JSON round trips and rejects missing fields") {
    ExplanationSample e{qa("s1", "img", "Q?", "A", 1, {{"k", "v"}}), "cues", "expl", {"c1", "s1", true, false}};
    const auto back = explanation_from_json(to_json(e));
    CHECK(back.base.metadata == e.base.metadata);
    CHECK(back.provenance.synth_request_id == "s1");
    CHECK(back.explanation == "expl");

    RegionSample r{"r1", "img", "polyp", "masks/r1.png", RegionCategory::Instrument, {"p1"}, true};
    const auto rb = region_from_json(to_json(r));
    CHECK(rb.category == RegionCategory::Instrument);
    CHECK(rb.degenerate);
    CHECK(rb.mask_path == r.mask_path);

    const auto m = multitask_from_json(to_json(MultiTaskExample{TaskToken::MedVQAExplain, "s", "i", "in", "out",
                                                                ExampleSource::Explanation}));
    CHECK(m.task_token == TaskToken::MedVQAExplain);
    CHECK(m.source == ExampleSource::Explanation);

    auto j = to_json(qa("s", "i", "q", "a"));
    j.erase("answer");
    CHECK_ERROR_KIND(qa_from_json(j), ErrorKind::Parse);
    CHECK_ERROR_KIND(multitask_from_json(json{{"task_token", "<BOGUS>"}}), ErrorKind::Parse);
}

TEST_CASE("answer linker links unique answers and reports ambiguity") {
    AnswerLinker linker({qa("1", "img", "Is there a polyp?", "yes"), qa("2", "img", "What size is the polyp?", "5mm"),
                         qa("3", "img", "Any instrument?", "forceps"), qa("4", "img2", "Any INSTRUMENT here?", "no")},
                        {{"polyp", {"polyp"}}, {"instrument", {"instrument", "tool"}}});
    auto r = linker.link("img", "instrument");
    CHECK(r.status == AnswerLinker::Status::Linked);
    CHECK(r.answer == "forceps");
    CHECK(linker.link("img2", "instrument").answer == "no");
    CHECK(linker.link("img", "polyp").status == AnswerLinker::Status::Ambiguous);
    CHECK(linker.link("img3", "polyp").status == AnswerLinker::Status::Missing);
    CHECK(linker.link("img", "colitis").status == AnswerLinker::Status::Missing);
}

TEST_CASE("region forge: pseudo masks, curated masks, skips and counts") {
    testing::TempDir dir("regions");
    // 40x40 frame, dark left border column block, bright elsewhere
    imaging::GrayImage frame(40, 40, 120);
    for (int y = 0; y < 40; ++y)
        for (int x = 0; x < 4; ++x) frame.at(x, y) = 0;
    imaging::write_png(dir / "frame.png", frame);

    gen::MockSegClient seg;
    seg.add("img1", "red patches", gen::GaussianBump{0.5, 0.5, 0.1, 1.0});
    seg.add("img1", "inflamed area", gen::GaussianBump{0.0, 0.5, 0.08, 1.0});  // sits on the dark border
    PromptTable prompts{{"ulcerative colitis", {"red patches", "inflamed area"}}};

    imaging::BinaryMask curated(40, 40);
    for (int y = 10; y < 20; ++y)
        for (int x = 10; x < 20; ++x) curated.set(x, y);
    imaging::write_mask(dir / "curated.png", curated);

    std::vector<PseudoCase> pseudo{{"img1", dir / "frame.png", "ulcerative colitis", "yes"},
                                   {"img2", dir / "missing.png", "ulcerative colitis", "yes"},
                                   {"img3", dir / "frame.png", "unknown label", "yes"}};
    std::vector<ExternalMask> external{{"img1", dir / "curated.png", RegionCategory::Polyp, "one polyp"},
                                       {"img4", dir / "curated.png", RegionCategory::Instrument, ""}};
    RegionForgeOptions opts;
    opts.output_dir = dir / "out";
    AnswerLinker linker({qa("q", "img4", "How many instruments?", "two")}, {{"instrument", {"instrument"}}});
    const auto res = build_region_samples(pseudo, prompts, seg, external, opts, &linker);

    CHECK(res.counts.pseudo == 1);
    CHECK(res.counts.external == 2);
    CHECK(res.counts.total == 3);
    CHECK(res.counts.skipped == 2);
    CHECK(res.counts.degenerate == 0);
    REQUIRE(res.samples.size() == 3);
    CHECK(std::is_sorted(res.samples.begin(), res.samples.end(),
                         [](const auto& a, const auto& b) { return a.sample_id < b.sample_id; }));

    const auto& p = *std::find_if(res.samples.begin(), res.samples.end(),
                                  [](const auto& s) { return s.category == RegionCategory::Pseudo; });
    CHECK(p.sample_id == pseudo_sample_id(pseudo[0]));
    CHECK(p.prompts_used.size() == 2);
    const auto pmask = imaging::read_mask(opts.output_dir / p.mask_path);
    CHECK(pmask.at(20, 20));
    for (int y = 0; y < 40; ++y) CHECK_FALSE(pmask.at(0, y));  // dark-border blob removed
    const auto expected_center = imaging::threshold_heatmap(
        seg.segment_by_text({"img1", {}, "", 40, 40, "red patches"}), opts.heatmap_thresh);
    CHECK(pmask == expected_center);

    const auto& inst = *std::find_if(res.samples.begin(), res.samples.end(),
                                     [](const auto& s) { return s.category == RegionCategory::Instrument; });
    CHECK(inst.answer_text == "two");
    CHECK(imaging::read_mask(opts.output_dir / inst.mask_path) == curated);

    check_region_counts(to_json(res.counts));
}

TEST_CASE("empty refined pseudo masks are kept as degenerate and excluded at assembly") {
    testing::TempDir dir("degenerate");
    imaging::write_png(dir / "f.png", imaging::GrayImage(20, 20, 100));
    gen::MockSegClient seg;  // unknown prompt -> zero heatmap
    RegionForgeOptions opts;
    opts.output_dir = dir.path();
    const auto res = build_region_samples({{"img", dir / "f.png", "lbl", "yes"}}, {{"lbl", {"nothing"}}}, seg, {},
                                          opts);
    REQUIRE(res.samples.size() == 1);
    CHECK(res.samples[0].degenerate);
    CHECK(res.counts.degenerate == 1);

    ImageIndex images;  // the degenerate sample's image need not be present
    AssembleOptions aopts;
    aopts.regions_base = dir.path();
    const auto a = assemble_multitask({}, {}, res.samples, images, aopts);
    CHECK(a.examples.empty());
    CHECK(a.counts.degenerate_excluded == 1);
}

TEST_CASE("region forge rejects bad inputs") {
    gen::MockSegClient seg;
    RegionForgeOptions opts;
    CHECK_ERROR_KIND(build_region_samples({{"i", "p", "l", "a"}}, {}, seg, {}, opts), ErrorKind::Contract);
    CHECK_ERROR_KIND(build_region_samples({}, {}, seg, {{"i", "m", RegionCategory::Pseudo, "a"}}, opts),
                     ErrorKind::Contract);
    CHECK_ERROR_KIND(build_region_samples({}, {}, seg,
                                          {{"i", "m", RegionCategory::Polyp, "a"}, {"i", "n", RegionCategory::Polyp, "b"}},
                                          opts),
                     ErrorKind::Contract);
}

TEST_CASE("region count consistency check") {
    CHECK_NOTHROW(check_region_counts({{"pseudo_count", 2954}, {"external_count", 1383}, {"region_total", 4337}}));
    CHECK_ERROR_KIND(check_region_counts({{"pseudo_count", 2954}, {"external_count", 1383}, {"region_total", 4336}}),
                     ErrorKind::Integrity);
    CHECK_ERROR_KIND(check_region_counts({{"pseudo_count", 1}, {"external_count", 1}}), ErrorKind::Integrity);
    CHECK_ERROR_KIND(check_region_counts({{"pseudo_count", -1}, {"external_count", 1}, {"region_total", 0}}),
                     ErrorKind::Integrity);
}

TEST_CASE("explain suffix is appended once") {
    CHECK(explain_input("Is there a polyp?") == "Is there a polyp? Explain in detail");
    CHECK(explain_input("Is there a polyp? Explain in detail") == "Is there a polyp? Explain in detail");
    CHECK(explain_input("Is there a polyp? Explain in detail.  ") == "Is there a polyp? Explain in detail.");
    for (const std::string q : {"a", "Why?", "b Explain in detail"}) CHECK(explain_input(explain_input(q)) == explain_input(q));
}

TEST_CASE("assemble builds all three tasks and lists missing images") {
    testing::TempDir dir("assemble");
    imaging::BinaryMask m(50, 50);
    for (int y = 10; y < 30; ++y)
        for (int x = 5; x < 25; ++x) m.set(x, y);
    imaging::write_mask(dir / "masks/r.png", m);
    ImageIndex images;
    images.add("img1", dir / "img1.png");

    const std::vector<QASample> vqa{qa("v1", "img1", "Q1?", "A1")};
    const std::vector<ExplanationSample> expl{{qa("e1", "img1", "Q2?", "A2"), "cue", "Because.", {}}};
    const std::vector<RegionSample> regs{{"r1", "img1", "one polyp", "masks/r.png", RegionCategory::Polyp, {}, false}};
    AssembleOptions opts;
    opts.regions_base = dir.path();
    const auto res = assemble_multitask(vqa, expl, regs, images, opts);
    REQUIRE(res.examples.size() == 3);
    CHECK(res.counts.vqa == 1);
    CHECK(res.counts.explanation == 1);
    CHECK(res.counts.region == 1);
    CHECK(res.examples[0].task_token == TaskToken::MedVQA);
    CHECK(res.examples[1].input_text == "Q2? Explain in detail");
    CHECK(res.examples[2].task_token == TaskToken::ReferringSegmentation);
    CHECK(res.examples[2].input_text == "one polyp");
    const auto decoded = codec::tokens_to_mask(codec::parse_token_text(res.examples[2].target_text), 50, 50);
    CHECK(decoded == m);

    const std::vector<QASample> stray{qa("v2", "ghost", "Q?", "A"), qa("v3", "phantom", "Q?", "A")};
    try {
        assemble_multitask(stray, {}, {}, images, opts);
        FAIL("expected an error");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::Contract);
        CHECK(std::string(e.what()).find("ghost") != std::string::npos);
        CHECK(std::string(e.what()).find("phantom") != std::string::npos);
    }
}

TEST_CASE("image index reads stems from a directory") {
    testing::TempDir dir("index");
    util::write_file_atomic(dir / "a.png", "x");
    util::write_file_atomic(dir / "b.jpg", "x");
    const auto idx = ImageIndex::from_directory(dir.path());
    CHECK(idx.find("a").has_value());
    CHECK(idx.find("b").has_value());
    CHECK_FALSE(idx.find("c").has_value());
}

TEST_CASE("group split keeps every image on one side and honours the ratio") {
    std::mt19937_64 rng(11);
    for (int trial = 0; trial < 50; ++trial) {
        const int n_ids = 20 + static_cast<int>(rng() % 181);
        std::vector<MultiTaskExample> ex;
        for (int i = 0; i < n_ids; ++i) {
            const int reps = 1 + static_cast<int>(rng() % 5);
            for (int r = 0; r < reps; ++r)
                ex.push_back(example("s" + std::to_string(i) + "_" + std::to_string(r), "img" + std::to_string(i)));
        }
        const double ratio = 0.9;
        const auto s = group_split(ex, ratio, 42);
        std::set<std::string> tr(s.train_ids.begin(), s.train_ids.end());
        std::set<std::string> va(s.val_ids.begin(), s.val_ids.end());
        for (const auto& id : tr) CHECK(va.count(id) == 0);
        CHECK(tr.size() + va.size() == static_cast<std::size_t>(n_ids));
        for (const auto& e : s.train) CHECK(tr.count(e.image_id) == 1);
        for (const auto& e : s.val) CHECK(va.count(e.image_id) == 1);
        CHECK(s.train.size() + s.val.size() == ex.size());
        CHECK(std::abs(static_cast<double>(tr.size()) / n_ids - ratio) <= 1.0 / n_ids + 1e-12);

        const auto again = group_split(ex, ratio, 42);
        CHECK(again.train_ids == s.train_ids);
    }
}

TEST_CASE("group split rejects unusable inputs") {
    CHECK_ERROR_KIND(group_split({example("a", "x"), example("b", "y")}, 1.0, 1), ErrorKind::Range);
    CHECK_ERROR_KIND(group_split({example("a", "x"), example("b", "x")}, 0.5, 1), ErrorKind::Contract);
    CHECK_ERROR_KIND(group_split({example("a", "x"), example("b", "y")}, 0.99, 1), ErrorKind::Contract);
}

TEST_CASE("manifest updates keep other stages") {
    testing::TempDir dir("manifest");
    update_manifest(dir.path(), "explanations", {{"count", 1}});
    update_manifest(dir.path(), "regions", {{"count", 2}});
    update_manifest(dir.path(), "explanations", {{"count", 3}});
    const auto j = json::parse(util::read_file(dir / "manifest.json"));
    CHECK(j["explanations"]["count"] == 3);
    CHECK(j["regions"]["count"] == 2);
}
