#include <random>

#include "medvqa/eval/report.hpp"
#include "medvqa/eval/text_metrics.hpp"
#include "medvqa/imaging/png.hpp"
#include "medvqa/reference.hpp"
#include "medvqa/util/files.hpp"
#include "metric_oracles.hpp"
#include "support.hpp"

using namespace medvqa;
using namespace medvqa::eval;
using forge::RegionCategory;
using nlohmann::json;

namespace {

imaging::BinaryMask bar(int x0, int x1) {
    imaging::BinaryMask m(6, 1);
    for (int x = x0; x < x1; ++x) m.set(x, 0);
    return m;
}

}  // namespace

TEST_CASE("tokenizer lowercases and splits punctuation") {
    CHECK(tokenize("The Polyp, 5mm!") == std::vector<std::string>{"the", "polyp", ",", "5mm", "!"});
    CHECK(tokenize("  \t\n ").empty());
    CHECK(tokenize("a-b") == std::vector<std::string>{"a", "-", "b"});
}

TEST_CASE("BLEU on a hand-counted pair") {
    // hyp 5 tokens, ref 6; n-gram precisions 5/5, 3/4, 2/3, 1/2
    const double expected = std::exp(1.0 - 6.0 / 5.0) * std::pow(1.0 * 0.75 * (2.0 / 3.0) * 0.5, 0.25);
    CHECK(bleu({"the cat sat on mat"}, {"the cat sat on the mat"}) == doctest::Approx(expected).epsilon(1e-12));
    CHECK(bleu({"the cat sat on the mat"}, {"the cat sat on the mat"}) == doctest::Approx(1.0));
    CHECK(bleu({""}, {"anything"}) == 0.0);
    // no 4-gram matches among the two hypothesis 4-grams: p4 = 1 / (2 + 1)
    const double p = std::pow(1.0 * (3.0 / 4.0) * (1.0 / 3.0) * (1.0 / 3.0), 0.25);
    CHECK(bleu({"a b c d x"}, {"a b c y d x"}) == doctest::Approx(std::exp(1.0 - 6.0 / 5.0) * p).epsilon(1e-12));
    CHECK_ERROR_KIND(bleu({"a"}, {}), ErrorKind::Contract);
    CHECK_ERROR_KIND(bleu({}, {}), ErrorKind::Contract);
}

TEST_CASE("ROUGE on hand-counted pairs") {
    const auto r1 = rouge_n("the cat sat on mat", "the cat sat on the mat", 1);
    CHECK(r1.precision == doctest::Approx(1.0));
    CHECK(r1.recall == doctest::Approx(5.0 / 6.0));
    CHECK(r1.f1 == doctest::Approx(10.0 / 11.0).epsilon(1e-12));
    CHECK(rouge_n("the cat sat on mat", "the cat sat on the mat", 2).f1 == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
    // LCS "a c e" = 3 of 5 / 5
    CHECK(rouge_l("a b c d e", "a x c y e").f1 == doctest::Approx(0.6).epsilon(1e-12));
    CHECK(rouge_l("the cat sat", "the cat").f1 == doctest::Approx(0.8).epsilon(1e-12));
    CHECK(rouge_l("a b c d", "a b d c").f1 == doctest::Approx(0.75).epsilon(1e-12));
    // no bigrams on either side
    CHECK(rouge_n("yes", "yes", 2).f1 == 1.0);
    CHECK(rouge_n("yes", "no", 2).f1 == 0.0);
    CHECK(rouge_n("", "", 1).f1 == 1.0);
}

TEST_CASE("METEOR on hand-aligned pairs") {
    // m = 5, P = 1, R = 5/6, two chunks ("the cat sat on" and "mat")
    const double fmean = 10.0 * 1.0 * (5.0 / 6.0) / (5.0 / 6.0 + 9.0);
    CHECK(meteor_simple("the cat sat on mat", "the cat sat on the mat") ==
          doctest::Approx(fmean * (1.0 - 0.5 * std::pow(2.0 / 5.0, 3))).epsilon(1e-12));
    // m = 2, P = 2/3, R = 1, one chunk
    CHECK(meteor_simple("the cat sat", "the cat") == doctest::Approx((20.0 / 21.0) * 0.9375).epsilon(1e-12));
    // every token its own chunk
    CHECK(meteor_simple("a b c", "c b a") == doctest::Approx(0.5).epsilon(1e-12));
    // identical input: a single chunk still pays 0.5 / m^3
    CHECK(meteor_simple("a b c d", "a b c d") == doctest::Approx(1.0 - 0.5 / 64.0).epsilon(1e-12));
    CHECK(meteor_simple("x", "y") == 0.0);
    CHECK(meteor_simple("", "y") == 0.0);
    // repeated words: the second "the" continues the chunk at ref position 4
    CHECK(meteor_simple("on the mat", "the cat sat on the mat") ==
          doctest::Approx(10.0 * (3.0 / 6.0) / (3.0 / 6.0 + 9.0) * (1.0 - 0.5 / 27.0)).epsilon(1e-12));
}

TEST_CASE("chrF++ on small cases") {
    CHECK(chrf_pp("abc", "abc") == doctest::Approx(100.0));
    CHECK(chrf_pp("", "") == 100.0);
    CHECK(chrf_pp("abc", "xyz") == 0.0);
    // character unigrams a,b vs a,c: P = R = 1/2; other orders: bigram 0 match,
    // word unigram 0 match; orders 3..6 and word bigram empty on both sides
    CHECK(chrf_pp("ab", "ac") == doctest::Approx(100.0 * 0.5 / 3.0).epsilon(1e-12));
    CHECK(chrf_pp("the cat", "thecat") < 100.0);  // word orders differ
}

TEST_CASE("text metrics match brute-force oracles on random pairs") {
    std::mt19937_64 rng(2024);
    std::vector<std::string> hyps, refs;
    for (int i = 0; i < 200; ++i) {
        hyps.push_back(oracle::random_sentence(rng));
        refs.push_back(rng() % 5 == 0 ? hyps.back() : oracle::random_sentence(rng));
        CHECK(rouge_n(hyps[i], refs[i], 1).f1 == doctest::Approx(oracle::rouge_n(hyps[i], refs[i], 1)).epsilon(1e-9));
        CHECK(rouge_n(hyps[i], refs[i], 2).f1 == doctest::Approx(oracle::rouge_n(hyps[i], refs[i], 2)).epsilon(1e-9));
        CHECK(rouge_l(hyps[i], refs[i]).f1 == doctest::Approx(oracle::rouge_l(hyps[i], refs[i])).epsilon(1e-9));
        CHECK(chrf_pp(hyps[i], refs[i]) == doctest::Approx(oracle::chrf(hyps[i], refs[i])).epsilon(1e-9));
        CHECK(bleu({hyps[i]}, {refs[i]}) == doctest::Approx(oracle::bleu({hyps[i]}, {refs[i]})).epsilon(1e-9));
    }
    const auto scores = corpus_scores(hyps, refs);
    CHECK(scores.bleu == doctest::Approx(oracle::bleu(hyps, refs)).epsilon(1e-9));
    CHECK(scores.chrf_pp == doctest::Approx(oracle::corpus_chrf(hyps, refs)).epsilon(1e-9));
    double r1 = 0, rl = 0;
    for (int i = 0; i < 200; ++i) {
        r1 += oracle::rouge_n(hyps[i], refs[i], 1);
        rl += oracle::rouge_l(hyps[i], refs[i]);
    }
    CHECK(scores.rouge1 == doctest::Approx(r1 / 200).epsilon(1e-9));
    CHECK(scores.rougeL == doctest::Approx(rl / 200).epsilon(1e-9));
}

TEST_CASE("metric properties: bounds, identity and whitespace invariance") {
    std::mt19937_64 rng(99);
    for (int i = 0; i < 300; ++i) {
        const auto h = oracle::random_sentence(rng);
        const auto r = oracle::random_sentence(rng);
        for (double v : {rouge_n(h, r, 1).f1, rouge_n(h, r, 2).f1, rouge_l(h, r).f1, meteor_simple(h, r),
                         bleu({h}, {r})}) {
            CHECK(v >= 0.0);
            CHECK(v <= 1.0 + 1e-12);
        }
        CHECK(chrf_pp(h, r) >= 0.0);
        CHECK(chrf_pp(h, r) <= 100.0 + 1e-9);
        CHECK(chrf_pp(h, h) == doctest::Approx(100.0));
        CHECK(rouge_l(h, h).f1 == doctest::Approx(1.0));
        CHECK(rouge_n(h, h, 2).f1 == doctest::Approx(1.0));
        if (!tokenize(h).empty()) CHECK(bleu({h}, {h}) == doctest::Approx(1.0));

        std::string spaced = "  ";
        for (char c : h) spaced += c == ' ' ? std::string(" \t ") : std::string(1, c);
        spaced += "\n";
        CHECK(rouge_l(spaced, r).f1 == rouge_l(h, r).f1);
        CHECK(chrf_pp(spaced, r) == chrf_pp(h, r));
        CHECK(meteor_simple(spaced, r) == meteor_simple(h, r));
    }
}

TEST_CASE("parallel corpus scores equal the serial reference") {
    std::mt19937_64 rng(7);
    std::vector<std::string> hyps, refs;
    for (int i = 0; i < 1000; ++i) {
        hyps.push_back(oracle::random_sentence(rng));
        refs.push_back(oracle::random_sentence(rng));
    }
    const auto a = corpus_scores(hyps, refs);
    const auto b = reference::corpus_scores(hyps, refs);
    CHECK(a.bleu == b.bleu);
    CHECK(a.rouge1 == b.rouge1);
    CHECK(a.rouge2 == b.rouge2);
    CHECK(a.rougeL == b.rougeL);
    CHECK(a.meteor == b.meteor);
    CHECK(a.chrf_pp == b.chrf_pp);
    CHECK(a.count == 1000);
    CHECK_ERROR_KIND(corpus_scores({"a"}, {"a", "b"}), ErrorKind::Contract);
}

TEST_CASE("segmentation IoU per category") {
    std::vector<SegPair> pairs;
    pairs.push_back({bar(0, 2), bar(1, 3), RegionCategory::Polyp});  // 1/3
    pairs.push_back({bar(0, 4), bar(0, 4), RegionCategory::Polyp});  // 1
    pairs.push_back({std::nullopt, bar(0, 1), RegionCategory::Instrument});
    pairs.push_back({imaging::BinaryMask(6, 1), imaging::BinaryMask(6, 1), RegionCategory::Pseudo});
    const auto r = seg_iou_by_category(pairs);
    CHECK(r.mean_iou.at("polyp") == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
    CHECK(r.mean_iou.at("instrument") == 0.0);
    CHECK(r.mean_iou.at("pseudo") == 1.0);
    CHECK(r.counts.at("polyp") == 2);

    std::vector<SegPair> bad{{imaging::BinaryMask(2, 2), imaging::BinaryMask(3, 3), RegionCategory::Polyp}};
    CHECK_ERROR_KIND(seg_iou_by_category(bad), ErrorKind::Dimension);
}

TEST_CASE("report joins on sample id, scores answers and keeps ingested scores") {
    testing::TempDir dir("report");
    imaging::write_mask(dir / "ref/m1.png", bar(1, 3));
    imaging::write_mask(dir / "pred/p1.png", bar(0, 2));
    util::write_jsonl(dir / "ref/refs.jsonl",
                      {json{{"sample_id", "a"}, {"answer", "one polyp"}, {"mask_path", "m1.png"}, {"category", "polyp"}},
                       json{{"sample_id", "b"}, {"answer", "no"}, {"mask_path", "m1.png"}, {"category", "instrument"}},
                       json{{"sample_id", "c"}, {"answer", "two"}}});
    util::write_jsonl(dir / "pred/preds.jsonl", {json{{"sample_id", "c"}, {"answer", "two"}},
                                                 json{{"sample_id", "a"}, {"answer", "one polyp"}, {"mask_path", "p1.png"}},
                                                 json{{"sample_id", "b"}, {"answer", "yes"}}});
    ReportInputs in;
    in.pred_file = dir / "pred/preds.jsonl";
    in.ref_file = dir / "ref/refs.jsonl";
    in.ingested = {{"bertscore_f1", 0.9479}};
    const auto r = build_report(in);
    CHECK(r.counts.at("samples") == 3);
    CHECK(r.counts.at("seg_samples") == 2);
    CHECK(r.counts.at("seg_missing_predictions") == 1);
    CHECK(r.seg_iou.at("polyp") == doctest::Approx(1.0 / 3.0));
    CHECK(r.seg_iou.at("instrument") == 0.0);
    CHECK(r.ingested.at("bertscore_f1") == 0.9479);
    const auto expected = corpus_scores({"one polyp", "yes", "two"}, {"one polyp", "no", "two"});
    CHECK(r.bleu == expected.bleu);
    CHECK(r.rougeL == expected.rougeL);

    const auto j = to_json(r);
    CHECK(j.contains("meteor_exact"));
    CHECK(j["ingested"]["bertscore_f1"] == 0.9479);
    const auto back = report_from_json(j);
    CHECK(back.chrf_pp == r.chrf_pp);
    CHECK(back.seg_iou == r.seg_iou);
    CHECK(back.ingested == r.ingested);
}

TEST_CASE("report rejects mismatched or duplicated ids") {
    testing::TempDir dir("mismatch");
    util::write_jsonl(dir / "r.jsonl", {json{{"sample_id", "a"}, {"answer", "x"}}, json{{"sample_id", "b"}, {"answer", "y"}}});
    util::write_jsonl(dir / "p.jsonl", {json{{"sample_id", "a"}, {"answer", "x"}}, json{{"sample_id", "z"}, {"answer", "y"}}});
    ReportInputs in{dir / "p.jsonl", dir / "r.jsonl", {}, {}, {}};
    try {
        build_report(in);
        FAIL("expected a mismatch error");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::Contract);
        const std::string msg = e.what();
        CHECK(msg.find("only in predictions: z") != std::string::npos);
        CHECK(msg.find("only in references: b") != std::string::npos);
    }
    util::write_jsonl(dir / "p.jsonl", {json{{"sample_id", "a"}, {"answer", "x"}}, json{{"sample_id", "a"}, {"answer", "y"}}});
    CHECK_ERROR_KIND(build_report(in), ErrorKind::Parse);
}

TEST_CASE("radar CSV round trips judge scores") {
    const auto judge = judge_from_json(
        json{{"yes/no", {{"accuracy", 0.9}, {"clarity", 0.75}}}, {"count, \"how many\"", {{"accuracy", 0.1 + 0.2}}}});
    const auto csv = radar_csv(judge);
    CHECK(csv.rfind("question_type,metric,value\n", 0) == 0);
    CHECK(csv.find("\"count, \"\"how many\"\"\"") != std::string::npos);
    CHECK(parse_radar_csv(csv) == judge);

    CHECK_ERROR_KIND(judge_from_json(json{{"t", {{"m", 1.5}}}}), ErrorKind::Range);
    CHECK_ERROR_KIND(parse_radar_csv("type,metric,value\n"), ErrorKind::Parse);
    CHECK_ERROR_KIND(parse_radar_csv("question_type,metric,value\na,b,zz\n"), ErrorKind::Parse);
    CHECK_ERROR_KIND(parse_radar_csv("question_type,metric,value\na,b,0.5\na,b,0.5\n"), ErrorKind::Parse);
}
