#pragma once

// Synthetic endoscopy-like fixture set for demos and end-to-end tests:
// grayscale frames with a dark circular frame, a polyp and (on some frames)
// an instrument, plus QA pairs, curated masks, mock service tables,
// inference questions, references and judge scores.

#include <cstdint>
#include <filesystem>
#include <string>

namespace medvqa::fixtures {

struct FixtureOptions {
    int num_images = 8;
    int width = 160;
    int height = 128;
    std::uint64_t seed = 7;
};

// Files written under the fixture root.
struct FixtureLayout {
    std::filesystem::path root;
    std::filesystem::path images;          // images/<image_id>.png
    std::filesystem::path qa;              // qa.jsonl
    std::filesystem::path cases;           // cases.json (pseudo cases, curated masks, prompts, keywords)
    std::filesystem::path mock_textgen;    // mock_textgen.json
    std::filesystem::path mock_seg;        // mock_seg.json
    std::filesystem::path questions;       // questions.jsonl
    std::filesystem::path refs;            // refs.jsonl
    std::filesystem::path judge;           // judge.json
    std::filesystem::path config;          // config.ini
};

// Image id and question of the worked example that must survive the whole
// pipeline unchanged.
inline constexpr std::string_view kShowcaseImage = "img_0000";
inline constexpr std::string_view kShowcaseSample = "img_0000_q1";
inline constexpr std::string_view kShowcaseQuestion = "What is the size of the polyp?";
inline constexpr std::string_view kShowcaseAnswer = "polyp measuring greater than 20 millimeters";
inline constexpr std::string_view kShowcaseExplanation =
    "The polyp measures greater than 20 millimeters in size. It appears as a large, rounded, and irregular "
    "shape with a mix of red, pink, and yellow colors.";

FixtureLayout write_fixtures(const std::filesystem::path& root, const FixtureOptions& opts = {});

}  // namespace medvqa::fixtures
