#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "medvqa/codec/loc_tokens.hpp"
#include "medvqa/forge/records.hpp"

namespace medvqa::forge {

// image_id -> file, built from the stems of image files in a directory.
class ImageIndex {
public:
    ImageIndex() = default;
    static ImageIndex from_directory(const std::filesystem::path& dir);

    void add(std::string image_id, std::filesystem::path path);
    std::optional<std::filesystem::path> find(const std::string& image_id) const;
    std::size_t size() const { return paths_.size(); }

private:
    std::map<std::string, std::filesystem::path> paths_;
};

struct AssembleOptions {
    std::filesystem::path regions_base;  // directory region mask paths are relative to
    double simplify_eps = 0.0;
    int num_bins = codec::kDefaultBins;
};

struct AssembleCounts {
    std::size_t vqa = 0;
    std::size_t explanation = 0;
    std::size_t region = 0;
    std::size_t degenerate_excluded = 0;
};

struct AssembleResult {
    std::vector<MultiTaskExample> examples;  // sorted by (task token, sample_id)
    AssembleCounts counts;
};

std::string explain_input(const std::string& question);

// Error(Contract) listing every image id missing from the index.
AssembleResult assemble_multitask(const std::vector<QASample>& vqa, const std::vector<ExplanationSample>& expl,
                                  const std::vector<RegionSample>& regions, const ImageIndex& images,
                                  const AssembleOptions& opts);

nlohmann::json to_json(const AssembleCounts& c);

struct SplitResult {
    std::vector<MultiTaskExample> train;
    std::vector<MultiTaskExample> val;
    std::vector<std::string> train_ids;  // sorted
    std::vector<std::string> val_ids;    // sorted
};

// Image-level split: unique ids are sorted, shuffled with a seeded
// Fisher-Yates over mt19937_64, and the first ceil(ratio * n) go to train.
// Errors: ratio outside (0,1), fewer than two ids, or an empty side.
SplitResult group_split(const std::vector<MultiTaskExample>& examples, double ratio, std::uint64_t seed);

}  // namespace medvqa::forge
