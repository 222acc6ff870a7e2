#ifndef PAGESEG_MANIFEST_HPP
#define PAGESEG_MANIFEST_HPP

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace pageseg {

/// Warp-variant generation settings carried inside a dataset manifest.
/// The amplitude is a fraction of min(total_w, total_h); each page's field
/// seed is derived from the dataset seed and the page id.
struct WarpOptions {
    bool enabled = false;
    std::uint64_t seed = 0;
    int grid_cols = 4;
    int grid_rows = 4;
    double amplitude_frac = 0.02;
};

struct PageRecord {
    std::string page_id;
    int fold = 0;
    std::string variant; // "orig" or "warp"
    int width = 0;
    int height = 0;
    std::string scan_path;  // relative to the manifest directory
    std::string label_path;
};

struct TileRecord {
    std::string tile_id; // "<page_id>.<variant>.t<NN>", prediction file name stem
    std::string page_id;
    int fold = 0;
    std::string variant;
    int tile_index = 0;
    int x0 = 0, y0 = 0;
    int width = 0, height = 0;
    std::string scan_path;
    std::string label_path;
};

/// Line-oriented description of one prepared dataset: every page variant at
/// working resolution plus every tile cut from it, each tagged with the
/// fold inherited from its page. This file is what external predictors
/// receive (with paths made absolute).
struct DatasetManifest {
    std::string task;
    std::string config_name;
    int total_w = 0;
    int total_h = 0;
    int fold_count = 0;
    std::string schema_path; // relative, schema config of the label rasters
    WarpOptions warp;
    std::vector<PageRecord> pages;
    std::vector<TileRecord> tiles;
};

std::string manifest_to_string(const DatasetManifest& manifest);
DatasetManifest manifest_from_string(const std::string& text,
                                     const std::string& origin);

void save_manifest(const DatasetManifest& manifest,
                   const std::filesystem::path& path);
DatasetManifest load_manifest(const std::filesystem::path& path);

/// Content hash over the canonical serialization; cache keys include it so
/// a changed dataset invalidates dependent cells.
std::string manifest_digest(const DatasetManifest& manifest);

} // namespace pageseg

#endif
