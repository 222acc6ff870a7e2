#include "pageseg/tiling.hpp"

#include "pageseg/errors.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

namespace pageseg {

namespace {

// round-half-up of num/den for non-negative integers
int round_div(std::int64_t num, std::int64_t den) {
    return static_cast<int>((2 * num + den) / (2 * den));
}

std::vector<int> axis_origins(int total, int tile, int count) {
    std::vector<int> origins(static_cast<std::size_t>(count));
    if (count == 1) {
        origins[0] = 0;
        return origins;
    }
    for (int i = 0; i < count; ++i)
        origins[static_cast<std::size_t>(i)] =
            round_div(static_cast<std::int64_t>(i) * (total - tile), count - 1);
    return origins;
}

std::vector<int> axis_seams(const std::vector<int>& origins, int tile) {
    std::vector<int> seams;
    seams.reserve(origins.size() - 1);
    for (std::size_t i = 0; i + 1 < origins.size(); ++i)
        seams.push_back(round_div(
            static_cast<std::int64_t>(origins[i]) + origins[i + 1] + tile, 2));
    return seams;
}

// Per-tile owned interval along one axis: [start, end) between seams.
struct Owned {
    int start;
    int end;
};

std::vector<Owned> owned_ranges(const std::vector<int>& seams, int total) {
    std::vector<Owned> ranges(seams.size() + 1);
    int start = 0;
    for (std::size_t i = 0; i < seams.size(); ++i) {
        ranges[i] = {start, seams[i]};
        start = seams[i];
    }
    ranges[seams.size()] = {start, total};
    return ranges;
}

template <typename Img>
void copy_rect(const Img& src, int sx, int sy, Img& dst, int dx, int dy, int w,
               int h);

template <>
void copy_rect(const IndexedLabelImage& src, int sx, int sy,
               IndexedLabelImage& dst, int dx, int dy, int w, int h) {
    for (int y = 0; y < h; ++y)
        std::memcpy(dst.row(dy + y).data() + dx, src.row(sy + y).data() + sx,
                    static_cast<std::size_t>(w));
}

template <>
void copy_rect(const ScanImage& src, int sx, int sy, ScanImage& dst, int dx,
               int dy, int w, int h) {
    for (int y = 0; y < h; ++y)
        std::memcpy(dst.pixels().data() +
                        (static_cast<std::size_t>(dy + y) * dst.width() + dx),
                    src.pixels().data() +
                        (static_cast<std::size_t>(sy + y) * src.width() + sx),
                    static_cast<std::size_t>(w));
}

template <typename Img, typename MakeTile>
std::vector<Img> split_any(const Img& img, const TileGrid& grid, MakeTile make) {
    if (img.width() != grid.config.total_w || img.height() != grid.config.total_h)
        throw DimensionMismatchError(
            "image " + std::to_string(img.width()) + "x" +
            std::to_string(img.height()) + " does not match config '" +
            grid.config.name + "' total " + std::to_string(grid.config.total_w) +
            "x" + std::to_string(grid.config.total_h));
    std::vector<Img> tiles;
    tiles.reserve(grid.placements.size());
    for (const TilePlacement& p : grid.placements) {
        Img tile = make(grid.config.tile_w, grid.config.tile_h);
        copy_rect(img, p.x0, p.y0, tile, 0, 0, grid.config.tile_w,
                  grid.config.tile_h);
        tiles.push_back(std::move(tile));
    }
    return tiles;
}

} // namespace

std::string_view to_string(TilePattern pattern) {
    switch (pattern) {
    case TilePattern::none: return "-";
    case TilePattern::h: return "h";
    case TilePattern::v: return "v";
    case TilePattern::hv: return "hv";
    }
    return "?";
}

std::optional<TilePattern> parse_pattern(std::string_view text) {
    if (text == "-" || text == "none") return TilePattern::none;
    if (text == "h") return TilePattern::h;
    if (text == "v") return TilePattern::v;
    if (text == "hv") return TilePattern::hv;
    return std::nullopt;
}

void validate(const TileConfig& c) {
    if (c.total_w < 1 || c.total_h < 1 || c.tile_w < 1 || c.tile_h < 1 ||
        c.tiles_x < 1 || c.tiles_y < 1)
        throw InvalidArgumentError("config '" + c.name +
                                   "': sizes and counts must be >= 1");
    if (c.tile_w > c.total_w || c.tile_h > c.total_h)
        throw InvalidArgumentError("config '" + c.name +
                                   "': tile exceeds total size");
    switch (c.pattern) {
    case TilePattern::none:
        if (c.tiles_x != 1 || c.tiles_y != 1 || c.tile_w != c.total_w ||
            c.tile_h != c.total_h)
            throw InvalidArgumentError(
                "config '" + c.name +
                "': untiled configs need a single full-size tile");
        break;
    case TilePattern::h:
        if (c.tiles_y != 1 || c.tiles_x < 2)
            throw InvalidArgumentError("config '" + c.name +
                                       "': h pattern needs tiles_y=1, tiles_x>1");
        break;
    case TilePattern::v:
        if (c.tiles_x != 1 || c.tiles_y < 2)
            throw InvalidArgumentError("config '" + c.name +
                                       "': v pattern needs tiles_x=1, tiles_y>1");
        break;
    case TilePattern::hv:
        if (c.tiles_x < 2 || c.tiles_y < 2)
            throw InvalidArgumentError("config '" + c.name +
                                       "': hv pattern needs a 2-D tile grid");
        break;
    }
    if (static_cast<std::int64_t>(c.tiles_x) * c.tile_w < c.total_w ||
        static_cast<std::int64_t>(c.tiles_y) * c.tile_h < c.total_h)
        throw InsufficientCoverageError("config '" + c.name +
                                        "': tiles do not cover the image");
}

const std::vector<TileConfig>& builtin_configs() {
    static const std::vector<TileConfig> configs = {
        {"0.3/-", 512, 768, TilePattern::none, 1, 1, 512, 768},
        {"0.6/h", 640, 1024, TilePattern::h, 2, 1, 384, 1024},
        {"0.9/v", 768, 1280, TilePattern::v, 1, 3, 768, 512},
        {"1.1/h", 896, 1280, TilePattern::h, 5, 1, 256, 1280},
        {"1.1/v", 896, 1280, TilePattern::v, 1, 4, 896, 384},
        {"1.1/hv", 896, 1280, TilePattern::hv, 2, 2, 512, 768},
        {"1.1/-", 896, 1280, TilePattern::none, 1, 1, 896, 1280},
        {"3.0/v", 1280, 2400, TilePattern::v, 1, 3, 1280, 896},
        {"3.9/hv", 1640, 2400, TilePattern::hv, 2, 2, 896, 1280},
    };
    return configs;
}

const TileConfig& builtin_config(std::string_view name) {
    for (const TileConfig& c : builtin_configs())
        if (c.name == name) return c;
    throw ConfigError("unknown tiling configuration '" + std::string(name) +
                      "' (expected one of the nine builtin names, e.g. \"0.9/v\")");
}

TileGrid compute_grid(const TileConfig& config) {
    validate(config);
    TileGrid grid;
    grid.config = config;

    const std::vector<int> ox = axis_origins(config.total_w, config.tile_w,
                                             config.tiles_x);
    const std::vector<int> oy = axis_origins(config.total_h, config.tile_h,
                                             config.tiles_y);
    for (std::size_t i = 0; i + 1 < ox.size(); ++i)
        if (ox[i + 1] >= ox[i] + config.tile_w)
            throw InsufficientCoverageError("config '" + config.name +
                                            "': x tiles do not overlap");
    for (std::size_t i = 0; i + 1 < oy.size(); ++i)
        if (oy[i + 1] >= oy[i] + config.tile_h)
            throw InsufficientCoverageError("config '" + config.name +
                                            "': y tiles do not overlap");

    grid.placements.reserve(static_cast<std::size_t>(config.tile_count()));
    int index = 0;
    for (int ty = 0; ty < config.tiles_y; ++ty)
        for (int tx = 0; tx < config.tiles_x; ++tx)
            grid.placements.push_back({index++, ox[static_cast<std::size_t>(tx)],
                                       oy[static_cast<std::size_t>(ty)]});
    grid.seams_x = axis_seams(ox, config.tile_w);
    grid.seams_y = axis_seams(oy, config.tile_h);
    return grid;
}

std::vector<IndexedLabelImage> split_image(const IndexedLabelImage& img,
                                           const TileGrid& grid) {
    SchemaPtr schema = img.schema_ptr();
    return split_any(img, grid, [&schema](int w, int h) {
        return IndexedLabelImage(w, h, schema);
    });
}

std::vector<ScanImage> split_image(const ScanImage& img, const TileGrid& grid) {
    return split_any(img, grid, [](int w, int h) { return ScanImage(w, h); });
}

IndexedLabelImage stitch_tiles(const std::vector<IndexedLabelImage>& tiles,
                               const TileGrid& grid) {
    const TileConfig& c = grid.config;
    if (tiles.size() != grid.placements.size())
        throw TileCountMismatchError(
            "config '" + c.name + "' expects " +
            std::to_string(grid.placements.size()) + " tiles, got " +
            std::to_string(tiles.size()));
    for (std::size_t i = 0; i < tiles.size(); ++i) {
        if (tiles[i].width() != c.tile_w || tiles[i].height() != c.tile_h)
            throw DimensionMismatchError(
                "tile " + std::to_string(i) + " is " +
                std::to_string(tiles[i].width()) + "x" +
                std::to_string(tiles[i].height()) + ", config '" + c.name +
                "' expects " + std::to_string(c.tile_w) + "x" +
                std::to_string(c.tile_h));
        if (!(tiles[i].schema() == tiles[0].schema()))
            throw SchemaMismatchError("tile " + std::to_string(i) +
                                      " uses a different schema");
    }

    const std::vector<Owned> own_x = owned_ranges(grid.seams_x, c.total_w);
    const std::vector<Owned> own_y = owned_ranges(grid.seams_y, c.total_h);

    IndexedLabelImage out(c.total_w, c.total_h, tiles[0].schema_ptr());
    for (int ty = 0; ty < c.tiles_y; ++ty) {
        for (int tx = 0; tx < c.tiles_x; ++tx) {
            const std::size_t k =
                static_cast<std::size_t>(ty) * c.tiles_x + tx;
            const TilePlacement& p = grid.placements[k];
            const Owned rx = own_x[static_cast<std::size_t>(tx)];
            const Owned ry = own_y[static_cast<std::size_t>(ty)];
            copy_rect(tiles[k], rx.start - p.x0, ry.start - p.y0, out, rx.start,
                      ry.start, rx.end - rx.start, ry.end - ry.start);
        }
    }
    return out;
}

Resolution plan_budget(std::int64_t max_pixels, double aspect, double tolerance) {
    if (max_pixels < 64 * 64)
        throw NoFeasibleResolutionError(
            "budget " + std::to_string(max_pixels) +
            " is below the smallest 64x64 resolution");
    if (tolerance < 0.0) throw InvalidArgumentError("tolerance must be >= 0");

    Resolution best{0, 0};
    std::int64_t best_area = -1;
    double best_dist = 0.0;
    for (std::int64_t w = 64; w * 64 <= max_pixels; w += 64) {
        for (std::int64_t h = 64; w * h <= max_pixels; h += 64) {
            const double dist =
                std::abs(static_cast<double>(h) / static_cast<double>(w) - aspect);
            if (dist > tolerance) continue;
            const std::int64_t area = w * h;
            if (area > best_area || (area == best_area && dist < best_dist) ||
                (area == best_area && dist == best_dist && w < best.width)) {
                best = {static_cast<int>(w), static_cast<int>(h)};
                best_area = area;
                best_dist = dist;
            }
        }
    }
    if (best_area < 0)
        throw NoFeasibleResolutionError(
            "no multiple-of-64 resolution within aspect " + std::to_string(aspect) +
            " +/- " + std::to_string(tolerance) + " fits budget " +
            std::to_string(max_pixels));
    return best;
}

} // namespace pageseg
