#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "pageseg/errors.hpp"
#include "pageseg/gt_post.hpp"

#include "oracles.hpp"
#include "test_util.hpp"

using namespace pageseg;
using namespace pageseg::test;

namespace {

void fill_rect(IndexedLabelImage& img, int x0, int y0, int x1, int y1,
               std::uint8_t value) {
    for (int y = y0; y < y1; ++y)
        for (int x = x0; x < x1; ++x) img.set(x, y, value);
}

// two 8x8 TXT squares separated by a configurable horizontal gap
IndexedLabelImage two_squares(int gap, SchemaPtr schema) {
    IndexedLabelImage img(32 + gap, 16, std::move(schema), 0);
    fill_rect(img, 2, 4, 10, 12, 1);
    fill_rect(img, 10 + gap, 4, 18 + gap, 12, 1);
    return img;
}

BlockStats stats_for(int block_id, double line_height, int x0, int y0, int x1,
                     int y1) {
    return {block_id, line_height, x0, y0, x1, y1};
}

} // namespace

TEST_CASE("closing cannot bridge gaps wider than the structuring element") {
    auto schema = builtin_schema(SegTask::blk);
    auto img = two_squares(6, schema); // gap 6 > 2*radius
    auto out = close_blocks(img, 1, 2, {}, 1.25);
    CHECK(count_components(out, 1) == 2);
}

TEST_CASE("closing merges compatible blocks across a 1-px gap") {
    auto schema = builtin_schema(SegTask::blk);
    auto img = two_squares(1, schema);
    const std::vector<BlockStats> stats = {
        stats_for(0, 12.0, 0, 0, 11, 16),
        stats_for(1, 12.0, 11, 0, 33, 16),
    };
    auto out = close_blocks(img, 1, 2, stats, 1.25);
    CHECK(count_components(out, 1) == 1);
}

TEST_CASE("incompatible line heights undo the merge exactly") {
    auto schema = builtin_schema(SegTask::blk);
    auto img = two_squares(1, schema);
    const std::vector<BlockStats> stats = {
        stats_for(0, 10.0, 0, 0, 11, 16),
        stats_for(1, 20.0, 11, 0, 33, 16), // ratio 2.0 > 1.25
    };
    auto out = close_blocks(img, 1, 2, stats, 1.25);
    CHECK(count_components(out, 1) == 2);
    // undo restores the pre-closing mask: output equals input
    CHECK(std::equal(img.labels().begin(), img.labels().end(),
                     out.labels().begin()));
}

TEST_CASE("blocks without stats never auto-merge") {
    auto schema = builtin_schema(SegTask::blk);
    auto img = two_squares(1, schema);
    auto out = close_blocks(img, 1, 2, {}, 1.25);
    CHECK(count_components(out, 1) == 2);
}

TEST_CASE("closing solidifies a concave block without any merge decision") {
    auto schema = builtin_schema(SegTask::blk);
    IndexedLabelImage img(24, 24, schema, 0);
    // one U-shaped component with a 3-px slit down the middle
    fill_rect(img, 4, 4, 20, 20, 1);
    fill_rect(img, 10, 4, 13, 16, 0);
    REQUIRE(count_components(img, 1) == 1);

    auto out = close_blocks(img, 1, 2, {}, 1.25);
    CHECK(count_components(out, 1) == 1);
    CHECK(out.at(11, 10) == 1); // slit filled solid
}

TEST_CASE("dotted strokes merge into a solid block when stats agree") {
    auto schema = builtin_schema(SegTask::blk);
    IndexedLabelImage img(20, 20, schema, 0);
    for (int x = 4; x < 16; x += 2) {
        img.set(x, 4, 1);
        img.set(x, 14, 1);
    }
    for (int y = 4; y < 16; y += 2) {
        img.set(4, y, 1);
        img.set(15, y, 1);
    }
    // one stats box covering the whole outline: all dots share its height
    const std::vector<BlockStats> stats = {stats_for(0, 12.0, 0, 0, 20, 20)};
    auto out = close_blocks(img, 1, 2, stats, 1.25);
    CHECK(count_components(out, 1) == 1);
    CHECK(out.at(5, 4) == 1); // gap between neighboring dots is filled
}

TEST_CASE("closing never removes class pixels and leaves other classes alone") {
    auto schema = builtin_schema(SegTask::blk);
    auto img = two_squares(1, schema);
    img.set(10, 8, 2); // a TAB pixel inside the gap
    const std::vector<BlockStats> stats = {
        stats_for(0, 12.0, 0, 0, 11, 16),
        stats_for(1, 12.0, 11, 0, 33, 16),
    };
    auto out = close_blocks(img, 1, 2, stats, 1.25);
    for (std::size_t i = 0; i < img.labels().size(); ++i) {
        if (img.labels()[i] == 1) CHECK(out.labels()[i] == 1);
        if (img.labels()[i] == 2) CHECK(out.labels()[i] == 2);
    }
}

TEST_CASE("closing is idempotent") {
    auto schema = builtin_schema(SegTask::blk);
    const std::vector<BlockStats> merge_stats = {
        stats_for(0, 12.0, 0, 0, 11, 16),
        stats_for(1, 12.0, 11, 0, 33, 16),
    };
    const std::vector<BlockStats> undo_stats = {
        stats_for(0, 10.0, 0, 0, 11, 16),
        stats_for(1, 20.0, 11, 0, 33, 16),
    };
    for (const auto& stats : {merge_stats, undo_stats}) {
        auto img = two_squares(1, schema);
        auto once = close_blocks(img, 1, 2, stats, 1.25);
        auto twice = close_blocks(once, 1, 2, stats, 1.25);
        CHECK(std::equal(once.labels().begin(), once.labels().end(),
                         twice.labels().begin()));
    }
}

TEST_CASE("close_blocks rejects non-region classes") {
    auto blk = builtin_schema(SegTask::blk);
    IndexedLabelImage img(8, 8, blk);
    CHECK_THROWS_AS(close_blocks(img, 0, 2, {}, 1.25), NotARegionClassError);

    auto sep = builtin_schema(SegTask::sep);
    IndexedLabelImage sep_img(8, 8, sep);
    CHECK_THROWS_AS(close_blocks(sep_img, 1, 2, {}, 1.25), NotARegionClassError);
    CHECK_THROWS_AS(close_blocks(img, 1, 0, {}, 1.25), InvalidArgumentError);
}

TEST_CASE("broken vertical separator is reconnected within the gap limit") {
    auto schema = builtin_schema(SegTask::sep);
    IndexedLabelImage img(16, 40, schema, 0);
    for (int y = 5; y < 18; ++y) img.set(8, y, 2);  // V, upper part
    for (int y = 21; y < 35; ++y) img.set(8, y, 2); // V, lower part (3-px break)
    REQUIRE(count_components(img, 2) == 2);

    auto out = reconnect_separators(img, 2, 10.0, 10.0);
    CHECK(count_components(out, 2) == 1);
}

TEST_CASE("breaks above the gap limit stay broken") {
    auto schema = builtin_schema(SegTask::sep);
    IndexedLabelImage img(16, 60, schema, 0);
    for (int y = 0; y < 15; ++y) img.set(8, y, 2);
    for (int y = 35; y < 50; ++y) img.set(8, y, 2); // 20-px break
    auto out = reconnect_separators(img, 2, 10.0, 10.0);
    CHECK(count_components(out, 2) == 2);
    CHECK(std::equal(img.labels().begin(), img.labels().end(),
                     out.labels().begin()));
}

TEST_CASE("perpendicular segments are not bridged") {
    auto schema = builtin_schema(SegTask::sep);
    IndexedLabelImage img(40, 40, schema, 0);
    for (int x = 5; x < 20; ++x) img.set(x, 20, 2);  // horizontal run
    for (int y = 24; y < 39; ++y) img.set(22, y, 2); // vertical run, 3-5 px away
    REQUIRE(count_components(img, 2) == 2);
    auto out = reconnect_separators(img, 2, 10.0, 10.0);
    CHECK(count_components(out, 2) == 2);
}

TEST_CASE("reconnect only adds pixels of the processed class") {
    auto schema = builtin_schema(SegTask::sep);
    IndexedLabelImage img(16, 40, schema, 0);
    for (int y = 5; y < 18; ++y) img.set(8, y, 2);
    for (int y = 21; y < 35; ++y) img.set(8, y, 2);
    img.set(8, 19, 1); // an H pixel sitting inside the bridge path

    auto out = reconnect_separators(img, 2, 10.0, 10.0);
    CHECK(out.at(8, 19) == 1); // untouched
    for (std::size_t i = 0; i < img.labels().size(); ++i) {
        if (img.labels()[i] != 0) CHECK(out.labels()[i] == img.labels()[i]);
        if (out.labels()[i] != img.labels()[i]) CHECK(out.labels()[i] == 2);
    }
}

TEST_CASE("reconnect is idempotent on the bridged result") {
    auto schema = builtin_schema(SegTask::sep);
    IndexedLabelImage img(16, 40, schema, 0);
    for (int y = 5; y < 18; ++y) img.set(8, y, 2);
    for (int y = 21; y < 35; ++y) img.set(8, y, 2);
    auto once = reconnect_separators(img, 2, 10.0, 10.0);
    auto twice = reconnect_separators(once, 2, 10.0, 10.0);
    CHECK(std::equal(once.labels().begin(), once.labels().end(),
                     twice.labels().begin()));
}

TEST_CASE("reconnect rejects non-separator classes") {
    auto sep = builtin_schema(SegTask::sep);
    IndexedLabelImage img(8, 8, sep);
    CHECK_THROWS_AS(reconnect_separators(img, 0, 5.0, 10.0),
                    NotASeparatorClassError);
    auto blk = builtin_schema(SegTask::blk);
    IndexedLabelImage blk_img(8, 8, blk);
    CHECK_THROWS_AS(reconnect_separators(blk_img, 1, 5.0, 10.0),
                    NotASeparatorClassError);
}

TEST_CASE("connected components API agrees with the flood-fill oracle") {
    auto schema = builtin_schema(SegTask::sep);
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        auto img = random_labels(24, 24, schema, seed);
        const ComponentMap cm = connected_components(img, 2);
        CHECK(cm.count == count_components(img, 2));
        for (int y = 0; y < 24; ++y)
            for (int x = 0; x < 24; ++x) {
                const bool in_mask = img.at(x, y) == 2;
                const bool labeled =
                    cm.label[static_cast<std::size_t>(y) * 24 + x] >= 0;
                CHECK(in_mask == labeled);
            }
    }
}

TEST_CASE("block stats sidecar round trips") {
    TempDir dir;
    std::map<std::string, std::vector<BlockStats>> stats;
    stats["p001"] = {stats_for(0, 11.5, 0, 0, 10, 10),
                     stats_for(1, 13.0, 20, 0, 40, 12)};
    stats["p002"] = {stats_for(0, 9.0, 5, 5, 25, 30)};
    const auto path = dir.path / "stats.tsv";
    save_block_stats(stats, path);
    const auto back = load_block_stats(path);
    REQUIRE(back.size() == 2);
    REQUIRE(back.at("p001").size() == 2);
    CHECK(back.at("p001")[1].line_height_px == 13.0);
    CHECK(back.at("p002")[0].x1 == 25);

    std::ofstream(path) << "block p 1 0 0 0 4 4\n"; // non-positive height
    CHECK_THROWS_AS(load_block_stats(path), CorruptFileError);
}
