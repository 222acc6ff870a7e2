#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "pageseg/errors.hpp"
#include "pageseg/image.hpp"
#include "pageseg/raster_io.hpp"
#include "pageseg/schema.hpp"

#include "test_util.hpp"

#include <fstream>

using namespace pageseg;
using pageseg::test::TempDir;

TEST_CASE("builtin schemas follow the task class structure") {
    auto blk = builtin_schema(SegTask::blk);
    REQUIRE(blk->class_count() == 3);
    CHECK(blk->class_at(0).name == "BACKGROUND");
    CHECK(blk->class_at(1).name == "TXT");
    CHECK(blk->class_at(2).name == "TAB");

    auto blkx = builtin_schema(SegTask::blkx);
    REQUIRE(blkx->class_count() == 4);
    CHECK(blkx->class_at(3).name == "ILLUSTRATION");

    auto sep = builtin_schema(SegTask::sep);
    REQUIRE(sep->class_count() == 4);
    CHECK(sep->class_at(1).name == "H");
    CHECK(sep->class_at(2).name == "V");
    CHECK(sep->class_at(3).name == "T");
    CHECK(sep->class_at(1).scale_weight == 4.0);
    CHECK(sep->class_at(2).scale_weight == 4.0);
    CHECK(sep->class_at(3).scale_weight == 4.0);
    CHECK(sep->class_at(0).scale_weight == 1.0);

    for (auto task : {SegTask::blk, SegTask::blkx, SegTask::sep}) {
        auto s = builtin_schema(task);
        CHECK(s->class_at(0).name == "BACKGROUND");
        for (std::size_t i = 0; i < s->class_count(); ++i)
            for (std::size_t j = i + 1; j < s->class_count(); ++j)
                CHECK(s->class_at(i).color != s->class_at(j).color);
    }
}

TEST_CASE("schema constructor rejections") {
    auto classes = builtin_schema(SegTask::blk)->classes();

    SUBCASE("duplicate colors") {
        classes[2].color = classes[1].color;
        CHECK_THROWS_AS(LabelSchema(SegTask::blk, classes), ConfigError);
    }
    SUBCASE("non-positive weight") {
        classes[1].scale_weight = 0.0;
        CHECK_THROWS_AS(LabelSchema(SegTask::blk, classes), ConfigError);
    }
    SUBCASE("wrong class names") {
        classes[1].name = "TEXT";
        CHECK_THROWS_AS(LabelSchema(SegTask::blk, classes), ConfigError);
    }
    SUBCASE("wrong class count") {
        classes.pop_back();
        CHECK_THROWS_AS(LabelSchema(SegTask::blk, classes), ConfigError);
    }
}

TEST_CASE("schema config file round trip and overrides") {
    TempDir dir;
    const auto path = dir.path / "sep.cfg";

    {
        std::ofstream out(path);
        out << "task = sep\n"
            << "class = V 10,20,30 8.0\n";
    }
    auto schema = load_schema(path);
    CHECK(schema->task() == SegTask::sep);
    CHECK(schema->class_at(2).color == Rgb{10, 20, 30});
    CHECK(schema->class_at(2).scale_weight == 8.0);
    CHECK(schema->class_at(1).color == Rgb{255, 0, 0}); // untouched default

    const auto copy = dir.path / "copy.cfg";
    save_schema(*schema, copy);
    auto reloaded = load_schema(copy);
    CHECK(*reloaded == *schema);

    {
        std::ofstream out(path);
        out << "task = sep\nclass = TXT 1,2,3 1.0\n"; // TXT is not a sep class
    }
    CHECK_THROWS_AS(load_schema(path), ConfigError);
}

TEST_CASE("image constructors enforce invariants") {
    auto schema = builtin_schema(SegTask::blk);
    CHECK_THROWS_AS(IndexedLabelImage(0, 5, schema), InvalidArgumentError);
    CHECK_THROWS_AS(IndexedLabelImage(5, 0, schema), InvalidArgumentError);
    CHECK_THROWS_AS(ScanImage(0, 1), InvalidArgumentError);
    CHECK_THROWS_AS(IndexedLabelImage(2, 2, schema, 7), InvalidArgumentError);

    IndexedLabelImage img(2, 2, schema);
    CHECK_THROWS_AS(img.set(0, 0, 3), InvalidArgumentError);
    CHECK_THROWS_AS(img.set(2, 0, 1), InvalidArgumentError);
    img.set(1, 1, 2);
    CHECK(img.at(1, 1) == 2);
}

TEST_CASE("rgb_to_indexed maps colors exactly") {
    auto schema = builtin_schema(SegTask::blk);

    SUBCASE("all-white raster becomes all-background") {
        RgbImage rgb(4, 3);
        auto img = rgb_to_indexed(rgb, schema);
        for (auto v : img.labels()) CHECK(v == 0);
    }

    SUBCASE("blk class order: TXT then TAB") {
        RgbImage rgb(2, 1);
        rgb.set(0, 0, schema->class_at(1).color);
        rgb.set(1, 0, schema->class_at(2).color);
        auto img = rgb_to_indexed(rgb, schema);
        CHECK(img.at(0, 0) == 1);
        CHECK(img.at(1, 0) == 2);
    }

    SUBCASE("off-palette pixel names the coordinate") {
        RgbImage rgb(3, 2);
        rgb.set(2, 1, Rgb{7, 7, 7});
        try {
            rgb_to_indexed(rgb, schema);
            FAIL("expected UnknownColorError");
        } catch (const UnknownColorError& e) {
            const std::string msg = e.what();
            CHECK(msg.find("(2,1)") != std::string::npos);
            CHECK(msg.find("7,7,7") != std::string::npos);
        }
    }

    SUBCASE("mask policy drops annotations on black scan pixels") {
        RgbImage rgb(2, 1);
        rgb.set(0, 0, schema->class_at(2).color);
        rgb.set(1, 0, schema->class_at(2).color);
        ScanImage mask(2, 1, 255);
        mask.set(0, 0, 0); // ink

        auto dropped = rgb_to_indexed(rgb, schema, &mask, MaskPolicy::ignore_on_black);
        CHECK(dropped.at(0, 0) == 0);
        CHECK(dropped.at(1, 0) == 2);

        auto kept = rgb_to_indexed(rgb, schema, &mask, MaskPolicy::none);
        CHECK(kept.at(0, 0) == 2);
    }

    SUBCASE("mask dimensions must match") {
        RgbImage rgb(2, 1);
        ScanImage mask(3, 1);
        CHECK_THROWS_AS(rgb_to_indexed(rgb, schema, &mask, MaskPolicy::ignore_on_black),
                        DimensionMismatchError);
    }
}

TEST_CASE("indexed raster round trip") {
    TempDir dir;
    auto schema = builtin_schema(SegTask::sep);

    SUBCASE("single background pixel") {
        IndexedLabelImage img(1, 1, schema);
        const auto path = dir.path / "one.png";
        save_indexed(img, path);
        auto back = load_indexed(path, schema);
        CHECK(back.width() == 1);
        CHECK(back.height() == 1);
        CHECK(back.at(0, 0) == 0);
    }

    SUBCASE("random 64x64 images round trip pixel-identically") {
        for (std::uint64_t seed : {1ull, 2ull, 3ull}) {
            auto img = pageseg::test::random_labels(64, 64, schema, seed);
            const auto path = dir.path / "rt.png";
            save_indexed(img, path);
            auto back = load_indexed(path, schema);
            REQUIRE(back.same_dimensions(img));
            CHECK(std::equal(img.labels().begin(), img.labels().end(),
                             back.labels().begin()));
        }
    }

    SUBCASE("checkerboard round trip") {
        auto blk = builtin_schema(SegTask::blk);
        IndexedLabelImage img(8, 8, blk);
        for (int y = 0; y < 8; ++y)
            for (int x = 0; x < 8; ++x)
                img.set(x, y, static_cast<std::uint8_t>((x + y) % 3));
        const auto path = dir.path / "cb.png";
        save_indexed(img, path);
        auto back = load_indexed(path, blk);
        CHECK(std::equal(img.labels().begin(), img.labels().end(),
                         back.labels().begin()));
    }

    SUBCASE("two consecutive saves are byte-identical") {
        auto img = pageseg::test::random_labels(32, 48, schema, 9);
        const auto a = dir.path / "a.png";
        const auto b = dir.path / "b.png";
        save_indexed(img, a);
        save_indexed(img, b);
        std::ifstream fa(a, std::ios::binary), fb(b, std::ios::binary);
        const std::string ba((std::istreambuf_iterator<char>(fa)), {});
        const std::string bb((std::istreambuf_iterator<char>(fb)), {});
        CHECK(ba == bb);
        CHECK(!ba.empty());
    }
}

TEST_CASE("indexed loading rejects bad inputs") {
    TempDir dir;
    auto sep = builtin_schema(SegTask::sep);
    auto blk = builtin_schema(SegTask::blk);

    SUBCASE("palette color outside the schema") {
        // blk TAB orange is not a sep color
        IndexedLabelImage img(2, 2, blk, 2);
        const auto path = dir.path / "orange.png";
        save_indexed(img, path);
        CHECK_THROWS_AS(load_indexed(path, sep), UnknownColorError);
    }

    SUBCASE("white-only file loads under either schema") {
        IndexedLabelImage img(2, 2, blk, 0);
        const auto path = dir.path / "white.png";
        save_indexed(img, path);
        auto back = load_indexed(path, sep);
        for (auto v : back.labels()) CHECK(v == 0);
    }

    SUBCASE("non-palette PNG is rejected as corrupt") {
        RgbImage rgb(2, 2);
        const auto path = dir.path / "rgb.png";
        save_rgb(rgb, path);
        CHECK_THROWS_AS(load_indexed(path, sep), CorruptFileError);
    }

    SUBCASE("non-PNG bytes are rejected") {
        const auto path = dir.path / "junk.png";
        std::ofstream(path) << "not a png";
        CHECK_THROWS_AS(load_indexed(path, sep), CorruptFileError);
    }

    SUBCASE("missing file") {
        CHECK_THROWS_AS(load_indexed(dir.path / "nope.png", sep), IoError);
    }
}

TEST_CASE("grayscale raster round trip") {
    TempDir dir;
    auto img = pageseg::test::random_gray(40, 25, 4);
    const auto path = dir.path / "gray.png";
    save_gray(img, path);
    auto back = load_gray(path);
    REQUIRE(back.width() == img.width());
    REQUIRE(back.height() == img.height());
    CHECK(std::equal(img.pixels().begin(), img.pixels().end(),
                     back.pixels().begin()));

    // an RGB file is not a scan
    RgbImage rgb(2, 2);
    save_rgb(rgb, dir.path / "rgb.png");
    CHECK_THROWS_AS(load_gray(dir.path / "rgb.png"), CorruptFileError);
}

TEST_CASE("rgb raster round trip") {
    TempDir dir;
    RgbImage rgb(5, 4);
    SplitMix64 rng(11);
    for (int y = 0; y < 4; ++y)
        for (int x = 0; x < 5; ++x)
            rgb.set(x, y,
                    Rgb{static_cast<std::uint8_t>(rng.next_below(256)),
                        static_cast<std::uint8_t>(rng.next_below(256)),
                        static_cast<std::uint8_t>(rng.next_below(256))});
    const auto path = dir.path / "rgb.png";
    save_rgb(rgb, path);
    auto back = load_rgb(path);
    CHECK(std::equal(rgb.bytes().begin(), rgb.bytes().end(),
                     back.bytes().begin()));

    // palette files load as RGB too (ingest convenience)
    auto schema = builtin_schema(SegTask::blk);
    IndexedLabelImage labels(3, 3, schema, 1);
    save_indexed(labels, dir.path / "labels.png");
    auto as_rgb = load_rgb(dir.path / "labels.png");
    CHECK(as_rgb.at(0, 0) == schema->class_at(1).color);
}
