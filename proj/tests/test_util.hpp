#ifndef PAGESEG_TESTS_TEST_UTIL_HPP
#define PAGESEG_TESTS_TEST_UTIL_HPP

#include "pageseg/image.hpp"
#include "pageseg/rng.hpp"
#include "pageseg/schema.hpp"

#include <filesystem>
#include <string>
#include <unistd.h>

namespace pageseg::test {

/// Self-cleaning unique directory under the system temp root.
struct TempDir {
    std::filesystem::path path;

    explicit TempDir(const std::string& tag = "pageseg") {
        static int counter = 0;
        path = std::filesystem::temp_directory_path() /
               (tag + "-" + std::to_string(::getpid()) + "-" +
                std::to_string(counter++));
        std::filesystem::create_directories(path);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;
};

inline IndexedLabelImage random_labels(int w, int h, SchemaPtr schema,
                                       std::uint64_t seed) {
    IndexedLabelImage img(w, h, schema);
    SplitMix64 rng(seed);
    const std::size_t k = img.schema().class_count();
    for (auto& v : img.labels())
        v = static_cast<std::uint8_t>(rng.next_below(k));
    return img;
}

inline ScanImage random_gray(int w, int h, std::uint64_t seed) {
    ScanImage img(w, h);
    SplitMix64 rng(seed);
    for (auto& v : img.pixels())
        v = static_cast<std::uint8_t>(rng.next_below(256));
    return img;
}

/// sep-task schema with all weights forced to 1 (for uniform-weight cases).
inline SchemaPtr uniform_sep_schema() {
    auto base = builtin_schema(SegTask::sep);
    std::vector<ClassDef> classes = base->classes();
    for (ClassDef& c : classes) c.scale_weight = 1.0;
    return std::make_shared<const LabelSchema>(SegTask::sep, std::move(classes));
}

/// Synthetic ground-truth page: region classes become random rectangles,
/// separator classes become thin lines, and the scan shows dark ink under
/// every labeled pixel.
inline std::pair<ScanImage, IndexedLabelImage> synthetic_page(
    int w, int h, SchemaPtr schema, std::uint64_t seed) {
    IndexedLabelImage labels(w, h, schema);
    SplitMix64 rng(seed);
    const LabelSchema& s = labels.schema();
    for (std::size_t c = 1; c < s.class_count(); ++c) {
        const std::string& name = s.class_at(c).name;
        const bool horizontal_line = name == "H";
        const bool vertical_line = name == "V" || name == "T";
        const int shapes = 2 + static_cast<int>(rng.next_below(3));
        for (int i = 0; i < shapes; ++i) {
            if (horizontal_line) {
                const int y = static_cast<int>(rng.next_below(h - 2));
                const int x0 = static_cast<int>(rng.next_below(w / 2));
                const int x1 = x0 + w / 4 + static_cast<int>(rng.next_below(w / 4));
                for (int x = x0; x < std::min(x1, w); ++x) {
                    labels.set(x, y, static_cast<std::uint8_t>(c));
                    labels.set(x, y + 1, static_cast<std::uint8_t>(c));
                }
            } else if (vertical_line) {
                const int x = static_cast<int>(rng.next_below(w - 2));
                const int y0 = static_cast<int>(rng.next_below(h / 2));
                const int y1 = y0 + h / 4 + static_cast<int>(rng.next_below(h / 4));
                for (int y = y0; y < std::min(y1, h); ++y) {
                    labels.set(x, y, static_cast<std::uint8_t>(c));
                    labels.set(x + 1, y, static_cast<std::uint8_t>(c));
                }
            } else {
                const int bw = w / 6 + static_cast<int>(rng.next_below(w / 4));
                const int bh = h / 8 + static_cast<int>(rng.next_below(h / 4));
                const int x0 = static_cast<int>(rng.next_below(w - bw));
                const int y0 = static_cast<int>(rng.next_below(h - bh));
                for (int y = y0; y < y0 + bh; ++y)
                    for (int x = x0; x < x0 + bw; ++x)
                        labels.set(x, y, static_cast<std::uint8_t>(c));
            }
        }
    }
    ScanImage scan(w, h, 255);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            if (labels.at(x, y) != 0)
                scan.set(x, y,
                         static_cast<std::uint8_t>(20 + rng.next_below(40)));
    return {std::move(scan), std::move(labels)};
}

} // namespace pageseg::test

#endif
