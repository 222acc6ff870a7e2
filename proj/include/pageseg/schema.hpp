#ifndef PAGESEG_SCHEMA_HPP
#define PAGESEG_SCHEMA_HPP

#include <compare>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace pageseg {

enum class SegTask { blk, blkx, sep };

std::optional<SegTask> parse_task(std::string_view name);
std::string_view task_name(SegTask task);

struct Rgb {
    std::uint8_t r = 0, g = 0, b = 0;
    auto operator<=>(const Rgb&) const = default;
};

std::string to_string(Rgb color);

struct ClassDef {
    std::string name;
    Rgb color;
    double scale_weight = 1.0;

    bool operator==(const ClassDef&) const = default;
};

/// Class list of one segmentation task: names, palette colors and
/// per-class scaling weights. Index 0 is always BACKGROUND.
///
/// blk  = {BACKGROUND, TXT, TAB}
/// blkx = {BACKGROUND, TXT, TAB, ILLUSTRATION}
/// sep  = {BACKGROUND, H, V, T}
///
/// Palette colors and weights are configurable; the class structure is not.
class LabelSchema {
public:
    static constexpr std::size_t kBackgroundIndex = 0;

    /// Validates the class list: names must match the task's fixed class
    /// structure, colors must be pairwise distinct, weights positive.
    /// Throws ConfigError on violation.
    LabelSchema(SegTask task, std::vector<ClassDef> classes);

    SegTask task() const { return task_; }
    std::string_view task_name() const;
    std::size_t class_count() const { return classes_.size(); }
    const ClassDef& class_at(std::size_t index) const { return classes_.at(index); }
    const std::vector<ClassDef>& classes() const { return classes_; }

    std::optional<std::size_t> index_of_color(Rgb color) const;
    std::optional<std::size_t> index_of_name(std::string_view name) const;

    bool operator==(const LabelSchema& other) const {
        return task_ == other.task_ && classes_ == other.classes_;
    }

private:
    SegTask task_;
    std::vector<ClassDef> classes_;
};

using SchemaPtr = std::shared_ptr<const LabelSchema>;

/// Default schema for a task. Colors follow the ground-truth figures
/// (white background; black text; orange tables; magenta illustrations;
/// red/green/blue separators), weights 1.0 for region classes and 4.0
/// for separator classes.
SchemaPtr builtin_schema(SegTask task);
SchemaPtr builtin_schema(std::string_view task);

/// Plain-text key-value schema file:
///
///   task = sep
///   class = H 255,0,0 4.0
///   class = V 0,255,0 4.0
///   ...
///
/// BACKGROUND may be omitted; it defaults to white with weight 1.0.
/// `class` lines override color and weight of the named builtin class.
SchemaPtr load_schema(const std::filesystem::path& path);
void save_schema(const LabelSchema& schema, const std::filesystem::path& path);

} // namespace pageseg

#endif
