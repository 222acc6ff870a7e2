#include "pageseg/schema.hpp"

#include "pageseg/errors.hpp"

#include <algorithm>
#include <array>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

namespace pageseg {

namespace {

const std::vector<std::string>& class_names_for(SegTask task) {
    static const std::vector<std::string> blk = {"BACKGROUND", "TXT", "TAB"};
    static const std::vector<std::string> blkx = {"BACKGROUND", "TXT", "TAB",
                                                  "ILLUSTRATION"};
    static const std::vector<std::string> sep = {"BACKGROUND", "H", "V", "T"};
    switch (task) {
    case SegTask::blk: return blk;
    case SegTask::blkx: return blkx;
    case SegTask::sep: return sep;
    }
    throw ConfigError("unknown task");
}

std::vector<ClassDef> default_classes(SegTask task) {
    const Rgb white{255, 255, 255};
    const Rgb black{0, 0, 0};
    const Rgb orange{255, 165, 0};
    const Rgb magenta{255, 0, 255};
    const Rgb red{255, 0, 0};
    const Rgb green{0, 255, 0};
    const Rgb blue{0, 0, 255};
    switch (task) {
    case SegTask::blk:
        return {{"BACKGROUND", white, 1.0}, {"TXT", black, 1.0}, {"TAB", orange, 1.0}};
    case SegTask::blkx:
        return {{"BACKGROUND", white, 1.0},
                {"TXT", black, 1.0},
                {"TAB", orange, 1.0},
                {"ILLUSTRATION", magenta, 1.0}};
    case SegTask::sep:
        return {{"BACKGROUND", white, 1.0},
                {"H", red, 4.0},
                {"V", green, 4.0},
                {"T", blue, 4.0}};
    }
    throw ConfigError("unknown task");
}

std::string trim(std::string_view s) {
    auto begin = s.find_first_not_of(" \t\r\n");
    if (begin == std::string_view::npos) return {};
    auto end = s.find_last_not_of(" \t\r\n");
    return std::string(s.substr(begin, end - begin + 1));
}

} // namespace

std::optional<SegTask> parse_task(std::string_view name) {
    if (name == "blk") return SegTask::blk;
    if (name == "blkx") return SegTask::blkx;
    if (name == "sep") return SegTask::sep;
    return std::nullopt;
}

std::string_view task_name(SegTask task) {
    switch (task) {
    case SegTask::blk: return "blk";
    case SegTask::blkx: return "blkx";
    case SegTask::sep: return "sep";
    }
    return "?";
}

std::string to_string(Rgb color) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "%u,%u,%u", color.r, color.g, color.b);
    return buf;
}

LabelSchema::LabelSchema(SegTask task, std::vector<ClassDef> classes)
    : task_(task), classes_(std::move(classes)) {
    const auto& expected = class_names_for(task);
    if (classes_.size() != expected.size())
        throw ConfigError("task '" + std::string(pageseg::task_name(task)) +
                          "' requires " + std::to_string(expected.size()) +
                          " classes, got " + std::to_string(classes_.size()));
    for (std::size_t i = 0; i < classes_.size(); ++i) {
        if (classes_[i].name != expected[i])
            throw ConfigError("class " + std::to_string(i) + " of task '" +
                              std::string(pageseg::task_name(task)) + "' must be '" +
                              expected[i] + "', got '" + classes_[i].name + "'");
        if (!(classes_[i].scale_weight > 0.0))
            throw ConfigError("class '" + classes_[i].name +
                              "' has non-positive scale weight");
        for (std::size_t j = 0; j < i; ++j)
            if (classes_[j].color == classes_[i].color)
                throw ConfigError("classes '" + classes_[j].name + "' and '" +
                                  classes_[i].name + "' share palette color " +
                                  to_string(classes_[i].color));
    }
}

std::string_view LabelSchema::task_name() const { return pageseg::task_name(task_); }

std::optional<std::size_t> LabelSchema::index_of_color(Rgb color) const {
    for (std::size_t i = 0; i < classes_.size(); ++i)
        if (classes_[i].color == color) return i;
    return std::nullopt;
}

std::optional<std::size_t> LabelSchema::index_of_name(std::string_view name) const {
    for (std::size_t i = 0; i < classes_.size(); ++i)
        if (classes_[i].name == name) return i;
    return std::nullopt;
}

SchemaPtr builtin_schema(SegTask task) {
    return std::make_shared<const LabelSchema>(task, default_classes(task));
}

SchemaPtr builtin_schema(std::string_view task) {
    auto parsed = parse_task(task);
    if (!parsed) throw ConfigError("unknown task '" + std::string(task) + "'");
    return builtin_schema(*parsed);
}

SchemaPtr load_schema(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open schema file " + path.string());

    std::optional<SegTask> task;
    struct Override {
        Rgb color;
        double weight;
    };
    std::map<std::string, Override> overrides;

    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        std::string text = trim(line);
        if (text.empty() || text[0] == '#') continue;
        auto eq = text.find('=');
        if (eq == std::string::npos)
            throw ConfigError(path.string() + ":" + std::to_string(line_no) +
                              ": expected 'key = value'");
        std::string key = trim(text.substr(0, eq));
        std::string value = trim(text.substr(eq + 1));
        if (key == "task") {
            task = parse_task(value);
            if (!task)
                throw ConfigError(path.string() + ":" + std::to_string(line_no) +
                                  ": unknown task '" + value + "'");
        } else if (key == "class") {
            std::istringstream fields(value);
            std::string name, color_text;
            double weight = 0.0;
            unsigned r, g, b;
            char c1, c2;
            if (!(fields >> name >> color_text >> weight))
                throw ConfigError(path.string() + ":" + std::to_string(line_no) +
                                  ": expected 'class = NAME r,g,b WEIGHT'");
            std::istringstream colors(color_text);
            if (!(colors >> r >> c1 >> g >> c2 >> b) || c1 != ',' || c2 != ',' ||
                r > 255 || g > 255 || b > 255)
                throw ConfigError(path.string() + ":" + std::to_string(line_no) +
                                  ": bad color '" + color_text + "'");
            overrides[name] = {Rgb{static_cast<std::uint8_t>(r),
                                   static_cast<std::uint8_t>(g),
                                   static_cast<std::uint8_t>(b)},
                               weight};
        } else {
            throw ConfigError(path.string() + ":" + std::to_string(line_no) +
                              ": unknown key '" + key + "'");
        }
    }
    if (!task) throw ConfigError(path.string() + ": missing 'task = ...' line");

    auto classes = default_classes(*task);
    for (auto& [name, ov] : overrides) {
        auto it = std::find_if(classes.begin(), classes.end(),
                               [&](const ClassDef& c) { return c.name == name; });
        if (it == classes.end())
            throw ConfigError(path.string() + ": class '" + name +
                              "' does not belong to task '" +
                              std::string(task_name(*task)) + "'");
        it->color = ov.color;
        it->scale_weight = ov.weight;
    }
    return std::make_shared<const LabelSchema>(*task, std::move(classes));
}

void save_schema(const LabelSchema& schema, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write schema file " + path.string());
    out << "task = " << schema.task_name() << "\n";
    for (const auto& c : schema.classes()) {
        char buf[64];
        std::snprintf(buf, sizeof buf, "%g", c.scale_weight);
        out << "class = " << c.name << " " << to_string(c.color) << " " << buf << "\n";
    }
    if (!out) throw IoError("failed writing schema file " + path.string());
}

} // namespace pageseg
