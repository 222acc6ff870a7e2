// pageseg — command-line front end for the page-segmentation toolkit:
// ground-truth ingestion and cleanup, label-preserving scaling, warp
// augmentation, overlap tiling, evaluation and the experiment harness.

#include "pageseg/errors.hpp"
#include "pageseg/gt_post.hpp"
#include "pageseg/harness.hpp"
#include "pageseg/metrics.hpp"
#include "pageseg/raster_io.hpp"
#include "pageseg/rescale.hpp"
#include "pageseg/tiling.hpp"
#include "pageseg/warp.hpp"

#include <CLI11.hpp>

#include <cmath>
#include <fstream>
#include <iostream>
#include <optional>

namespace fs = std::filesystem;
using namespace pageseg;

namespace {

constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitPredictor = 3;

/// Defaults from the optional --config file. Flags always win; the file
/// only fills in what the command line left unset.
struct CliDefaults {
    std::optional<std::string> schema;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out_dir;
};

struct CliState {
    std::string config_path;
    mutable std::optional<CliDefaults> cached;

    const CliDefaults& defaults() const {
        if (cached) return *cached;
        CliDefaults d;
        if (!config_path.empty()) {
            std::ifstream in(config_path);
            if (!in) throw IoError("cannot open config file " + config_path);
            std::string line;
            int line_no = 0;
            while (std::getline(in, line)) {
                ++line_no;
                const auto begin = line.find_first_not_of(" \t");
                if (begin == std::string::npos || line[begin] == '#') continue;
                const auto eq = line.find('=');
                if (eq == std::string::npos)
                    throw ConfigError(config_path + ":" + std::to_string(line_no) +
                                      ": expected 'key = value'");
                auto strip = [](std::string s) {
                    const auto b = s.find_first_not_of(" \t");
                    const auto e = s.find_last_not_of(" \t\r");
                    return b == std::string::npos ? std::string()
                                                  : s.substr(b, e - b + 1);
                };
                const std::string key = strip(line.substr(0, eq));
                const std::string value = strip(line.substr(eq + 1));
                if (key == "schema")
                    d.schema = value;
                else if (key == "seed")
                    d.seed = std::strtoull(value.c_str(), nullptr, 10);
                else if (key == "out_dir")
                    d.out_dir = value;
                else
                    throw ConfigError(config_path + ":" + std::to_string(line_no) +
                                      ": unknown key '" + key + "'");
            }
        }
        cached = std::move(d);
        return *cached;
    }
};

using StatePtr = std::shared_ptr<CliState>;

struct SchemaFlags {
    StatePtr state;
    std::string task;
    std::string schema_file;

    void add_to(CLI::App* cmd) {
        cmd->add_option("--task", task, "segmentation task: blk, blkx or sep");
        cmd->add_option("--schema", schema_file,
                        "schema config file (overrides --task)");
    }

    SchemaPtr resolve() const {
        if (!schema_file.empty()) return load_schema(schema_file);
        if (!task.empty()) return builtin_schema(task);
        if (state && state->defaults().schema)
            return load_schema(*state->defaults().schema);
        throw CLI::RequiredError("--task or --schema");
    }
};

/// Seed flag with config-file fallback. Randomized subcommands never fall
/// back to silent entropy: seed must come from the flag or the config file.
struct SeedFlag {
    StatePtr state;
    std::uint64_t value = 0;
    CLI::Option* option = nullptr;

    void add_to(CLI::App* cmd, const char* description = "generator seed") {
        option = cmd->add_option("--seed", value, description);
    }

    std::uint64_t resolve() const {
        if (option->count() > 0) return value;
        if (state && state->defaults().seed) return *state->defaults().seed;
        throw CLI::RequiredError("--seed");
    }
};

struct OutDirFlag {
    StatePtr state;
    std::string value;

    void add_to(CLI::App* cmd, const char* description = "output directory") {
        cmd->add_option("--out-dir", value, description);
    }

    fs::path resolve() const {
        if (!value.empty()) return value;
        if (state && state->defaults().out_dir) return *state->defaults().out_dir;
        throw CLI::RequiredError("--out-dir");
    }
};

std::vector<std::string> split_csv(const std::string& text) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (start <= text.size()) {
        const std::size_t comma = text.find(',', start);
        if (comma == std::string::npos) {
            if (start < text.size()) out.push_back(text.substr(start));
            break;
        }
        if (comma > start) out.push_back(text.substr(start, comma - start));
        start = comma + 1;
    }
    return out;
}

std::vector<PredictorCommand> load_predictor_file(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open predictor file " + path.string());
    std::vector<PredictorCommand> predictors;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line[0] == '#') continue;
        const auto tab = line.find('\t');
        if (tab == std::string::npos)
            throw ConfigError(path.string() + ":" + std::to_string(line_no) +
                              ": expected '<name>\\t<command>'");
        predictors.push_back(
            parse_predictor(line.substr(0, tab), line.substr(tab + 1)));
    }
    if (predictors.empty())
        throw ConfigError(path.string() + " defines no predictors");
    return predictors;
}

void print_report(const MetricReport& report, std::ostream& out) {
    out << "pixel_accuracy=" << format_score(report.pixel_accuracy) << "\n"
        << "mean_accuracy=" << format_score(report.mean_accuracy) << "\n"
        << "mean_iu=" << format_score(report.mean_iu) << "\n"
        << "fw_iu=" << format_score(report.fw_iu) << "\n"
        << "mcc=" << format_score(report.mcc) << "\n";
}

// ---- subcommand wiring ----------------------------------------------------

void add_ingest(CLI::App& app, const StatePtr& state) {
    auto* cmd = app.add_subcommand(
        "ingest", "convert an RGB annotation layer to an indexed label raster");
    auto schema = std::make_shared<SchemaFlags>(SchemaFlags{state, {}, {}});
    schema->add_to(cmd);
    auto rgb = std::make_shared<std::string>();
    auto mask = std::make_shared<std::string>();
    auto policy = std::make_shared<std::string>("ignore-on-black");
    auto out = std::make_shared<std::string>();
    cmd->add_option("--rgb", *rgb, "RGB annotation raster")->required();
    cmd->add_option("--mask", *mask,
                    "binarized scan; annotations on its black pixels are dropped");
    cmd->add_option("--mask-policy", *policy, "ignore-on-black (default) or none")
        ->check(CLI::IsMember({"ignore-on-black", "none"}));
    cmd->add_option("-o,--out", *out, "output label raster")->required();
    cmd->callback([=]() {
        const RgbImage rgb_img = load_rgb(*rgb);
        std::optional<ScanImage> mask_img;
        if (!mask->empty()) mask_img = load_gray(*mask);
        const MaskPolicy mp = *policy == "none" ? MaskPolicy::none
                                                : MaskPolicy::ignore_on_black;
        save_indexed(rgb_to_indexed(rgb_img, schema->resolve(),
                                    mask_img ? &*mask_img : nullptr, mp),
                     *out);
    });
}

void add_postprocess(CLI::App& app, const StatePtr& state) {
    auto* cmd = app.add_subcommand(
        "postprocess",
        "normalize manual annotations: close region blocks, reconnect separators");
    auto schema = std::make_shared<SchemaFlags>(SchemaFlags{state, {}, {}});
    schema->add_to(cmd);
    auto labels = std::make_shared<std::string>();
    auto out = std::make_shared<std::string>();
    auto radius = std::make_shared<int>(3);
    auto ratio_limit = std::make_shared<double>(1.25);
    auto stats_file = std::make_shared<std::string>();
    auto page_id = std::make_shared<std::string>();
    auto max_gap = std::make_shared<double>(0.0);
    auto angle_tol = std::make_shared<double>(10.0);
    cmd->add_option("--labels", *labels, "input label raster")->required();
    cmd->add_option("-o,--out", *out, "output label raster")->required();
    cmd->add_option("--radius", *radius, "closing radius in pixels (default 3)");
    cmd->add_option("--height-ratio-limit", *ratio_limit,
                    "max line-height ratio for block merges (default 1.25)");
    cmd->add_option("--stats", *stats_file, "block stats sidecar file");
    cmd->add_option("--page", *page_id, "page id inside the sidecar");
    cmd->add_option("--max-gap", *max_gap,
                    "separator bridge distance (default 1% of the diagonal)");
    cmd->add_option("--angle-tol", *angle_tol,
                    "max principal-direction difference in degrees (default 10)");
    cmd->callback([=]() {
        const SchemaPtr s = schema->resolve();
        IndexedLabelImage img = load_indexed(*labels, s);
        std::vector<BlockStats> stats;
        if (!stats_file->empty()) {
            auto by_page = load_block_stats(*stats_file);
            if (!page_id->empty()) {
                const auto it = by_page.find(*page_id);
                if (it != by_page.end()) stats = it->second;
            } else if (by_page.size() == 1) {
                stats = by_page.begin()->second;
            } else {
                throw ConfigError("--page required: sidecar holds " +
                                  std::to_string(by_page.size()) + " pages");
            }
        }
        const double gap = *max_gap > 0.0
                               ? *max_gap
                               : 0.01 * std::hypot(img.width(), img.height());
        for (std::size_t c = 1; c < s->class_count(); ++c) {
            if (is_region_class(*s, c))
                img = close_blocks(img, c, *radius, stats, *ratio_limit);
            else if (is_separator_class(*s, c))
                img = reconnect_separators(img, c, gap, *angle_tol);
        }
        save_indexed(img, *out);
    });
}

void add_scale(CLI::App& app, const StatePtr& state) {
    auto* cmd = app.add_subcommand(
        "scale", "downscale a label raster (weighted area) or a scan (area mean)");
    auto schema = std::make_shared<SchemaFlags>(SchemaFlags{state, {}, {}});
    schema->add_to(cmd);
    auto labels = std::make_shared<std::string>();
    auto scan = std::make_shared<std::string>();
    auto width = std::make_shared<int>();
    auto height = std::make_shared<int>();
    auto out = std::make_shared<std::string>();
    auto* lab_opt = cmd->add_option("--labels", *labels, "input label raster");
    auto* scan_opt = cmd->add_option("--scan", *scan, "input grayscale scan");
    lab_opt->excludes(scan_opt);
    cmd->add_option("--width", *width, "target width")->required();
    cmd->add_option("--height", *height, "target height")->required();
    cmd->add_option("-o,--out", *out, "output raster")->required();
    cmd->callback([=]() {
        if (!labels->empty())
            save_indexed(downscale_labels(load_indexed(*labels, schema->resolve()),
                                          *width, *height),
                         *out);
        else if (!scan->empty())
            save_gray(downscale_gray(load_gray(*scan), *width, *height), *out);
        else
            throw CLI::RequiredError("--labels or --scan");
    });
}

void add_warp(CLI::App& app, const StatePtr& state) {
    auto* cmd = app.add_subcommand(
        "warp", "seeded cubic-spline warp fields and photometric augmentation");
    cmd->require_subcommand(1);

    auto* make = cmd->add_subcommand("make", "generate a warp field sidecar");
    {
        auto width = std::make_shared<int>();
        auto height = std::make_shared<int>();
        auto cols = std::make_shared<int>(4);
        auto rows = std::make_shared<int>(4);
        auto amplitude = std::make_shared<double>(-1.0);
        auto seed = std::make_shared<SeedFlag>(SeedFlag{state, 0, nullptr});
        auto out = std::make_shared<std::string>();
        make->add_option("--width", *width, "field width in pixels")->required();
        make->add_option("--height", *height, "field height in pixels")->required();
        make->add_option("--grid-cols", *cols, "control points per row (default 4)");
        make->add_option("--grid-rows", *rows,
                         "control points per column (default 4)");
        make->add_option("--amplitude", *amplitude,
                         "max displacement in pixels (default 2% of min dimension)");
        seed->add_to(make);
        make->add_option("-o,--out", *out, "output field file")->required();
        make->callback([=]() {
            const double amp = *amplitude >= 0.0
                                   ? *amplitude
                                   : 0.02 * std::min(*width, *height);
            save_warp_field(
                make_warp_field(*width, *height, *cols, *rows, amp,
                                seed->resolve()),
                *out);
        });
    }

    auto* apply = cmd->add_subcommand("apply", "apply a warp field to a raster");
    {
        auto schema = std::make_shared<SchemaFlags>(SchemaFlags{state, {}, {}});
        schema->add_to(apply);
        auto field_path = std::make_shared<std::string>();
        auto labels = std::make_shared<std::string>();
        auto scan = std::make_shared<std::string>();
        auto out = std::make_shared<std::string>();
        apply->add_option("--field", *field_path, "warp field file")->required();
        auto* lab_opt = apply->add_option("--labels", *labels, "label raster");
        auto* scan_opt = apply->add_option("--scan", *scan, "grayscale scan");
        lab_opt->excludes(scan_opt);
        apply->add_option("-o,--out", *out, "output raster")->required();
        apply->callback([=]() {
            const WarpField field = load_warp_field(*field_path);
            if (!labels->empty())
                save_indexed(
                    apply_warp_labels(load_indexed(*labels, schema->resolve()),
                                      field),
                    *out);
            else if (!scan->empty())
                save_gray(apply_warp_gray(load_gray(*scan), field), *out);
            else
                throw CLI::RequiredError("--labels or --scan");
        });
    }

    auto* photo = cmd->add_subcommand(
        "photometric", "seeded rotation plus probabilistic contrast stretch");
    {
        auto scan = std::make_shared<std::string>();
        auto out = std::make_shared<std::string>();
        auto spec = std::make_shared<AugmentSpec>();
        auto seed = std::make_shared<SeedFlag>(SeedFlag{state, 0, nullptr});
        photo->add_option("--scan", *scan, "grayscale scan")->required();
        photo->add_option("--max-rotation", spec->max_rotation_deg,
                          "rotation bound in degrees (default 10)");
        photo->add_option("--contrast-probability", spec->contrast_probability,
                          "contrast stretch probability (default 0.9)");
        seed->add_to(photo);
        photo->add_option("-o,--out", *out, "output raster")->required();
        photo->callback([=]() {
            spec->seed = seed->resolve();
            save_gray(augment_photometric(load_gray(*scan), *spec), *out);
        });
    }
}

void add_plan_budget(CLI::App& app) {
    auto* cmd = app.add_subcommand(
        "plan-budget", "largest multiple-of-64 resolution under a pixel budget");
    auto pixels = std::make_shared<std::int64_t>();
    auto aspect = std::make_shared<double>(1.45);
    auto tolerance = std::make_shared<double>(0.15);
    cmd->add_option("--pixels", *pixels, "pixel budget")->required();
    cmd->add_option("--aspect", *aspect,
                    "target height/width ratio (default 1.45)");
    cmd->add_option("--tolerance", *tolerance,
                    "allowed aspect deviation (default 0.15)");
    cmd->callback([=]() {
        const Resolution r = plan_budget(*pixels, *aspect, *tolerance);
        std::cout << r.width << "x" << r.height << "\n";
    });
}

void add_tile(CLI::App& app, const StatePtr& state) {
    auto* cmd = app.add_subcommand(
        "tile", "split a raster into the overlapping tiles of a configuration");
    auto schema = std::make_shared<SchemaFlags>(SchemaFlags{state, {}, {}});
    schema->add_to(cmd);
    auto config_name = std::make_shared<std::string>();
    auto labels = std::make_shared<std::string>();
    auto scan = std::make_shared<std::string>();
    auto out_dir = std::make_shared<OutDirFlag>(OutDirFlag{state, {}});
    cmd->add_option("--config", *config_name,
                    "tiling configuration name, e.g. 0.9/v")
        ->required();
    auto* lab_opt = cmd->add_option("--labels", *labels, "label raster");
    auto* scan_opt = cmd->add_option("--scan", *scan, "grayscale scan");
    lab_opt->excludes(scan_opt);
    out_dir->add_to(cmd);
    cmd->callback([=]() {
        const TileGrid grid = compute_grid(builtin_config(*config_name));

        std::vector<IndexedLabelImage> label_tiles;
        std::vector<ScanImage> scan_tiles;
        if (!labels->empty())
            label_tiles =
                split_image(load_indexed(*labels, schema->resolve()), grid);
        else if (!scan->empty())
            scan_tiles = split_image(load_gray(*scan), grid);
        else
            throw CLI::RequiredError("--labels or --scan");

        const fs::path dir = out_dir->resolve();
        fs::create_directories(dir);
        std::ofstream manifest(dir / "tiles.manifest");
        manifest << "# pageseg tile manifest v1\n"
                 << "config\t" << grid.config.name << "\t" << grid.config.total_w
                 << "x" << grid.config.total_h << "\n";
        for (const TilePlacement& p : grid.placements) {
            char name[32];
            std::snprintf(name, sizeof name, "tile-%02d.png", p.index);
            const std::size_t i = static_cast<std::size_t>(p.index);
            if (!label_tiles.empty())
                save_indexed(label_tiles[i], dir / name);
            else
                save_gray(scan_tiles[i], dir / name);
            manifest << "tile\t" << p.index << "\t" << p.x0 << "\t" << p.y0 << "\t"
                     << grid.config.tile_w << "x" << grid.config.tile_h << "\t"
                     << name << "\n";
        }
        if (!manifest) throw IoError("failed writing tiles.manifest");
    });
}

void add_stitch(CLI::App& app, const StatePtr& state) {
    auto* cmd = app.add_subcommand(
        "stitch", "merge label tiles back into a full page (halfway at overlaps)");
    auto schema = std::make_shared<SchemaFlags>(SchemaFlags{state, {}, {}});
    schema->add_to(cmd);
    auto manifest_path = std::make_shared<std::string>();
    auto out = std::make_shared<std::string>();
    cmd->add_option("--manifest", *manifest_path,
                    "tiles.manifest written by the tile subcommand")
        ->required();
    cmd->add_option("-o,--out", *out, "output raster")->required();
    cmd->callback([=]() {
        std::ifstream in(*manifest_path);
        if (!in) throw IoError("cannot open " + *manifest_path);
        const fs::path base = fs::path(*manifest_path).parent_path();
        std::string line, config_name;
        std::map<int, std::string> files;
        while (std::getline(in, line)) {
            if (line.empty() || line[0] == '#') continue;
            std::istringstream fields(line);
            std::string kind;
            fields >> kind;
            if (kind == "config") {
                std::string size;
                fields >> config_name >> size;
            } else if (kind == "tile") {
                int index, x0, y0;
                std::string size, file;
                if (!(fields >> index >> x0 >> y0 >> size >> file))
                    throw CorruptFileError(*manifest_path + ": bad tile record");
                files[index] = file;
            }
        }
        if (config_name.empty())
            throw CorruptFileError(*manifest_path + ": missing config record");
        const TileGrid grid = compute_grid(builtin_config(config_name));
        const SchemaPtr s = schema->resolve();
        std::vector<IndexedLabelImage> tiles;
        for (const auto& [index, file] : files)
            tiles.push_back(load_indexed(base / file, s));
        save_indexed(stitch_tiles(tiles, grid), *out);
    });
}

void add_evaluate(CLI::App& app, const StatePtr& state) {
    auto* cmd = app.add_subcommand(
        "evaluate", "score predictions against ground truth (five metrics)");
    auto schema = std::make_shared<SchemaFlags>(SchemaFlags{state, {}, {}});
    schema->add_to(cmd);
    auto truths = std::make_shared<std::vector<std::string>>();
    auto preds = std::make_shared<std::vector<std::string>>();
    cmd->add_option("--truth", *truths, "ground-truth label raster (repeatable)")
        ->required();
    cmd->add_option("--pred", *preds, "prediction label raster (repeatable)")
        ->required();
    cmd->callback([=]() {
        if (truths->size() != preds->size())
            throw ConfigError("--truth and --pred counts differ");
        const SchemaPtr s = schema->resolve();
        ConfusionMatrix cm(s->class_count());
        for (std::size_t i = 0; i < truths->size(); ++i)
            cm.accumulate(load_indexed((*truths)[i], s),
                          load_indexed((*preds)[i], s));
        print_report(make_report(cm), std::cout);
    });
}

void add_folds(CLI::App& app, const StatePtr& state) {
    auto* cmd = app.add_subcommand(
        "folds", "assign pages to cross-validation folds (seeded shuffle)");
    auto pages_file = std::make_shared<std::string>();
    auto corpus_file = std::make_shared<std::string>();
    auto fold_count = std::make_shared<int>(5);
    auto seed = std::make_shared<SeedFlag>(SeedFlag{state, 0, nullptr});
    auto out = std::make_shared<std::string>();
    auto* pages_opt =
        cmd->add_option("--pages", *pages_file, "file with one page id per line");
    auto* corpus_opt =
        cmd->add_option("--corpus", *corpus_file, "corpus index file");
    pages_opt->excludes(corpus_opt);
    cmd->add_option("--fold-count", *fold_count, "number of folds (default 5)");
    seed->add_to(cmd, "shuffle seed");
    cmd->add_option("-o,--out", *out, "output fold plan")->required();
    cmd->callback([=]() {
        std::vector<std::string> ids;
        if (!pages_file->empty()) {
            std::ifstream in(*pages_file);
            if (!in) throw IoError("cannot open " + *pages_file);
            std::string line;
            while (std::getline(in, line))
                if (!line.empty() && line[0] != '#') ids.push_back(line);
        } else if (!corpus_file->empty()) {
            for (const CorpusEntry& e : load_corpus(*corpus_file))
                ids.push_back(e.page_id);
        } else {
            throw CLI::RequiredError("--pages or --corpus");
        }
        save_fold_plan(make_folds(ids, *fold_count, seed->resolve()), *out);
    });
}

struct WarpFlags {
    StatePtr state;
    bool enabled = false;
    std::uint64_t seed = 0;
    int grid_cols = 4;
    int grid_rows = 4;
    double amplitude_frac = 0.02;
    CLI::Option* seed_opt = nullptr;

    void add_to(CLI::App* cmd) {
        auto* warp_opt =
            cmd->add_flag("--warp", enabled, "add one warped variant per page");
        seed_opt = cmd->add_option("--warp-seed", seed, "warp generator seed");
        cmd->add_option("--warp-grid-cols", grid_cols,
                        "warp control points per row (default 4)");
        cmd->add_option("--warp-grid-rows", grid_rows,
                        "warp control points per column (default 4)");
        cmd->add_option("--warp-amplitude-frac", amplitude_frac,
                        "warp amplitude as a fraction of min(w,h) (default 0.02)");
        seed_opt->needs(warp_opt);
    }

    WarpOptions options() const {
        WarpOptions opts{enabled, seed, grid_cols, grid_rows, amplitude_frac};
        if (enabled && seed_opt->count() == 0) {
            if (state && state->defaults().seed)
                opts.seed = *state->defaults().seed;
            else
                throw CLI::RequiredError("--warp-seed");
        }
        return opts;
    }
};

void add_prepare(CLI::App& app, const StatePtr& state) {
    auto* cmd = app.add_subcommand(
        "prepare", "scale, optionally warp, and tile a corpus into a dataset");
    auto corpus = std::make_shared<std::string>();
    auto task = std::make_shared<std::string>();
    auto schema_file = std::make_shared<std::string>();
    auto config_name = std::make_shared<std::string>();
    auto folds_file = std::make_shared<std::string>();
    auto out_dir = std::make_shared<OutDirFlag>(OutDirFlag{state, {}});
    auto warp = std::make_shared<WarpFlags>();
    warp->state = state;
    cmd->add_option("--corpus", *corpus, "corpus index file")->required();
    cmd->add_option("--task", *task, "segmentation task")->required();
    cmd->add_option("--schema", *schema_file, "schema file override");
    cmd->add_option("--config", *config_name, "tiling configuration name")
        ->required();
    cmd->add_option("--folds", *folds_file, "fold plan file")->required();
    out_dir->add_to(cmd, "dataset output directory");
    warp->add_to(cmd);
    cmd->callback([=]() {
        const FoldPlan plan = load_fold_plan(*folds_file);
        std::vector<std::string> ids;
        for (const auto& [page, fold] : plan.assignment) ids.push_back(page);
        const PageLoader loader = corpus_loader(
            *corpus, schema_file->empty()
                         ? std::nullopt
                         : std::optional<fs::path>(*schema_file));
        const DatasetManifest manifest = plan_dataset(
            ids, builtin_config(*config_name), plan, *task, warp->options());
        const fs::path dir = out_dir->resolve();
        fs::create_directories(dir);
        materialize_dataset(manifest, loader(*task), dir);
        std::cout << (dir / "manifest.tsv").string() << "\n";
    });
}

void add_run(CLI::App& app, const StatePtr& state) {
    auto* cmd = app.add_subcommand(
        "run", "run one experiment: invoke a predictor and score its output");
    auto manifest_path = std::make_shared<std::string>();
    auto predictor_cmd = std::make_shared<std::string>();
    auto predictor_name = std::make_shared<std::string>("predictor");
    auto work_dir = std::make_shared<std::string>();
    auto spec = std::make_shared<ExperimentSpec>();
    auto seed = std::make_shared<SeedFlag>(SeedFlag{state, 0, nullptr});
    cmd->add_option("--manifest", *manifest_path, "dataset manifest")->required();
    cmd->add_option("--predictor", *predictor_cmd,
                    "predictor command; the request directory is appended")
        ->required();
    cmd->add_option("--predictor-name", *predictor_name, "name used in reports");
    cmd->add_option("--fold", spec->fold, "validation fold index (default 0)");
    cmd->add_option("--epochs", spec->epochs, "passed through to the predictor");
    cmd->add_option("--batch-size", spec->batch_size, "passed through");
    cmd->add_option("--learning-rate", spec->learning_rate, "passed through");
    seed->add_to(cmd, "experiment seed");
    cmd->add_flag("--per-page", spec->per_page_average,
                  "average per-page metrics instead of pooling pixels");
    cmd->add_option("--work-dir", *work_dir, "request directory parent")
        ->required();
    cmd->callback([=]() {
        const DatasetManifest manifest = load_manifest(*manifest_path);
        spec->task = manifest.task;
        spec->config_name = manifest.config_name;
        spec->predictor = parse_predictor(*predictor_name, *predictor_cmd);
        spec->seed = seed->resolve();
        fs::create_directories(*work_dir);
        print_report(run_experiment(*spec, manifest,
                                    fs::path(*manifest_path).parent_path(),
                                    *work_dir),
                     std::cout);
    });
}

void add_grid(CLI::App& app, const StatePtr& state) {
    auto* cmd = app.add_subcommand(
        "grid", "run the full task x configuration x predictor grid");
    auto corpus = std::make_shared<std::string>();
    auto schema_file = std::make_shared<std::string>();
    auto tasks_csv = std::make_shared<std::string>("blk,blkx,sep");
    auto configs_csv = std::make_shared<std::string>("all");
    auto predictor_file = std::make_shared<std::string>();
    auto out_dir = std::make_shared<OutDirFlag>(OutDirFlag{state, {}});
    auto request = std::make_shared<GridRequest>();
    auto warp = std::make_shared<WarpFlags>();
    auto seed = std::make_shared<SeedFlag>(SeedFlag{state, 0, nullptr});
    warp->state = state;
    cmd->add_option("--corpus", *corpus, "corpus index file")->required();
    cmd->add_option("--schema", *schema_file, "schema file override");
    cmd->add_option("--tasks", *tasks_csv,
                    "comma-separated tasks (default blk,blkx,sep)");
    cmd->add_option("--configs", *configs_csv,
                    "comma-separated configuration names or 'all'");
    cmd->add_option("--predictors", *predictor_file,
                    "file with '<name>\\t<command>' per line")
        ->required();
    cmd->add_option("--fold", request->fold, "validation fold (default 0)");
    cmd->add_option("--fold-count", request->fold_count, "fold count (default 5)");
    seed->add_to(cmd, "fold + experiment seed");
    cmd->add_option("--epochs", request->epochs, "passed through");
    cmd->add_option("--batch-size", request->batch_size, "passed through");
    cmd->add_option("--learning-rate", request->learning_rate, "passed through");
    cmd->add_option("--jobs", request->jobs, "parallel grid cells (default 1)");
    out_dir->add_to(cmd);
    warp->add_to(cmd);
    cmd->callback([=]() {
        request->tasks = split_csv(*tasks_csv);
        if (*configs_csv == "all") {
            for (const TileConfig& c : builtin_configs())
                request->config_names.push_back(c.name);
        } else {
            request->config_names = split_csv(*configs_csv);
        }
        request->predictors = load_predictor_file(*predictor_file);
        request->seed = seed->resolve();
        request->fold_seed = request->seed;
        request->warp = warp->options();

        std::vector<std::string> ids;
        for (const CorpusEntry& e : load_corpus(*corpus)) ids.push_back(e.page_id);
        const PageLoader loader = corpus_loader(
            *corpus, schema_file->empty() ? std::nullopt
                                          : std::optional<fs::path>(*schema_file));
        const fs::path dir = out_dir->resolve();
        const GridOutcome outcome = run_grid(*request, ids, loader, dir);
        write_grid_reports(outcome, dir);

        std::size_t failed = 0;
        bool predictor_failed = false;
        for (const GridCell& cell : outcome.cells) {
            if (!cell.ok) {
                ++failed;
                predictor_failed = predictor_failed || cell.predictor_failure;
                std::cerr << "failed: " << cell.task << " " << cell.config << " "
                          << cell.predictor << ": " << cell.error << "\n";
            }
        }
        std::cout << outcome.cells.size() - failed << "/" << outcome.cells.size()
                  << " cells ok, reports in " << dir.string() << "\n";
        if (failed > 0) {
            const std::string what = std::to_string(failed) + " cells failed";
            if (predictor_failed) throw PredictorError(what);
            throw Error(what);
        }
    });
}

void add_curve(CLI::App& app, const StatePtr& state) {
    auto* cmd = app.add_subcommand(
        "curve", "quality vs number of training pages (nested seeded subsets)");
    auto manifest_path = std::make_shared<std::string>();
    auto predictor_cmd = std::make_shared<std::string>();
    auto predictor_name = std::make_shared<std::string>("predictor");
    auto schedule_csv = std::make_shared<std::string>();
    auto work_dir = std::make_shared<std::string>();
    auto out = std::make_shared<std::string>();
    auto spec = std::make_shared<ExperimentSpec>();
    auto seed = std::make_shared<SeedFlag>(SeedFlag{state, 0, nullptr});
    cmd->add_option("--manifest", *manifest_path, "dataset manifest")->required();
    cmd->add_option("--predictor", *predictor_cmd, "predictor command")
        ->required();
    cmd->add_option("--predictor-name", *predictor_name, "name used in reports");
    cmd->add_option("--fold", spec->fold, "validation fold (default 0)");
    seed->add_to(cmd, "subset shuffle seed");
    cmd->add_option(
        "--schedule", *schedule_csv,
        "comma-separated page counts (default 8,16,24,33,41,49,58,66,74,83)");
    cmd->add_option("--work-dir", *work_dir, "request directory parent")
        ->required();
    cmd->add_option("-o,--out", *out, "output CSV (default stdout)");
    cmd->callback([=]() {
        const DatasetManifest manifest = load_manifest(*manifest_path);
        spec->task = manifest.task;
        spec->config_name = manifest.config_name;
        spec->predictor = parse_predictor(*predictor_name, *predictor_cmd);
        spec->seed = seed->resolve();
        SubsetSchedule schedule;
        if (!schedule_csv->empty()) {
            schedule.page_counts.clear();
            for (const std::string& c : split_csv(*schedule_csv))
                schedule.page_counts.push_back(std::stoi(c));
        }
        fs::create_directories(*work_dir);
        const auto points =
            subset_curve(*spec, manifest, fs::path(*manifest_path).parent_path(),
                         *work_dir, schedule);
        std::ostringstream csv;
        csv << "pages,pixel_accuracy,mean_accuracy,mean_iu,fw_iu,mcc\n";
        for (const CurvePoint& p : points)
            csv << p.page_count << "," << format_score(p.report.pixel_accuracy)
                << "," << format_score(p.report.mean_accuracy) << ","
                << format_score(p.report.mean_iu) << ","
                << format_score(p.report.fw_iu) << ","
                << format_score(p.report.mcc) << "\n";
        if (out->empty()) {
            std::cout << csv.str();
        } else {
            std::ofstream file(*out);
            file << csv.str();
            if (!file) throw IoError("cannot write " + *out);
        }
    });
}

void add_report(CLI::App& app, const StatePtr& state) {
    auto* cmd = app.add_subcommand(
        "report", "regenerate grid reports from the cell cache of a previous run");
    auto out_dir = std::make_shared<OutDirFlag>(OutDirFlag{state, {}});
    out_dir->add_to(cmd, "grid output directory");
    cmd->callback([=]() {
        const fs::path dir = out_dir->resolve();
        const GridOutcome outcome = collect_cached_cells(dir);
        if (outcome.cells.empty())
            throw ConfigError("no cached cells under " + dir.string());
        write_grid_reports(outcome, dir);
        std::cout << "rebuilt reports from " << outcome.cells.size()
                  << " cached cells\n";
    });
}

void add_baseline(CLI::App& app) {
    auto* cmd = app.add_subcommand(
        "baseline-predict",
        "reference predictor speaking the request-directory protocol");
    auto mode_text = std::make_shared<std::string>();
    auto request_dir = std::make_shared<std::string>();
    cmd->add_option("--mode", *mode_text, "oracle, majority or background")
        ->required()
        ->check(CLI::IsMember({"oracle", "majority", "background"}));
    cmd->add_option("request_dir", *request_dir, "request directory")->required();
    cmd->callback([=]() {
        baseline_predict(*request_dir, *parse_baseline_mode(*mode_text));
    });
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{
        "pageseg — page segmentation ground-truth preparation, tiling and "
        "evaluation toolkit for historical newspaper scans"};
    app.require_subcommand(1);

    auto state = std::make_shared<CliState>();
    app.add_option("--config-file", state->config_path,
                   "key-value defaults file (schema, seed, out_dir); "
                   "command-line flags win");

    add_ingest(app, state);
    add_postprocess(app, state);
    add_scale(app, state);
    add_warp(app, state);
    add_plan_budget(app);
    add_tile(app, state);
    add_stitch(app, state);
    add_evaluate(app, state);
    add_folds(app, state);
    add_prepare(app, state);
    add_run(app, state);
    add_grid(app, state);
    add_curve(app, state);
    add_report(app, state);
    add_baseline(app);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        // prints help to stdout or the parse error to stderr
        const int code = app.exit(e);
        return code == 0 ? 0 : kExitUsage;
    } catch (const PredictorError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitPredictor;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitData;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitData;
    }
    return 0;
}
