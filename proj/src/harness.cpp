#include "pageseg/harness.hpp"

#include "pageseg/errors.hpp"
#include "pageseg/raster_io.hpp"
#include "pageseg/rescale.hpp"
#include "pageseg/rng.hpp"
#include "pageseg/subprocess.hpp"
#include "pageseg/warp.hpp"

#include <algorithm>
#include <atomic>
#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

namespace pageseg {

namespace fs = std::filesystem;

namespace {

void check_page_id(const std::string& id) {
    if (id.empty())
        throw ConfigError("empty page id");
    for (char c : id)
        if (c == '/' || c == '\\' || c == '\t' || c == ' ' || c == '\n')
            throw ConfigError("page id '" + id +
                              "' contains a path or whitespace character");
}

std::string two_digits(int n) {
    char buf[16];
    std::snprintf(buf, sizeof buf, n < 100 ? "%02d" : "%d", n);
    return buf;
}

fs::path resolve(const fs::path& base, const std::string& p) {
    fs::path path(p);
    return path.is_absolute() ? path : base / path;
}

std::string sanitize_config_name(const std::string& name) {
    std::string out = name;
    for (char& c : out)
        if (c == '/' || c == '\\') c = '_';
    return out;
}

std::string single_line(std::string text) {
    for (char& c : text)
        if (c == '\n' || c == '\r' || c == '\t') c = ' ';
    return text;
}

/// Key-value file of the request directory ("key = value" lines).
std::map<std::string, std::string> read_kv_file(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path.string());
    std::map<std::string, std::string> kv;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) continue;
        auto strip = [](std::string s) {
            const auto b = s.find_first_not_of(" \t");
            const auto e = s.find_last_not_of(" \t\r");
            return b == std::string::npos ? std::string()
                                          : s.substr(b, e - b + 1);
        };
        kv[strip(line.substr(0, eq))] = strip(line.substr(eq + 1));
    }
    return kv;
}

} // namespace

FoldPlan make_folds(const std::vector<std::string>& page_ids, int fold_count,
                    std::uint64_t seed) {
    if (fold_count < 2) throw InvalidArgumentError("fold count must be >= 2");
    if (static_cast<int>(page_ids.size()) < fold_count)
        throw TooFewPagesError(std::to_string(page_ids.size()) +
                               " pages cannot fill " + std::to_string(fold_count) +
                               " folds");
    std::vector<std::string> ids = page_ids;
    std::sort(ids.begin(), ids.end());
    if (std::adjacent_find(ids.begin(), ids.end()) != ids.end())
        throw ConfigError("duplicate page ids in fold input");
    for (const std::string& id : ids) check_page_id(id);

    SplitMix64 rng(seed);
    seeded_shuffle(ids, rng);

    FoldPlan plan;
    plan.fold_count = fold_count;
    plan.train_ratio = 1.0 - 1.0 / fold_count;
    for (std::size_t i = 0; i < ids.size(); ++i)
        plan.assignment[ids[i]] = static_cast<int>(i % fold_count);
    return plan;
}

void save_fold_plan(const FoldPlan& plan, const fs::path& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write fold plan " + path.string());
    char buf[96];
    std::snprintf(buf, sizeof buf, "meta\tfold_count=%d\ttrain_ratio=%.17g\n",
                  plan.fold_count, plan.train_ratio);
    out << "# pageseg fold plan v1\n" << buf;
    for (const auto& [page, fold] : plan.assignment)
        out << "fold\t" << page << "\t" << fold << "\n";
    if (!out) throw IoError("failed writing fold plan " + path.string());
}

FoldPlan load_fold_plan(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open fold plan " + path.string());
    FoldPlan plan;
    plan.assignment.clear();
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        std::istringstream fields(line);
        std::string kind;
        fields >> kind;
        if (kind == "meta") {
            std::string field;
            while (fields >> field) {
                if (std::sscanf(field.c_str(), "fold_count=%d", &plan.fold_count) ==
                    1)
                    continue;
                std::sscanf(field.c_str(), "train_ratio=%lf", &plan.train_ratio);
            }
        } else if (kind == "fold") {
            std::string page;
            int fold = 0;
            if (!(fields >> page >> fold))
                throw CorruptFileError(path.string() + ": bad fold record '" +
                                       line + "'");
            plan.assignment[page] = fold;
        }
    }
    if (plan.assignment.empty())
        throw CorruptFileError(path.string() + ": no fold records");
    return plan;
}

DatasetManifest plan_dataset(const std::vector<std::string>& page_ids,
                             const TileConfig& config, const FoldPlan& plan,
                             const std::string& task, const WarpOptions& warp) {
    const TileGrid grid = compute_grid(config);

    DatasetManifest m;
    m.task = task;
    m.config_name = config.name;
    m.total_w = config.total_w;
    m.total_h = config.total_h;
    m.fold_count = plan.fold_count;
    m.schema_path = "schema.cfg";
    m.warp = warp;

    std::vector<std::string> ids = page_ids;
    std::sort(ids.begin(), ids.end());
    if (std::adjacent_find(ids.begin(), ids.end()) != ids.end())
        throw ConfigError("duplicate page ids in dataset plan");

    std::vector<std::string> variants = {"orig"};
    if (warp.enabled) variants.push_back("warp");

    for (const std::string& id : ids) {
        check_page_id(id);
        const auto it = plan.assignment.find(id);
        if (it == plan.assignment.end())
            throw ConfigError("page '" + id + "' has no fold assignment");
        const int fold = it->second;
        for (const std::string& variant : variants) {
            const std::string stem = id + "." + variant;
            PageRecord p;
            p.page_id = id;
            p.fold = fold;
            p.variant = variant;
            p.width = config.total_w;
            p.height = config.total_h;
            p.scan_path = "pages/" + stem + ".scan.png";
            p.label_path = "pages/" + stem + ".labels.png";
            m.pages.push_back(std::move(p));
            for (const TilePlacement& place : grid.placements) {
                TileRecord t;
                t.tile_id = stem + ".t" + two_digits(place.index);
                t.page_id = id;
                t.fold = fold;
                t.variant = variant;
                t.tile_index = place.index;
                t.x0 = place.x0;
                t.y0 = place.y0;
                t.width = config.tile_w;
                t.height = config.tile_h;
                t.scan_path = "tiles/" + t.tile_id + ".scan.png";
                t.label_path = "tiles/" + t.tile_id + ".labels.png";
                m.tiles.push_back(std::move(t));
            }
        }
    }
    return m;
}

namespace {

IndexedLabelImage crop_labels(const IndexedLabelImage& img, int x0, int y0, int w,
                              int h) {
    IndexedLabelImage out(w, h, img.schema_ptr());
    for (int y = 0; y < h; ++y)
        std::copy_n(img.row(y0 + y).data() + x0, w, out.row(y).data());
    return out;
}

ScanImage crop_gray(const ScanImage& img, int x0, int y0, int w, int h) {
    ScanImage out(w, h);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) out.set(x, y, img.at(x0 + x, y0 + y));
    return out;
}

} // namespace

void materialize_dataset(const DatasetManifest& manifest,
                         const std::vector<PageInput>& pages,
                         const fs::path& out_dir) {
    std::map<std::string, const PageInput*> by_id;
    for (const PageInput& p : pages) {
        if (!by_id.emplace(p.id, &p).second)
            throw ConfigError("duplicate page input '" + p.id + "'");
        if (!(p.labels.schema() == pages.front().labels.schema()))
            throw SchemaMismatchError("page '" + p.id +
                                      "' uses a different schema");
        if (p.scan.width() != p.labels.width() ||
            p.scan.height() != p.labels.height())
            throw DimensionMismatchError("page '" + p.id +
                                         "': scan and labels differ in size");
    }

    fs::create_directories(out_dir / "pages");
    fs::create_directories(out_dir / "tiles");
    save_schema(pages.front().labels.schema(), out_dir / manifest.schema_path);

    const double amplitude =
        manifest.warp.amplitude_frac * std::min(manifest.total_w, manifest.total_h);

    std::map<std::string, std::vector<const PageRecord*>> page_records;
    std::map<std::string, std::vector<const TileRecord*>> tile_records;
    for (const PageRecord& p : manifest.pages)
        page_records[p.page_id].push_back(&p);
    for (const TileRecord& t : manifest.tiles)
        tile_records[t.page_id].push_back(&t);

    // one downscale (plus at most one warp) per page
    for (const auto& [id, records] : page_records) {
        const auto it = by_id.find(id);
        if (it == by_id.end())
            throw ConfigError("manifest page '" + id + "' missing from inputs");
        const PageInput& src = *it->second;

        std::map<std::string, std::pair<ScanImage, IndexedLabelImage>> variants;
        ScanImage scan =
            downscale_gray(src.scan, manifest.total_w, manifest.total_h);
        IndexedLabelImage labels =
            downscale_labels(src.labels, manifest.total_w, manifest.total_h);
        if (manifest.warp.enabled) {
            const WarpField field = make_warp_field(
                manifest.total_w, manifest.total_h, manifest.warp.grid_cols,
                manifest.warp.grid_rows, amplitude,
                mix_seed(manifest.warp.seed, fnv1a(id)));
            variants.emplace("warp",
                             std::make_pair(apply_warp_gray(scan, field),
                                            apply_warp_labels(labels, field)));
        }
        variants.emplace("orig",
                         std::make_pair(std::move(scan), std::move(labels)));

        for (const PageRecord* p : records) {
            const auto& [v_scan, v_labels] = variants.at(p->variant);
            save_gray(v_scan, out_dir / p->scan_path);
            save_indexed(v_labels, out_dir / p->label_path);
        }
        const auto tiles_it = tile_records.find(id);
        if (tiles_it == tile_records.end()) continue;
        for (const TileRecord* t : tiles_it->second) {
            const auto& [v_scan, v_labels] = variants.at(t->variant);
            save_gray(crop_gray(v_scan, t->x0, t->y0, t->width, t->height),
                      out_dir / t->scan_path);
            save_indexed(crop_labels(v_labels, t->x0, t->y0, t->width, t->height),
                         out_dir / t->label_path);
        }
    }
    save_manifest(manifest, out_dir / "manifest.tsv");
}

PredictorCommand parse_predictor(std::string_view name, std::string_view command) {
    PredictorCommand p;
    p.name = std::string(name);
    p.argv = split_command(command);
    if (p.name.empty()) throw ConfigError("predictor needs a name");
    if (p.argv.empty())
        throw ConfigError("predictor '" + p.name + "' has an empty command");
    return p;
}

std::string spec_hash(const ExperimentSpec& spec, const DatasetManifest& manifest) {
    std::ostringstream key;
    char lr[40];
    std::snprintf(lr, sizeof lr, "%.17g", spec.learning_rate);
    key << spec.task << '\x1f' << spec.config_name << '\x1f' << spec.predictor.name
        << '\x1f';
    for (const std::string& a : spec.predictor.argv) key << a << '\x1e';
    key << '\x1f' << spec.fold << '\x1f' << spec.epochs << '\x1f'
        << spec.batch_size << '\x1f' << lr << '\x1f' << spec.seed << '\x1f'
        << (spec.per_page_average ? "per_page" : "pooled") << '\x1f'
        << manifest_digest(manifest);
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016" PRIx64, fnv1a(key.str()));
    return buf;
}

namespace {

/// Rebuilds the tile grid of a manifest from its tile records and verifies
/// the records against the recomputed placements.
TileGrid grid_from_manifest(const DatasetManifest& m) {
    std::set<int> xs, ys;
    int tile_w = 0, tile_h = 0;
    std::map<int, std::pair<int, int>> by_index;
    for (const TileRecord& t : m.tiles) {
        xs.insert(t.x0);
        ys.insert(t.y0);
        tile_w = t.width;
        tile_h = t.height;
        by_index[t.tile_index] = {t.x0, t.y0};
    }
    if (by_index.empty())
        throw CorruptFileError("manifest for '" + m.config_name + "' has no tiles");

    TileConfig config;
    config.name = m.config_name;
    config.total_w = m.total_w;
    config.total_h = m.total_h;
    config.tiles_x = static_cast<int>(xs.size());
    config.tiles_y = static_cast<int>(ys.size());
    config.tile_w = tile_w;
    config.tile_h = tile_h;
    if (config.tiles_x == 1 && config.tiles_y == 1)
        config.pattern = TilePattern::none;
    else if (config.tiles_y == 1)
        config.pattern = TilePattern::h;
    else if (config.tiles_x == 1)
        config.pattern = TilePattern::v;
    else
        config.pattern = TilePattern::hv;

    const TileGrid grid = compute_grid(config);
    for (const TilePlacement& p : grid.placements) {
        const auto it = by_index.find(p.index);
        if (it == by_index.end() || it->second != std::make_pair(p.x0, p.y0))
            throw CorruptFileError("manifest tiles of '" + m.config_name +
                                   "' do not match the computed grid");
    }
    return grid;
}

struct ValidationGroup {
    std::string page_id;
    std::string variant;
    std::vector<const TileRecord*> tiles; // ordered by tile_index
    const PageRecord* page = nullptr;
};

std::vector<ValidationGroup> validation_groups(const DatasetManifest& manifest,
                                               int fold) {
    std::map<std::pair<std::string, std::string>, ValidationGroup> groups;
    for (const PageRecord& p : manifest.pages) {
        if (p.fold != fold) continue;
        ValidationGroup& g = groups[{p.page_id, p.variant}];
        g.page_id = p.page_id;
        g.variant = p.variant;
        g.page = &p;
    }
    for (const TileRecord& t : manifest.tiles) {
        if (t.fold != fold) continue;
        const auto key = std::make_pair(t.page_id, t.variant);
        const auto it = groups.find(key);
        if (it == groups.end())
            throw CorruptFileError("tile '" + t.tile_id +
                                   "' has no page record in its fold");
        it->second.tiles.push_back(&t);
    }
    std::vector<ValidationGroup> out;
    for (auto& [key, group] : groups) {
        std::sort(group.tiles.begin(), group.tiles.end(),
                  [](const TileRecord* a, const TileRecord* b) {
                      return a->tile_index < b->tile_index;
                  });
        out.push_back(std::move(group));
    }
    return out;
}

} // namespace

MetricReport run_experiment(const ExperimentSpec& spec,
                            const DatasetManifest& manifest,
                            const fs::path& manifest_dir,
                            const fs::path& work_dir) {
    if (spec.fold < 0 || spec.fold >= manifest.fold_count)
        throw InvalidArgumentError("fold " + std::to_string(spec.fold) +
                                   " outside plan of " +
                                   std::to_string(manifest.fold_count) + " folds");
    const std::vector<ValidationGroup> groups =
        validation_groups(manifest, spec.fold);
    if (groups.empty())
        throw InvalidArgumentError("fold " + std::to_string(spec.fold) +
                                   " has no validation pages");

    const std::string hash = spec_hash(spec, manifest);
    const fs::path request_dir = work_dir / ("request-" + hash);
    fs::remove_all(request_dir);
    fs::create_directories(request_dir / "pred");

    // Request manifest carries absolute paths so the predictor can run from
    // any working directory.
    DatasetManifest request = manifest;
    const fs::path abs_dir = fs::absolute(manifest_dir);
    request.schema_path = (abs_dir / manifest.schema_path).string();
    for (PageRecord& p : request.pages) {
        p.scan_path = (abs_dir / p.scan_path).string();
        p.label_path = (abs_dir / p.label_path).string();
    }
    for (TileRecord& t : request.tiles) {
        t.scan_path = (abs_dir / t.scan_path).string();
        t.label_path = (abs_dir / t.label_path).string();
    }
    save_manifest(request, request_dir / "manifest.tsv");

    {
        std::ofstream out(request_dir / "spec.cfg");
        char lr[40];
        std::snprintf(lr, sizeof lr, "%.17g", spec.learning_rate);
        out << "# pageseg predictor request v1\n"
            << "task = " << spec.task << "\n"
            << "config = " << spec.config_name << "\n"
            << "fold = " << spec.fold << "\n"
            << "epochs = " << spec.epochs << "\n"
            << "batch_size = " << spec.batch_size << "\n"
            << "learning_rate = " << lr << "\n"
            << "seed = " << spec.seed << "\n"
            << "manifest = manifest.tsv\n"
            << "pred_dir = pred\n";
        if (!out)
            throw IoError("cannot write request spec under " +
                          request_dir.string());
    }

    std::vector<std::string> argv = spec.predictor.argv;
    argv.push_back(fs::absolute(request_dir).string());
    const int exit_code = run_command(argv);
    if (exit_code != 0)
        throw PredictorError("predictor '" + spec.predictor.name +
                             "' exited with code " + std::to_string(exit_code));

    const SchemaPtr schema = load_schema(request.schema_path);
    const TileGrid grid = grid_from_manifest(manifest);

    ConfusionMatrix pooled(schema->class_count());
    std::vector<MetricReport> per_page;
    for (const ValidationGroup& group : groups) {
        std::vector<IndexedLabelImage> tiles;
        tiles.reserve(group.tiles.size());
        for (const TileRecord* t : group.tiles) {
            const fs::path pred_path =
                request_dir / "pred" / (t->tile_id + ".png");
            if (!fs::exists(pred_path))
                throw PredictorError("predictor '" + spec.predictor.name +
                                     "' wrote no prediction for tile '" +
                                     t->tile_id + "'");
            IndexedLabelImage tile = [&] {
                try {
                    return load_indexed(pred_path, schema);
                } catch (const Error& e) {
                    throw MalformedPredictionError("tile '" + t->tile_id +
                                                   "': " + e.what());
                }
            }();
            if (tile.width() != t->width || tile.height() != t->height)
                throw MalformedPredictionError(
                    "tile '" + t->tile_id + "': predicted " +
                    std::to_string(tile.width()) + "x" +
                    std::to_string(tile.height()) + ", expected " +
                    std::to_string(t->width) + "x" + std::to_string(t->height));
            tiles.push_back(std::move(tile));
        }
        const IndexedLabelImage stitched = stitch_tiles(tiles, grid);
        const IndexedLabelImage truth =
            load_indexed(resolve(manifest_dir, group.page->label_path), schema);
        if (spec.per_page_average) {
            ConfusionMatrix cm(schema->class_count());
            cm.accumulate(truth, stitched);
            per_page.push_back(make_report(cm));
        } else {
            pooled.accumulate(truth, stitched);
        }
    }

    if (!spec.per_page_average) return make_report(pooled);

    MetricReport mean;
    for (const MetricReport& r : per_page) {
        mean.pixel_accuracy += r.pixel_accuracy;
        mean.mean_accuracy += r.mean_accuracy;
        mean.mean_iu += r.mean_iu;
        mean.fw_iu += r.fw_iu;
        mean.mcc += r.mcc;
    }
    const double n = static_cast<double>(per_page.size());
    auto avg = [n](double v) { return std::round(v / n * 100.0) / 100.0; };
    return {avg(mean.pixel_accuracy), avg(mean.mean_accuracy), avg(mean.mean_iu),
            avg(mean.fw_iu), avg(mean.mcc)};
}

bool manifest_leak_free(const DatasetManifest& manifest, int fold) {
    std::map<std::string, int> page_fold;
    for (const PageRecord& p : manifest.pages) {
        const auto it = page_fold.find(p.page_id);
        if (it != page_fold.end() && it->second != p.fold) return false;
        page_fold[p.page_id] = p.fold;
    }
    std::set<std::string> train, validation;
    for (const TileRecord& t : manifest.tiles) {
        const auto it = page_fold.find(t.page_id);
        if (it == page_fold.end() || it->second != t.fold) return false;
        (t.fold == fold ? validation : train).insert(t.page_id);
    }
    for (const std::string& page : validation)
        if (train.count(page)) return false;
    return true;
}

std::optional<BaselineMode> parse_baseline_mode(std::string_view text) {
    if (text == "oracle") return BaselineMode::oracle;
    if (text == "majority") return BaselineMode::majority;
    if (text == "background") return BaselineMode::background;
    return std::nullopt;
}

void baseline_predict(const fs::path& request_dir, BaselineMode mode) {
    const auto spec = read_kv_file(request_dir / "spec.cfg");
    const auto manifest_it = spec.find("manifest");
    const auto fold_it = spec.find("fold");
    if (manifest_it == spec.end() || fold_it == spec.end())
        throw ConfigError(request_dir.string() +
                          "/spec.cfg lacks manifest or fold");
    const int fold = std::stoi(fold_it->second);
    const DatasetManifest manifest =
        load_manifest(resolve(request_dir, manifest_it->second));
    const fs::path pred_dir =
        resolve(request_dir,
                spec.count("pred_dir") ? spec.at("pred_dir") : "pred");
    fs::create_directories(pred_dir);

    const SchemaPtr schema =
        load_schema(resolve(request_dir, manifest.schema_path));

    std::uint8_t constant_class = LabelSchema::kBackgroundIndex;
    if (mode == BaselineMode::majority) {
        // most frequent class over the training fold's label tiles
        std::vector<std::uint64_t> histogram(schema->class_count(), 0);
        for (const TileRecord& t : manifest.tiles) {
            if (t.fold == fold) continue;
            const IndexedLabelImage labels =
                load_indexed(resolve(request_dir, t.label_path), schema);
            for (std::uint8_t v : labels.labels()) ++histogram[v];
        }
        for (std::size_t c = 1; c < histogram.size(); ++c)
            if (histogram[c] > histogram[constant_class])
                constant_class = static_cast<std::uint8_t>(c);
    }

    for (const TileRecord& t : manifest.tiles) {
        if (t.fold != fold) continue;
        const fs::path out_path = pred_dir / (t.tile_id + ".png");
        if (mode == BaselineMode::oracle) {
            fs::copy_file(resolve(request_dir, t.label_path), out_path,
                          fs::copy_options::overwrite_existing);
        } else {
            save_indexed(
                IndexedLabelImage(t.width, t.height, schema, constant_class),
                out_path);
        }
    }
}

std::vector<GridPlanEntry> plan_grid(const std::vector<std::string>& tasks,
                                     const std::vector<std::string>& configs,
                                     const std::vector<std::string>& predictors) {
    std::vector<GridPlanEntry> cells;
    cells.reserve(tasks.size() * configs.size() * predictors.size());
    for (const std::string& task : tasks)
        for (const std::string& predictor : predictors)
            for (const std::string& config : configs)
                cells.push_back({task, config, predictor});
    return cells;
}

namespace {

constexpr std::string_view kCellHeader = "# pageseg grid cell v1";

void write_cell_file(const fs::path& path, const GridCell& cell) {
    const fs::path tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp);
        if (!out) throw IoError("cannot write cache cell " + tmp.string());
        out << kCellHeader << "\n"
            << "task = " << cell.task << "\n"
            << "config = " << cell.config << "\n"
            << "predictor = " << cell.predictor << "\n"
            << "fold = " << cell.fold << "\n"
            << "status = " << (cell.ok ? "ok" : "failed") << "\n";
        if (cell.ok) {
            out << "pixel_accuracy = " << format_score(cell.report.pixel_accuracy)
                << "\n"
                << "mean_accuracy = " << format_score(cell.report.mean_accuracy)
                << "\n"
                << "mean_iu = " << format_score(cell.report.mean_iu) << "\n"
                << "fw_iu = " << format_score(cell.report.fw_iu) << "\n"
                << "mcc = " << format_score(cell.report.mcc) << "\n";
        } else {
            out << "error = " << single_line(cell.error) << "\n";
        }
        if (!out) throw IoError("failed writing cache cell " + tmp.string());
    }
    fs::rename(tmp, path);
}

std::optional<GridCell> read_cell_file(const fs::path& path) {
    std::ifstream in(path);
    if (!in) return std::nullopt;
    std::string header;
    std::getline(in, header);
    if (header != kCellHeader) return std::nullopt;
    in.seekg(0);
    const auto kv = read_kv_file(path);
    const char* required[] = {"task", "config", "predictor", "status"};
    for (const char* key : required)
        if (!kv.count(key)) return std::nullopt;
    GridCell cell;
    cell.task = kv.at("task");
    cell.config = kv.at("config");
    cell.predictor = kv.at("predictor");
    if (kv.count("fold")) cell.fold = std::stoi(kv.at("fold"));
    cell.ok = kv.at("status") == "ok";
    cell.from_cache = true;
    if (cell.ok) {
        const char* scores[] = {"pixel_accuracy", "mean_accuracy", "mean_iu",
                                "fw_iu", "mcc"};
        double* fields[] = {&cell.report.pixel_accuracy, &cell.report.mean_accuracy,
                            &cell.report.mean_iu, &cell.report.fw_iu,
                            &cell.report.mcc};
        for (std::size_t i = 0; i < 5; ++i) {
            if (!kv.count(scores[i])) return std::nullopt;
            *fields[i] = std::strtod(kv.at(scores[i]).c_str(), nullptr);
        }
    } else {
        cell.error = kv.count("error") ? kv.at("error") : "unknown failure";
    }
    return cell;
}

} // namespace

GridOutcome run_grid(const GridRequest& request,
                     const std::vector<std::string>& page_ids,
                     const PageLoader& loader, const fs::path& out_dir) {
    if (request.tasks.empty() || request.config_names.empty() ||
        request.predictors.empty())
        throw InvalidArgumentError("grid needs tasks, configs and predictors");

    std::map<std::string, const PredictorCommand*> predictors_by_name;
    std::vector<std::string> predictor_names;
    for (const PredictorCommand& p : request.predictors) {
        if (!predictors_by_name.emplace(p.name, &p).second)
            throw ConfigError("duplicate predictor name '" + p.name + "'");
        predictor_names.push_back(p.name);
    }
    for (const std::string& name : request.config_names)
        builtin_config(name); // early unknown-name diagnostics

    const FoldPlan folds =
        make_folds(page_ids, request.fold_count, request.fold_seed);

    // Materialize (or reuse) each (task, config) dataset up front. A dataset
    // that cannot be built (for example pages smaller than the working
    // resolution) marks its cells failed; the rest of the grid continues.
    struct Dataset {
        DatasetManifest manifest;
        fs::path dir;
        std::string error; // non-empty: all dependent cells fail with this
    };
    std::map<std::pair<std::string, std::string>, Dataset> datasets;
    for (const std::string& task : request.tasks) {
        std::vector<PageInput> pages;
        bool loaded = false;
        for (const std::string& config_name : request.config_names) {
            const TileConfig& config = builtin_config(config_name);
            const fs::path dir =
                out_dir / "datasets" / task / sanitize_config_name(config_name);
            Dataset dataset{plan_dataset(page_ids, config, folds, task,
                                         request.warp),
                            dir,
                            {}};
            bool reuse = false;
            if (fs::exists(dir / "manifest.tsv")) {
                try {
                    reuse = manifest_digest(load_manifest(dir / "manifest.tsv")) ==
                            manifest_digest(dataset.manifest);
                } catch (const Error&) {
                    reuse = false;
                }
            }
            if (!reuse) {
                try {
                    if (!loaded) {
                        pages = loader(task);
                        loaded = true;
                    }
                    fs::remove_all(dir);
                    fs::create_directories(dir);
                    materialize_dataset(dataset.manifest, pages, dir);
                } catch (const Error& e) {
                    dataset.error = "dataset '" + task + "/" + config_name +
                                    "': " + e.what();
                }
            }
            datasets.emplace(std::make_pair(task, config_name),
                             std::move(dataset));
        }
    }

    const std::vector<GridPlanEntry> plan =
        plan_grid(request.tasks, request.config_names, predictor_names);
    const fs::path cache_dir = out_dir / "cache";
    const fs::path work_dir = out_dir / "work";
    fs::create_directories(cache_dir);
    fs::create_directories(work_dir);

    GridOutcome outcome;
    outcome.cells.resize(plan.size());

    std::atomic<std::size_t> next{0};
    auto worker = [&]() {
        while (true) {
            const std::size_t i = next.fetch_add(1);
            if (i >= plan.size()) return;
            const GridPlanEntry& entry = plan[i];
            const Dataset& dataset = datasets.at({entry.task, entry.config});

            ExperimentSpec spec;
            spec.task = entry.task;
            spec.config_name = entry.config;
            spec.predictor = *predictors_by_name.at(entry.predictor);
            spec.fold = request.fold;
            spec.epochs = request.epochs;
            spec.batch_size = request.batch_size;
            spec.learning_rate = request.learning_rate;
            spec.seed = request.seed;

            GridCell cell;
            cell.task = entry.task;
            cell.config = entry.config;
            cell.predictor = entry.predictor;
            cell.fold = request.fold;

            if (!dataset.error.empty()) {
                cell.error = dataset.error;
                outcome.cells[i] = std::move(cell);
                continue;
            }
            const fs::path cell_path =
                cache_dir / (spec_hash(spec, dataset.manifest) + ".cell");
            if (auto cached = read_cell_file(cell_path); cached && cached->ok) {
                outcome.cells[i] = *cached;
                continue;
            }
            try {
                cell.report =
                    run_experiment(spec, dataset.manifest, dataset.dir, work_dir);
                cell.ok = true;
            } catch (const PredictorError& e) {
                cell.error = e.what();
                cell.predictor_failure = true;
            } catch (const Error& e) {
                cell.error = e.what();
            }
            if (cell.ok) write_cell_file(cell_path, cell);
            outcome.cells[i] = std::move(cell);
        }
    };

    const int jobs = std::max(1, request.jobs);
    if (jobs == 1) {
        worker();
    } else {
        std::vector<std::thread> threads;
        threads.reserve(static_cast<std::size_t>(jobs));
        for (int j = 0; j < jobs; ++j) threads.emplace_back(worker);
        for (std::thread& t : threads) t.join();
    }
    return outcome;
}

void write_grid_reports(const GridOutcome& outcome, const fs::path& out_dir) {
    fs::create_directories(out_dir);
    std::ofstream csv(out_dir / "grid_report.csv");
    if (!csv) throw IoError("cannot write grid_report.csv");
    csv << "task,config,predictor,fold,status,pixel_accuracy,mean_accuracy,"
           "mean_iu,fw_iu,mcc\n";
    for (const GridCell& cell : outcome.cells) {
        csv << cell.task << "," << cell.config << "," << cell.predictor << ","
            << cell.fold << "," << (cell.ok ? "ok" : "failed");
        if (cell.ok)
            csv << "," << format_score(cell.report.pixel_accuracy) << ","
                << format_score(cell.report.mean_accuracy) << ","
                << format_score(cell.report.mean_iu) << ","
                << format_score(cell.report.fw_iu) << ","
                << format_score(cell.report.mcc);
        else
            csv << ",,,,,";
        csv << "\n";
    }

    std::vector<std::string> tasks;
    for (const GridCell& cell : outcome.cells)
        if (std::find(tasks.begin(), tasks.end(), cell.task) == tasks.end())
            tasks.push_back(cell.task);

    std::ofstream md(out_dir / "grid_report.md");
    if (!md) throw IoError("cannot write grid_report.md");
    md << "# Grid report (MCC x100)\n\n";
    for (const std::string& task : tasks) {
        std::vector<RankEntry> entries;
        for (const GridCell& cell : outcome.cells) {
            if (cell.task != task) continue;
            entries.push_back(
                {cell.predictor, cell.config, cell.report, cell.ok, cell.error});
        }
        md << to_markdown(rank(entries, "mcc"), task) << "\n";
    }
}

GridOutcome collect_cached_cells(const fs::path& out_dir) {
    const fs::path cache_dir = out_dir / "cache";
    GridOutcome outcome;
    if (!fs::exists(cache_dir)) return outcome;
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(cache_dir))
        if (entry.path().extension() == ".cell") files.push_back(entry.path());
    std::sort(files.begin(), files.end());
    for (const fs::path& file : files)
        if (auto cell = read_cell_file(file)) outcome.cells.push_back(*cell);
    std::stable_sort(outcome.cells.begin(), outcome.cells.end(),
                     [](const GridCell& a, const GridCell& b) {
                         return std::tie(a.task, a.predictor, a.config) <
                                std::tie(b.task, b.predictor, b.config);
                     });
    return outcome;
}

std::vector<int> clip_schedule(const SubsetSchedule& schedule, int training_pages) {
    for (std::size_t i = 1; i < schedule.page_counts.size(); ++i)
        if (schedule.page_counts[i] <= schedule.page_counts[i - 1])
            throw InvalidArgumentError("subset schedule must be strictly increasing");
    std::vector<int> out;
    for (int count : schedule.page_counts) {
        if (count < 1) throw InvalidArgumentError("subset counts must be >= 1");
        const int clipped = std::min(count, training_pages);
        if (clipped >= 1 &&
            (out.empty() || clipped != out.back()))
            out.push_back(clipped);
    }
    return out;
}

std::vector<std::string> subset_pages(const DatasetManifest& manifest, int fold,
                                      std::uint64_t seed, int count) {
    std::set<std::string> train_set;
    for (const PageRecord& p : manifest.pages)
        if (p.fold != fold) train_set.insert(p.page_id);
    std::vector<std::string> train(train_set.begin(), train_set.end());
    SplitMix64 rng(seed);
    seeded_shuffle(train, rng);
    if (count > static_cast<int>(train.size()))
        throw InvalidArgumentError("subset of " + std::to_string(count) +
                                   " exceeds " + std::to_string(train.size()) +
                                   " training pages");
    train.resize(static_cast<std::size_t>(count));
    return train;
}

std::vector<CurvePoint> subset_curve(const ExperimentSpec& spec,
                                     const DatasetManifest& manifest,
                                     const fs::path& manifest_dir,
                                     const fs::path& work_dir,
                                     const SubsetSchedule& schedule) {
    std::set<std::string> train_set;
    for (const PageRecord& p : manifest.pages)
        if (p.fold != spec.fold) train_set.insert(p.page_id);
    const std::vector<int> counts =
        clip_schedule(schedule, static_cast<int>(train_set.size()));

    std::vector<CurvePoint> points;
    for (int count : counts) {
        const std::vector<std::string> keep_list =
            subset_pages(manifest, spec.fold, spec.seed, count);
        const std::set<std::string> keep(keep_list.begin(), keep_list.end());

        DatasetManifest subset = manifest;
        subset.pages.clear();
        subset.tiles.clear();
        for (const PageRecord& p : manifest.pages)
            if (p.fold == spec.fold || keep.count(p.page_id))
                subset.pages.push_back(p);
        for (const TileRecord& t : manifest.tiles)
            if (t.fold == spec.fold || keep.count(t.page_id))
                subset.tiles.push_back(t);

        points.push_back(
            {count, run_experiment(spec, subset, manifest_dir, work_dir)});
    }
    return points;
}

std::vector<CorpusEntry> load_corpus(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open corpus " + path.string());
    std::vector<CorpusEntry> entries;
    std::map<std::string, std::size_t> index;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const std::string where = path.string() + ":" + std::to_string(line_no);
        if (line.empty() || line[0] == '#') continue;
        std::istringstream fields(line);
        std::string kind;
        fields >> kind;
        if (kind == "page") {
            CorpusEntry entry;
            if (!(fields >> entry.page_id >> entry.scan_path))
                throw CorruptFileError(where + ": expected 'page <id> <scan>'");
            if (index.count(entry.page_id))
                throw ConfigError(where + ": duplicate page '" + entry.page_id +
                                  "'");
            index[entry.page_id] = entries.size();
            entries.push_back(std::move(entry));
        } else if (kind == "label") {
            std::string page, task, label_path;
            if (!(fields >> page >> task >> label_path))
                throw CorruptFileError(where +
                                       ": expected 'label <id> <task> <path>'");
            const auto it = index.find(page);
            if (it == index.end())
                throw CorruptFileError(where + ": label before page '" + page +
                                       "'");
            entries[it->second].labels[task] = label_path;
        } else {
            throw CorruptFileError(where + ": unknown record '" + kind + "'");
        }
    }
    return entries;
}

void save_corpus(const std::vector<CorpusEntry>& entries, const fs::path& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write corpus " + path.string());
    out << "# pageseg corpus v1\n";
    for (const CorpusEntry& e : entries) {
        out << "page\t" << e.page_id << "\t" << e.scan_path << "\n";
        for (const auto& [task, label] : e.labels)
            out << "label\t" << e.page_id << "\t" << task << "\t" << label << "\n";
    }
    if (!out) throw IoError("failed writing corpus " + path.string());
}

PageLoader corpus_loader(const fs::path& corpus_path,
                         const std::optional<fs::path>& schema_file) {
    return [corpus_path, schema_file](const std::string& task) {
        const fs::path base = corpus_path.parent_path();
        SchemaPtr schema;
        if (schema_file) {
            SchemaPtr custom = load_schema(*schema_file);
            if (custom->task_name() == task) schema = custom;
        }
        if (!schema) schema = builtin_schema(task);

        std::vector<PageInput> pages;
        for (const CorpusEntry& entry : load_corpus(corpus_path)) {
            const auto it = entry.labels.find(task);
            if (it == entry.labels.end())
                throw ConfigError("page '" + entry.page_id +
                                  "' has no label file for task '" + task + "'");
            pages.push_back({entry.page_id,
                             load_gray(resolve(base, entry.scan_path)),
                             load_indexed(resolve(base, it->second), schema)});
        }
        return pages;
    };
}

} // namespace pageseg
