#ifndef PAGESEG_HARNESS_HPP
#define PAGESEG_HARNESS_HPP

#include "pageseg/image.hpp"
#include "pageseg/manifest.hpp"
#include "pageseg/metrics.hpp"
#include "pageseg/tiling.hpp"

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace pageseg {

/// Cross-validation assignment at page granularity. Tiles and warped
/// variants inherit their page's fold, so no derived artifact can straddle
/// the train/validation boundary.
struct FoldPlan {
    int fold_count = 5;
    double train_ratio = 0.8; // 1 - 1/fold_count
    std::map<std::string, int> assignment;
};

/// Seeded shuffle then round-robin assignment; deterministic per seed.
/// Throws TooFewPagesError when pages < fold_count.
FoldPlan make_folds(const std::vector<std::string>& page_ids, int fold_count,
                    std::uint64_t seed);

void save_fold_plan(const FoldPlan& plan, const std::filesystem::path& path);
FoldPlan load_fold_plan(const std::filesystem::path& path);

/// One ground-truth page at source resolution.
struct PageInput {
    std::string id;
    ScanImage scan;
    IndexedLabelImage labels;
};

/// Builds the manifest for (pages, config, folds) without touching pixels:
/// page and tile records with conventional relative paths. Pixel work
/// happens in materialize_dataset.
DatasetManifest plan_dataset(const std::vector<std::string>& page_ids,
                             const TileConfig& config, const FoldPlan& plan,
                             const std::string& task, const WarpOptions& warp);

/// Downscales every page to the working resolution (weighted-area for
/// labels), optionally adds one warped variant per page, splits into tiles
/// and writes all rasters plus manifest.tsv and schema.cfg into out_dir.
void materialize_dataset(const DatasetManifest& manifest,
                         const std::vector<PageInput>& pages,
                         const std::filesystem::path& out_dir);

/// External predictor: a name for reports plus the argv prefix to invoke.
/// The harness appends exactly one argument, the request directory.
struct PredictorCommand {
    std::string name;
    std::vector<std::string> argv;
};

PredictorCommand parse_predictor(std::string_view name, std::string_view command);

struct ExperimentSpec {
    std::string task;
    std::string config_name;
    PredictorCommand predictor;
    int fold = 0;
    int epochs = 50;
    int batch_size = 3;
    double learning_rate = 2.5e-3;
    std::uint64_t seed = 0;
    /// pooled (default): one confusion matrix over all validation pixels;
    /// per-page: metrics averaged over per-page reports.
    bool per_page_average = false;
};

/// Content hash of (spec, manifest digest); keys request dirs and the grid
/// cell cache.
std::string spec_hash(const ExperimentSpec& spec, const DatasetManifest& manifest);

/// Runs one experiment: writes a request directory (spec + manifest with
/// absolute paths + empty pred/), invokes the predictor once, loads one
/// prediction raster per validation tile, stitches them per page variant,
/// and scores against the page ground truth.
///
/// Throws PredictorError (nonzero exit, missing outputs) and
/// MalformedPredictionError (wrong size or palette, naming the tile).
MetricReport run_experiment(const ExperimentSpec& spec,
                            const DatasetManifest& manifest,
                            const std::filesystem::path& manifest_dir,
                            const std::filesystem::path& work_dir);

/// True when no page contributes tiles to both sides of the fold split.
bool manifest_leak_free(const DatasetManifest& manifest, int fold);

enum class BaselineMode { oracle, majority, background };
std::optional<BaselineMode> parse_baseline_mode(std::string_view text);

/// Reference predictors speaking the request-directory protocol: oracle
/// copies ground-truth tiles, majority emits the training fold's most
/// frequent class, background emits class 0.
void baseline_predict(const std::filesystem::path& request_dir, BaselineMode mode);

struct GridPlanEntry {
    std::string task;
    std::string config;
    std::string predictor;
};

/// Deterministic cell order (task-major, then predictor, then config);
/// the cell count is exactly |tasks| * |configs| * |predictors|.
std::vector<GridPlanEntry> plan_grid(const std::vector<std::string>& tasks,
                                     const std::vector<std::string>& configs,
                                     const std::vector<std::string>& predictors);

struct GridRequest {
    std::vector<std::string> tasks;
    std::vector<std::string> config_names;
    std::vector<PredictorCommand> predictors;
    int fold = 0;
    int fold_count = 5;
    std::uint64_t fold_seed = 0;
    WarpOptions warp;
    int epochs = 50;
    int batch_size = 3;
    double learning_rate = 2.5e-3;
    std::uint64_t seed = 0;
    int jobs = 1;
};

struct GridCell {
    std::string task;
    std::string config;
    std::string predictor;
    int fold = 0;
    bool ok = false;
    bool from_cache = false;
    bool predictor_failure = false; // failed cell: predictor vs data error
    std::string error;
    MetricReport report;
};

struct GridOutcome {
    std::vector<GridCell> cells;
};

using PageLoader =
    std::function<std::vector<PageInput>(const std::string& task)>;

/// Executes the full cross product. Datasets are materialized once per
/// (task, config) and reused; finished cells are cached on disk keyed by
/// spec hash, so an interrupted run resumes with only the missing cells.
/// Failed cells are recorded and the run continues.
GridOutcome run_grid(const GridRequest& request,
                     const std::vector<std::string>& page_ids,
                     const PageLoader& loader,
                     const std::filesystem::path& out_dir);

/// grid_report.csv (long form) and grid_report.md (per-task tables with
/// per-column best flags) under out_dir.
void write_grid_reports(const GridOutcome& outcome,
                        const std::filesystem::path& out_dir);

/// Rebuilds a GridOutcome from the cell cache of a previous run.
GridOutcome collect_cached_cells(const std::filesystem::path& out_dir);

struct SubsetSchedule {
    std::vector<int> page_counts = {8, 16, 24, 33, 41, 49, 58, 66, 74, 83};
};

/// Counts clamped to the available training pages, deduplicated, ascending.
std::vector<int> clip_schedule(const SubsetSchedule& schedule, int training_pages);

struct CurvePoint {
    int page_count = 0;
    MetricReport report;
};

/// Quality versus number of training pages: for each scheduled count, runs
/// the predictor on a seeded nested subset of training pages against the
/// constant validation fold.
std::vector<CurvePoint> subset_curve(const ExperimentSpec& spec,
                                     const DatasetManifest& manifest,
                                     const std::filesystem::path& manifest_dir,
                                     const std::filesystem::path& work_dir,
                                     const SubsetSchedule& schedule);

/// Subset page ids for one curve point (exposed for nestedness checks).
std::vector<std::string> subset_pages(const DatasetManifest& manifest, int fold,
                                      std::uint64_t seed, int count);

/// Corpus index: per page a scan path and one label path per task.
struct CorpusEntry {
    std::string page_id;
    std::string scan_path;
    std::map<std::string, std::string> labels; // task -> path
};

std::vector<CorpusEntry> load_corpus(const std::filesystem::path& path);
void save_corpus(const std::vector<CorpusEntry>& entries,
                 const std::filesystem::path& path);

/// PageLoader over a corpus file with a schema per task (builtin schemas
/// unless schema_file overrides).
PageLoader corpus_loader(const std::filesystem::path& corpus_path,
                         const std::optional<std::filesystem::path>& schema_file);

} // namespace pageseg

#endif
