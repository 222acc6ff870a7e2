#ifndef PAGESEG_METRICS_HPP
#define PAGESEG_METRICS_HPP

#include "pageseg/image.hpp"

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace pageseg {

/// K x K pixel tallies; counts[truth][predicted]. Supports merge-by-addition
/// so per-page matrices can be accumulated in any order with identical sums.
class ConfusionMatrix {
public:
    explicit ConfusionMatrix(std::size_t class_count);

    std::size_t class_count() const { return k_; }
    std::uint64_t count(std::size_t truth, std::size_t predicted) const {
        return counts_[truth * k_ + predicted];
    }
    void add(std::size_t truth, std::size_t predicted, std::uint64_t n = 1) {
        counts_[truth * k_ + predicted] += n;
    }

    /// Tallies one (truth, prediction) image pair. Both must share
    /// dimensions and schema, and the schema must match this matrix size.
    void accumulate(const IndexedLabelImage& truth, const IndexedLabelImage& pred);

    ConfusionMatrix& operator+=(const ConfusionMatrix& other);

    std::uint64_t total() const;
    std::uint64_t diagonal_sum() const;
    std::uint64_t truth_sum(std::size_t i) const;     // row: pixels of true class i
    std::uint64_t predicted_sum(std::size_t i) const; // column: predicted as i

private:
    std::size_t k_;
    std::vector<std::uint64_t> counts_;
};

// The five Table-style scores as fractions (accuracies/IU in [0,1], MCC in
// [-1,1]). All throw EmptyMatrixError on an empty matrix.
double pixel_accuracy(const ConfusionMatrix& cm);
double mean_accuracy(const ConfusionMatrix& cm); // classes absent from truth excluded
double mean_iu(const ConfusionMatrix& cm);
double fw_iu(const ConfusionMatrix& cm);

/// Multi-class Matthews correlation coefficient:
///   (c*s - sum_k p_k*t_k) / sqrt((s^2 - sum p_k^2) * (s^2 - sum t_k^2))
/// with c the diagonal sum, s the total, p_k/t_k the predicted/true class
/// sums. Returns 0 when either factor under the root is 0.
double mcc_multiclass(const ConfusionMatrix& cm);

/// Scores in reporting form: x100, rounded to 2 decimals.
struct MetricReport {
    double pixel_accuracy = 0.0;
    double mean_accuracy = 0.0;
    double mean_iu = 0.0;
    double fw_iu = 0.0;
    double mcc = 0.0;

    bool operator==(const MetricReport&) const = default;
};

MetricReport make_report(const ConfusionMatrix& cm);

/// "12.34" formatting used in all reports.
std::string format_score(double value);

const std::vector<std::string>& metric_names();
double metric_value(const MetricReport& report, std::string_view metric);

/// One (row, column) result feeding a ranking table; rows are predictors,
/// columns are tiling configurations.
struct RankEntry {
    std::string row;
    std::string col;
    MetricReport report;
    bool ok = true;        // false marks a failed run
    std::string error;
};

struct RankingCell {
    bool present = false;
    bool failed = false;
    double value = 0.0;
    bool best = false;
};

/// Row/column order follows first appearance in the input. Per-column best
/// cells are flagged on the rounded values; ties flag every tied cell.
struct RankingTable {
    std::string metric;
    std::vector<std::string> rows;
    std::vector<std::string> cols;
    std::vector<RankingCell> cells; // row-major

    const RankingCell& cell(std::size_t r, std::size_t c) const {
        return cells[r * cols.size() + c];
    }
};

RankingTable rank(const std::vector<RankEntry>& entries,
                  std::string_view metric = "mcc");

/// Markdown grid with per-column best values in bold; failed cells show
/// "FAIL", missing cells "-".
std::string to_markdown(const RankingTable& table, std::string_view title = "");

/// Long-form CSV of every entry with all five scores.
std::string to_csv(const std::vector<RankEntry>& entries);

} // namespace pageseg

#endif
