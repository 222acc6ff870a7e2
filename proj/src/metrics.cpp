#include "pageseg/metrics.hpp"

#include "pageseg/errors.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

namespace pageseg {

ConfusionMatrix::ConfusionMatrix(std::size_t class_count)
    : k_(class_count), counts_(class_count * class_count, 0) {
    if (class_count < 1)
        throw InvalidArgumentError("confusion matrix needs >= 1 class");
}

void ConfusionMatrix::accumulate(const IndexedLabelImage& truth,
                                 const IndexedLabelImage& pred) {
    if (!truth.same_dimensions(pred))
        throw DimensionMismatchError(
            "truth " + std::to_string(truth.width()) + "x" +
            std::to_string(truth.height()) + " vs prediction " +
            std::to_string(pred.width()) + "x" + std::to_string(pred.height()));
    if (!(truth.schema() == pred.schema()))
        throw SchemaMismatchError("truth and prediction use different schemas");
    if (truth.schema().class_count() != k_)
        throw SchemaMismatchError("images have " +
                                  std::to_string(truth.schema().class_count()) +
                                  " classes, matrix has " + std::to_string(k_));
    auto t = truth.labels();
    auto p = pred.labels();
    for (std::size_t i = 0; i < t.size(); ++i) counts_[t[i] * k_ + p[i]] += 1;
}

ConfusionMatrix& ConfusionMatrix::operator+=(const ConfusionMatrix& other) {
    if (other.k_ != k_)
        throw SchemaMismatchError("cannot merge confusion matrices of sizes " +
                                  std::to_string(k_) + " and " +
                                  std::to_string(other.k_));
    for (std::size_t i = 0; i < counts_.size(); ++i) counts_[i] += other.counts_[i];
    return *this;
}

std::uint64_t ConfusionMatrix::total() const {
    std::uint64_t s = 0;
    for (std::uint64_t c : counts_) s += c;
    return s;
}

std::uint64_t ConfusionMatrix::diagonal_sum() const {
    std::uint64_t s = 0;
    for (std::size_t i = 0; i < k_; ++i) s += counts_[i * k_ + i];
    return s;
}

std::uint64_t ConfusionMatrix::truth_sum(std::size_t i) const {
    std::uint64_t s = 0;
    for (std::size_t j = 0; j < k_; ++j) s += counts_[i * k_ + j];
    return s;
}

std::uint64_t ConfusionMatrix::predicted_sum(std::size_t i) const {
    std::uint64_t s = 0;
    for (std::size_t j = 0; j < k_; ++j) s += counts_[j * k_ + i];
    return s;
}

namespace {

void require_nonempty(const ConfusionMatrix& cm) {
    if (cm.total() == 0)
        throw EmptyMatrixError("metrics undefined on an empty confusion matrix");
}

double iu_of_class(const ConfusionMatrix& cm, std::size_t i) {
    const double denom = static_cast<double>(cm.truth_sum(i)) +
                         static_cast<double>(cm.predicted_sum(i)) -
                         static_cast<double>(cm.count(i, i));
    return denom > 0.0 ? static_cast<double>(cm.count(i, i)) / denom : 0.0;
}

} // namespace

double pixel_accuracy(const ConfusionMatrix& cm) {
    require_nonempty(cm);
    return static_cast<double>(cm.diagonal_sum()) / static_cast<double>(cm.total());
}

double mean_accuracy(const ConfusionMatrix& cm) {
    require_nonempty(cm);
    double sum = 0.0;
    std::size_t present = 0;
    for (std::size_t i = 0; i < cm.class_count(); ++i) {
        const std::uint64_t t = cm.truth_sum(i);
        if (t == 0) continue;
        sum += static_cast<double>(cm.count(i, i)) / static_cast<double>(t);
        ++present;
    }
    return sum / static_cast<double>(present);
}

double mean_iu(const ConfusionMatrix& cm) {
    require_nonempty(cm);
    double sum = 0.0;
    std::size_t present = 0;
    for (std::size_t i = 0; i < cm.class_count(); ++i) {
        if (cm.truth_sum(i) == 0) continue;
        sum += iu_of_class(cm, i);
        ++present;
    }
    return sum / static_cast<double>(present);
}

double fw_iu(const ConfusionMatrix& cm) {
    require_nonempty(cm);
    double sum = 0.0;
    for (std::size_t i = 0; i < cm.class_count(); ++i)
        sum += static_cast<double>(cm.truth_sum(i)) * iu_of_class(cm, i);
    return sum / static_cast<double>(cm.total());
}

double mcc_multiclass(const ConfusionMatrix& cm) {
    require_nonempty(cm);
    const double s = static_cast<double>(cm.total());
    const double c = static_cast<double>(cm.diagonal_sum());
    double pt = 0.0, pp = 0.0, tt = 0.0;
    for (std::size_t i = 0; i < cm.class_count(); ++i) {
        const double p_i = static_cast<double>(cm.predicted_sum(i));
        const double t_i = static_cast<double>(cm.truth_sum(i));
        pt += p_i * t_i;
        pp += p_i * p_i;
        tt += t_i * t_i;
    }
    const double fp = s * s - pp;
    const double ft = s * s - tt;
    if (fp <= 0.0 || ft <= 0.0) return 0.0;
    return (c * s - pt) / std::sqrt(fp * ft);
}

MetricReport make_report(const ConfusionMatrix& cm) {
    auto scaled = [](double fraction) {
        return std::round(fraction * 10000.0) / 100.0;
    };
    return {scaled(pixel_accuracy(cm)), scaled(mean_accuracy(cm)),
            scaled(mean_iu(cm)), scaled(fw_iu(cm)), scaled(mcc_multiclass(cm))};
}

std::string format_score(double value) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", value);
    return buf;
}

const std::vector<std::string>& metric_names() {
    static const std::vector<std::string> names = {
        "pixel_accuracy", "mean_accuracy", "mean_iu", "fw_iu", "mcc"};
    return names;
}

double metric_value(const MetricReport& report, std::string_view metric) {
    if (metric == "pixel_accuracy") return report.pixel_accuracy;
    if (metric == "mean_accuracy") return report.mean_accuracy;
    if (metric == "mean_iu") return report.mean_iu;
    if (metric == "fw_iu") return report.fw_iu;
    if (metric == "mcc") return report.mcc;
    throw InvalidArgumentError("unknown metric '" + std::string(metric) + "'");
}

RankingTable rank(const std::vector<RankEntry>& entries, std::string_view metric) {
    if (entries.empty())
        throw InvalidArgumentError("ranking requires at least one entry");
    RankingTable table;
    table.metric = metric;
    auto index_of = [](std::vector<std::string>& names, const std::string& name) {
        auto it = std::find(names.begin(), names.end(), name);
        if (it != names.end())
            return static_cast<std::size_t>(it - names.begin());
        names.push_back(name);
        return names.size() - 1;
    };
    for (const RankEntry& e : entries) {
        index_of(table.rows, e.row);
        index_of(table.cols, e.col);
    }
    table.cells.assign(table.rows.size() * table.cols.size(), RankingCell{});
    for (const RankEntry& e : entries) {
        const std::size_t r = index_of(table.rows, e.row);
        const std::size_t c = index_of(table.cols, e.col);
        RankingCell& cell = table.cells[r * table.cols.size() + c];
        cell.present = true;
        cell.failed = !e.ok;
        cell.value = e.ok ? metric_value(e.report, metric) : 0.0;
    }
    for (std::size_t c = 0; c < table.cols.size(); ++c) {
        double best = 0.0;
        bool any = false;
        for (std::size_t r = 0; r < table.rows.size(); ++r) {
            const RankingCell& cell = table.cells[r * table.cols.size() + c];
            if (!cell.present || cell.failed) continue;
            if (!any || cell.value > best) {
                best = cell.value;
                any = true;
            }
        }
        if (!any) continue;
        for (std::size_t r = 0; r < table.rows.size(); ++r) {
            RankingCell& cell = table.cells[r * table.cols.size() + c];
            if (cell.present && !cell.failed && cell.value == best) cell.best = true;
        }
    }
    return table;
}

std::string to_markdown(const RankingTable& table, std::string_view title) {
    std::ostringstream out;
    if (!title.empty()) out << "### " << title << "\n\n";
    out << "| " << table.metric << " |";
    for (const std::string& c : table.cols) out << " " << c << " |";
    out << "\n|---|";
    for (std::size_t c = 0; c < table.cols.size(); ++c) out << "---|";
    out << "\n";
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
        out << "| " << table.rows[r] << " |";
        for (std::size_t c = 0; c < table.cols.size(); ++c) {
            const RankingCell& cell = table.cell(r, c);
            out << " ";
            if (!cell.present)
                out << "-";
            else if (cell.failed)
                out << "FAIL";
            else if (cell.best)
                out << "**" << format_score(cell.value) << "**";
            else
                out << format_score(cell.value);
            out << " |";
        }
        out << "\n";
    }
    return out.str();
}

std::string to_csv(const std::vector<RankEntry>& entries) {
    std::ostringstream out;
    out << "row,col,status,pixel_accuracy,mean_accuracy,mean_iu,fw_iu,mcc\n";
    for (const RankEntry& e : entries) {
        out << e.row << "," << e.col << "," << (e.ok ? "ok" : "failed");
        if (e.ok)
            out << "," << format_score(e.report.pixel_accuracy) << ","
                << format_score(e.report.mean_accuracy) << ","
                << format_score(e.report.mean_iu) << ","
                << format_score(e.report.fw_iu) << "," << format_score(e.report.mcc);
        else
            out << ",,,,,";
        out << "\n";
    }
    return out.str();
}

} // namespace pageseg
