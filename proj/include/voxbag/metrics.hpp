#ifndef VOXBAG_METRICS_HPP_
#define VOXBAG_METRICS_HPP_

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <iomanip>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "voxbag/error.hpp"

namespace voxbag {

/// 2x2 confusion counts; the positive class is SCZ (label 1).
struct ConfusionMatrix {
    std::uint64_t tp = 0, fp = 0, fn = 0, tn = 0;

    std::uint64_t total() const { return tp + fp + fn + tn; }
};

inline ConfusionMatrix confusion(const std::vector<int>& predictions, const std::vector<int>& labels) {
    if (predictions.size() != labels.size())
        throw Error(Errc::config, "confusion: predictions and labels differ in length");
    if (predictions.empty()) throw Error(Errc::config, "confusion: empty input");
    ConfusionMatrix cm;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] != 0 && labels[i] != 1)
            throw Error(Errc::config, "confusion: labels must be 0 or 1");
        const bool pos = predictions[i] == 1;
        const bool truth = labels[i] == 1;
        if (pos && truth)
            ++cm.tp;
        else if (pos && !truth)
            ++cm.fp;
        else if (!pos && truth)
            ++cm.fn;
        else
            ++cm.tn;
    }
    return cm;
}

/// The seven scalar metrics, all fractions in [0,1]. A zero denominator
/// yields 0 for that metric and sets the degenerate flag.
struct MetricsReport {
    double accuracy = 0, sensitivity = 0, specificity = 0, precision = 0;
    double recall = 0, f1 = 0, gmean = 0;
    bool degenerate = false;
};

inline MetricsReport metrics(const ConfusionMatrix& cm) {
    if (cm.total() == 0) throw Error(Errc::config, "metrics: all-zero confusion matrix");
    MetricsReport r;
    auto frac = [&r](std::uint64_t num, std::uint64_t den) {
        if (den == 0) {
            r.degenerate = true;
            return 0.0;
        }
        return static_cast<double>(num) / static_cast<double>(den);
    };
    r.accuracy = frac(cm.tp + cm.tn, cm.total());
    r.sensitivity = frac(cm.tp, cm.tp + cm.fn);
    r.specificity = frac(cm.tn, cm.tn + cm.fp);
    r.precision = frac(cm.tp, cm.tp + cm.fp);
    r.recall = r.sensitivity;
    r.f1 = (r.precision + r.recall) > 0.0
               ? 2.0 * r.precision * r.recall / (r.precision + r.recall)
               : (r.degenerate = true, 0.0);
    r.gmean = std::sqrt(r.sensitivity * r.specificity);
    return r;
}

// ---- ROC ------------------------------------------------------------------

struct RocPoint {
    double fpr = 0, tpr = 0;
    double threshold = 0;
};

struct RocCurve {
    std::vector<RocPoint> points;  // starts at (0,0), ends at (1,1)
    double auc = 0;
};

/// ROC sweep over the distinct scores in descending order (with a +inf
/// sentinel); a prediction is positive when score >= threshold. Tied
/// scores collapse to one point. AUC by the trapezoidal rule.
inline RocCurve roc_curve(const std::vector<double>& scores, const std::vector<int>& labels) {
    if (scores.size() != labels.size())
        throw Error(Errc::config, "roc_curve: scores and labels differ in length");
    std::uint64_t pos = 0, neg = 0;
    for (int l : labels) (l == 1 ? pos : neg)++;
    if (pos == 0 || neg == 0)
        throw Error(Errc::config, "roc_curve: need at least one positive and one negative label");

    std::vector<std::size_t> order(scores.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (scores[a] != scores[b]) return scores[a] > scores[b];
        return a < b;
    });

    RocCurve roc;
    roc.points.push_back({0.0, 0.0, std::numeric_limits<double>::infinity()});
    std::uint64_t tp = 0, fp = 0;
    std::size_t i = 0;
    while (i < order.size()) {
        const double s = scores[order[i]];
        while (i < order.size() && scores[order[i]] == s) {
            (labels[order[i]] == 1 ? tp : fp)++;
            ++i;
        }
        roc.points.push_back({static_cast<double>(fp) / static_cast<double>(neg),
                              static_cast<double>(tp) / static_cast<double>(pos), s});
    }

    double auc = 0.0;
    for (std::size_t p = 1; p < roc.points.size(); ++p) {
        const auto& a = roc.points[p - 1];
        const auto& b = roc.points[p];
        auc += (b.fpr - a.fpr) * (a.tpr + b.tpr) * 0.5;
    }
    roc.auc = auc;
    return roc;
}

// ---- report rendering -------------------------------------------------------

struct NamedReport {
    std::string name;
    MetricsReport report;
};

namespace detail {

// round half away from zero at the given number of decimals
inline double round_away(double v, int decimals) {
    const double s = std::pow(10.0, decimals);
    return (v >= 0 ? std::floor(v * s + 0.5) : std::ceil(v * s - 0.5)) / s;
}

inline std::string pct(double fraction) {
    std::ostringstream os;
    os << std::fixed << std::setprecision(2) << round_away(fraction * 100.0, 2);
    return os.str();
}

inline std::string frac6(double fraction) {
    std::ostringstream os;
    os << std::fixed << std::setprecision(6) << round_away(fraction, 6);
    return os.str();
}

}  // namespace detail

/// Fixed-order comparison table, percentages with 2 decimals.
inline std::string render_table(const std::vector<NamedReport>& reports) {
    if (reports.empty()) throw Error(Errc::config, "render_table: no reports");
    std::ostringstream os;
    os << std::left << std::setw(22) << "Classifier" << std::right << std::setw(9) << "Accuracy"
       << std::setw(13) << "Sensitivity" << std::setw(13) << "Specificity" << std::setw(11)
       << "Precision" << std::setw(8) << "Recall" << std::setw(11) << "F-measure" << std::setw(8)
       << "G-mean" << "\n";
    for (const auto& nr : reports) {
        const auto& r = nr.report;
        os << std::left << std::setw(22) << nr.name << std::right << std::setw(9)
           << detail::pct(r.accuracy) << std::setw(13) << detail::pct(r.sensitivity) << std::setw(13)
           << detail::pct(r.specificity) << std::setw(11) << detail::pct(r.precision) << std::setw(8)
           << detail::pct(r.recall) << std::setw(11) << detail::pct(r.f1) << std::setw(8)
           << detail::pct(r.gmean) << "\n";
    }
    return os.str();
}

/// CSV record: classifier,accuracy,sensitivity,specificity,precision,recall,f1,gmean
/// as fractions with 6 decimals.
inline std::string render_csv(const std::vector<NamedReport>& reports) {
    if (reports.empty()) throw Error(Errc::config, "render_csv: no reports");
    std::ostringstream os;
    os << "classifier,accuracy,sensitivity,specificity,precision,recall,f1,gmean\n";
    for (const auto& nr : reports) {
        const auto& r = nr.report;
        os << nr.name << "," << detail::frac6(r.accuracy) << "," << detail::frac6(r.sensitivity) << ","
           << detail::frac6(r.specificity) << "," << detail::frac6(r.precision) << ","
           << detail::frac6(r.recall) << "," << detail::frac6(r.f1) << "," << detail::frac6(r.gmean)
           << "\n";
    }
    return os.str();
}

/// JSON record carrying the same values as the CSV (6-decimal rounding).
inline nlohmann::json render_json(const std::vector<NamedReport>& reports) {
    if (reports.empty()) throw Error(Errc::config, "render_json: no reports");
    nlohmann::json arr = nlohmann::json::array();
    auto r6 = [](double v) { return detail::round_away(v, 6); };
    for (const auto& nr : reports) {
        const auto& r = nr.report;
        arr.push_back({{"classifier", nr.name},
                       {"accuracy", r6(r.accuracy)},
                       {"sensitivity", r6(r.sensitivity)},
                       {"specificity", r6(r.specificity)},
                       {"precision", r6(r.precision)},
                       {"recall", r6(r.recall)},
                       {"f1", r6(r.f1)},
                       {"gmean", r6(r.gmean)},
                       {"degenerate", r.degenerate}});
    }
    return arr;
}

inline std::string render_roc_csv(const RocCurve& roc) {
    std::ostringstream os;
    os << "fpr,tpr,threshold\n";
    os << std::setprecision(17);
    for (const auto& p : roc.points) os << p.fpr << "," << p.tpr << "," << p.threshold << "\n";
    return os.str();
}

}  // namespace voxbag

#endif  // VOXBAG_METRICS_HPP_
