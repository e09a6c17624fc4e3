#include "camoseg/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <iomanip>
#include <map>
#include <sstream>

namespace camoseg
{

namespace
{

// Matlab's eps, as used by the reference S-measure code.
constexpr double kMatlabEps = 2.220446049250313e-16;
constexpr double kAlignEps = 1e-8;

void require_same_shape(const auto& a, const auto& b, const char* what)
{
    if (!a.same_shape(b))
        throw ContractViolation(std::string(what) + ": prediction and ground truth dimensions differ");
    if (a.empty())
        throw ContractViolation(std::string(what) + ": empty maps");
}

struct Moments
{
    double mean = 0;
    double sample_std = 0;
};

// Mean and N-1 standard deviation of `value(p)` over pixels where
// `select(p)` holds.
template <typename Select, typename Value>
Moments moments(std::size_t n, Select select, Value value)
{
    double sum = 0;
    std::size_t count = 0;
    for (std::size_t p = 0; p < n; ++p)
        if (select(p)) {
            sum += value(p);
            ++count;
        }
    if (count == 0)
        return {};
    const double mean = sum / static_cast<double>(count);
    double sq = 0;
    for (std::size_t p = 0; p < n; ++p)
        if (select(p))
            sq += (value(p) - mean) * (value(p) - mean);
    return {mean, count > 1 ? std::sqrt(sq / static_cast<double>(count - 1)) : 0.0};
}

double object_similarity(const Moments& m)
{
    return 2.0 * m.mean / (m.mean * m.mean + 1.0 + m.sample_std + kMatlabEps);
}

double s_object(const Heatmap& pred, const BinaryMask& gt)
{
    const auto p = pred.values();
    const auto g = gt.values();
    const double u = static_cast<double>(count_foreground(gt)) / static_cast<double>(g.size());
    const Moments fg = moments(g.size(), [&](std::size_t i) { return g[i] != 0; }, [&](std::size_t i) { return p[i]; });
    const Moments bg =
        moments(g.size(), [&](std::size_t i) { return g[i] == 0; }, [&](std::size_t i) { return 1.0 - p[i]; });
    return u * object_similarity(fg) + (1.0 - u) * object_similarity(bg);
}

double quadrant_ssim(const Heatmap& pred, const BinaryMask& gt, int x0, int y0, int x1, int y1)
{
    const double n = static_cast<double>(x1 - x0) * static_cast<double>(y1 - y0);
    double sx = 0, sy = 0;
    for (int y = y0; y < y1; ++y)
        for (int x = x0; x < x1; ++x) {
            sx += pred(x, y);
            sy += gt(x, y);
        }
    const double mx = sx / n, my = sy / n;
    double vx = 0, vy = 0, cxy = 0;
    for (int y = y0; y < y1; ++y)
        for (int x = x0; x < x1; ++x) {
            const double dx = pred(x, y) - mx, dy = gt(x, y) - my;
            vx += dx * dx;
            vy += dy * dy;
            cxy += dx * dy;
        }
    const double denom = n - 1.0 + kMatlabEps;
    vx /= denom;
    vy /= denom;
    cxy /= denom;
    const double alpha = 4.0 * mx * my * cxy;
    const double beta = (mx * mx + my * my) * (vx + vy);
    if (alpha != 0)
        return alpha / (beta + kMatlabEps);
    return beta == 0 ? 1.0 : 0.0;
}

double s_region(const Heatmap& pred, const BinaryMask& gt)
{
    const int w = gt.width(), h = gt.height();
    // 1-based centroid, rounded half away from zero.
    double total = 0, sx = 0, sy = 0;
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            if (gt(x, y)) {
                total += 1;
                sx += x + 1;
                sy += y + 1;
            }
    const int cx = static_cast<int>(std::round(sx / total));
    const int cy = static_cast<int>(std::round(sy / total));

    const double area = static_cast<double>(w) * h;
    const double w1 = static_cast<double>(cx) * cy / area;
    const double w2 = static_cast<double>(w - cx) * cy / area;
    const double w3 = static_cast<double>(cx) * (h - cy) / area;
    const double w4 = 1.0 - w1 - w2 - w3;

    // A quadrant with no pixels has zero weight; skip it.
    auto part = [&](double weight, int x0, int y0, int x1, int y1) {
        return (x1 > x0 && y1 > y0) ? weight * quadrant_ssim(pred, gt, x0, y0, x1, y1) : 0.0;
    };
    return part(w1, 0, 0, cx, cy) + part(w2, cx, 0, w, cy) + part(w3, 0, cy, cx, h) + part(w4, cx, cy, w, h);
}

} // namespace

Heatmap to_soft(const BinaryMask& mask)
{
    Heatmap out(mask.width(), mask.height());
    for (std::size_t i = 0; i < mask.size(); ++i)
        out.values()[i] = mask.values()[i] != 0 ? 1.0 : 0.0;
    return out;
}

double mae(const Heatmap& pred, const BinaryMask& gt)
{
    require_same_shape(pred, gt, "mae");
    double sum = 0;
    for (std::size_t i = 0; i < gt.size(); ++i)
        sum += std::abs(pred.values()[i] - (gt.values()[i] != 0 ? 1.0 : 0.0));
    return sum / static_cast<double>(gt.size());
}

double mae(const BinaryMask& pred, const BinaryMask& gt)
{
    return mae(to_soft(pred), gt);
}

double s_measure(const Heatmap& pred, const BinaryMask& gt, double alpha)
{
    require_same_shape(pred, gt, "s_measure");
    const double n = static_cast<double>(gt.size());
    const double y = static_cast<double>(count_foreground(gt)) / n;
    double pred_mean = 0;
    for (double v : pred.values())
        pred_mean += v;
    pred_mean /= n;
    if (y == 0)
        return 1.0 - pred_mean;
    if (y == 1)
        return pred_mean;
    const double q = alpha * s_object(pred, gt) + (1.0 - alpha) * s_region(pred, gt);
    return std::max(0.0, q);
}

double adaptive_f_measure(const Heatmap& pred, const BinaryMask& gt, double beta2)
{
    require_same_shape(pred, gt, "adaptive_f_measure");
    double mean = 0;
    for (double v : pred.values())
        mean += v;
    mean /= static_cast<double>(pred.size());
    const double threshold = std::min(2.0 * mean, 1.0);

    std::size_t tp = 0, predicted = 0, positives = 0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        // A map with no positive value predicts no foreground at all.
        const bool p = pred.values()[i] >= threshold && pred.values()[i] > 0;
        const bool g = gt.values()[i] != 0;
        tp += p && g;
        predicted += p;
        positives += g;
    }
    if (tp == 0)
        return 0.0;
    const double precision = static_cast<double>(tp) / static_cast<double>(predicted);
    const double recall = static_cast<double>(tp) / static_cast<double>(positives);
    const double denom = beta2 * precision + recall;
    return denom == 0 ? 0.0 : (1.0 + beta2) * precision * recall / denom;
}

double e_measure(const BinaryMask& pred, const BinaryMask& gt)
{
    require_same_shape(pred, gt, "e_measure");
    const std::size_t n = gt.size();
    const std::size_t gt_fg = count_foreground(gt);
    double sum = 0;
    if (gt_fg == 0) {
        for (std::size_t i = 0; i < n; ++i)
            sum += pred.values()[i] != 0 ? 0.0 : 1.0;
    } else if (gt_fg == n) {
        for (std::size_t i = 0; i < n; ++i)
            sum += pred.values()[i] != 0 ? 1.0 : 0.0;
    } else {
        const double mu_pred = static_cast<double>(count_foreground(pred)) / static_cast<double>(n);
        const double mu_gt = static_cast<double>(gt_fg) / static_cast<double>(n);
        for (std::size_t i = 0; i < n; ++i) {
            const double bp = (pred.values()[i] != 0 ? 1.0 : 0.0) - mu_pred;
            const double bg = (gt.values()[i] != 0 ? 1.0 : 0.0) - mu_gt;
            const double align = 2.0 * bg * bp / (bg * bg + bp * bp + kAlignEps);
            sum += (align + 1.0) * (align + 1.0) / 4.0;
        }
    }
    return sum / static_cast<double>(n);
}

double mean_e_measure(const Heatmap& pred, const BinaryMask& gt)
{
    require_same_shape(pred, gt, "mean_e_measure");
    BinaryMask binary(pred.width(), pred.height());
    double total = 0;
    for (int k = 0; k < 256; ++k) {
        const double t = k / 255.0;
        for (std::size_t i = 0; i < pred.size(); ++i)
            binary.values()[i] = pred.values()[i] >= t ? 1 : 0;
        total += e_measure(binary, gt);
    }
    return total / 256.0;
}

MetricRow evaluate_pair(const std::string& id, const Heatmap& pred, const BinaryMask& gt,
                        const EvaluationOptions& options)
{
    require_same_shape(pred, gt, id.c_str());
    MetricRow row;
    row.id = id;
    row.s_alpha = s_measure(pred, gt);
    row.f_beta = adaptive_f_measure(pred, gt);
    row.mae = mae(pred, gt);
    if (options.sweep_e_measure) {
        row.e_m = mean_e_measure(pred, gt);
    } else {
        BinaryMask binary(pred.width(), pred.height());
        for (std::size_t i = 0; i < pred.size(); ++i)
            binary.values()[i] = pred.values()[i] >= 0.5 ? 1 : 0;
        row.e_m = e_measure(binary, gt);
    }
    return row;
}

MetricRow mean_row(const std::vector<MetricRow>& rows)
{
    MetricRow mean;
    mean.id = "mean";
    if (rows.empty())
        return mean;
    for (const auto& r : rows) {
        mean.s_alpha += r.s_alpha;
        mean.f_beta += r.f_beta;
        mean.mae += r.mae;
        mean.e_m += r.e_m;
    }
    const double n = static_cast<double>(rows.size());
    mean.s_alpha /= n;
    mean.f_beta /= n;
    mean.mae /= n;
    mean.e_m /= n;
    return mean;
}

MetricReport evaluate_pairs(const std::vector<std::pair<std::string, Heatmap>>& preds,
                            const std::vector<std::pair<std::string, BinaryMask>>& gts,
                            const EvaluationOptions& options)
{
    std::map<std::string, const BinaryMask*> by_id;
    for (const auto& [id, gt] : gts)
        if (!by_id.emplace(id, &gt).second)
            throw ContractViolation("duplicate ground-truth identifier '" + id + "'");
    if (preds.size() != gts.size())
        throw ContractViolation("evaluate_pairs: " + std::to_string(preds.size()) + " predictions vs " +
                                std::to_string(gts.size()) + " ground truths");

    MetricReport report;
    for (const auto& [id, pred] : preds) {
        const auto it = by_id.find(id);
        if (it == by_id.end())
            throw ContractViolation("no ground truth for prediction '" + id + "'");
        report.rows.push_back(evaluate_pair(id, pred, *it->second, options));
    }
    std::sort(report.rows.begin(), report.rows.end(), [](const auto& a, const auto& b) { return a.id < b.id; });
    for (std::size_t i = 1; i < report.rows.size(); ++i)
        if (report.rows[i].id == report.rows[i - 1].id)
            throw ContractViolation("duplicate prediction identifier '" + report.rows[i].id + "'");
    report.mean = mean_row(report.rows);
    return report;
}

std::string format_score(double value)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3f", value);
    std::string s = buf;
    if (s.rfind("0.", 0) == 0)
        s.erase(0, 1);
    else if (s.rfind("-0.", 0) == 0)
        s.erase(1, 1);
    return s;
}

namespace
{

std::string full_precision(double v)
{
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

} // namespace

std::string render_csv(const MetricReport& report)
{
    std::ostringstream out;
    out << "id,s_alpha,f_beta,mae,e_m\n";
    auto line = [&](const MetricRow& r) {
        out << r.id << ',' << full_precision(r.s_alpha) << ',' << full_precision(r.f_beta) << ','
            << full_precision(r.mae) << ',' << full_precision(r.e_m) << '\n';
    };
    for (const auto& r : report.rows)
        line(r);
    line(report.mean);
    return out.str();
}

MetricReport parse_csv(const std::string& text)
{
    MetricReport report;
    std::istringstream in(text);
    std::string line;
    bool header = true;
    while (std::getline(in, line)) {
        if (line.empty())
            continue;
        if (header) {
            header = false;
            continue;
        }
        std::istringstream fields(line);
        MetricRow r;
        std::string cell;
        std::getline(fields, r.id, ',');
        double* slots[] = {&r.s_alpha, &r.f_beta, &r.mae, &r.e_m};
        for (double* slot : slots) {
            if (!std::getline(fields, cell, ','))
                throw std::runtime_error("report row has too few columns: " + line);
            *slot = std::stod(cell);
        }
        if (r.id == "mean")
            report.mean = r;
        else
            report.rows.push_back(r);
    }
    return report;
}

std::string render_markdown(const MetricReport& report, const std::string& title)
{
    std::size_t width = 4;
    for (const auto& r : report.rows)
        width = std::max(width, r.id.size());
    std::ostringstream out;
    if (!title.empty())
        out << "### " << title << "\n\n";
    auto row = [&](const std::string& id, const std::string& a, const std::string& b, const std::string& c,
                   const std::string& d) {
        out << "| " << std::left << std::setw(static_cast<int>(width)) << id << " | " << std::setw(7) << a << " | "
            << std::setw(7) << b << " | " << std::setw(7) << c << " | " << std::setw(7) << d << " |\n";
    };
    row("id", "S_alpha", "F_beta", "MAE", "E_m");
    out << "|" << std::string(width + 2, '-') << "|---------|---------|---------|---------|\n";
    for (const auto& r : report.rows)
        row(r.id, format_score(r.s_alpha), format_score(r.f_beta), format_score(r.mae), format_score(r.e_m));
    row("mean", format_score(report.mean.s_alpha), format_score(report.mean.f_beta), format_score(report.mean.mae),
        format_score(report.mean.e_m));
    return out.str();
}

} // namespace camoseg
