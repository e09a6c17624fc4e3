// Straight transcription of the published Matlab evaluation scripts
// (StructureMeasure.m / Emeasure.m), written against plain row-major vectors
// so it shares no code with the library. Used as an oracle in tests.

#pragma once

#include <cmath>
#include <vector>

namespace reference
{

struct Map
{
    int rows = 0;
    int cols = 0;
    std::vector<double> v; // row-major
    double operator()(int r, int c) const { return v[static_cast<std::size_t>(r * cols + c)]; }
};

constexpr double kEps = 2.220446049250313e-16;

inline double mean_of(const std::vector<double>& xs)
{
    double s = 0;
    for (double x : xs)
        s += x;
    return s / static_cast<double>(xs.size());
}

inline double std_of(const std::vector<double>& xs)
{
    if (xs.size() < 2)
        return 0.0;
    const double m = mean_of(xs);
    double s = 0;
    for (double x : xs)
        s += (x - m) * (x - m);
    return std::sqrt(s / static_cast<double>(xs.size() - 1));
}

// Object.m
inline double object_score(const std::vector<double>& values)
{
    if (values.empty())
        return 0.0;
    const double x = mean_of(values);
    const double sigma = std_of(values);
    return 2.0 * x / (x * x + 1.0 + sigma + kEps);
}

// S_object.m
inline double s_object(const Map& pred, const Map& gt)
{
    std::vector<double> fg, bg;
    double u = 0;
    for (std::size_t i = 0; i < gt.v.size(); ++i) {
        if (gt.v[i] > 0.5) {
            fg.push_back(pred.v[i]);
            u += 1;
        } else {
            bg.push_back(1.0 - pred.v[i]);
        }
    }
    u /= static_cast<double>(gt.v.size());
    return u * object_score(fg) + (1.0 - u) * object_score(bg);
}

// ssim.m
inline double ssim(const std::vector<double>& p, const std::vector<double>& g)
{
    const double n = static_cast<double>(p.size());
    const double x = mean_of(p), y = mean_of(g);
    double sx = 0, sy = 0, sxy = 0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        sx += (p[i] - x) * (p[i] - x);
        sy += (g[i] - y) * (g[i] - y);
        sxy += (p[i] - x) * (g[i] - y);
    }
    sx /= n - 1 + kEps;
    sy /= n - 1 + kEps;
    sxy /= n - 1 + kEps;
    const double a = 4 * x * y * sxy;
    const double b = (x * x + y * y) * (sx + sy);
    if (a != 0)
        return a / (b + kEps);
    if (a == 0 && b == 0)
        return 1.0;
    return 0.0;
}

// S_region.m with centroid.m and divideGT.m / Divideprediction.m. Rows and
// columns are 1-based as in the original; a quadrant of zero size
// contributes nothing.
inline double s_region(const Map& pred, const Map& gt)
{
    double total = 0, xs = 0, ys = 0;
    for (int r = 1; r <= gt.rows; ++r)
        for (int c = 1; c <= gt.cols; ++c)
            if (gt(r - 1, c - 1) > 0.5) {
                total += 1;
                xs += c;
                ys += r;
            }
    int X, Y;
    if (total == 0) {
        X = static_cast<int>(std::round(gt.cols / 2.0));
        Y = static_cast<int>(std::round(gt.rows / 2.0));
    } else {
        X = static_cast<int>(std::round(xs / total));
        Y = static_cast<int>(std::round(ys / total));
    }
    const double area = static_cast<double>(gt.rows) * gt.cols;
    const double w1 = static_cast<double>(X) * Y / area;
    const double w2 = static_cast<double>(gt.cols - X) * Y / area;
    const double w3 = static_cast<double>(X) * (gt.rows - Y) / area;
    const double w4 = 1 - w1 - w2 - w3;

    auto block = [&](int r0, int r1, int c0, int c1) { // inclusive 1-based
        std::vector<double> p, g;
        for (int r = r0; r <= r1; ++r)
            for (int c = c0; c <= c1; ++c) {
                p.push_back(pred(r - 1, c - 1));
                g.push_back(gt(r - 1, c - 1));
            }
        return p.empty() ? 0.0 : ssim(p, g);
    };
    return w1 * block(1, Y, 1, X) + w2 * block(1, Y, X + 1, gt.cols) + w3 * block(Y + 1, gt.rows, 1, X) +
           w4 * block(Y + 1, gt.rows, X + 1, gt.cols);
}

// StructureMeasure.m
inline double structure_measure(const Map& pred, const Map& gt)
{
    const double y = mean_of(gt.v);
    if (y == 0)
        return 1.0 - mean_of(pred.v);
    if (y == 1)
        return mean_of(pred.v);
    const double q = 0.5 * s_object(pred, gt) + 0.5 * s_region(pred, gt);
    return q < 0 ? 0.0 : q;
}

// Emeasure.m on binary maps, normalized by the pixel count.
inline double enhanced_measure(const Map& fm, const Map& gt)
{
    const std::size_t n = gt.v.size();
    double gt_sum = 0;
    for (double g : gt.v)
        gt_sum += g > 0.5 ? 1 : 0;
    std::vector<double> enhanced(n);
    if (gt_sum == 0) {
        for (std::size_t i = 0; i < n; ++i)
            enhanced[i] = 1.0 - (fm.v[i] > 0.5 ? 1 : 0);
    } else if (gt_sum == static_cast<double>(n)) {
        for (std::size_t i = 0; i < n; ++i)
            enhanced[i] = fm.v[i] > 0.5 ? 1 : 0;
    } else {
        std::vector<double> f(n), g(n);
        for (std::size_t i = 0; i < n; ++i) {
            f[i] = fm.v[i] > 0.5 ? 1 : 0;
            g[i] = gt.v[i] > 0.5 ? 1 : 0;
        }
        const double mf = mean_of(f), mg = mean_of(g);
        for (std::size_t i = 0; i < n; ++i) {
            const double a = f[i] - mf, b = g[i] - mg;
            const double align = 2 * b * a / (b * b + a * a + 1e-8);
            enhanced[i] = (align + 1) * (align + 1) / 4;
        }
    }
    double s = 0;
    for (double e : enhanced)
        s += e;
    return s / static_cast<double>(n);
}

} // namespace reference
