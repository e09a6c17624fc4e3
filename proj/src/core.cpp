#include "camoseg/core.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace camoseg
{

ImageRef::ImageRef(std::string id, int width, int height, std::vector<std::uint8_t> rgb)
    : id_(std::move(id)), width_(width), height_(height)
{
    if (width < 1 || height < 1)
        throw ContractViolation("image dimensions must be positive");
    if (id_.empty())
        throw ContractViolation("image identifier must be nonempty");
    if (rgb.size() != static_cast<std::size_t>(width) * static_cast<std::size_t>(height) * 3)
        throw ContractViolation("rgb buffer size does not match " + std::to_string(width) + "x" +
                                std::to_string(height) + "x3");
    rgb_ = std::make_shared<const std::vector<std::uint8_t>>(std::move(rgb));
}

ImageRef ImageRef::blank(std::string id, int width, int height)
{
    std::vector<std::uint8_t> rgb(static_cast<std::size_t>(std::max(width, 0)) *
                                  static_cast<std::size_t>(std::max(height, 0)) * 3, 0);
    return ImageRef(std::move(id), width, height, std::move(rgb));
}

std::span<const std::uint8_t> ImageRef::rgb() const
{
    if (!rgb_)
        return {};
    return *rgb_;
}

BoundingBox full_box(int width, int height)
{
    return {0, 0, width, height};
}

BoundingBox clamp_box(const RawBox& raw, int width, int height)
{
    auto clip = [](double v, int hi) {
        if (!std::isfinite(v))
            return v > 0 ? hi : 0;
        const double r = std::round(v);
        if (r <= 0)
            return 0;
        if (r >= hi)
            return hi;
        return static_cast<int>(r);
    };
    BoundingBox box{clip(raw.x0, width), clip(raw.y0, height), clip(raw.x1, width), clip(raw.y1, height)};
    if (box.x1 <= box.x0 || box.y1 <= box.y0)
        return full_box(width, height);
    return box;
}

BoundingBox expand_box(const BoundingBox& box, int margin, int width, int height)
{
    return {std::max(0, box.x0 - margin), std::max(0, box.y0 - margin),
            std::min(width, box.x1 + margin), std::min(height, box.y1 + margin)};
}

NormalizedHeatmap normalize_in_box(const Heatmap& heatmap, const BoundingBox& box)
{
    if (!box.valid_for(heatmap.width(), heatmap.height()))
        throw ContractViolation("normalize_in_box: box does not fit the heatmap frame");

    double lo = std::numeric_limits<double>::infinity();
    double hi = -std::numeric_limits<double>::infinity();
    for (int y = box.y0; y < box.y1; ++y)
        for (int x = box.x0; x < box.x1; ++x) {
            lo = std::min(lo, heatmap(x, y));
            hi = std::max(hi, heatmap(x, y));
        }

    NormalizedHeatmap out{Heatmap(heatmap.width(), heatmap.height(), 0.0), false};
    if (!(hi > lo)) {
        out.degenerate = true;
        return out;
    }
    const double range = hi - lo;
    for (int y = box.y0; y < box.y1; ++y)
        for (int x = box.x0; x < box.x1; ++x)
            out.map(x, y) = heatmap(x, y) == hi ? 1.0 : (heatmap(x, y) - lo) / range;
    return out;
}

std::size_t count_foreground(const BinaryMask& mask)
{
    return static_cast<std::size_t>(std::count_if(mask.values().begin(), mask.values().end(),
                                                  [](std::uint8_t v) { return v != 0; }));
}

namespace
{

struct Overlap
{
    long long intersection = 0;
    long long uni = 0;
};

Overlap box_mask_overlap(const BoundingBox& box, const BinaryMask& mask, long long mask_count)
{
    long long inside = 0;
    for (int y = box.y0; y < box.y1; ++y)
        for (int x = box.x0; x < box.x1; ++x)
            inside += mask(x, y) != 0;
    return {inside, box.area() + mask_count - inside};
}

// Tight boxes of the 8-connected components, in raster order of their
// first pixel. Labels horizontal runs and unions runs that touch across rows,
// so no per-pixel neighbourhood walk is needed.
struct Run
{
    int y, x0, x1, parent;
    BoundingBox box; // grows to the component box at roots
};

// Foreground pixels of the runs inside box.
long long runs_in_box(const std::vector<Run>& runs, const BoundingBox& box)
{
    long long n = 0;
    for (const Run& r : runs)
        if (r.y >= box.y0 && r.y < box.y1)
            n += std::max(0, std::min(r.x1, box.x1) - std::max(r.x0, box.x0));
    return n;
}

// Tight boxes of the 8-connected components, in raster order of their
// first pixel. Labels horizontal runs and unions runs that touch across rows,
// so no per-pixel neighbourhood walk is needed.
void component_boxes(const BinaryMask& mask, std::vector<BoundingBox>& boxes, std::vector<Run>& runs)
{
    runs.clear();
    const int w = mask.width(), h = mask.height();
    const std::uint8_t* v = mask.values().data();

    const auto find = [&runs](int i) {
        while (runs[i].parent != i)
            i = runs[i].parent = runs[runs[i].parent].parent;
        return i;
    };
    std::size_t prev_begin = 0, prev_end = 0;
    for (int y = 0; y < h; ++y) {
        const std::uint8_t* row = v + static_cast<std::size_t>(y) * w;
        const std::size_t row_begin = runs.size();
        std::size_t j = prev_begin;
        for (int x = 0; x < w;) {
            if (!row[x]) {
                ++x;
                continue;
            }
            const int xs = x;
            while (x < w && row[x])
                ++x;
            const int id = static_cast<int>(runs.size());
            runs.push_back({y, xs, x, id, {xs, y, x, y + 1}});
            // Runs above touching [xs - 1, x] are 8-connected to this one.
            while (j < prev_end && runs[j].x1 < xs)
                ++j;
            for (std::size_t k = j; k < prev_end && runs[k].x0 <= x; ++k) {
                int a = find(static_cast<int>(k)), b = find(id);
                if (a == b)
                    continue;
                if (b < a)
                    std::swap(a, b);
                // The earlier run stays root so roots keep raster order.
                runs[b].parent = a;
                BoundingBox& ra = runs[a].box;
                const BoundingBox& rb = runs[b].box;
                ra = {std::min(ra.x0, rb.x0), std::min(ra.y0, rb.y0), std::max(ra.x1, rb.x1),
                      std::max(ra.y1, rb.y1)};
            }
        }
        prev_begin = row_begin;
        prev_end = runs.size();
    }
    boxes.clear();
    for (std::size_t i = 0; i < runs.size(); ++i)
        if (runs[i].parent == static_cast<int>(i))
            boxes.push_back(runs[i].box);
}

} // namespace

double iou_box_mask(const BoundingBox& box, const BinaryMask& mask)
{
    if (!box.valid_for(mask.width(), mask.height()))
        throw ContractViolation("iou_box_mask: box does not fit the mask frame");
    const auto o = box_mask_overlap(box, mask, static_cast<long long>(count_foreground(mask)));
    return o.uni == 0 ? 0.0 : static_cast<double>(o.intersection) / static_cast<double>(o.uni);
}

double mask_iou(const BinaryMask& a, const BinaryMask& b)
{
    if (!a.same_shape(b))
        throw ContractViolation("mask_iou: dimension mismatch");
    std::size_t inter = 0, uni = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const bool pa = a.values()[i] != 0, pb = b.values()[i] != 0;
        inter += pa && pb;
        uni += pa || pb;
    }
    return uni == 0 ? 0.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

std::vector<Component> connected_components(const BinaryMask& mask)
{
    std::vector<Component> components;
    Grid<std::uint8_t> seen(mask.width(), mask.height(), 0);
    std::vector<Point> stack;

    for (int y = 0; y < mask.height(); ++y) {
        for (int x = 0; x < mask.width(); ++x) {
            if (!mask(x, y) || seen(x, y))
                continue;
            Component comp;
            comp.box = {x, y, x + 1, y + 1};
            seen(x, y) = 1;
            stack.push_back({x, y});
            while (!stack.empty()) {
                const Point p = stack.back();
                stack.pop_back();
                comp.pixels.push_back(p);
                comp.box.x0 = std::min(comp.box.x0, p.x);
                comp.box.y0 = std::min(comp.box.y0, p.y);
                comp.box.x1 = std::max(comp.box.x1, p.x + 1);
                comp.box.y1 = std::max(comp.box.y1, p.y + 1);
                for (int dy = -1; dy <= 1; ++dy)
                    for (int dx = -1; dx <= 1; ++dx) {
                        const int nx = p.x + dx, ny = p.y + dy;
                        if (nx < 0 || ny < 0 || nx >= mask.width() || ny >= mask.height())
                            continue;
                        if (mask(nx, ny) && !seen(nx, ny)) {
                            seen(nx, ny) = 1;
                            stack.push_back({nx, ny});
                        }
                    }
            }
            std::sort(comp.pixels.begin(), comp.pixels.end(),
                      [](Point a, Point b) { return a.y != b.y ? a.y < b.y : a.x < b.x; });
            components.push_back(std::move(comp));
        }
    }
    return components;
}

BoundingBox tight_box(const BinaryMask& mask)
{
    BoundingBox box{mask.width(), mask.height(), 0, 0};
    for (int y = 0; y < mask.height(); ++y)
        for (int x = 0; x < mask.width(); ++x)
            if (mask(x, y)) {
                box.x0 = std::min(box.x0, x);
                box.y0 = std::min(box.y0, y);
                box.x1 = std::max(box.x1, x + 1);
                box.y1 = std::max(box.y1, y + 1);
            }
    if (box.x1 <= box.x0)
        return {};
    return box;
}

BoundingBox max_iou_box(const BinaryMask& mask)
{
    thread_local std::vector<BoundingBox> candidates;
    thread_local std::vector<Run> runs;
    component_boxes(mask, candidates, runs);
    if (candidates.empty())
        return full_box(mask);

    BoundingBox all = candidates.front();
    for (const auto& b : candidates)
        all = {std::min(all.x0, b.x0), std::min(all.y0, b.y0), std::max(all.x1, b.x1), std::max(all.y1, b.y1)};
    candidates.push_back(all);

    long long count = 0;
    for (const Run& r : runs)
        count += r.x1 - r.x0;
    const auto overlap = [&](const BoundingBox& b) {
        const long long inside = runs_in_box(runs, b);
        return Overlap{inside, b.area() + count - inside};
    };
    BoundingBox best = candidates.front();
    Overlap best_o = overlap(best);
    for (std::size_t i = 1; i < candidates.size(); ++i) {
        const BoundingBox& cand = candidates[i];
        const Overlap o = overlap(cand);
        // Exact rational comparison of intersection / union.
        const long long lhs = o.intersection * best_o.uni;
        const long long rhs = best_o.intersection * o.uni;
        bool better = lhs > rhs;
        if (lhs == rhs) {
            if (cand.area() != best.area())
                better = cand.area() > best.area();
            else
                better = cand.y0 != best.y0 ? cand.y0 < best.y0 : cand.x0 < best.x0;
        }
        if (better) {
            best = cand;
            best_o = o;
        }
    }
    return best;
}

BinaryMask box_mask(const BoundingBox& box, int width, int height)
{
    BinaryMask mask(width, height, 0);
    for (int y = std::max(0, box.y0); y < std::min(height, box.y1); ++y)
        for (int x = std::max(0, box.x0); x < std::min(width, box.x1); ++x)
            mask(x, y) = 1;
    return mask;
}

} // namespace camoseg
