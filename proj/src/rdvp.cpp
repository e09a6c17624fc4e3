#include "camoseg/rdvp.hpp"

#include <algorithm>
#include <cstdlib>

namespace camoseg
{

void RdvpConfig::validate() const
{
    if (!(threshold > 0.0 && threshold <= 1.0))
        throw ContractViolation("point threshold must lie in (0, 1]");
    if (cap < 1)
        throw ContractViolation("point cap must be at least 1");
    if (spacing < 0)
        throw ContractViolation("point spacing must be non-negative");
}

std::pair<Heatmap, Heatmap> dual_stream_heatmaps(const ImageRef& image, const std::string& fg_text,
                                                 const std::string& bg_text, const HeatmapModel& vlm)
{
    Heatmap fg = vlm_heatmap(vlm, image, fg_text);
    Heatmap bg = vlm_heatmap(vlm, image, bg_text);
    return {std::move(fg), std::move(bg)};
}

PointSelection select_points(const Heatmap& heatmap, const BoundingBox& box, const RdvpConfig& config)
{
    config.validate();
    const NormalizedHeatmap norm = normalize_in_box(heatmap, box);
    if (norm.degenerate)
        return {{}, true};

    struct Candidate
    {
        double value;
        Point p;
    };
    std::vector<Candidate> candidates;
    for (int y = box.y0; y < box.y1; ++y)
        for (int x = box.x0; x < box.x1; ++x)
            if (norm.map(x, y) >= config.threshold)
                candidates.push_back({norm.map(x, y), {x, y}});
    // Raster insertion order + stable sort gives the (y, x) tie-break.
    std::stable_sort(candidates.begin(), candidates.end(),
                     [](const Candidate& a, const Candidate& b) { return a.value > b.value; });

    PointSelection out;
    for (const auto& c : candidates) {
        if (out.points.size() >= config.cap)
            break;
        const bool spaced = std::all_of(out.points.begin(), out.points.end(), [&](Point q) {
            return std::max(std::abs(q.x - c.p.x), std::abs(q.y - c.p.y)) >= config.spacing;
        });
        if (spaced)
            out.points.push_back(c.p);
    }
    return out;
}

VisualPrompt build_visual_prompt(const Heatmap& fg, const Heatmap& bg, const BoundingBox& box,
                                 const RdvpConfig& config)
{
    if (!fg.same_shape(bg))
        throw ContractViolation("build_visual_prompt: heatmap dimensions differ");

    VisualPrompt prompt;
    prompt.box = config.region == RdvpConfig::Region::Global ? full_box(fg) : box;

    PointSelection fg_sel, bg_sel;
    if (config.mode == RdvpConfig::Mode::ConsensusBaseline) {
        Heatmap diff(fg.width(), fg.height());
        for (std::size_t i = 0; i < diff.size(); ++i)
            diff.values()[i] = fg.values()[i] - bg.values()[i];
        fg_sel = select_points(diff, prompt.box, config);
        for (double& v : diff.values())
            v = -v;
        bg_sel = select_points(diff, prompt.box, config);
    } else {
        fg_sel = select_points(fg, prompt.box, config);
        bg_sel = select_points(bg, prompt.box, config);
    }

    auto in = [](const std::vector<Point>& pts, Point p) { return std::find(pts.begin(), pts.end(), p) != pts.end(); };
    for (Point p : fg_sel.points)
        if (!in(bg_sel.points, p))
            prompt.fg_points.push_back(p);
    for (Point p : bg_sel.points)
        if (!in(fg_sel.points, p))
            prompt.bg_points.push_back(p);
    prompt.degenerate_fg = prompt.fg_points.empty();
    prompt.degenerate_bg = prompt.bg_points.empty();
    return prompt;
}

} // namespace camoseg
