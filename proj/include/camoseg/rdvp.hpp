// rdvp.hpp
//
// Turns a pair of text prompts into point prompts: one heatmap per stream,
// min-max normalization restricted to a box, and thresholded selection of
// the most confident pixels inside that box.

#pragma once

#include <cstddef>
#include <limits>
#include <utility>
#include <vector>

#include "camoseg/backends.hpp"
#include "camoseg/core.hpp"

namespace camoseg
{

struct RdvpConfig
{
    enum class Mode
    {
        DualStream,       // independent fg / bg maps
        ConsensusBaseline // single fg - bg map (ablation)
    };
    enum class Region
    {
        BoxConstrained,
        Global // select over the full image (ablation)
    };

    static constexpr std::size_t kUncapped = std::numeric_limits<std::size_t>::max();

    double threshold = 0.9;
    std::size_t cap = 3;
    int spacing = 5;
    Mode mode = Mode::DualStream;
    Region region = Region::BoxConstrained;

    void validate() const;
};

struct PointSelection
{
    std::vector<Point> points;
    bool degenerate = false;
};

struct VisualPrompt
{
    std::vector<Point> fg_points;
    std::vector<Point> bg_points;
    BoundingBox box;
    bool degenerate_fg = false;
    bool degenerate_bg = false;
};

/// One VLM call per stream; the two maps are never fused here.
std::pair<Heatmap, Heatmap> dual_stream_heatmaps(const ImageRef& image, const std::string& fg_text,
                                                 const std::string& bg_text, const HeatmapModel& vlm);

/// Pixels whose in-box normalized value reaches the threshold, in descending
/// value order (ties by row, then column), thinned greedily so kept points
/// are at least `spacing` apart in Chebyshev distance, up to `cap` points.
PointSelection select_points(const Heatmap& heatmap, const BoundingBox& box, const RdvpConfig& config);

/// Selects both streams and drops pixels chosen by both. In consensus mode
/// the streams come from (fg - bg) and (bg - fg); in global mode the box is
/// widened to the full image first.
VisualPrompt build_visual_prompt(const Heatmap& fg, const Heatmap& bg, const BoundingBox& box,
                                 const RdvpConfig& config);

} // namespace camoseg
