// core.hpp
//
// Pixel grids, boxes and the heatmap/box/mask arithmetic shared by every
// stage of the pipeline.

#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace camoseg
{

/// Thrown when a caller breaks an operation's precondition (mismatched
/// dimensions, invalid box, empty input list).
class ContractViolation : public std::invalid_argument
{
  public:
    using std::invalid_argument::invalid_argument;
};

struct Point
{
    int x = 0;
    int y = 0;

    friend bool operator==(const Point&, const Point&) = default;
};

/// Axis-aligned pixel box covering [x0, x1) x [y0, y1).
struct BoundingBox
{
    int x0 = 0;
    int y0 = 0;
    int x1 = 0;
    int y1 = 0;

    int width() const { return x1 - x0; }
    int height() const { return y1 - y0; }
    long long area() const
    {
        return x1 > x0 && y1 > y0 ? static_cast<long long>(width()) * height() : 0;
    }
    bool contains(Point p) const { return p.x >= x0 && p.x < x1 && p.y >= y0 && p.y < y1; }
    bool contains(const BoundingBox& other) const
    {
        return other.x0 >= x0 && other.y0 >= y0 && other.x1 <= x1 && other.y1 <= y1;
    }
    bool valid_for(int frame_width, int frame_height) const
    {
        return 0 <= x0 && x0 < x1 && x1 <= frame_width && 0 <= y0 && y0 < y1 && y1 <= frame_height;
    }

    friend bool operator==(const BoundingBox&, const BoundingBox&) = default;
};

/// Unvalidated box coordinates as they come out of a parser or a model.
struct RawBox
{
    double x0 = 0;
    double y0 = 0;
    double x1 = 0;
    double y1 = 0;
};

/// Row-major 2D grid.
template <typename T>
class Grid
{
  public:
    Grid() = default;
    Grid(int width, int height, T fill = T{})
        : width_(width), height_(height)
    {
        if (width < 0 || height < 0)
            throw ContractViolation("grid dimensions must be non-negative");
        values_.assign(static_cast<std::size_t>(width) * static_cast<std::size_t>(height), fill);
    }

    int width() const { return width_; }
    int height() const { return height_; }
    std::size_t size() const { return values_.size(); }
    bool empty() const { return values_.empty(); }

    T& operator()(int x, int y) { return values_[index(x, y)]; }
    const T& operator()(int x, int y) const { return values_[index(x, y)]; }
    T& at(Point p) { return (*this)(p.x, p.y); }
    const T& at(Point p) const { return (*this)(p.x, p.y); }

    std::span<T> values() { return values_; }
    std::span<const T> values() const { return values_; }

    template <typename U>
    bool same_shape(const Grid<U>& other) const
    {
        return width_ == other.width() && height_ == other.height();
    }

    friend bool operator==(const Grid&, const Grid&) = default;

  private:
    std::size_t index(int x, int y) const
    {
        return static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) + static_cast<std::size_t>(x);
    }

    int width_ = 0;
    int height_ = 0;
    std::vector<T> values_;
};

using Heatmap = Grid<double>;
/// Pixel values are 0 or 1.
using BinaryMask = Grid<std::uint8_t>;

/// An input image: interleaved 8-bit RGB plus a run-unique identifier
/// (normally the file stem). Pixel storage is shared between copies.
class ImageRef
{
  public:
    ImageRef() = default;
    ImageRef(std::string id, int width, int height, std::vector<std::uint8_t> rgb);
    /// Blank (black) image, for callers that only need a frame and an id.
    static ImageRef blank(std::string id, int width, int height);

    const std::string& id() const { return id_; }
    int width() const { return width_; }
    int height() const { return height_; }
    std::span<const std::uint8_t> rgb() const;

  private:
    std::string id_;
    int width_ = 0;
    int height_ = 0;
    std::shared_ptr<const std::vector<std::uint8_t>> rgb_;
};

BoundingBox full_box(int width, int height);

template <typename T>
BoundingBox full_box(const Grid<T>& grid)
{
    return full_box(grid.width(), grid.height());
}

/// Clips raw coordinates (rounded to the nearest pixel) to the frame. A
/// result with zero area becomes the full-image box.
BoundingBox clamp_box(const RawBox& raw, int width, int height);

/// Grows a box by `margin` pixels on each side, clipped to the frame.
BoundingBox expand_box(const BoundingBox& box, int margin, int width, int height);

struct NormalizedHeatmap
{
    Heatmap map;
    /// Set when max == min inside the box; the in-box values are then all 0.
    bool degenerate = false;
};

/// Min-max rescales the values inside `box` to [0, 1] using the in-box
/// extrema only. Everything outside the box is 0.
NormalizedHeatmap normalize_in_box(const Heatmap& heatmap, const BoundingBox& box);

/// IoU between the filled box and the mask's foreground pixels. 0 when both
/// are empty.
double iou_box_mask(const BoundingBox& box, const BinaryMask& mask);

/// IoU between two masks as pixel sets. 0 when both are empty.
double mask_iou(const BinaryMask& a, const BinaryMask& b);

struct Component
{
    std::vector<Point> pixels; // raster order
    BoundingBox box;           // tight box
};

/// 8-connected foreground components, ordered by their first pixel in
/// raster order.
std::vector<Component> connected_components(const BinaryMask& mask);

/// Tight box of all foreground pixels; zero-area box when the mask is empty.
BoundingBox tight_box(const BinaryMask& mask);

std::size_t count_foreground(const BinaryMask& mask);

/// Picks the candidate box with the highest IoU against the mask. Candidates
/// are the tight box of each 8-connected component plus the tight box of all
/// foreground. Ties go to the larger box, then to the smaller (y0, x0). An
/// empty mask yields the full-image box.
BoundingBox max_iou_box(const BinaryMask& mask);

/// Fills the box region of a frame-sized mask.
BinaryMask box_mask(const BoundingBox& box, int width, int height);

} // namespace camoseg
