#pragma once

#include <filesystem>
#include <string>

#include "camoseg/core.hpp"
#include "camoseg/rdvp.hpp"

namespace camoseg
{

/// Reads any OpenCV-decodable image as RGB. Throws std::runtime_error when
/// the file cannot be decoded.
ImageRef load_image(const std::filesystem::path& path, std::string id);

/// 8-bit grayscale mask, foreground where value >= threshold.
BinaryMask load_mask(const std::filesystem::path& path, int threshold = 128);

/// 8-bit grayscale map scaled to [0, 1].
Heatmap load_soft_map(const std::filesystem::path& path);

void write_image(const std::filesystem::path& path, const ImageRef& image);
/// Single-channel 8-bit PNG with values {0, 255}.
void write_mask(const std::filesystem::path& path, const BinaryMask& mask);
/// Single-channel 8-bit PNG, values rounded from [0, 1].
void write_soft_map(const std::filesystem::path& path, const Heatmap& map);

struct OverlayStage
{
    BoundingBox box;
    VisualPrompt prompt;
};

/// Image with the mask tinted green, stage boxes outlined (coarse yellow,
/// fine white), foreground points red and background points blue.
void write_overlay(const std::filesystem::path& path, const ImageRef& image, const BinaryMask& mask,
                   const std::vector<OverlayStage>& stages);

} // namespace camoseg
