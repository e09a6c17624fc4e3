// remote.hpp
//
// HTTP clients for externally hosted models. Wire shapes (JSON bodies):
//
//   MLLM  POST {model, messages: [{role, content: [{type: "image", data: <b64 png>} |
//                                                  {type: "text", text}]}]}
//         -> {text}
//         The full session history is re-sent on every call; the image rides
//         on the first user message.
//   VLM   POST {image: <b64 png>, text} -> {width, height, values: [row-major floats]}
//         Grids coarser than the image are bilinearly upsampled.
//   VFM   POST {image: <b64 png>, fg_points: [[x, y]...], bg_points: [[x, y]...],
//               box: [x0, y0, x1, y1]} -> {width, height, mask: [row-major 0/1]}
//
// Endpoints default to $CAMOSEG_MLLM_ENDPOINT, $CAMOSEG_VLM_ENDPOINT and
// $CAMOSEG_VFM_ENDPOINT; $CAMOSEG_API_KEY, when set, is sent as a bearer
// token.

#pragma once

#include <string>

#include <json.hpp>

#include "camoseg/backends.hpp"

namespace camoseg
{

std::string base64_encode(std::span<const std::uint8_t> bytes);
std::string encode_png_base64(const ImageRef& image);

nlohmann::json mllm_request_body(const std::string& model, const ChatSession& session, const std::string& question);
nlohmann::json vlm_request_body(const ImageRef& image, const std::string& text);
nlohmann::json vfm_request_body(const ImageRef& image, std::span<const Point> fg, std::span<const Point> bg,
                                const BoundingBox& box);

/// Decodes a VLM reply and resamples it to the image frame.
Heatmap decode_vlm_reply(const nlohmann::json& reply, int width, int height);
BinaryMask decode_vfm_reply(const nlohmann::json& reply, int width, int height);

/// Bilinear resampling with half-pixel centers.
Heatmap resize_bilinear(const Heatmap& grid, int width, int height);

class RemoteMllm final : public MultimodalModel
{
  public:
    explicit RemoteMllm(BackendConfig config);
    std::string complete(const ChatSession& session, const std::string& question) const override;

  private:
    BackendConfig config_;
};

class RemoteVlm final : public HeatmapModel
{
  public:
    explicit RemoteVlm(BackendConfig config);
    Heatmap heatmap(const ImageRef& image, const std::string& text) const override;

  private:
    BackendConfig config_;
};

class RemoteVfm final : public SegmentationModel
{
  public:
    explicit RemoteVfm(BackendConfig config);
    BinaryMask segment(const ImageRef& image, std::span<const Point> fg, std::span<const Point> bg,
                       const BoundingBox& box) const override;

  private:
    BackendConfig config_;
};

/// Fills empty endpoints from the environment and model names from the
/// defaults; wraps clients whose config is `serialized` in a mutex.
Backends make_remote_backends(BackendConfig mllm, BackendConfig vlm, BackendConfig vfm);

} // namespace camoseg
