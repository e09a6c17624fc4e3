// backends.hpp
//
// Interfaces to the three frozen models the pipeline drives:
//   * a multimodal chat model answering image-grounded questions,
//   * a vision-language model turning text into a per-pixel relevance map,
//   * a promptable segmenter mapping points + box to a mask.
//
// Implementations live in synthetic.hpp (deterministic offline oracles) and
// remote.hpp (HTTP clients).

#pragma once

#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "camoseg/core.hpp"

namespace camoseg
{

/// A model endpoint could not be reached (after retries) or refused the call.
class BackendUnavailable : public std::runtime_error
{
  public:
    BackendUnavailable(const std::string& what, std::string failed_request = {})
        : std::runtime_error(what), failed_request_(std::move(failed_request))
    {
    }
    /// The question (or prompt text) whose request failed, if any.
    const std::string& failed_request() const { return failed_request_; }

  private:
    std::string failed_request_;
};

/// A model endpoint answered with a malformed or mis-shaped payload.
class ProtocolError : public std::runtime_error
{
  public:
    using std::runtime_error::runtime_error;
};

struct ChatTurn
{
    std::string role; // "user" or "assistant"
    std::string text;
};

/// Accumulating multi-turn context with one image bound at construction.
class ChatSession
{
  public:
    explicit ChatSession(ImageRef image);

    const ImageRef& image() const { return image_; }
    const std::vector<ChatTurn>& turns() const { return turns_; }
    /// Completed question/answer pairs.
    std::size_t exchanges() const { return turns_.size() / 2; }

    void record(std::string question, std::string answer);

  private:
    ImageRef image_;
    std::vector<ChatTurn> turns_;
};

class MultimodalModel
{
  public:
    virtual ~MultimodalModel() = default;
    /// Answers `question` given the session's image and prior turns.
    virtual std::string complete(const ChatSession& session, const std::string& question) const = 0;
};

class HeatmapModel
{
  public:
    virtual ~HeatmapModel() = default;
    virtual Heatmap heatmap(const ImageRef& image, const std::string& text) const = 0;
};

class SegmentationModel
{
  public:
    virtual ~SegmentationModel() = default;
    virtual BinaryMask segment(const ImageRef& image, std::span<const Point> fg, std::span<const Point> bg,
                               const BoundingBox& box) const = 0;
};

struct Backends
{
    std::shared_ptr<const MultimodalModel> mllm;
    std::shared_ptr<const HeatmapModel> vlm;
    std::shared_ptr<const SegmentationModel> vfm;
};

struct BackendConfig
{
    enum class Kind
    {
        Synthetic,
        Remote
    };

    Kind kind = Kind::Synthetic;
    std::string endpoint;
    std::string model;
    double timeout_seconds = 120.0;
    int retries = 2;
    /// Clients that cannot take concurrent requests set this; callers then
    /// wrap them with serialize_access().
    bool serialized = false;

    void validate() const;
};

// Default model names sent to remote backends.
inline constexpr std::string_view kDefaultMllmModel = "LLaVA-1.5-13B";
inline constexpr std::string_view kDefaultVlmModel = "CS-ViT-L/14@336px";
inline constexpr std::string_view kDefaultVfmModel = "HQ-SAM ViT-H";

/// Asks the session's image a question and appends the exchange.
std::string mllm_ask(const MultimodalModel& mllm, ChatSession& session, const std::string& question);

/// Validated heatmap call: nonempty text, image-sized finite output.
Heatmap vlm_heatmap(const HeatmapModel& vlm, const ImageRef& image, const std::string& text);

/// Validated segmentation call: points inside the box, image-sized output.
BinaryMask vfm_segment(const SegmentationModel& vfm, const ImageRef& image, std::span<const Point> fg,
                       std::span<const Point> bg, const BoundingBox& box);

/// Mutex adaptors for backends declared `serialized`.
std::shared_ptr<const MultimodalModel> serialize_access(std::shared_ptr<const MultimodalModel> inner);
std::shared_ptr<const HeatmapModel> serialize_access(std::shared_ptr<const HeatmapModel> inner);
std::shared_ptr<const SegmentationModel> serialize_access(std::shared_ptr<const SegmentationModel> inner);

} // namespace camoseg
