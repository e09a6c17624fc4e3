#include "camoseg/backends.hpp"

#include <cmath>
#include <mutex>

namespace camoseg
{

ChatSession::ChatSession(ImageRef image) : image_(std::move(image))
{
    if (image_.width() < 1 || image_.id().empty())
        throw ContractViolation("chat session needs a bound image");
}

void ChatSession::record(std::string question, std::string answer)
{
    turns_.push_back({"user", std::move(question)});
    turns_.push_back({"assistant", std::move(answer)});
}

void BackendConfig::validate() const
{
    if (!(timeout_seconds > 0))
        throw ContractViolation("backend timeout must be positive");
    if (retries < 0)
        throw ContractViolation("backend retry count must be non-negative");
    if (kind == Kind::Remote && endpoint.empty())
        throw ContractViolation("remote backend needs an endpoint");
}

std::string mllm_ask(const MultimodalModel& mllm, ChatSession& session, const std::string& question)
{
    std::string answer = mllm.complete(session, question);
    session.record(question, answer);
    return answer;
}

Heatmap vlm_heatmap(const HeatmapModel& vlm, const ImageRef& image, const std::string& text)
{
    if (text.empty())
        throw ContractViolation("vlm_heatmap: text prompt must be nonempty");
    Heatmap h = vlm.heatmap(image, text);
    if (h.width() != image.width() || h.height() != image.height())
        throw ProtocolError("heatmap is " + std::to_string(h.width()) + "x" + std::to_string(h.height()) +
                            ", image is " + std::to_string(image.width()) + "x" + std::to_string(image.height()));
    for (double v : h.values())
        if (!std::isfinite(v))
            throw ProtocolError("heatmap contains non-finite values");
    return h;
}

BinaryMask vfm_segment(const SegmentationModel& vfm, const ImageRef& image, std::span<const Point> fg,
                       std::span<const Point> bg, const BoundingBox& box)
{
    if (!box.valid_for(image.width(), image.height()))
        throw ContractViolation("vfm_segment: box outside the image frame");
    for (auto pts : {fg, bg})
        for (Point p : pts)
            if (!box.contains(p))
                throw ContractViolation("vfm_segment: prompt point outside the box");
    BinaryMask m = vfm.segment(image, fg, bg, box);
    if (m.width() != image.width() || m.height() != image.height())
        throw ProtocolError("mask is " + std::to_string(m.width()) + "x" + std::to_string(m.height()) +
                            ", image is " + std::to_string(image.width()) + "x" + std::to_string(image.height()));
    return m;
}

namespace
{

class SerializedMllm final : public MultimodalModel
{
  public:
    explicit SerializedMllm(std::shared_ptr<const MultimodalModel> inner) : inner_(std::move(inner)) {}
    std::string complete(const ChatSession& session, const std::string& question) const override
    {
        std::lock_guard lock(mutex_);
        return inner_->complete(session, question);
    }

  private:
    std::shared_ptr<const MultimodalModel> inner_;
    mutable std::mutex mutex_;
};

class SerializedVlm final : public HeatmapModel
{
  public:
    explicit SerializedVlm(std::shared_ptr<const HeatmapModel> inner) : inner_(std::move(inner)) {}
    Heatmap heatmap(const ImageRef& image, const std::string& text) const override
    {
        std::lock_guard lock(mutex_);
        return inner_->heatmap(image, text);
    }

  private:
    std::shared_ptr<const HeatmapModel> inner_;
    mutable std::mutex mutex_;
};

class SerializedVfm final : public SegmentationModel
{
  public:
    explicit SerializedVfm(std::shared_ptr<const SegmentationModel> inner) : inner_(std::move(inner)) {}
    BinaryMask segment(const ImageRef& image, std::span<const Point> fg, std::span<const Point> bg,
                       const BoundingBox& box) const override
    {
        std::lock_guard lock(mutex_);
        return inner_->segment(image, fg, bg, box);
    }

  private:
    std::shared_ptr<const SegmentationModel> inner_;
    mutable std::mutex mutex_;
};

} // namespace

std::shared_ptr<const MultimodalModel> serialize_access(std::shared_ptr<const MultimodalModel> inner)
{
    return std::make_shared<SerializedMllm>(std::move(inner));
}

std::shared_ptr<const HeatmapModel> serialize_access(std::shared_ptr<const HeatmapModel> inner)
{
    return std::make_shared<SerializedVlm>(std::move(inner));
}

std::shared_ptr<const SegmentationModel> serialize_access(std::shared_ptr<const SegmentationModel> inner)
{
    return std::make_shared<SerializedVfm>(std::move(inner));
}

} // namespace camoseg
