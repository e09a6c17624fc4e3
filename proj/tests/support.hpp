#pragma once

#include <deque>
#include <filesystem>
#include <functional>
#include <mutex>
#include <random>
#include <string>
#include <vector>

#include "camoseg/backends.hpp"
#include "camoseg/core.hpp"

namespace testing
{

using namespace camoseg;

// Rows of '#' (foreground) and '.' (background).
inline BinaryMask mask_from(const std::vector<std::string>& rows)
{
    BinaryMask m(static_cast<int>(rows.at(0).size()), static_cast<int>(rows.size()));
    for (int y = 0; y < m.height(); ++y)
        for (int x = 0; x < m.width(); ++x)
            m(x, y) = rows[static_cast<std::size_t>(y)][static_cast<std::size_t>(x)] == '#' ? 1 : 0;
    return m;
}

inline Heatmap heatmap_from(const std::vector<std::vector<double>>& rows)
{
    Heatmap h(static_cast<int>(rows.at(0).size()), static_cast<int>(rows.size()));
    for (int y = 0; y < h.height(); ++y)
        for (int x = 0; x < h.width(); ++x)
            h(x, y) = rows[static_cast<std::size_t>(y)][static_cast<std::size_t>(x)];
    return h;
}

inline BinaryMask random_mask(std::mt19937_64& rng, int w, int h, double p)
{
    std::bernoulli_distribution coin(p);
    BinaryMask m(w, h);
    for (auto& v : m.values())
        v = coin(rng) ? 1 : 0;
    return m;
}

inline Heatmap random_heatmap(std::mt19937_64& rng, int w, int h)
{
    std::uniform_real_distribution<double> u(0.0, 1.0);
    Heatmap out(w, h);
    for (auto& v : out.values())
        v = u(rng);
    return out;
}

// Replays canned answers in order and records every question it was asked
// together with the number of turns already in the session.
class ScriptedMllm final : public MultimodalModel
{
  public:
    explicit ScriptedMllm(std::vector<std::string> replies) : replies_(replies.begin(), replies.end()) {}

    std::string complete(const ChatSession& session, const std::string& question) const override
    {
        std::lock_guard lock(mutex_);
        asked_.push_back(question);
        turns_seen_.push_back(session.turns().size());
        if (replies_.empty())
            throw BackendUnavailable("script exhausted", question);
        std::string r = replies_.front();
        replies_.pop_front();
        return r;
    }

    std::vector<std::string> asked() const
    {
        std::lock_guard lock(mutex_);
        return asked_;
    }
    std::vector<std::size_t> turns_seen() const
    {
        std::lock_guard lock(mutex_);
        return turns_seen_;
    }

  private:
    mutable std::mutex mutex_;
    mutable std::deque<std::string> replies_;
    mutable std::vector<std::string> asked_;
    mutable std::vector<std::size_t> turns_seen_;
};

class FixedHeatmaps final : public HeatmapModel
{
  public:
    std::function<Heatmap(const ImageRef&, const std::string&)> fn;
    Heatmap heatmap(const ImageRef& image, const std::string& text) const override { return fn(image, text); }
};

class FixedSegmenter final : public SegmentationModel
{
  public:
    std::function<BinaryMask(const ImageRef&, std::span<const Point>, std::span<const Point>, const BoundingBox&)> fn;
    BinaryMask segment(const ImageRef& image, std::span<const Point> fg, std::span<const Point> bg,
                       const BoundingBox& box) const override
    {
        return fn(image, fg, bg, box);
    }
};

// Fresh directory under the system temp dir, removed on destruction.
class TempDir
{
  public:
    explicit TempDir(const std::string& tag)
    {
        static std::mt19937_64 rng(std::random_device{}());
        path_ = std::filesystem::temp_directory_path() / ("camoseg_" + tag + "_" + std::to_string(rng()));
        std::filesystem::create_directories(path_);
    }
    ~TempDir()
    {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;
    const std::filesystem::path& path() const { return path_; }
    std::filesystem::path operator/(const std::string& leaf) const { return path_ / leaf; }

  private:
    std::filesystem::path path_;
};

} // namespace testing
