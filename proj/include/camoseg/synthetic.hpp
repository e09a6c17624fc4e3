// synthetic.hpp
//
// Deterministic stand-ins for the three model backends. Every answer is a
// function of a SyntheticScene (planted object layout + vocabulary + noise
// level + seed), so complete pipeline runs can be checked offline against a
// known ground truth.
//
// Scene model
// -----------
// A scene plants 1-3 disjoint blob components (the camouflaged object) in a
// frame. It may also carry decoy blobs: regions outside the object's box
// that the segmenter treats as segmentable and that draw a weaker response
// from the object text. Decoys are never part of the ground truth.
//
//   object text       soft indicator of every planted component (peak 1 at
//                     each component's core), decoys at `decoy_strength`
//   environment text  saturating distance-to-object ramp outside the object;
//                     `leakage` on object pixels (camouflage)
//   anything else     flat zero
//
// All three are perturbed by a spatially smooth noise field of amplitude
// `noise`, seeded by (scene seed, prompt text).
//
// Look-alike surround: background pixels of the object's box grown by
// `surround_margin`. When enabled (margin >= 0), a point-prompted segmentation
// spills into the surround unless some background point lies inside it;
// negatives sampled far from the object do not tell the segmenter where the
// object ends.

#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <set>
#include <string>
#include <vector>

#include "camoseg/backends.hpp"
#include "camoseg/core.hpp"

namespace camoseg
{

struct SyntheticScene
{
    std::string id;
    int width = 0;
    int height = 0;
    /// 0 = background; 1..planted_count = planted components; larger labels
    /// are decoys.
    Grid<std::uint8_t> labels;
    int planted_count = 0;

    std::string object_word;
    std::string object_phrase;
    std::string environment_word;
    std::string environment_phrase;

    double noise = 0.0;
    std::uint64_t seed = 0;

    double decoy_strength = 0.85;
    double leakage = 0.3;
    /// Negative disables the surround.
    int surround_margin = -1;

    /// Planted object pixels (the ground truth).
    BinaryMask region() const;
    BoundingBox region_box() const;
    /// Look-alike surround (empty when disabled).
    BinaryMask surround() const;
    int decoy_count() const;
    bool is_planted(std::uint8_t label) const { return label >= 1 && label <= planted_count; }

    /// Throws ContractViolation when a field breaks the scene invariants.
    void validate() const;
};

struct SceneOptions
{
    int min_side = 80;
    int max_side = 128;
    double min_area_fraction = 0.02;
    double max_area_fraction = 0.30;
    int max_components = 3;
    int max_decoys = 2;
    double decoy_strength = 0.85;
    double leakage = 0.3;
    int surround_margin = 2;
};

/// Builds a random scene; identical (id, seed, noise, options) give identical
/// scenes.
SyntheticScene generate_scene(std::string id, std::uint64_t seed, double noise, const SceneOptions& options = {});

/// RGB rendering of a scene (object and decoys tinted close to the backdrop).
ImageRef render_scene(const SyntheticScene& scene);

/// Thread-safe lookup of scenes by image identifier, with the per-scene base
/// heatmaps precomputed on insertion.
class SceneRegistry
{
  public:
    void add(SyntheticScene scene);
    bool contains(const std::string& id) const;
    /// Throws BackendUnavailable for unknown identifiers.
    const SyntheticScene& scene(const std::string& id) const;
    const Heatmap& object_map(const std::string& id) const;
    const Heatmap& environment_map(const std::string& id) const;
    std::size_t size() const { return entries_.size(); }

  private:
    struct Entry
    {
        SyntheticScene scene;
        Heatmap object_map;
        Heatmap environment_map;
    };
    const Entry& entry(const std::string& id) const;

    std::map<std::string, Entry> entries_;
};

struct SyntheticMllmOptions
{
    /// Reply to the box question with text holding no coordinates.
    bool suppress_box = false;
    /// Questions containing any of these substrings raise BackendUnavailable.
    std::vector<std::string> fail_when_question_contains;
    /// Reword the phrase reply per question, standing in for sampling
    /// variability across repetitions.
    bool vary_phrasing = true;
};

class SyntheticMllm final : public MultimodalModel
{
  public:
    SyntheticMllm(std::shared_ptr<const SceneRegistry> registry, SyntheticMllmOptions options = {});
    std::string complete(const ChatSession& session, const std::string& question) const override;

  private:
    std::shared_ptr<const SceneRegistry> registry_;
    SyntheticMllmOptions options_;
};

class SyntheticVlm final : public HeatmapModel
{
  public:
    explicit SyntheticVlm(std::shared_ptr<const SceneRegistry> registry);
    Heatmap heatmap(const ImageRef& image, const std::string& text) const override;

  private:
    std::shared_ptr<const SceneRegistry> registry_;
};

/// Returns the union of segmentable regions holding at least one foreground
/// point and no background point, clipped to the box, plus the scene's
/// surround when no background point falls inside it. Without any points it
/// returns every planted component that meets the box, clipped to the box.
class SyntheticVfm final : public SegmentationModel
{
  public:
    explicit SyntheticVfm(std::shared_ptr<const SceneRegistry> registry);
    BinaryMask segment(const ImageRef& image, std::span<const Point> fg, std::span<const Point> bg,
                       const BoundingBox& box) const override;

  private:
    std::shared_ptr<const SceneRegistry> registry_;
};

Backends make_synthetic_backends(std::shared_ptr<const SceneRegistry> registry, SyntheticMllmOptions options = {});

/// Portable 64-bit FNV-1a, used to derive per-prompt seeds.
std::uint64_t fnv1a(std::string_view text, std::uint64_t basis = 0xcbf29ce484222325ull);

} // namespace camoseg
