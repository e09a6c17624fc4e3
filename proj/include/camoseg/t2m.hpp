// t2m.hpp
//
// Text-to-mask generation: a stage maps (fg text, bg text, box) to a mask
// through point prompts and the segmenter; two stages chain coarse
// (phrases, chain box) into fine (words, box refined from the coarse mask).

#pragma once

#include <optional>
#include <string>

#include "camoseg/backends.hpp"
#include "camoseg/core.hpp"
#include "camoseg/msdcot.hpp"
#include "camoseg/rdvp.hpp"

namespace camoseg
{

enum class StageTag
{
    Coarse,
    Fine
};

const char* to_string(StageTag tag);

struct StageResult
{
    BinaryMask mask;
    BoundingBox box_used;
    VisualPrompt prompt;
    StageTag stage = StageTag::Coarse;
    /// The segmenter was called with the box alone (no foreground points).
    bool box_only = false;
};

struct CoarseToFineConfig
{
    RdvpConfig rdvp;
    bool skip_coarse = false; // run only the word-level stage, on the chain box
    bool skip_fine = false;   // stop after the phrase-level stage
    int refine_margin = 0;    // pixels added around the refined box
};

struct CoarseToFineResult
{
    std::optional<StageResult> coarse;
    std::optional<StageResult> fine;

    /// The fine stage if it ran, else the coarse stage.
    const StageResult& final_stage() const { return fine ? *fine : *coarse; }
};

StageResult run_stage(const ImageRef& image, const std::string& fg_text, const std::string& bg_text,
                      const BoundingBox& box, StageTag tag, const RdvpConfig& config, const HeatmapModel& vlm,
                      const SegmentationModel& vfm);

/// MaxIOUBox of the coarse mask; an empty mask keeps the coarse box.
BoundingBox refine_box(const StageResult& coarse, int margin = 0);

/// With both skip flags set a single word-level stage runs on the chain box.
CoarseToFineResult coarse_to_fine(const ImageRef& image, const TextPromptHierarchy& hierarchy,
                                  const BoundingBox& coarse_box, const CoarseToFineConfig& config,
                                  const HeatmapModel& vlm, const SegmentationModel& vfm);

} // namespace camoseg
