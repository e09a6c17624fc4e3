// consensus.hpp
//
// Runs I independent repetitions of (question chain -> coarse-to-fine) on one
// image, each under a different task-generic synonym, and keeps the mask
// closest to the repetitions' pixel-wise mean.

#pragma once

#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "camoseg/backends.hpp"
#include "camoseg/msdcot.hpp"
#include "camoseg/t2m.hpp"

namespace camoseg
{

struct ConsensusResult
{
    std::size_t selected = 0;
    BinaryMask mask;
    /// L1 distance of each input mask to the mean mask.
    std::vector<double> distances;
};

/// argmin_i sum_p |M_i(p) - mean(p)|, lowest index on ties. Throws
/// ContractViolation on an empty list or mismatched dimensions.
ConsensusResult select_consistent_mask(std::span<const BinaryMask> masks);

struct PipelineConfig
{
    std::size_t repetitions = 3;
    TaskGenericPrompt prompts;
    QueryTemplates templates;
    CoarseToFineConfig stages;
    /// Replace the four-step chain with caption -> keywords (ablation).
    bool direct_keywords = false;
    /// Repetitions run concurrently on up to this many threads.
    std::size_t parallelism = 1;

    void validate() const;
};

struct RepetitionOutcome
{
    std::size_t index = 0;
    std::string prompt;
    TextPromptHierarchy hierarchy;
    BoundingBox coarse_box;
    bool box_fallback = false;
    std::size_t exchanges = 0;
    std::optional<CoarseToFineResult> stages;
    /// Set instead of `stages` when the repetition failed.
    std::optional<std::string> error;
    double seconds = 0.0;

    bool ok() const { return stages.has_value(); }
};

struct PipelineResult
{
    BinaryMask mask;
    std::vector<RepetitionOutcome> repetitions;
    /// Distances and selection are over the successful repetitions only;
    /// `selected_repetition` maps back to the repetition index.
    ConsensusResult consensus;
    std::size_t selected_repetition = 0;
    std::vector<std::size_t> consensus_members;
    bool prompts_cycled = false;
    double seconds = 0.0;
};

/// Every repetition of an image failed.
class PipelineError : public std::runtime_error
{
  public:
    PipelineError(const std::string& what, std::vector<RepetitionOutcome> outcomes)
        : std::runtime_error(what), outcomes_(std::move(outcomes))
    {
    }
    const std::vector<RepetitionOutcome>& outcomes() const { return outcomes_; }

  private:
    std::vector<RepetitionOutcome> outcomes_;
};

RepetitionOutcome run_repetition(const ImageRef& image, std::size_t index, const PipelineConfig& config,
                                 const Backends& backends);

PipelineResult run_pipeline(const ImageRef& image, const PipelineConfig& config, const Backends& backends);

} // namespace camoseg
