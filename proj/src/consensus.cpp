#include "camoseg/consensus.hpp"

#include <chrono>
#include <cstdlib>

#include "camoseg/parallel.hpp"

namespace camoseg
{

ConsensusResult select_consistent_mask(std::span<const BinaryMask> masks)
{
    if (masks.empty())
        throw ContractViolation("select_consistent_mask: no masks");
    for (const auto& m : masks)
        if (!m.same_shape(masks.front()))
            throw ContractViolation("select_consistent_mask: mask dimensions differ");

    const auto count = static_cast<long long>(masks.size());
    const std::size_t pixels = masks.front().size();
    std::vector<long long> sum(pixels, 0);
    for (const auto& m : masks)
        for (std::size_t p = 0; p < pixels; ++p)
            sum[p] += m.values()[p] != 0;

    // Scaled by I the distances are integers: I * |M - S/I| = |I*M - S|.
    std::vector<long long> scaled(masks.size(), 0);
    for (std::size_t i = 0; i < masks.size(); ++i)
        for (std::size_t p = 0; p < pixels; ++p)
            scaled[i] += std::llabs(count * (masks[i].values()[p] != 0) - sum[p]);

    ConsensusResult out;
    for (std::size_t i = 0; i < masks.size(); ++i) {
        out.distances.push_back(static_cast<double>(scaled[i]) / static_cast<double>(count));
        if (scaled[i] < scaled[out.selected])
            out.selected = i;
    }
    out.mask = masks[out.selected];
    return out;
}

void PipelineConfig::validate() const
{
    if (repetitions < 1)
        throw ContractViolation("repetition count must be at least 1");
    prompts.validate();
    templates.validate();
    stages.rdvp.validate();
    if (stages.refine_margin < 0)
        throw ContractViolation("refine margin must be non-negative");
}

RepetitionOutcome run_repetition(const ImageRef& image, std::size_t index, const PipelineConfig& config,
                                 const Backends& backends)
{
    const auto start = std::chrono::steady_clock::now();
    RepetitionOutcome out;
    out.index = index;
    out.prompt = config.prompts.for_repetition(index);
    try {
        MsdCotResult chain = config.direct_keywords
                                 ? run_direct_keywords(image, config.templates, out.prompt, *backends.mllm)
                                 : run_msdcot(image, config.templates, out.prompt, *backends.mllm);
        out.hierarchy = chain.hierarchy;
        out.coarse_box = chain.coarse_box;
        out.box_fallback = chain.box_fallback;
        out.exchanges = chain.session.exchanges();
        out.stages = coarse_to_fine(image, chain.hierarchy, chain.coarse_box, config.stages, *backends.vlm,
                                    *backends.vfm);
    } catch (const ChainError& e) {
        out.error = e.what();
    } catch (const BackendUnavailable& e) {
        out.error = e.what();
    } catch (const ProtocolError& e) {
        out.error = e.what();
    }
    out.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return out;
}

PipelineResult run_pipeline(const ImageRef& image, const PipelineConfig& config, const Backends& backends)
{
    config.validate();
    const auto start = std::chrono::steady_clock::now();

    PipelineResult result;
    result.prompts_cycled = config.prompts.synonyms.size() < config.repetitions;
    result.repetitions.resize(config.repetitions);
    parallel_for(config.repetitions, config.parallelism, [&](std::size_t i) {
        result.repetitions[i] = run_repetition(image, i, config, backends);
    });

    std::vector<BinaryMask> masks;
    for (const auto& rep : result.repetitions)
        if (rep.ok()) {
            masks.push_back(rep.stages->final_stage().mask);
            result.consensus_members.push_back(rep.index);
        }
    if (masks.empty()) {
        std::string detail;
        for (const auto& rep : result.repetitions)
            detail += "\n  repetition " + std::to_string(rep.index) + ": " + rep.error.value_or("?");
        throw PipelineError("all repetitions failed for image '" + image.id() + "':" + detail,
                            std::move(result.repetitions));
    }

    result.consensus = select_consistent_mask(masks);
    result.selected_repetition = result.consensus_members[result.consensus.selected];
    result.mask = result.consensus.mask;
    result.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return result;
}

} // namespace camoseg
