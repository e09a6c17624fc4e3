#include "camoseg/t2m.hpp"

namespace camoseg
{

const char* to_string(StageTag tag)
{
    return tag == StageTag::Coarse ? "coarse" : "fine";
}

StageResult run_stage(const ImageRef& image, const std::string& fg_text, const std::string& bg_text,
                      const BoundingBox& box, StageTag tag, const RdvpConfig& config, const HeatmapModel& vlm,
                      const SegmentationModel& vfm)
{
    if (!box.valid_for(image.width(), image.height()))
        throw ContractViolation(std::string(to_string(tag)) + " stage: box outside the image frame");
    const std::string where = std::string(to_string(tag)) + " stage: ";
    try {
        const auto [fg_map, bg_map] = dual_stream_heatmaps(image, fg_text, bg_text, vlm);
        StageResult result;
        result.stage = tag;
        result.prompt = build_visual_prompt(fg_map, bg_map, box, config);
        result.box_used = result.prompt.box;
        if (result.prompt.degenerate_fg) {
            result.box_only = true;
            result.mask = vfm_segment(vfm, image, {}, {}, result.box_used);
        } else {
            result.mask = vfm_segment(vfm, image, result.prompt.fg_points, result.prompt.bg_points, result.box_used);
        }
        return result;
    } catch (const BackendUnavailable& e) {
        throw BackendUnavailable(where + e.what(), e.failed_request());
    } catch (const ProtocolError& e) {
        throw ProtocolError(where + e.what());
    }
}

BoundingBox refine_box(const StageResult& coarse, int margin)
{
    if (count_foreground(coarse.mask) == 0)
        return coarse.box_used;
    const BoundingBox box = max_iou_box(coarse.mask);
    return margin > 0 ? expand_box(box, margin, coarse.mask.width(), coarse.mask.height()) : box;
}

CoarseToFineResult coarse_to_fine(const ImageRef& image, const TextPromptHierarchy& hierarchy,
                                  const BoundingBox& coarse_box, const CoarseToFineConfig& config,
                                  const HeatmapModel& vlm, const SegmentationModel& vfm)
{
    CoarseToFineResult out;
    if (config.skip_coarse) {
        out.fine = run_stage(image, hierarchy.fg_word, hierarchy.bg_word, coarse_box, StageTag::Fine, config.rdvp,
                             vlm, vfm);
        return out;
    }
    out.coarse = run_stage(image, hierarchy.fg_phrase, hierarchy.bg_phrase, coarse_box, StageTag::Coarse,
                           config.rdvp, vlm, vfm);
    if (config.skip_fine)
        return out;
    const BoundingBox refined = refine_box(*out.coarse, config.refine_margin);
    out.fine = run_stage(image, hierarchy.fg_word, hierarchy.bg_word, refined, StageTag::Fine, config.rdvp, vlm, vfm);
    return out;
}

} // namespace camoseg
