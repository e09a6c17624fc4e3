// msdcot.hpp
//
// Four-step question chain run on one chat session per repetition:
//
//   1. caption   - one-sentence description of the target
//   2. phrase    - foreground / background compound noun phrases
//   3. keyword   - one-word foreground / background names
//   4. box       - coarse bounding box of the target
//
// Every question is asked on the same session, so each step sees the image
// plus all earlier questions and answers.

#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "camoseg/backends.hpp"
#include "camoseg/core.hpp"

namespace camoseg
{

/// A step of the chain produced an answer that could not be used.
class ChainError : public std::runtime_error
{
  public:
    ChainError(std::string step, const std::string& detail)
        : std::runtime_error("chain step '" + step + "': " + detail), step_(std::move(step))
    {
    }
    const std::string& step() const { return step_; }

  private:
    std::string step_;
};

/// Synonyms of the task-generic prompt; repetition i uses synonym i, cycling
/// when there are fewer synonyms than repetitions.
struct TaskGenericPrompt
{
    std::vector<std::string> synonyms{"camouflaged object", "camouflaged animal", "camouflaged entity"};

    const std::string& for_repetition(std::size_t i) const;
    void validate() const;
};

struct TextPromptHierarchy
{
    std::string caption;
    std::string fg_phrase;
    std::string bg_phrase;
    std::string fg_word;
    std::string bg_word;
};

/// Question templates; every occurrence of `{prompt}` is replaced by the
/// repetition's synonym.
struct QueryTemplates
{
    static constexpr std::string_view kSlot = "{prompt}";

    std::string caption = "This image is from {prompt} detection task, describe the {prompt} in one sentence.";
    std::string phrase =
        "Provide a concise and comprehensive descriptive compound noun phrase for {prompt} and its environment.";
    std::string keyword = "Name of the {prompt} and its environment in one word.";
    std::string box = "This image is from the {prompt} detection task, output the bounding box of the {prompt}.";

    /// Each template must hold one or two slots.
    void validate() const;
    static std::string render(const std::string& tmpl, const std::string& prompt);
};

std::string generate_caption(const MultimodalModel& mllm, ChatSession& session, const QueryTemplates& templates,
                             const std::string& prompt);

std::pair<std::string, std::string> disentangle_phrases(const MultimodalModel& mllm, ChatSession& session,
                                                        const QueryTemplates& templates, const std::string& prompt);

/// `bg_phrase` supplies the background word when the reply names only the
/// foreground.
std::pair<std::string, std::string> identify_keywords(const MultimodalModel& mllm, ChatSession& session,
                                                      const QueryTemplates& templates, const std::string& prompt,
                                                      const std::string& bg_phrase = {});

/// Splits a two-part reply into (foreground, background) phrases. Empty when
/// the reply does not hold two parts.
std::optional<std::pair<std::string, std::string>> parse_phrase_pair(const std::string& reply);

/// Reduces a keyword reply to lowercase single words (head noun = last
/// token). A reply naming only one thing yields an empty background word.
std::optional<std::pair<std::string, std::string>> parse_keyword_pair(const std::string& reply);

struct ParsedBox
{
    BoundingBox box;
    /// True when the reply was unusable and the full-image box was returned.
    bool fallback = false;
};

/// Reads the first four numbers in the reply as (x0, y0, x1, y1). Values all
/// <= 1.5 are fractions of the frame, otherwise pixels. Missing or non-finite
/// numbers, or a clipped box under 1% of the image, give the full-image box.
ParsedBox parse_bbox_reply(const std::string& reply, int width, int height);
BoundingBox parse_bbox_text(const std::string& reply, int width, int height);

struct MsdCotResult
{
    TextPromptHierarchy hierarchy;
    BoundingBox coarse_box;
    bool box_fallback = false;
    ChatSession session;
};

MsdCotResult run_msdcot(const ImageRef& image, const QueryTemplates& templates, const std::string& prompt,
                        const MultimodalModel& mllm);

/// Ablation chain without decomposition: caption then keywords. The words
/// double as phrases and the coarse box is the whole image.
MsdCotResult run_direct_keywords(const ImageRef& image, const QueryTemplates& templates, const std::string& prompt,
                                 const MultimodalModel& mllm);

} // namespace camoseg
