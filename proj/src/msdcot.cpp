#include "camoseg/msdcot.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <regex>
#include <sstream>

namespace camoseg
{

namespace
{

std::string trim(std::string_view s)
{
    const auto first = s.find_first_not_of(" \t\r\n\"'`");
    if (first == std::string_view::npos)
        return {};
    const auto last = s.find_last_not_of(" \t\r\n\"'`");
    return std::string(s.substr(first, last - first + 1));
}

std::string lower(std::string s)
{
    std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return s;
}

enum class Side
{
    None,
    Foreground,
    Background
};

// Removes a leading list marker and "foreground:"-style label.
std::string strip_label(const std::string& piece, Side& side)
{
    static const std::regex label(
        R"(^\s*(?:[-*•]|\d+[.)])?\s*(foreground|background|object|environment)(?:\s+(?:phrase|word|noun))?\s*[:=\-]\s*)",
        std::regex::icase);
    std::smatch m;
    side = Side::None;
    if (std::regex_search(piece, m, label)) {
        const std::string tag = lower(m[1].str());
        side = (tag == "foreground" || tag == "object") ? Side::Foreground : Side::Background;
        return trim(piece.substr(static_cast<std::size_t>(m.length(0))));
    }
    static const std::regex marker(R"(^\s*(?:[-*]|\d+[.)])\s+)");
    return trim(std::regex_replace(piece, marker, ""));
}

std::vector<std::string> split_on_first_delimiter(const std::string& reply, std::initializer_list<char> delimiters)
{
    for (char d : delimiters) {
        if (reply.find(d) == std::string::npos)
            continue;
        std::vector<std::string> pieces;
        std::stringstream ss(reply);
        std::string piece;
        while (std::getline(ss, piece, d))
            if (!trim(piece).empty())
                pieces.push_back(piece);
        return pieces;
    }
    return {reply};
}

std::optional<std::pair<std::string, std::string>> split_pair(const std::string& reply,
                                                              std::initializer_list<char> delimiters)
{
    const auto pieces = split_on_first_delimiter(reply, delimiters);
    std::optional<std::string> fg, bg;
    std::vector<std::string> unlabeled;
    for (const auto& raw : pieces) {
        Side side;
        std::string text = strip_label(raw, side);
        while (!text.empty() && (text.back() == '.' || text.back() == ','))
            text.pop_back();
        text = trim(text);
        if (text.empty())
            continue;
        if (side == Side::Foreground && !fg)
            fg = text;
        else if (side == Side::Background && !bg)
            bg = text;
        else if (side == Side::None)
            unlabeled.push_back(text);
    }
    auto next = unlabeled.begin();
    if (!fg && next != unlabeled.end())
        fg = *next++;
    if (!bg && next != unlabeled.end())
        bg = *next++;
    if (!fg)
        return std::nullopt;
    return std::make_pair(*fg, bg.value_or(std::string{}));
}

std::string head_word(const std::string& text)
{
    std::istringstream in(text);
    std::string tok, last;
    while (in >> tok) {
        std::string clean;
        for (unsigned char c : tok)
            if (std::isalnum(c) || c == '-')
                clean.push_back(static_cast<char>(std::tolower(c)));
        while (!clean.empty() && clean.back() == '-')
            clean.pop_back();
        if (!clean.empty())
            last = clean;
    }
    return last;
}

} // namespace

const std::string& TaskGenericPrompt::for_repetition(std::size_t i) const
{
    validate();
    return synonyms[i % synonyms.size()];
}

void TaskGenericPrompt::validate() const
{
    if (synonyms.empty())
        throw ContractViolation("task-generic prompt needs at least one synonym");
    for (const auto& s : synonyms)
        if (trim(s).empty())
            throw ContractViolation("task-generic prompt synonyms must be nonempty");
}

void QueryTemplates::validate() const
{
    for (const auto* t : {&caption, &phrase, &keyword, &box}) {
        std::size_t count = 0;
        for (auto pos = t->find(kSlot); pos != std::string::npos; pos = t->find(kSlot, pos + kSlot.size()))
            ++count;
        if (count < 1 || count > 2)
            throw ContractViolation("query template must contain one or two " + std::string(kSlot) +
                                    " slots: " + *t);
    }
}

std::string QueryTemplates::render(const std::string& tmpl, const std::string& prompt)
{
    std::string out;
    std::size_t from = 0;
    for (auto pos = tmpl.find(kSlot); pos != std::string::npos; pos = tmpl.find(kSlot, from)) {
        out.append(tmpl, from, pos - from);
        out += prompt;
        from = pos + kSlot.size();
    }
    out.append(tmpl, from);
    return out;
}

std::string generate_caption(const MultimodalModel& mllm, ChatSession& session, const QueryTemplates& templates,
                             const std::string& prompt)
{
    std::string caption = trim(mllm_ask(mllm, session, QueryTemplates::render(templates.caption, prompt)));
    if (caption.empty())
        throw ChainError("caption", "empty reply");
    return caption;
}

std::optional<std::pair<std::string, std::string>> parse_phrase_pair(const std::string& reply)
{
    auto pair = split_pair(reply, {'\n', ';', '/'});
    if (!pair || pair->second.empty())
        return std::nullopt;
    return pair;
}

std::optional<std::pair<std::string, std::string>> parse_keyword_pair(const std::string& reply)
{
    auto pair = split_pair(reply, {'\n', ';', '/', ','});
    if (!pair)
        return std::nullopt;
    std::string fg = head_word(pair->first);
    std::string bg = head_word(pair->second);
    if (fg.empty())
        return std::nullopt;
    return std::make_pair(fg, bg);
}

std::pair<std::string, std::string> disentangle_phrases(const MultimodalModel& mllm, ChatSession& session,
                                                        const QueryTemplates& templates, const std::string& prompt)
{
    const std::string reply = mllm_ask(mllm, session, QueryTemplates::render(templates.phrase, prompt));
    auto pair = parse_phrase_pair(reply);
    if (!pair)
        throw ChainError("phrase", "expected foreground and background phrases, got: " + trim(reply));
    return *pair;
}

std::pair<std::string, std::string> identify_keywords(const MultimodalModel& mllm, ChatSession& session,
                                                      const QueryTemplates& templates, const std::string& prompt,
                                                      const std::string& bg_phrase)
{
    const std::string reply = mllm_ask(mllm, session, QueryTemplates::render(templates.keyword, prompt));
    auto pair = parse_keyword_pair(reply);
    if (!pair)
        throw ChainError("keyword", "no usable word in reply: " + trim(reply));
    if (pair->second.empty())
        pair->second = head_word(bg_phrase);
    if (pair->second.empty())
        throw ChainError("keyword", "reply names no environment word: " + trim(reply));
    return *pair;
}

ParsedBox parse_bbox_reply(const std::string& reply, int width, int height)
{
    const ParsedBox fallback{full_box(width, height), true};
    static const std::regex number(R"([-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?)");
    std::vector<double> values;
    for (auto it = std::sregex_iterator(reply.begin(), reply.end(), number);
         it != std::sregex_iterator() && values.size() < 4; ++it) {
        try {
            values.push_back(std::stod(it->str()));
        } catch (const std::out_of_range&) {
            return fallback;
        }
    }
    if (values.size() < 4)
        return fallback;
    for (double v : values)
        if (!std::isfinite(v))
            return fallback;

    RawBox raw{values[0], values[1], values[2], values[3]};
    if (std::all_of(values.begin(), values.end(), [](double v) { return v <= 1.5; })) {
        raw.x0 *= width;
        raw.x1 *= width;
        raw.y0 *= height;
        raw.y1 *= height;
    }
    // clamp_box turns zero-area boxes into the full frame; treat that as a
    // parse failure too.
    const double rx0 = std::round(raw.x0), rx1 = std::round(raw.x1);
    const double ry0 = std::round(raw.y0), ry1 = std::round(raw.y1);
    if (std::min(rx1, static_cast<double>(width)) <= std::max(rx0, 0.0) ||
        std::min(ry1, static_cast<double>(height)) <= std::max(ry0, 0.0))
        return fallback;
    const BoundingBox box = clamp_box(raw, width, height);
    if (static_cast<double>(box.area()) < 0.01 * static_cast<double>(width) * static_cast<double>(height))
        return fallback;
    return {box, false};
}

BoundingBox parse_bbox_text(const std::string& reply, int width, int height)
{
    return parse_bbox_reply(reply, width, height).box;
}

MsdCotResult run_msdcot(const ImageRef& image, const QueryTemplates& templates, const std::string& prompt,
                        const MultimodalModel& mllm)
{
    templates.validate();
    MsdCotResult result{{}, {}, false, ChatSession(image)};
    auto& h = result.hierarchy;
    h.caption = generate_caption(mllm, result.session, templates, prompt);
    std::tie(h.fg_phrase, h.bg_phrase) = disentangle_phrases(mllm, result.session, templates, prompt);
    std::tie(h.fg_word, h.bg_word) = identify_keywords(mllm, result.session, templates, prompt, h.bg_phrase);
    const std::string reply = mllm_ask(mllm, result.session, QueryTemplates::render(templates.box, prompt));
    const ParsedBox parsed = parse_bbox_reply(reply, image.width(), image.height());
    result.coarse_box = parsed.box;
    result.box_fallback = parsed.fallback;
    return result;
}

MsdCotResult run_direct_keywords(const ImageRef& image, const QueryTemplates& templates, const std::string& prompt,
                                 const MultimodalModel& mllm)
{
    templates.validate();
    MsdCotResult result{{}, full_box(image.width(), image.height()), true, ChatSession(image)};
    auto& h = result.hierarchy;
    h.caption = generate_caption(mllm, result.session, templates, prompt);
    std::tie(h.fg_word, h.bg_word) = identify_keywords(mllm, result.session, templates, prompt);
    h.fg_phrase = h.fg_word;
    h.bg_phrase = h.bg_word;
    return result;
}

} // namespace camoseg
