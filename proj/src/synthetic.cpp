#include "camoseg/synthetic.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

#include <opencv2/imgproc.hpp>

namespace camoseg
{

std::uint64_t fnv1a(std::string_view text, std::uint64_t basis)
{
    std::uint64_t h = basis;
    for (unsigned char c : text) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    return h;
}

namespace
{

constexpr std::uint8_t kFirstDecoyLabel = 101;

// Bit-exact uniform doubles from the (standard-specified) mt19937_64 stream;
// std::uniform_real_distribution output is implementation-defined.
class Rng
{
  public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
    int integer(int lo, int hi) // inclusive
    {
        return lo + static_cast<int>(engine_() % static_cast<std::uint64_t>(hi - lo + 1));
    }

  private:
    std::mt19937_64 engine_;
};

std::string lower(std::string s)
{
    std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return s;
}

std::vector<std::string> tokens(const std::string& text)
{
    std::vector<std::string> out;
    std::istringstream in(lower(text));
    std::string tok;
    while (in >> tok) {
        while (!tok.empty() && std::ispunct(static_cast<unsigned char>(tok.back())))
            tok.pop_back();
        while (!tok.empty() && std::ispunct(static_cast<unsigned char>(tok.front())))
            tok.erase(tok.begin());
        if (!tok.empty())
            out.push_back(tok);
    }
    return out;
}

bool has_token(const std::string& text, const std::string& word)
{
    const auto toks = tokens(text);
    return std::find(toks.begin(), toks.end(), lower(word)) != toks.end();
}

std::string strip_article(const std::string& phrase)
{
    for (std::string_view art : {"a ", "an ", "the "})
        if (lower(phrase).rfind(art, 0) == 0)
            return phrase.substr(art.size());
    return phrase;
}

struct Vocabulary
{
    const char* object;
    const char* environment;
    const char* texture;
};

constexpr std::array<Vocabulary, 10> kVocabulary{{
    {"frog", "ground", "leaf"},
    {"snake", "grass", "grass"},
    {"owl", "bark", "bark"},
    {"crab", "sand", "sand"},
    {"moth", "trunk", "lichen"},
    {"flounder", "seabed", "gravel"},
    {"chameleon", "branch", "leaf"},
    {"gecko", "rock", "stone"},
    {"seahorse", "coral", "coral"},
    {"hare", "snow", "snow"},
}};

// Rasterizes a rotated ellipse; returns false if it leaves the frame margin
// or comes within `gap` pixels of an existing label.
bool place_ellipse(Grid<std::uint8_t>& labels, std::uint8_t label, int cx, int cy, double a, double b,
                   double theta, int gap)
{
    const int reach = static_cast<int>(std::ceil(std::max(a, b)));
    const int w = labels.width(), h = labels.height();
    const double c = std::cos(theta), s = std::sin(theta);
    std::vector<Point> pixels;
    for (int y = cy - reach; y <= cy + reach; ++y)
        for (int x = cx - reach; x <= cx + reach; ++x) {
            const double dx = x - cx, dy = y - cy;
            const double u = (c * dx + s * dy) / a, v = (-s * dx + c * dy) / b;
            if (u * u + v * v > 1.0)
                continue;
            if (x < 1 || y < 1 || x >= w - 1 || y >= h - 1)
                return false;
            pixels.push_back({x, y});
        }
    if (pixels.empty())
        return false;
    for (Point p : pixels)
        for (int y = std::max(0, p.y - gap); y <= std::min(h - 1, p.y + gap); ++y)
            for (int x = std::max(0, p.x - gap); x <= std::min(w - 1, p.x + gap); ++x)
                if (labels(x, y) != 0)
                    return false;
    for (Point p : pixels)
        labels.at(p) = label;
    return true;
}

cv::Mat label_image(const Grid<std::uint8_t>& labels, auto&& predicate)
{
    cv::Mat img(labels.height(), labels.width(), CV_8U);
    for (int y = 0; y < labels.height(); ++y)
        for (int x = 0; x < labels.width(); ++x)
            img.at<std::uint8_t>(y, x) = predicate(labels(x, y)) ? 255 : 0;
    return img;
}

// Soft indicator: inside-distance times a gentle radial falloff from the
// centroid, scaled so each blob peaks at exactly `peak`.
void add_soft_blob(const Grid<std::uint8_t>& labels, std::uint8_t label, double peak, Heatmap& out)
{
    cv::Mat inside = label_image(labels, [label](std::uint8_t v) { return v == label; });
    cv::Mat padded;
    cv::copyMakeBorder(inside, padded, 1, 1, 1, 1, cv::BORDER_CONSTANT, 0);
    cv::Mat dist;
    cv::distanceTransform(padded, dist, cv::DIST_L2, cv::DIST_MASK_PRECISE, CV_32F);

    double sx = 0, sy = 0;
    std::vector<Point> pixels;
    for (int y = 0; y < labels.height(); ++y)
        for (int x = 0; x < labels.width(); ++x)
            if (labels(x, y) == label) {
                pixels.push_back({x, y});
                sx += x;
                sy += y;
            }
    if (pixels.empty())
        return;
    const double mx = sx / static_cast<double>(pixels.size()), my = sy / static_cast<double>(pixels.size());
    double radius = 1.0;
    for (Point p : pixels)
        radius = std::max(radius, std::hypot(p.x - mx, p.y - my));

    std::vector<double> values;
    values.reserve(pixels.size());
    double top = 0;
    for (Point p : pixels) {
        const double r = std::hypot(p.x - mx, p.y - my) / radius;
        const double v = static_cast<double>(dist.at<float>(p.y + 1, p.x + 1)) * (1.0 - 0.25 * r * r);
        values.push_back(v);
        top = std::max(top, v);
    }
    for (std::size_t i = 0; i < pixels.size(); ++i)
        out.at(pixels[i]) = values[i] == top ? peak : peak * values[i] / top;
}

Heatmap noise_field(int width, int height, std::uint64_t seed)
{
    Rng rng(seed);
    cv::Mat raw(height, width, CV_64F);
    for (int y = 0; y < height; ++y)
        for (int x = 0; x < width; ++x)
            raw.at<double>(y, x) = rng.uniform(-1.0, 1.0);
    cv::Mat smooth;
    cv::blur(raw, smooth, cv::Size(5, 5), cv::Point(-1, -1), cv::BORDER_REFLECT);
    double lo = 0, hi = 0;
    cv::minMaxLoc(smooth, &lo, &hi);
    const double scale = std::max(std::abs(lo), std::abs(hi));
    Heatmap out(width, height, 0.0);
    for (int y = 0; y < height; ++y)
        for (int x = 0; x < width; ++x)
            out(x, y) = scale > 0 ? smooth.at<double>(y, x) / scale : 0.0;
    return out;
}

} // namespace

BinaryMask SyntheticScene::region() const
{
    BinaryMask mask(labels.width(), labels.height(), 0);
    for (std::size_t i = 0; i < labels.size(); ++i)
        mask.values()[i] = is_planted(labels.values()[i]) ? 1 : 0;
    return mask;
}

BoundingBox SyntheticScene::region_box() const
{
    return tight_box(region());
}

BinaryMask SyntheticScene::surround() const
{
    BinaryMask out(width, height, 0);
    if (surround_margin < 0)
        return out;
    const BoundingBox box = expand_box(region_box(), surround_margin, width, height);
    for (int y = box.y0; y < box.y1; ++y)
        for (int x = box.x0; x < box.x1; ++x)
            out(x, y) = labels(x, y) == 0 ? 1 : 0;
    return out;
}

int SyntheticScene::decoy_count() const
{
    std::set<std::uint8_t> seen;
    for (std::uint8_t v : labels.values())
        if (v > planted_count)
            seen.insert(v);
    return static_cast<int>(seen.size());
}

void SyntheticScene::validate() const
{
    if (id.empty())
        throw ContractViolation("synthetic scene needs an identifier");
    if (width < 1 || height < 1 || labels.width() != width || labels.height() != height)
        throw ContractViolation("synthetic scene '" + id + "': label grid does not match the frame");
    if (planted_count < 1 || planted_count > 3)
        throw ContractViolation("synthetic scene '" + id + "': planted component count must be 1-3");
    if (object_word.empty() || object_phrase.empty() || environment_word.empty() || environment_phrase.empty())
        throw ContractViolation("synthetic scene '" + id + "': vocabulary strings must be nonempty");
    if (!(noise >= 0.0 && noise <= 1.0))
        throw ContractViolation("synthetic scene '" + id + "': noise level must lie in [0, 1]");
    const BinaryMask r = region();
    if (count_foreground(r) == 0)
        throw ContractViolation("synthetic scene '" + id + "': planted region is empty");
    const BoundingBox box = tight_box(r);
    if (box.x0 == 0 || box.y0 == 0 || box.x1 == width || box.y1 == height)
        throw ContractViolation("synthetic scene '" + id + "': planted region touches the frame border");
}

SyntheticScene generate_scene(std::string id, std::uint64_t seed, double noise, const SceneOptions& options)
{
    Rng rng(fnv1a(id, seed ^ 0x9e3779b97f4a7c15ull));
    SyntheticScene scene;
    scene.id = std::move(id);
    scene.seed = seed;
    scene.noise = noise;
    scene.decoy_strength = options.decoy_strength;
    scene.leakage = options.leakage;
    scene.surround_margin = options.surround_margin;
    scene.width = rng.integer(options.min_side, options.max_side);
    scene.height = rng.integer(options.min_side, options.max_side);

    const auto& vocab = kVocabulary[static_cast<std::size_t>(rng.integer(0, kVocabulary.size() - 1))];
    scene.object_word = vocab.object;
    scene.environment_word = vocab.environment;
    scene.object_phrase = std::string("a ") + vocab.texture + "-camouflaged " + vocab.object;
    scene.environment_phrase = std::string("a ") + vocab.texture + "-covered " + vocab.environment;

    const double frame = static_cast<double>(scene.width) * scene.height;
    const double fraction = rng.uniform(options.min_area_fraction, options.max_area_fraction);
    const int wanted = rng.integer(1, options.max_components);
    std::vector<double> shares(static_cast<std::size_t>(wanted));
    double total = 0;
    for (auto& s : shares)
        total += (s = rng.uniform(0.5, 1.0));

    // Rasterized ellipses cover roughly pi*a*b pixels.
    // `near` confines the centre to a window around a point (fragments of one
    // object stay clustered).
    auto try_place = [&](std::uint8_t label, double area, int gap, const BoundingBox* keep_out,
                         const BoundingBox* near) {
        for (int shrink = 0; shrink < 8; ++shrink, area *= 0.8) {
            const double ratio = rng.uniform(0.5, 1.0);
            const double a = std::sqrt(area / (std::numbers::pi * ratio));
            const double b = std::max(2.0, a * ratio);
            const int reach = static_cast<int>(std::ceil(std::max(a, b))) + 2;
            if (2 * reach >= scene.width || 2 * reach >= scene.height)
                continue;
            for (int attempt = 0; attempt < 60; ++attempt) {
                int x_lo = reach, x_hi = scene.width - 1 - reach;
                int y_lo = reach, y_hi = scene.height - 1 - reach;
                if (near) {
                    x_lo = std::max(x_lo, near->x0 - reach);
                    x_hi = std::min(x_hi, near->x1 + reach);
                    y_lo = std::max(y_lo, near->y0 - reach);
                    y_hi = std::min(y_hi, near->y1 + reach);
                    if (x_lo > x_hi || y_lo > y_hi)
                        break;
                }
                const int cx = rng.integer(x_lo, x_hi);
                const int cy = rng.integer(y_lo, y_hi);
                const double theta = rng.uniform(0.0, std::numbers::pi);
                if (keep_out) {
                    const BoundingBox ext{cx - reach, cy - reach, cx + reach + 1, cy + reach + 1};
                    const bool overlaps = ext.x0 < keep_out->x1 && keep_out->x0 < ext.x1 && ext.y0 < keep_out->y1 &&
                                          keep_out->y0 < ext.y1;
                    if (overlaps)
                        continue;
                }
                if (place_ellipse(scene.labels, label, cx, cy, a, b, theta, gap))
                    return true;
            }
        }
        return false;
    };

    // Multi-part objects are fragments of one body: each later part lands next
    // to the parts already placed. Layouts whose MaxIOUBox is not the tight
    // box of the whole object are redrawn, so a noiseless run can recover
    // every part.
    for (int layout = 0; layout < 24; ++layout) {
        const int parts = std::max(1, wanted - layout / 8);
        scene.labels = Grid<std::uint8_t>(scene.width, scene.height, 0);
        scene.planted_count = 0;
        for (int k = 0; k < parts; ++k) {
            const double area = fraction * frame * shares[static_cast<std::size_t>(k)] / total;
            const BoundingBox placed = scene.planted_count > 0 ? scene.region_box() : BoundingBox{};
            if (try_place(static_cast<std::uint8_t>(scene.planted_count + 1), area, 3, nullptr,
                          scene.planted_count > 0 ? &placed : nullptr))
                ++scene.planted_count;
        }
        if (scene.planted_count > 0 && max_iou_box(scene.region()) == scene.region_box())
            break;
    }
    if (scene.planted_count > 0 && max_iou_box(scene.region()) != scene.region_box()) {
        scene.labels = Grid<std::uint8_t>(scene.width, scene.height, 0);
        scene.planted_count = 0;
    }
    if (scene.planted_count == 0) {
        // Frame too crowded for the sampled sizes; fall back to one small blob.
        place_ellipse(scene.labels, 1, scene.width / 2, scene.height / 2, 4.0, 3.0, 0.0, 0);
        scene.planted_count = 1;
    }

    const int decoys = options.max_decoys > 0 ? rng.integer(0, options.max_decoys) : 0;
    const BoundingBox object_box = expand_box(scene.region_box(), 3, scene.width, scene.height);
    for (int d = 0; d < decoys; ++d) {
        const double area = rng.uniform(0.01, 0.05) * frame;
        try_place(static_cast<std::uint8_t>(kFirstDecoyLabel + d), area, 3, &object_box, nullptr);
    }

    scene.validate();
    return scene;
}

ImageRef render_scene(const SyntheticScene& scene)
{
    Rng rng(fnv1a(scene.id, scene.seed ^ 0x5bd1e995ull));
    const std::uint64_t tone = fnv1a(scene.environment_word);
    const int base[3] = {static_cast<int>(60 + tone % 120), static_cast<int>(60 + (tone >> 8) % 120),
                         static_cast<int>(40 + (tone >> 16) % 100)};
    std::vector<std::uint8_t> rgb(static_cast<std::size_t>(scene.width) * scene.height * 3);
    for (int y = 0; y < scene.height; ++y)
        for (int x = 0; x < scene.width; ++x) {
            const std::uint8_t label = scene.labels(x, y);
            const int shift = label == 0 ? 0 : (scene.is_planted(label) ? 14 : 10);
            for (int c = 0; c < 3; ++c) {
                const int jitter = static_cast<int>(rng.uniform(-12.0, 12.0));
                const int v = base[c] + (c == 1 ? shift : -shift / 2) + jitter;
                rgb[(static_cast<std::size_t>(y) * scene.width + x) * 3 + c] =
                    static_cast<std::uint8_t>(std::clamp(v, 0, 255));
            }
        }
    return ImageRef(scene.id, scene.width, scene.height, std::move(rgb));
}

void SceneRegistry::add(SyntheticScene scene)
{
    scene.validate();
    Entry e;
    e.object_map = Heatmap(scene.width, scene.height, 0.0);
    std::set<std::uint8_t> labels(scene.labels.values().begin(), scene.labels.values().end());
    for (std::uint8_t label : labels) {
        if (label == 0)
            continue;
        add_soft_blob(scene.labels, label, scene.is_planted(label) ? 1.0 : scene.decoy_strength, e.object_map);
    }

    cv::Mat outside = label_image(scene.labels, [&](std::uint8_t v) { return !scene.is_planted(v); });
    cv::Mat dist;
    cv::distanceTransform(outside, dist, cv::DIST_L2, cv::DIST_MASK_PRECISE, CV_32F);
    e.environment_map = Heatmap(scene.width, scene.height, 0.0);
    for (int y = 0; y < scene.height; ++y)
        for (int x = 0; x < scene.width; ++x)
            e.environment_map(x, y) = scene.is_planted(scene.labels(x, y))
                                          ? scene.leakage
                                          : std::min(1.0, static_cast<double>(dist.at<float>(y, x)) / 2.0);

    const std::string id = scene.id;
    e.scene = std::move(scene);
    entries_.insert_or_assign(id, std::move(e));
}

bool SceneRegistry::contains(const std::string& id) const
{
    return entries_.count(id) != 0;
}

const SceneRegistry::Entry& SceneRegistry::entry(const std::string& id) const
{
    const auto it = entries_.find(id);
    if (it == entries_.end())
        throw BackendUnavailable("synthetic backend has no scene for image '" + id + "'");
    return it->second;
}

const SyntheticScene& SceneRegistry::scene(const std::string& id) const
{
    return entry(id).scene;
}

const Heatmap& SceneRegistry::object_map(const std::string& id) const
{
    return entry(id).object_map;
}

const Heatmap& SceneRegistry::environment_map(const std::string& id) const
{
    return entry(id).environment_map;
}

SyntheticMllm::SyntheticMllm(std::shared_ptr<const SceneRegistry> registry, SyntheticMllmOptions options)
    : registry_(std::move(registry)), options_(std::move(options))
{
}

std::string SyntheticMllm::complete(const ChatSession& session, const std::string& question) const
{
    for (const auto& needle : options_.fail_when_question_contains)
        if (!needle.empty() && question.find(needle) != std::string::npos)
            throw BackendUnavailable("synthetic MLLM: injected failure", question);

    const SyntheticScene& scene = registry_->scene(session.image().id());
    const std::string q = lower(question);

    if (q.find("bounding box") != std::string::npos) {
        if (options_.suppress_box)
            return "I cannot determine where it is.";
        const BoundingBox b = scene.region_box();
        return "[" + std::to_string(b.x0) + ", " + std::to_string(b.y0) + ", " + std::to_string(b.x1) + ", " +
               std::to_string(b.y1) + "]";
    }
    if (q.find("one word") != std::string::npos) {
        std::string word = scene.object_word;
        word[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(word[0])));
        return word + " / " + scene.environment_word;
    }
    if (q.find("phrase") != std::string::npos) {
        std::string object = scene.object_phrase;
        if (options_.vary_phrasing) {
            const std::string bare = strip_article(object);
            switch (fnv1a(question, scene.seed) % 6) {
            case 1: object = "the " + bare; break;
            case 2: object = bare + " in the scene"; break;
            case 3: object = "a hidden " + bare; break;
            case 4: object = bare + " blending into the background"; break;
            case 5: object = "the " + bare + " at the centre of attention"; break;
            default: break;
            }
        }
        return "Foreground: " + object + "\nBackground: " + scene.environment_phrase;
    }
    return "A " + strip_article(scene.object_phrase) + " is hiding in the " + scene.environment_word + ".";
}

SyntheticVlm::SyntheticVlm(std::shared_ptr<const SceneRegistry> registry) : registry_(std::move(registry)) {}

Heatmap SyntheticVlm::heatmap(const ImageRef& image, const std::string& text) const
{
    const SyntheticScene& scene = registry_->scene(image.id());
    const std::string t = lower(text);
    Heatmap out;
    if (t == lower(scene.object_phrase) || has_token(text, scene.object_word))
        out = registry_->object_map(image.id());
    else if (t == lower(scene.environment_phrase) || has_token(text, scene.environment_word))
        out = registry_->environment_map(image.id());
    else
        out = Heatmap(scene.width, scene.height, 0.0);

    if (scene.noise > 0) {
        const Heatmap field = noise_field(scene.width, scene.height, fnv1a(text, scene.seed ^ fnv1a(scene.id)));
        for (std::size_t i = 0; i < out.size(); ++i)
            out.values()[i] += scene.noise * field.values()[i];
    }
    return out;
}

SyntheticVfm::SyntheticVfm(std::shared_ptr<const SceneRegistry> registry) : registry_(std::move(registry)) {}

BinaryMask SyntheticVfm::segment(const ImageRef& image, std::span<const Point> fg, std::span<const Point> bg,
                                 const BoundingBox& box) const
{
    const SyntheticScene& scene = registry_->scene(image.id());
    std::set<std::uint8_t> keep;
    if (fg.empty() && bg.empty()) {
        for (int y = box.y0; y < box.y1; ++y)
            for (int x = box.x0; x < box.x1; ++x)
                if (scene.is_planted(scene.labels(x, y)))
                    keep.insert(scene.labels(x, y));
    } else {
        for (Point p : fg)
            if (scene.labels.at(p) != 0)
                keep.insert(scene.labels.at(p));
        for (Point p : bg)
            keep.erase(scene.labels.at(p));
    }

    keep.erase(0);

    BinaryMask spill;
    if (!keep.empty() && !fg.empty() && scene.surround_margin >= 0) {
        spill = scene.surround();
        const bool vetoed = std::any_of(bg.begin(), bg.end(), [&](Point p) { return spill.at(p) != 0; });
        if (vetoed)
            spill = BinaryMask();
    }

    BinaryMask mask(scene.width, scene.height, 0);
    for (int y = box.y0; y < box.y1; ++y)
        for (int x = box.x0; x < box.x1; ++x)
            mask(x, y) = keep.count(scene.labels(x, y)) || (!spill.empty() && spill(x, y)) ? 1 : 0;
    return mask;
}

Backends make_synthetic_backends(std::shared_ptr<const SceneRegistry> registry, SyntheticMllmOptions options)
{
    return {std::make_shared<SyntheticMllm>(registry, std::move(options)), std::make_shared<SyntheticVlm>(registry),
            std::make_shared<SyntheticVfm>(registry)};
}

} // namespace camoseg
