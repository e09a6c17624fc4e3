#include "camoseg/remote.hpp"

#include <cmath>
#include <cstdlib>

#include <httplib.h>
#include <openssl/evp.h>
#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

namespace camoseg
{

using nlohmann::json;

std::string base64_encode(std::span<const std::uint8_t> bytes)
{
    std::string out(4 * ((bytes.size() + 2) / 3), '\0');
    const int n = EVP_EncodeBlock(reinterpret_cast<unsigned char*>(out.data()), bytes.data(),
                                  static_cast<int>(bytes.size()));
    out.resize(static_cast<std::size_t>(n));
    return out;
}

std::string encode_png_base64(const ImageRef& image)
{
    const auto rgb = image.rgb();
    cv::Mat view(image.height(), image.width(), CV_8UC3, const_cast<std::uint8_t*>(rgb.data()));
    cv::Mat bgr;
    cv::cvtColor(view, bgr, cv::COLOR_RGB2BGR);
    std::vector<std::uint8_t> png;
    if (!cv::imencode(".png", bgr, png))
        throw std::runtime_error("failed to PNG-encode image '" + image.id() + "'");
    return base64_encode(png);
}

json mllm_request_body(const std::string& model, const ChatSession& session, const std::string& question)
{
    json messages = json::array();
    bool image_sent = false;
    auto user_message = [&](const std::string& text) {
        json content = json::array();
        if (!image_sent) {
            content.push_back({{"type", "image"}, {"data", encode_png_base64(session.image())}});
            image_sent = true;
        }
        content.push_back({{"type", "text"}, {"text", text}});
        return json{{"role", "user"}, {"content", content}};
    };
    for (const auto& turn : session.turns()) {
        if (turn.role == "user")
            messages.push_back(user_message(turn.text));
        else
            messages.push_back({{"role", turn.role}, {"content", json::array({{{"type", "text"}, {"text", turn.text}}})}});
    }
    messages.push_back(user_message(question));
    return {{"model", model}, {"messages", messages}};
}

json vlm_request_body(const ImageRef& image, const std::string& text)
{
    return {{"image", encode_png_base64(image)}, {"text", text}};
}

json vfm_request_body(const ImageRef& image, std::span<const Point> fg, std::span<const Point> bg,
                      const BoundingBox& box)
{
    auto points = [](std::span<const Point> pts) {
        json arr = json::array();
        for (Point p : pts)
            arr.push_back({p.x, p.y});
        return arr;
    };
    return {{"image", encode_png_base64(image)},
            {"fg_points", points(fg)},
            {"bg_points", points(bg)},
            {"box", {box.x0, box.y0, box.x1, box.y1}}};
}

Heatmap resize_bilinear(const Heatmap& grid, int width, int height)
{
    if (grid.width() == width && grid.height() == height)
        return grid;
    cv::Mat src(grid.height(), grid.width(), CV_64F, const_cast<double*>(grid.values().data()));
    cv::Mat dst;
    cv::resize(src, dst, cv::Size(width, height), 0, 0, cv::INTER_LINEAR);
    Heatmap out(width, height);
    for (int y = 0; y < height; ++y)
        for (int x = 0; x < width; ++x)
            out(x, y) = dst.at<double>(y, x);
    return out;
}

namespace
{

void check_grid_shape(const json& reply, const char* field, int& w, int& h)
{
    if (!reply.is_object() || !reply.contains("width") || !reply.contains("height") || !reply.contains(field))
        throw ProtocolError(std::string("reply lacks width/height/") + field);
    w = reply.at("width").get<int>();
    h = reply.at("height").get<int>();
    if (w < 1 || h < 1)
        throw ProtocolError("reply grid has non-positive dimensions");
    const json& values = reply.at(field);
    if (!values.is_array() || values.size() != static_cast<std::size_t>(w) * static_cast<std::size_t>(h))
        throw ProtocolError(std::string("reply '") + field + "' length does not match " + std::to_string(w) + "x" +
                            std::to_string(h));
}

} // namespace

Heatmap decode_vlm_reply(const json& reply, int width, int height)
{
    int w = 0, h = 0;
    check_grid_shape(reply, "values", w, h);
    Heatmap grid(w, h);
    const json& values = reply.at("values");
    for (std::size_t i = 0; i < grid.size(); ++i) {
        if (!values[i].is_number())
            throw ProtocolError("heatmap value is not a number");
        grid.values()[i] = values[i].get<double>();
        if (!std::isfinite(grid.values()[i]))
            throw ProtocolError("heatmap value is not finite");
    }
    return resize_bilinear(grid, width, height);
}

BinaryMask decode_vfm_reply(const json& reply, int width, int height)
{
    int w = 0, h = 0;
    check_grid_shape(reply, "mask", w, h);
    if (w != width || h != height)
        throw ProtocolError("mask is " + std::to_string(w) + "x" + std::to_string(h) + ", image is " +
                            std::to_string(width) + "x" + std::to_string(height));
    BinaryMask mask(w, h);
    const json& values = reply.at("mask");
    for (std::size_t i = 0; i < mask.size(); ++i) {
        if (!values[i].is_number())
            throw ProtocolError("mask value is not a number");
        mask.values()[i] = values[i].get<double>() != 0 ? 1 : 0;
    }
    return mask;
}

namespace
{

struct Endpoint
{
    std::string origin; // scheme://host[:port]
    std::string path;
};

Endpoint split_endpoint(const std::string& url)
{
    const auto scheme = url.find("://");
    const auto path_at = url.find('/', scheme == std::string::npos ? 0 : scheme + 3);
    if (path_at == std::string::npos)
        return {url, "/"};
    return {url.substr(0, path_at), url.substr(path_at)};
}

json post_json(const BackendConfig& config, const json& body, const std::string& what)
{
    const Endpoint ep = split_endpoint(config.endpoint);
    const std::string payload = body.dump();
    httplib::Headers headers;
    if (const char* key = std::getenv("CAMOSEG_API_KEY"); key && *key)
        headers.emplace("Authorization", std::string("Bearer ") + key);

    std::string last_error = "no attempt made";
    for (int attempt = 0; attempt <= config.retries; ++attempt) {
        httplib::Client client(ep.origin);
        const auto secs = static_cast<time_t>(config.timeout_seconds);
        const auto usecs = static_cast<time_t>((config.timeout_seconds - static_cast<double>(secs)) * 1e6);
        client.set_connection_timeout(secs, usecs);
        client.set_read_timeout(secs, usecs);
        client.set_write_timeout(secs, usecs);
        auto res = client.Post(ep.path, headers, payload, "application/json");
        if (!res) {
            last_error = httplib::to_string(res.error());
            continue;
        }
        if (res->status != 200) {
            last_error = "HTTP " + std::to_string(res->status);
            continue;
        }
        try {
            return json::parse(res->body);
        } catch (const json::exception& e) {
            throw ProtocolError(config.endpoint + ": reply is not JSON: " + e.what());
        }
    }
    throw BackendUnavailable(config.endpoint + ": " + last_error + " after " + std::to_string(config.retries + 1) +
                                 " attempt(s)",
                             what);
}

} // namespace

RemoteMllm::RemoteMllm(BackendConfig config) : config_(std::move(config))
{
    config_.validate();
}

std::string RemoteMllm::complete(const ChatSession& session, const std::string& question) const
{
    const json reply = post_json(config_, mllm_request_body(config_.model, session, question), question);
    if (!reply.is_object() || !reply.contains("text") || !reply.at("text").is_string())
        throw ProtocolError(config_.endpoint + ": reply lacks a 'text' string");
    return reply.at("text").get<std::string>();
}

RemoteVlm::RemoteVlm(BackendConfig config) : config_(std::move(config))
{
    config_.validate();
}

Heatmap RemoteVlm::heatmap(const ImageRef& image, const std::string& text) const
{
    try {
        return decode_vlm_reply(post_json(config_, vlm_request_body(image, text), text), image.width(),
                                image.height());
    } catch (const json::exception& e) {
        throw ProtocolError(config_.endpoint + ": " + e.what());
    }
}

RemoteVfm::RemoteVfm(BackendConfig config) : config_(std::move(config))
{
    config_.validate();
}

BinaryMask RemoteVfm::segment(const ImageRef& image, std::span<const Point> fg, std::span<const Point> bg,
                              const BoundingBox& box) const
{
    try {
        return decode_vfm_reply(post_json(config_, vfm_request_body(image, fg, bg, box), "segment " + image.id()),
                                image.width(), image.height());
    } catch (const json::exception& e) {
        throw ProtocolError(config_.endpoint + ": " + e.what());
    }
}

Backends make_remote_backends(BackendConfig mllm, BackendConfig vlm, BackendConfig vfm)
{
    auto fill = [](BackendConfig& c, const char* env, std::string_view model) {
        c.kind = BackendConfig::Kind::Remote;
        if (c.endpoint.empty())
            if (const char* v = std::getenv(env))
                c.endpoint = v;
        if (c.model.empty())
            c.model = model;
    };
    fill(mllm, "CAMOSEG_MLLM_ENDPOINT", kDefaultMllmModel);
    fill(vlm, "CAMOSEG_VLM_ENDPOINT", kDefaultVlmModel);
    fill(vfm, "CAMOSEG_VFM_ENDPOINT", kDefaultVfmModel);

    Backends b;
    b.mllm = std::make_shared<RemoteMllm>(mllm);
    b.vlm = std::make_shared<RemoteVlm>(vlm);
    b.vfm = std::make_shared<RemoteVfm>(vfm);
    if (mllm.serialized)
        b.mllm = serialize_access(b.mllm);
    if (vlm.serialized)
        b.vlm = serialize_access(b.vlm);
    if (vfm.serialized)
        b.vfm = serialize_access(b.vfm);
    return b;
}

} // namespace camoseg
