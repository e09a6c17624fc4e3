#include "camoseg/image_io.hpp"

#include <cmath>
#include <stdexcept>

#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

namespace camoseg
{

namespace
{

cv::Mat read_gray(const std::filesystem::path& path)
{
    cv::Mat img = cv::imread(path.string(), cv::IMREAD_GRAYSCALE);
    if (img.empty())
        throw std::runtime_error("cannot decode image " + path.string());
    if (img.depth() != CV_8U)
        img.convertTo(img, CV_8U);
    return img;
}

void write_png(const std::filesystem::path& path, const cv::Mat& img)
{
    if (path.has_parent_path())
        std::filesystem::create_directories(path.parent_path());
    if (!cv::imwrite(path.string(), img))
        throw std::runtime_error("cannot write " + path.string());
}

cv::Mat to_bgr(const ImageRef& image)
{
    const auto rgb = image.rgb();
    cv::Mat view(image.height(), image.width(), CV_8UC3, const_cast<std::uint8_t*>(rgb.data()));
    cv::Mat bgr;
    cv::cvtColor(view, bgr, cv::COLOR_RGB2BGR);
    return bgr;
}

} // namespace

ImageRef load_image(const std::filesystem::path& path, std::string id)
{
    cv::Mat bgr = cv::imread(path.string(), cv::IMREAD_COLOR);
    if (bgr.empty())
        throw std::runtime_error("cannot decode image " + path.string());
    cv::Mat rgb;
    cv::cvtColor(bgr, rgb, cv::COLOR_BGR2RGB);
    std::vector<std::uint8_t> data(rgb.total() * 3);
    for (int y = 0; y < rgb.rows; ++y)
        std::copy_n(rgb.ptr<std::uint8_t>(y), rgb.cols * 3, data.begin() + static_cast<std::ptrdiff_t>(y) * rgb.cols * 3);
    return ImageRef(std::move(id), rgb.cols, rgb.rows, std::move(data));
}

BinaryMask load_mask(const std::filesystem::path& path, int threshold)
{
    const cv::Mat img = read_gray(path);
    BinaryMask mask(img.cols, img.rows);
    for (int y = 0; y < img.rows; ++y)
        for (int x = 0; x < img.cols; ++x)
            mask(x, y) = img.at<std::uint8_t>(y, x) >= threshold ? 1 : 0;
    return mask;
}

Heatmap load_soft_map(const std::filesystem::path& path)
{
    const cv::Mat img = read_gray(path);
    Heatmap map(img.cols, img.rows);
    for (int y = 0; y < img.rows; ++y)
        for (int x = 0; x < img.cols; ++x)
            map(x, y) = img.at<std::uint8_t>(y, x) / 255.0;
    return map;
}

void write_image(const std::filesystem::path& path, const ImageRef& image)
{
    write_png(path, to_bgr(image));
}

void write_mask(const std::filesystem::path& path, const BinaryMask& mask)
{
    cv::Mat img(mask.height(), mask.width(), CV_8U);
    for (int y = 0; y < mask.height(); ++y)
        for (int x = 0; x < mask.width(); ++x)
            img.at<std::uint8_t>(y, x) = mask(x, y) ? 255 : 0;
    write_png(path, img);
}

void write_soft_map(const std::filesystem::path& path, const Heatmap& map)
{
    cv::Mat img(map.height(), map.width(), CV_8U);
    for (int y = 0; y < map.height(); ++y)
        for (int x = 0; x < map.width(); ++x)
            img.at<std::uint8_t>(y, x) = static_cast<std::uint8_t>(std::lround(std::clamp(map(x, y), 0.0, 1.0) * 255));
    write_png(path, img);
}

void write_overlay(const std::filesystem::path& path, const ImageRef& image, const BinaryMask& mask,
                   const std::vector<OverlayStage>& stages)
{
    cv::Mat canvas = to_bgr(image);
    for (int y = 0; y < canvas.rows; ++y)
        for (int x = 0; x < canvas.cols; ++x)
            if (mask.width() == canvas.cols && mask.height() == canvas.rows && mask(x, y)) {
                auto& px = canvas.at<cv::Vec3b>(y, x);
                px[1] = static_cast<std::uint8_t>((px[1] + 255) / 2);
            }
    const cv::Scalar box_colors[] = {cv::Scalar(0, 255, 255), cv::Scalar(255, 255, 255)};
    for (std::size_t i = 0; i < stages.size(); ++i) {
        const auto& s = stages[i];
        cv::rectangle(canvas, cv::Point(s.box.x0, s.box.y0), cv::Point(s.box.x1 - 1, s.box.y1 - 1),
                      box_colors[std::min<std::size_t>(i, 1)], 1);
        for (Point p : s.prompt.fg_points)
            cv::circle(canvas, cv::Point(p.x, p.y), 2, cv::Scalar(0, 0, 255), cv::FILLED);
        for (Point p : s.prompt.bg_points)
            cv::circle(canvas, cv::Point(p.x, p.y), 2, cv::Scalar(255, 0, 0), cv::FILLED);
    }
    write_png(path, canvas);
}

} // namespace camoseg
