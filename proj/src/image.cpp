#include "psdn/image.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

#include "psdn/rng.hpp"

namespace psdn {

bool same_shape(const ImageBuffer& a, const ImageBuffer& b)
{
    return a.height == b.height && a.width == b.width;
}

void require_valid(const ImageBuffer& img, const char* what)
{
    if (img.height <= 0 || img.width <= 0)
        throw std::invalid_argument(std::string(what) + ": non-positive image dimensions");
    if (img.data.size() != static_cast<std::size_t>(img.num_pixels()))
        throw std::invalid_argument(std::string(what) + ": data length does not match dimensions");
    for (double v : img.data)
        if (!std::isfinite(v))
            throw std::invalid_argument(std::string(what) + ": non-finite pixel value");
}

ImageBuffer add_awgn(const ImageBuffer& img, const NoiseSpec& spec)
{
    require_valid(img, "add_awgn");
    if (!(spec.sigma >= 0.0))
        throw std::invalid_argument("add_awgn: sigma must be >= 0");
    ImageBuffer out = img;
    if (spec.sigma == 0.0)
        return out;
    Rng rng(spec.seed);
    for (double& v : out.data)
        v += spec.sigma * rng.normal();
    return out;
}

double mse(const ImageBuffer& a, const ImageBuffer& b)
{
    require_valid(a, "mse");
    require_valid(b, "mse");
    if (!same_shape(a, b))
        throw std::invalid_argument("mse: shape mismatch");
    double acc = 0.0;
    for (std::size_t i = 0; i < a.data.size(); ++i) {
        const double d = a.data[i] - b.data[i];
        acc += d * d;
    }
    return acc / static_cast<double>(a.data.size());
}

double psnr(const ImageBuffer& a, const ImageBuffer& b, double peak)
{
    if (!(peak > 0.0))
        throw std::invalid_argument("psnr: peak must be > 0");
    const double e = mse(a, b);
    if (e == 0.0)
        return std::numeric_limits<double>::infinity();
    return 10.0 * std::log10(peak * peak / e);
}

ImageBuffer make_test_image(TestImageKind kind, int height, int width,
                            const TestImageParams& params)
{
    if (height <= 0 || width <= 0)
        throw std::invalid_argument("make_test_image: non-positive dimensions");
    ImageBuffer img(height, width);
    switch (kind) {
    case TestImageKind::constant:
        for (double& v : img.data)
            v = params.value;
        break;
    case TestImageKind::gradient: {
        const int denom = height + width - 2;
        for (int r = 0; r < height; ++r)
            for (int c = 0; c < width; ++c)
                img.at(r, c) = denom == 0 ? 0.0 : static_cast<double>(r + c) / denom;
        break;
    }
    case TestImageKind::checkerboard: {
        if (params.period < 1)
            throw std::invalid_argument("make_test_image: checkerboard period must be >= 1");
        const int p = params.period;
        for (int r = 0; r < height; ++r)
            for (int c = 0; c < width; ++c)
                img.at(r, c) = static_cast<double>((r / p + c / p) % 2);
        break;
    }
    case TestImageKind::piecewise: {
        // Four quadrants plus a centered box: flat regions and straight
        // edges at several contrasts.
        for (int r = 0; r < height; ++r)
            for (int c = 0; c < width; ++c) {
                const bool bottom = r >= height / 2;
                const bool right = c >= width / 2;
                double v = bottom ? (right ? 0.70 : 0.55) : (right ? 0.80 : 0.20);
                if (r >= height / 4 && r < 3 * height / 4 && c >= width / 4 && c < 3 * width / 4)
                    v = 0.45;
                img.at(r, c) = v;
            }
        break;
    }
    }
    return img;
}

TestImageKind parse_test_image_kind(const std::string& name)
{
    if (name == "constant") return TestImageKind::constant;
    if (name == "gradient") return TestImageKind::gradient;
    if (name == "checkerboard") return TestImageKind::checkerboard;
    if (name == "piecewise") return TestImageKind::piecewise;
    throw std::invalid_argument("unknown test image kind: " + name);
}

} // namespace psdn
