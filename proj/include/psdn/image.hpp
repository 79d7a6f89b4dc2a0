#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace psdn {

/// Grayscale image, row-major doubles. The canonical intensity range is
/// [0, 1] but values are kept unclamped internally; clamping happens only on
/// integer export (see pgm_io.hpp).
struct ImageBuffer {
    int height = 0;
    int width = 0;
    std::vector<double> data;

    ImageBuffer() = default;
    ImageBuffer(int h, int w, double fill = 0.0)
        : height(h), width(w),
          data(static_cast<std::size_t>(h < 0 ? 0 : h) * static_cast<std::size_t>(w < 0 ? 0 : w), fill)
    {
    }

    std::int64_t num_pixels() const
    {
        return static_cast<std::int64_t>(height) * width;
    }

    double& at(int r, int c) { return data[static_cast<std::size_t>(r) * width + c]; }
    double at(int r, int c) const { return data[static_cast<std::size_t>(r) * width + c]; }
};

bool same_shape(const ImageBuffer& a, const ImageBuffer& b);

/// Throws std::invalid_argument when dims are non-positive, the data length
/// disagrees with them, or any entry is non-finite.
void require_valid(const ImageBuffer& img, const char* what);

struct NoiseSpec {
    double sigma = 0.0;
    std::uint64_t seed = 0;
};

/// y = img + w with w iid N(0, sigma^2) drawn from Rng(seed) (rng.hpp pins
/// the generator and transform). sigma = 0 returns the input unchanged.
ImageBuffer add_awgn(const ImageBuffer& img, const NoiseSpec& spec);

double mse(const ImageBuffer& a, const ImageBuffer& b);

/// 10 log10(peak^2 / mse); +infinity when mse is exactly zero.
double psnr(const ImageBuffer& a, const ImageBuffer& b, double peak = 1.0);

enum class TestImageKind { constant, gradient, checkerboard, piecewise };

struct TestImageParams {
    double value = 0.5; // constant: fill value
    int period = 8;     // checkerboard: cell side in pixels
};

/// Deterministic synthetic images:
///   constant      every pixel = params.value
///   gradient      v(r,c) = (r + c) / (H + W - 2), 0 for a 1x1 image
///   checkerboard  v(r,c) = (floor(r/p) + floor(c/p)) mod 2
///   piecewise     fixed piecewise-constant quadrants plus a centered box
ImageBuffer make_test_image(TestImageKind kind, int height, int width,
                            const TestImageParams& params = {});

/// Parses "constant" | "gradient" | "checkerboard" | "piecewise";
/// anything else throws std::invalid_argument.
TestImageKind parse_test_image_kind(const std::string& name);

} // namespace psdn
