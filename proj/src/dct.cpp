#include "psdn/dct.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace psdn {

std::vector<double> dct2_matrix_1d(int L)
{
    if (L < 1)
        throw std::invalid_argument("dct2_matrix_1d: size must be >= 1");
    std::vector<double> T(static_cast<std::size_t>(L) * L);
    const double s0 = std::sqrt(1.0 / L);
    const double sk = std::sqrt(2.0 / L);
    for (int k = 0; k < L; ++k)
        for (int i = 0; i < L; ++i)
            T[static_cast<std::size_t>(k) * L + i] =
                (k == 0 ? s0 : sk) *
                std::cos(std::numbers::pi * (2.0 * i + 1.0) * k / (2.0 * L));
    return T;
}

std::vector<double> dct2_matrix_2d(int patch_height, int patch_width)
{
    const std::vector<double> Th = dct2_matrix_1d(patch_height);
    const std::vector<double> Tw = dct2_matrix_1d(patch_width);
    const int n = patch_height * patch_width;
    std::vector<double> B(static_cast<std::size_t>(n) * n);
    for (int kh = 0; kh < patch_height; ++kh)
        for (int kw = 0; kw < patch_width; ++kw)
            for (int ih = 0; ih < patch_height; ++ih)
                for (int iw = 0; iw < patch_width; ++iw)
                    B[static_cast<std::size_t>(kh * patch_width + kw) * n +
                      (ih * patch_width + iw)] =
                        Th[static_cast<std::size_t>(kh) * patch_height + ih] *
                        Tw[static_cast<std::size_t>(kw) * patch_width + iw];
    return B;
}

} // namespace psdn
