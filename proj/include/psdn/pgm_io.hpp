#pragma once

#include <filesystem>
#include <fstream>
#include <ostream>
#include <utility>

#include "psdn/errors.hpp"
#include "psdn/image.hpp"

namespace psdn {

/// Writes a file through a sibling temp file followed by a rename, so a
/// reader never observes a partial file. `fill` receives the open stream.
template <class Fn>
void atomic_write(const std::filesystem::path& path, Fn&& fill)
{
    std::filesystem::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out)
            throw io_error("cannot open for writing: " + tmp.string());
        std::forward<Fn>(fill)(out);
        out.flush();
        if (!out)
            throw io_error("write failed: " + tmp.string());
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec)
        throw io_error("rename failed: " + path.string() + " (" + ec.message() + ")");
}

/// Reads PGM, both ASCII (P2) and binary (P5), maxval 1..65535. Binary
/// samples with maxval > 255 are two bytes, most significant first, per the
/// Netpbm format. Pixels map to [0, 1] by division by maxval. Malformed
/// files throw io_error.
ImageBuffer read_pgm(const std::filesystem::path& path);

/// Writes PGM; binary chooses P5 over P2. Samples are
/// round(clamp(v, 0, 1) * maxval). The file is first written under a
/// temporary name in the same directory and then renamed into place.
void write_pgm(const std::filesystem::path& path, const ImageBuffer& img,
               int maxval = 255, bool binary = true);

/// Raw float64 dump. Layout: 8 magic bytes "PSDNF64\n", uint32 little-endian
/// height, uint32 little-endian width, then height*width little-endian
/// doubles in row-major order. Round trips are lossless, bit for bit.
void write_f64(const std::filesystem::path& path, const ImageBuffer& img);
ImageBuffer read_f64(const std::filesystem::path& path);

} // namespace psdn
