#include "psdn/pgm_io.hpp"

#include <bit>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>

#include "psdn/errors.hpp"

namespace psdn {

namespace {

// Next unsigned integer token, skipping whitespace and '#' comments.
long next_int(std::istream& in, const char* what)
{
    int ch = in.get();
    while (ch != EOF) {
        if (ch == '#') {
            while (ch != EOF && ch != '\n')
                ch = in.get();
        } else if (std::isspace(ch)) {
            ch = in.get();
        } else {
            break;
        }
    }
    if (ch == EOF || !std::isdigit(ch))
        throw io_error(std::string("pgm: expected ") + what);
    long v = 0;
    while (ch != EOF && std::isdigit(ch)) {
        v = v * 10 + (ch - '0');
        if (v > 1000000000L)
            throw io_error(std::string("pgm: absurd ") + what);
        ch = in.get();
    }
    if (ch != EOF)
        in.unget();
    return v;
}

std::uint64_t to_le64(double v)
{
    std::uint64_t u = std::bit_cast<std::uint64_t>(v);
    if constexpr (std::endian::native == std::endian::big) {
        std::uint64_t s = 0;
        for (int i = 0; i < 8; ++i)
            s |= ((u >> (8 * i)) & 0xffULL) << (8 * (7 - i));
        u = s;
    }
    return u;
}

double from_le64(std::uint64_t u)
{
    if constexpr (std::endian::native == std::endian::big) {
        std::uint64_t s = 0;
        for (int i = 0; i < 8; ++i)
            s |= ((u >> (8 * i)) & 0xffULL) << (8 * (7 - i));
        u = s;
    }
    return std::bit_cast<double>(u);
}

void put_u32_le(std::ostream& out, std::uint32_t v)
{
    unsigned char b[4];
    for (int i = 0; i < 4; ++i)
        b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xffu);
    out.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t get_u32_le(std::istream& in)
{
    unsigned char b[4];
    in.read(reinterpret_cast<char*>(b), 4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i)
        v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
    return v;
}

} // namespace

ImageBuffer read_pgm(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw io_error("cannot open: " + path.string());

    char m0 = 0, m1 = 0;
    in.get(m0);
    in.get(m1);
    if (m0 != 'P' || (m1 != '2' && m1 != '5'))
        throw io_error("not a PGM (P2/P5) file: " + path.string());
    const bool binary = m1 == '5';

    const long w = next_int(in, "width");
    const long h = next_int(in, "height");
    const long maxval = next_int(in, "maxval");
    if (w <= 0 || h <= 0)
        throw io_error("pgm: non-positive dimensions");
    if (maxval < 1 || maxval > 65535)
        throw io_error("pgm: maxval out of range 1..65535");
    if (h * w > (std::int64_t(1) << 30))
        throw io_error("pgm: image too large");

    ImageBuffer img(static_cast<int>(h), static_cast<int>(w));
    const double scale = 1.0 / static_cast<double>(maxval);

    if (binary) {
        const int ws = in.get(); // exactly one whitespace byte before the raster
        if (ws == EOF || !std::isspace(ws))
            throw io_error("pgm: missing raster separator");
        const std::size_t count = img.data.size();
        const int bytes = maxval > 255 ? 2 : 1;
        std::vector<unsigned char> raw(count * bytes);
        in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
        if (static_cast<std::size_t>(in.gcount()) != raw.size())
            throw io_error("pgm: truncated raster");
        for (std::size_t i = 0; i < count; ++i) {
            long v = bytes == 2 ? (long(raw[2 * i]) << 8) | raw[2 * i + 1] : raw[i];
            if (v > maxval)
                throw io_error("pgm: sample exceeds maxval");
            img.data[i] = v * scale;
        }
    } else {
        for (double& px : img.data) {
            const long v = next_int(in, "sample");
            if (v > maxval)
                throw io_error("pgm: sample exceeds maxval");
            px = v * scale;
        }
    }
    return img;
}

void write_pgm(const std::filesystem::path& path, const ImageBuffer& img,
               int maxval, bool binary)
{
    require_valid(img, "write_pgm");
    if (maxval < 1 || maxval > 65535)
        throw std::invalid_argument("write_pgm: maxval out of range 1..65535");

    atomic_write(path, [&](std::ostream& out) {
        out << (binary ? "P5" : "P2") << "\n"
            << img.width << " " << img.height << "\n"
            << maxval << "\n";
        if (binary) {
            std::vector<unsigned char> raw;
            raw.reserve(img.data.size() * (maxval > 255 ? 2 : 1));
            for (double v : img.data) {
                const double c = v < 0.0 ? 0.0 : (v > 1.0 ? 1.0 : v);
                const long q = std::lround(c * maxval);
                if (maxval > 255) {
                    raw.push_back(static_cast<unsigned char>((q >> 8) & 0xff));
                    raw.push_back(static_cast<unsigned char>(q & 0xff));
                } else {
                    raw.push_back(static_cast<unsigned char>(q));
                }
            }
            out.write(reinterpret_cast<const char*>(raw.data()),
                      static_cast<std::streamsize>(raw.size()));
        } else {
            int on_line = 0;
            for (std::size_t i = 0; i < img.data.size(); ++i) {
                const double v = img.data[i];
                const double c = v < 0.0 ? 0.0 : (v > 1.0 ? 1.0 : v);
                out << std::lround(c * maxval);
                if (++on_line == 16 || i + 1 == img.data.size()) {
                    out << "\n";
                    on_line = 0;
                } else {
                    out << " ";
                }
            }
        }
    });
}

void write_f64(const std::filesystem::path& path, const ImageBuffer& img)
{
    if (img.height <= 0 || img.width <= 0 ||
        img.data.size() != static_cast<std::size_t>(img.num_pixels()))
        throw std::invalid_argument("write_f64: inconsistent image");

    atomic_write(path, [&](std::ostream& out) {
        out.write("PSDNF64\n", 8);
        put_u32_le(out, static_cast<std::uint32_t>(img.height));
        put_u32_le(out, static_cast<std::uint32_t>(img.width));
        for (double v : img.data) {
            const std::uint64_t u = to_le64(v);
            unsigned char b[8];
            for (int i = 0; i < 8; ++i)
                b[i] = static_cast<unsigned char>((u >> (8 * i)) & 0xffULL);
            out.write(reinterpret_cast<const char*>(b), 8);
        }
    });
}

ImageBuffer read_f64(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw io_error("cannot open: " + path.string());
    char magic[8];
    in.read(magic, 8);
    if (in.gcount() != 8 || std::memcmp(magic, "PSDNF64\n", 8) != 0)
        throw io_error("not a PSDNF64 dump: " + path.string());
    const std::uint32_t h = get_u32_le(in);
    const std::uint32_t w = get_u32_le(in);
    if (!in || h == 0 || w == 0 || std::uint64_t(h) * w > (std::uint64_t(1) << 30))
        throw io_error("f64 dump: bad header");
    ImageBuffer img(static_cast<int>(h), static_cast<int>(w));
    for (double& v : img.data) {
        unsigned char b[8];
        in.read(reinterpret_cast<char*>(b), 8);
        if (in.gcount() != 8)
            throw io_error("f64 dump: truncated payload");
        std::uint64_t u = 0;
        for (int i = 0; i < 8; ++i)
            u |= static_cast<std::uint64_t>(b[i]) << (8 * i);
        v = from_le64(u);
    }
    return img;
}

} // namespace psdn
