#include "msnet/pnm.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

#include "msnet/error.hpp"

namespace msnet {

namespace {

std::uint8_t quantize(double x) {
    const double c = std::min(std::max(x, 0.0), 1.0);
    return static_cast<std::uint8_t>(std::llround(c * 255.0));
}

// Streaming header parser that tracks the byte offset for error messages.
class PnmReader {
  public:
    PnmReader(const std::filesystem::path& path) : path_(path), in_(path, std::ios::binary) {
        if (!in_) fail(ErrorCategory::io, "cannot open " + path.string());
    }

    [[noreturn]] void parse_fail(const std::string& what) {
        fail(ErrorCategory::parse,
             path_.string() + ": " + what + " at byte " + std::to_string(offset_));
    }

    int get() {
        const int c = in_.get();
        if (c != EOF) ++offset_;
        return c;
    }

    // Skips whitespace and '#' comment lines between header tokens.
    void skip_separators() {
        for (;;) {
            int c = in_.peek();
            if (c == '#') {
                while (c != EOF && c != '\n') c = get();
            } else if (c == ' ' || c == '\t' || c == '\r' || c == '\n') {
                get();
            } else {
                return;
            }
        }
    }

    int read_uint(const char* name, int max_value) {
        skip_separators();
        int c = in_.peek();
        if (c == EOF) parse_fail(std::string("unexpected end of file reading ") + name);
        if (c < '0' || c > '9') parse_fail(std::string("expected digit for ") + name);
        long value = 0;
        while ((c = in_.peek()) >= '0' && c <= '9') {
            value = value * 10 + (get() - '0');
            if (value > max_value)
                parse_fail(std::string(name) + " exceeds supported maximum " +
                           std::to_string(max_value));
        }
        if (value <= 0 && max_value > 1) parse_fail(std::string(name) + " must be positive");
        return static_cast<int>(value);
    }

    void expect_magic(const char* magic) {
        if (get() != magic[0] || get() != magic[1])
            fail(ErrorCategory::parse,
                 path_.string() + ": not a " + magic + " file (bad magic at byte 0)");
    }

    std::vector<std::uint8_t> read_payload(std::size_t count) {
        // single whitespace byte separates the header from the raster
        const int sep = get();
        if (sep != ' ' && sep != '\t' && sep != '\r' && sep != '\n')
            parse_fail("expected single whitespace before pixel data");
        std::vector<std::uint8_t> data(count);
        in_.read(reinterpret_cast<char*>(data.data()), static_cast<std::streamsize>(count));
        const std::size_t got = static_cast<std::size_t>(in_.gcount());
        offset_ += got;
        if (got != count)
            parse_fail("truncated payload, expected " + std::to_string(count) + " bytes, got " +
                       std::to_string(got));
        return data;
    }

  private:
    std::filesystem::path path_;
    std::ifstream in_;
    std::size_t offset_ = 0;
};

void atomic_write(const std::filesystem::path& path, const std::string& header,
                  const std::vector<std::uint8_t>& payload) {
    const std::filesystem::path tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) fail(ErrorCategory::io, "cannot write " + tmp.string());
        out.write(header.data(), static_cast<std::streamsize>(header.size()));
        out.write(reinterpret_cast<const char*>(payload.data()),
                  static_cast<std::streamsize>(payload.size()));
        if (!out) fail(ErrorCategory::io, "short write to " + tmp.string());
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) fail(ErrorCategory::io, "cannot rename " + tmp.string() + " to " + path.string());
}

std::string pnm_header(const char* magic, int w, int h) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%s\n%d %d\n255\n", magic, w, h);
    return buf;
}

}  // namespace

void write_ppm(const std::filesystem::path& path, const Image3& image) {
    std::vector<std::uint8_t> payload(static_cast<std::size_t>(image.h) * image.w * 3);
    std::size_t o = 0;
    for (int y = 0; y < image.h; ++y)
        for (int x = 0; x < image.w; ++x)
            for (int c = 0; c < 3; ++c) payload[o++] = quantize(image.at(c, y, x));
    atomic_write(path, pnm_header("P6", image.w, image.h), payload);
}

Image3 read_ppm(const std::filesystem::path& path) {
    PnmReader r(path);
    r.expect_magic("P6");
    const int w = r.read_uint("width", 1 << 16);
    const int h = r.read_uint("height", 1 << 16);
    const int maxval = r.read_uint("maxval", 255);
    if (maxval != 255) r.parse_fail("unsupported maxval, expected 255");
    auto payload = r.read_payload(static_cast<std::size_t>(w) * h * 3);
    Image3 img{h, w, std::vector<double>(static_cast<std::size_t>(3) * h * w)};
    std::size_t o = 0;
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            for (int c = 0; c < 3; ++c) img.at(c, y, x) = payload[o++] / 255.0;
    return img;
}

void write_pgm(const std::filesystem::path& path, const RealMap& map) {
    std::vector<std::uint8_t> payload(static_cast<std::size_t>(map.h) * map.w);
    for (std::size_t i = 0; i < payload.size(); ++i) payload[i] = quantize(map.v[i]);
    atomic_write(path, pnm_header("P5", map.w, map.h), payload);
}

void write_pgm(const std::filesystem::path& path, const BinMap& mask) {
    std::vector<std::uint8_t> payload(static_cast<std::size_t>(mask.h) * mask.w);
    for (std::size_t i = 0; i < payload.size(); ++i) payload[i] = mask.v[i] ? 255 : 0;
    atomic_write(path, pnm_header("P5", mask.w, mask.h), payload);
}

RealMap read_pgm(const std::filesystem::path& path) {
    PnmReader r(path);
    r.expect_magic("P5");
    const int w = r.read_uint("width", 1 << 16);
    const int h = r.read_uint("height", 1 << 16);
    const int maxval = r.read_uint("maxval", 255);
    if (maxval != 255) r.parse_fail("unsupported maxval, expected 255");
    auto payload = r.read_payload(static_cast<std::size_t>(w) * h);
    RealMap map{h, w, std::vector<double>(payload.size())};
    for (std::size_t i = 0; i < payload.size(); ++i) map.v[i] = payload[i] / 255.0;
    return map;
}

BinMap read_mask(const std::filesystem::path& path) {
    PnmReader r(path);
    r.expect_magic("P5");
    const int w = r.read_uint("width", 1 << 16);
    const int h = r.read_uint("height", 1 << 16);
    const int maxval = r.read_uint("maxval", 255);
    if (maxval != 255) r.parse_fail("unsupported maxval, expected 255");
    auto payload = r.read_payload(static_cast<std::size_t>(w) * h);
    BinMap mask{h, w, std::vector<std::uint8_t>(payload.size())};
    for (std::size_t i = 0; i < payload.size(); ++i) mask.v[i] = payload[i] >= 128 ? 1 : 0;
    return mask;
}

}  // namespace msnet
