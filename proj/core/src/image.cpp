#include "matclip/image.hpp"

#include <cctype>
#include <fstream>

#include "matclip/errors.hpp"
#include "matclip/io.hpp"

namespace matclip {

Image::Image(int w, int h)
    : width(w), height(h), pixels(3 * static_cast<std::size_t>(w) * h, 0) {}

Mask::Mask(int w, int h)
    : width(w), height(h), bits(static_cast<std::size_t>(w) * h, 0) {}

std::size_t Mask::count_set() const {
    std::size_t n = 0;
    for (auto b : bits) n += (b != 0);
    return n;
}

namespace {

// Netpbm header token: skips whitespace and '#' comment lines.
std::string next_token(std::istream& in) {
    std::string tok;
    int c = in.get();
    while (c != EOF) {
        if (c == '#') {
            while (c != EOF && c != '\n') c = in.get();
        } else if (std::isspace(c)) {
            c = in.get();
        } else {
            break;
        }
    }
    while (c != EOF && !std::isspace(c)) {
        tok.push_back(static_cast<char>(c));
        c = in.get();
    }
    return tok;
}

struct PnmHeader {
    int width = 0;
    int height = 0;
};

PnmHeader read_header(std::istream& in, const std::string& magic, const std::string& path) {
    if (next_token(in) != magic)
        throw BadMagic(path + ": expected " + magic + " header");
    PnmHeader h;
    try {
        h.width = std::stoi(next_token(in));
        h.height = std::stoi(next_token(in));
        int maxval = std::stoi(next_token(in));
        if (maxval != 255)
            throw IoError(path + ": only maxval 255 supported");
    } catch (const std::invalid_argument&) {
        throw IoError(path + ": malformed header");
    }
    if (h.width < 1 || h.height < 1)
        throw IoError(path + ": non-positive dimensions");
    return h;
}

}  // namespace

Image read_ppm(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path);
    PnmHeader h = read_header(in, "P6", path);
    Image img(h.width, h.height);
    in.read(reinterpret_cast<char*>(img.pixels.data()),
            static_cast<std::streamsize>(img.pixels.size()));
    if (in.gcount() != static_cast<std::streamsize>(img.pixels.size()))
        throw IoError(path + ": truncated pixel data");
    return img;
}

void write_ppm(const Image& img, const std::string& path) {
    std::string buf = "P6\n" + std::to_string(img.width) + " " + std::to_string(img.height) +
                      "\n255\n";
    buf.append(reinterpret_cast<const char*>(img.pixels.data()), img.pixels.size());
    AtomicFile file(path);
    detail::write_file(file.temp_path(), buf);
    file.commit();
}

Mask read_pgm_mask(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path);
    PnmHeader h = read_header(in, "P5", path);
    std::vector<std::uint8_t> raw(static_cast<std::size_t>(h.width) * h.height);
    in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
    if (in.gcount() != static_cast<std::streamsize>(raw.size()))
        throw IoError(path + ": truncated pixel data");
    Mask m(h.width, h.height);
    for (std::size_t i = 0; i < raw.size(); ++i) m.bits[i] = raw[i] > 0 ? 1 : 0;
    return m;
}

void write_pgm_mask(const Mask& mask, const std::string& path) {
    std::string buf = "P5\n" + std::to_string(mask.width) + " " + std::to_string(mask.height) +
                      "\n255\n";
    for (auto b : mask.bits) buf.push_back(b ? static_cast<char>(0xff) : '\0');
    AtomicFile file(path);
    detail::write_file(file.temp_path(), buf);
    file.commit();
}

}  // namespace matclip
