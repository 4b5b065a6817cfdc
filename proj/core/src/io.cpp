#include "matclip/io.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>

#include "matclip/errors.hpp"

namespace matclip {

namespace detail {

void put_u32(std::string& buf, std::uint32_t v) {
    buf.push_back(static_cast<char>(v & 0xff));
    buf.push_back(static_cast<char>((v >> 8) & 0xff));
    buf.push_back(static_cast<char>((v >> 16) & 0xff));
    buf.push_back(static_cast<char>((v >> 24) & 0xff));
}

void put_f32(std::string& buf, float v) {
    put_u32(buf, std::bit_cast<std::uint32_t>(v));
}

std::uint32_t get_u32(const std::uint8_t*& p, const std::uint8_t* end, const std::string& path) {
    if (end - p < 4) throw IoError(path + ": truncated file");
    std::uint32_t v = static_cast<std::uint32_t>(p[0]) |
                      (static_cast<std::uint32_t>(p[1]) << 8) |
                      (static_cast<std::uint32_t>(p[2]) << 16) |
                      (static_cast<std::uint32_t>(p[3]) << 24);
    p += 4;
    return v;
}

float get_f32(const std::uint8_t*& p, const std::uint8_t* end, const std::string& path) {
    return std::bit_cast<float>(get_u32(p, end, path));
}

std::vector<std::uint8_t> read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path);
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                    std::istreambuf_iterator<char>());
    return bytes;
}

void write_file(const std::string& path, const std::string& bytes) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open " + path + " for writing");
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("write failed: " + path);
}

}  // namespace detail

AtomicFile::AtomicFile(std::string path) : path_(std::move(path)), temp_(path_ + ".tmp") {}

AtomicFile::~AtomicFile() {
    if (!committed_) {
        std::error_code ec;
        std::filesystem::remove(temp_, ec);
    }
}

void AtomicFile::commit() {
    std::error_code ec;
    std::filesystem::rename(temp_, path_, ec);
    if (ec) throw IoError("cannot rename " + temp_ + " to " + path_ + ": " + ec.message());
    committed_ = true;
}

void write_mceb(const std::string& path, const Mat<float>& m) {
    std::string buf;
    buf.reserve(16 + 4 * m.data.size());
    buf += "MCEB";
    detail::put_u32(buf, kMcebVersion);
    detail::put_u32(buf, static_cast<std::uint32_t>(m.rows));
    detail::put_u32(buf, static_cast<std::uint32_t>(m.cols));
    for (float v : m.data) detail::put_f32(buf, v);

    AtomicFile file(path);
    detail::write_file(file.temp_path(), buf);
    file.commit();
}

Mat<float> read_mceb(const std::string& path) {
    const auto bytes = detail::read_file(path);
    const std::uint8_t* p = bytes.data();
    const std::uint8_t* end = p + bytes.size();
    if (bytes.size() < 4 || std::memcmp(p, "MCEB", 4) != 0)
        throw BadMagic(path + ": not an MCEB file");
    p += 4;
    const std::uint32_t version = detail::get_u32(p, end, path);
    if (version != kMcebVersion)
        throw VersionMismatch(path + ": unsupported MCEB version " + std::to_string(version));
    const std::uint32_t rows = detail::get_u32(p, end, path);
    const std::uint32_t cols = detail::get_u32(p, end, path);
    if (static_cast<std::size_t>(end - p) != 4ull * rows * cols)
        throw IoError(path + ": payload size does not match header");
    Mat<float> m(static_cast<int>(rows), static_cast<int>(cols));
    for (auto& v : m.data) v = detail::get_f32(p, end, path);
    return m;
}

void write_ids(const std::string& path, const std::vector<std::string>& ids) {
    std::string buf;
    for (const auto& id : ids) {
        buf += id;
        buf += '\n';
    }
    AtomicFile file(path);
    detail::write_file(file.temp_path(), buf);
    file.commit();
}

std::vector<std::string> read_ids(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path);
    std::vector<std::string> ids;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty()) ids.push_back(line);
    }
    return ids;
}

}  // namespace matclip
