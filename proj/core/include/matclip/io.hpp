#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "matclip/tensor.hpp"

namespace matclip {

// Embedding/feature container: magic "MCEB", u32 version, u32 rows, u32 cols,
// little-endian f32 payload (row-major).
inline constexpr std::uint32_t kMcebVersion = 1;

void write_mceb(const std::string& path, const Mat<float>& m);
Mat<float> read_mceb(const std::string& path);

// One id per line, paired with a matrix file row-for-row.
void write_ids(const std::string& path, const std::vector<std::string>& ids);
std::vector<std::string> read_ids(const std::string& path);

// Writes to "<path>.tmp" and renames into place on commit; the temporary is
// removed if the writer is destroyed without committing, so failed runs never
// leave partial output files.
class AtomicFile {
public:
    explicit AtomicFile(std::string path);
    ~AtomicFile();
    AtomicFile(const AtomicFile&) = delete;
    AtomicFile& operator=(const AtomicFile&) = delete;

    const std::string& temp_path() const { return temp_; }
    void commit();

private:
    std::string path_;
    std::string temp_;
    bool committed_ = false;
};

namespace detail {

void put_u32(std::string& buf, std::uint32_t v);
void put_f32(std::string& buf, float v);
std::uint32_t get_u32(const std::uint8_t*& p, const std::uint8_t* end, const std::string& path);
float get_f32(const std::uint8_t*& p, const std::uint8_t* end, const std::string& path);

std::vector<std::uint8_t> read_file(const std::string& path);
void write_file(const std::string& path, const std::string& bytes);

}  // namespace detail

}  // namespace matclip
