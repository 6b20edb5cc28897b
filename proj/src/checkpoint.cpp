#include "edgepoint/checkpoint.hpp"

#include <filesystem>
#include <fstream>

#include "edgepoint/errors.hpp"
#include "edgepoint/io.hpp"

namespace edgepoint::ckpt {

namespace {
constexpr char kMagic[5] = "EPCK";
constexpr std::uint32_t kVersion = 1;
}  // namespace

void save(const std::string& path, const std::vector<Entry>& entries) {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw ArtifactError("cannot open checkpoint for writing: " + path);
    io::put_magic(os, kMagic);
    io::put_u32(os, kVersion);
    io::put_u32(os, static_cast<std::uint32_t>(entries.size()));
    for (const auto& e : entries) {
        io::put_u32(os, static_cast<std::uint32_t>(e.name.size()));
        os.write(e.name.data(), static_cast<std::streamsize>(e.name.size()));
        io::put_u32(os, static_cast<std::uint32_t>(e.shape.size()));
        std::size_t numel = 1;
        for (int d : e.shape) {
            io::put_u32(os, static_cast<std::uint32_t>(d));
            numel *= static_cast<std::size_t>(d);
        }
        if (numel != e.values.size())
            throw DimensionError("checkpoint entry '" + e.name + "': shape/value mismatch");
        for (float v : e.values) io::put_f32(os, v);
    }
    if (!os) throw ArtifactError("write failed: " + path);
}

std::vector<Entry> load(const std::string& path) {
    if (!std::filesystem::exists(path))
        throw ArtifactError("checkpoint not found: " + path);
    std::ifstream is(path, std::ios::binary);
    if (!is) throw ArtifactError("cannot open checkpoint: " + path);
    io::expect_magic(is, kMagic, "checkpoint");
    if (io::get_u32(is) != kVersion) throw DomainError("unsupported checkpoint version");
    const std::uint32_t count = io::get_u32(is);
    std::vector<Entry> entries(count);
    for (auto& e : entries) {
        const std::uint32_t name_len = io::get_u32(is);
        e.name.resize(name_len);
        if (!is.read(e.name.data(), name_len)) throw DomainError("truncated checkpoint");
        const std::uint32_t rank = io::get_u32(is);
        e.shape.resize(rank);
        std::size_t numel = 1;
        for (auto& d : e.shape) {
            d = static_cast<int>(io::get_u32(is));
            numel *= static_cast<std::size_t>(d);
        }
        e.values.resize(numel);
        for (auto& v : e.values) v = io::get_f32(is);
    }
    return entries;
}

}  // namespace edgepoint::ckpt
