#include "eegrecon/checkpoint.hpp"

#include "eegrecon/errors.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>

namespace eegrecon {

namespace {

constexpr char kMagic[8] = {'E', 'R', 'C', 'K', 'P', 'T', '0', '1'};
constexpr std::uint32_t kVersion = 1;

template <typename T>
void write_pod(std::ofstream& out, const T& v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_pod(std::ifstream& in, const std::string& path) {
    T v{};
    in.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!in) throw DataError("checkpoint: truncated file " + path);
    return v;
}

} // namespace

void save_checkpoint(const ParamStore& store, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("checkpoint: cannot write " + path);
    out.write(kMagic, sizeof(kMagic));
    write_pod(out, kVersion);
    write_pod(out, static_cast<std::uint32_t>(store.count()));
    for (Eigen::Index i = 0; i < store.count(); ++i) {
        const auto& e = store.entry(i);
        write_pod(out, static_cast<std::uint32_t>(e.name.size()));
        out.write(e.name.data(), static_cast<std::streamsize>(e.name.size()));
        write_pod(out, static_cast<std::uint32_t>(e.dims.size()));
        for (auto d : e.dims) write_pod(out, static_cast<std::uint64_t>(d));
        out.write(reinterpret_cast<const char*>(e.value.data()),
                  static_cast<std::streamsize>(sizeof(double) * e.value.size()));
    }
    if (!out) throw DataError("checkpoint: write failed for " + path);
}

ParamStore load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("checkpoint: cannot open " + path);
    char magic[8];
    in.read(magic, sizeof(magic));
    if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
        throw DataError("checkpoint: bad magic in " + path);
    if (read_pod<std::uint32_t>(in, path) != kVersion)
        throw DataError("checkpoint: unsupported version in " + path);
    const auto count = read_pod<std::uint32_t>(in, path);
    ParamStore store;
    for (std::uint32_t i = 0; i < count; ++i) {
        const auto name_len = read_pod<std::uint32_t>(in, path);
        std::string name(name_len, '\0');
        in.read(name.data(), name_len);
        if (!in) throw DataError("checkpoint: truncated file " + path);
        const auto ndim = read_pod<std::uint32_t>(in, path);
        std::vector<Eigen::Index> dims;
        for (std::uint32_t d = 0; d < ndim; ++d)
            dims.push_back(static_cast<Eigen::Index>(read_pod<std::uint64_t>(in, path)));
        Eigen::Index idx = store.add(name, dims);
        Vec& v = store.value(idx);
        in.read(reinterpret_cast<char*>(v.data()),
                static_cast<std::streamsize>(sizeof(double) * v.size()));
        if (!in) throw DataError("checkpoint: truncated file " + path);
    }
    return store;
}

void restore_values(ParamStore& dst, const ParamStore& src) {
    if (dst.count() != src.count())
        throw DataError("checkpoint: parameter block count mismatch");
    for (Eigen::Index i = 0; i < dst.count(); ++i) {
        if (dst.entry(i).name != src.entry(i).name ||
            dst.value(i).size() != src.value(i).size())
            throw DataError("checkpoint: parameter block mismatch at " +
                            dst.entry(i).name);
        dst.value(i) = src.value(i);
    }
}

} // namespace eegrecon
