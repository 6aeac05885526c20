#include "gda/core/archive.hpp"

#include <cstdint>
#include <cstdio>
#include <memory>

namespace gda {

namespace {

constexpr char kMagic[6] = {'G', 'D', 'A', 'T', '1', '\n'};

struct FileCloser {
    void operator()(std::FILE* f) const {
        if (f) std::fclose(f);
    }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

void write_bytes(std::FILE* f, const void* p, size_t n) {
    check(std::fwrite(p, 1, n, f) == n, "archive: short write");
}

void read_bytes(std::FILE* f, void* p, size_t n) {
    check(std::fread(p, 1, n, f) == n, "archive: short read / truncated file");
}

template <typename T>
void write_pod(std::FILE* f, T v) {
    write_bytes(f, &v, sizeof(T));
}

template <typename T>
T read_pod(std::FILE* f) {
    T v{};
    read_bytes(f, &v, sizeof(T));
    return v;
}

} // namespace

void TensorArchive::put(const std::string& name, const Tensor& t) {
    check(!name.empty() && name != "__meta__", "archive: reserved or empty entry name");
    entries_[name] = t;
}

const Tensor& TensorArchive::get(const std::string& name) const {
    auto it = entries_.find(name);
    check(it != entries_.end(), "archive: missing entry '" + name + "'");
    return it->second;
}

std::vector<std::string> TensorArchive::names() const {
    std::vector<std::string> out;
    out.reserve(entries_.size());
    for (const auto& [k, v] : entries_) out.push_back(k);
    return out;
}

void TensorArchive::save(const std::string& path) const {
    FilePtr f(std::fopen(path.c_str(), "wb"));
    check(f != nullptr, "archive: cannot open for write: " + path);
    write_bytes(f.get(), kMagic, sizeof(kMagic));
    const uint32_t n = static_cast<uint32_t>(entries_.size()) + (meta_.empty() ? 0u : 1u);
    write_pod<uint32_t>(f.get(), n);
    if (!meta_.empty()) {
        const std::string name = "__meta__";
        write_pod<uint32_t>(f.get(), static_cast<uint32_t>(name.size()));
        write_bytes(f.get(), name.data(), name.size());
        write_pod<uint32_t>(f.get(), 0u);
        write_pod<int64_t>(f.get(), static_cast<int64_t>(meta_.size()));
        write_bytes(f.get(), meta_.data(), meta_.size());
    }
    for (const auto& [name, t] : entries_) {
        write_pod<uint32_t>(f.get(), static_cast<uint32_t>(name.size()));
        write_bytes(f.get(), name.data(), name.size());
        write_pod<uint32_t>(f.get(), static_cast<uint32_t>(t.rank()));
        for (int i = 0; i < t.rank(); ++i) write_pod<int64_t>(f.get(), t.dim(i));
        const int64_t bytes = t.numel() * static_cast<int64_t>(sizeof(float));
        write_pod<int64_t>(f.get(), bytes);
        write_bytes(f.get(), t.data(), static_cast<size_t>(bytes));
    }
}

TensorArchive TensorArchive::load(const std::string& path) {
    FilePtr f(std::fopen(path.c_str(), "rb"));
    check(f != nullptr, "archive: cannot open: " + path);
    char magic[6];
    read_bytes(f.get(), magic, sizeof(magic));
    check(std::memcmp(magic, kMagic, sizeof(kMagic)) == 0, "archive: bad magic in " + path);
    const uint32_t n = read_pod<uint32_t>(f.get());
    TensorArchive ar;
    for (uint32_t i = 0; i < n; ++i) {
        const uint32_t name_len = read_pod<uint32_t>(f.get());
        check(name_len > 0 && name_len < 4096, "archive: bad entry name length");
        std::string name(name_len, '\0');
        read_bytes(f.get(), name.data(), name_len);
        const uint32_t ndim = read_pod<uint32_t>(f.get());
        check(ndim <= 8, "archive: bad rank");
        std::vector<int> shape;
        for (uint32_t d = 0; d < ndim; ++d) {
            const int64_t dim = read_pod<int64_t>(f.get());
            check(dim >= 0 && dim < (1ll << 32), "archive: bad dim");
            shape.push_back(static_cast<int>(dim));
        }
        const int64_t bytes = read_pod<int64_t>(f.get());
        check(bytes >= 0, "archive: bad payload size");
        if (name == "__meta__") {
            std::string meta(static_cast<size_t>(bytes), '\0');
            read_bytes(f.get(), meta.data(), meta.size());
            ar.meta_ = std::move(meta);
            continue;
        }
        Tensor t(shape);
        check(bytes == t.numel() * static_cast<int64_t>(sizeof(float)),
              "archive: payload/shape mismatch for '" + name + "'");
        read_bytes(f.get(), t.data(), static_cast<size_t>(bytes));
        ar.entries_[name] = std::move(t);
    }
    return ar;
}

} // namespace gda
