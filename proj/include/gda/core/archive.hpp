#pragma once

#include <map>
#include <string>
#include <vector>

#include "gda/core/tensor.hpp"

namespace gda {

// Single-file archive of named float tensors plus a free-form JSON metadata
// string (config echo). Binary layout, little-endian:
//   magic "GDAT1\n", u32 entry count,
//   per entry: u32 name length, name bytes, u32 ndim, i64 dims[ndim],
//              i64 payload bytes, float payload.
// Metadata is stored as a zero-dim entry named "__meta__" with raw bytes.
class TensorArchive {
public:
    void put(const std::string& name, const Tensor& t);
    void put_meta(const std::string& json_text) { meta_ = json_text; }

    bool has(const std::string& name) const { return entries_.count(name) != 0; }
    const Tensor& get(const std::string& name) const;
    const std::string& meta() const { return meta_; }
    std::vector<std::string> names() const;
    size_t size() const { return entries_.size(); }

    void save(const std::string& path) const;
    static TensorArchive load(const std::string& path);

private:
    std::map<std::string, Tensor> entries_;
    std::string meta_;
};

} // namespace gda
