#pragma once

#include <cstdint>
#include <cstring>
#include <string>

namespace gda {

// FNV-1a 64-bit running digest. Used for checkpoint/weight fingerprints and
// stage idempotence checks, not for security.
class Digest {
public:
    Digest& update(const void* p, size_t n) {
        const auto* b = static_cast<const unsigned char*>(p);
        for (size_t i = 0; i < n; ++i) {
            h_ ^= b[i];
            h_ *= 1099511628211ull;
        }
        return *this;
    }

    Digest& update(const std::string& s) { return update(s.data(), s.size()); }

    template <typename T>
    Digest& update_pod(const T& v) {
        return update(&v, sizeof(T));
    }

    uint64_t value() const { return h_; }

    std::string hex() const {
        static const char* digits = "0123456789abcdef";
        std::string out(16, '0');
        uint64_t v = h_;
        for (int i = 15; i >= 0; --i) {
            out[static_cast<size_t>(i)] = digits[v & 0xf];
            v >>= 4;
        }
        return out;
    }

private:
    uint64_t h_ = 1469598103934665603ull;
};

} // namespace gda
