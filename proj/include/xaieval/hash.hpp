#pragma once
// FNV-1a 64-bit content hashing for manifests and reproducibility checks.

#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

namespace xaieval {

class Fnv64 {
public:
    Fnv64& update(const void* data, std::size_t n) {
        const auto* p = static_cast<const unsigned char*>(data);
        for (std::size_t i = 0; i < n; ++i) {
            h_ ^= p[i];
            h_ *= 0x100000001b3ull;
        }
        return *this;
    }

    Fnv64& update(const std::string& s) { return update(s.data(), s.size()); }

    template <typename T>
    Fnv64& update_pod(const T& x) {
        static_assert(std::is_trivially_copyable_v<T>);
        return update(&x, sizeof(T));
    }

    template <typename T>
    Fnv64& update_vec(const std::vector<T>& v) {
        static_assert(std::is_trivially_copyable_v<T>);
        return update(v.data(), v.size() * sizeof(T));
    }

    std::uint64_t digest() const { return h_; }

    std::string hex() const {
        static const char* d = "0123456789abcdef";
        std::string s(16, '0');
        std::uint64_t h = h_;
        for (int i = 15; i >= 0; --i) {
            s[i] = d[h & 0xf];
            h >>= 4;
        }
        return s;
    }

private:
    std::uint64_t h_ = 0xcbf29ce484222325ull;
};

inline std::string hash_bytes_hex(const void* data, std::size_t n) {
    Fnv64 h;
    h.update(data, n);
    return h.hex();
}

inline std::string hash_string_hex(const std::string& s) {
    return hash_bytes_hex(s.data(), s.size());
}

// Returns empty string when the file cannot be read.
inline std::string hash_file_hex(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) return {};
    Fnv64 h;
    char buf[1 << 16];
    while (in) {
        in.read(buf, sizeof(buf));
        h.update(buf, static_cast<std::size_t>(in.gcount()));
    }
    return h.hex();
}

}  // namespace xaieval
