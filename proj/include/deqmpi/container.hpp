#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "deqmpi/errors.hpp"

namespace deqmpi {

enum class Dtype : std::uint8_t { f64 = 1, f32 = 2 };

/// One named tensor inside a ".mpir" container.
struct TensorEntry {
    std::string name;
    Dtype dtype = Dtype::f64;
    std::vector<std::uint32_t> dims;
    std::vector<double> f64; // populated when dtype == f64
    std::vector<float> f32;  // populated when dtype == f32

    std::size_t elem_count() const {
        std::size_t n = 1;
        for (auto d : dims) n *= d;
        return n;
    }
};

/// Little-endian binary container for named tensors.
///
/// Layout: magic "MPIR", u16 format version, u32 entry count, then per entry
/// u16 name length + UTF-8 name, u8 dtype code (1=f64, 2=f32), u8 ndim,
/// u32 dims, raw little-endian payload. Round trips are byte-exact.
class TensorContainer {
public:
    static constexpr std::uint16_t kVersion = 1;

    void add(const std::string& name, std::vector<std::uint32_t> dims, std::vector<double> data);
    void add_f32(const std::string& name, std::vector<std::uint32_t> dims, std::vector<float> data);
    void add_scalar(const std::string& name, double value);

    bool has(const std::string& name) const;
    const TensorEntry& get(const std::string& name) const;
    double scalar(const std::string& name) const;

    const std::vector<TensorEntry>& entries() const { return entries_; }
    std::size_t size() const { return entries_.size(); }

    void write(const std::string& path) const;
    static TensorContainer read(const std::string& path);

private:
    void check_unique(const std::string& name) const;
    std::vector<TensorEntry> entries_;
};

} // namespace deqmpi
