#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace pml {

struct error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Argument outside its documented range.
struct bounds_error : error {
    using error::error;
};

// A documented invariant does not hold.
struct invariant_error : error {
    using error::error;
};

// Bad or incomplete configuration.
struct config_error : error {
    using error::error;
};

// Malformed file on disk.
struct format_error : error {
    using error::error;
};

// Numeric failure during training (NaN loss etc).
struct training_error : error {
    using error::error;
};

struct extraction_error : error {
    using error::error;
};

// Counter-based stream split: derive an independent seed from a base seed
// and a set of indices (epoch, step, ...), stable across platforms.
inline std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) {
    std::uint64_t z = a + 0x9e3779b97f4a7c15ULL + b;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

}  // namespace pml
