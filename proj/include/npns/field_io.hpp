#pragma once

// Binary checkpoint records for spectral fields.
//
// One record: 16-byte little-endian header
//   bytes 0..3   magic "NPNS"
//   bytes 4..7   u32 version (1)
//   bytes 8..11  u32 n
//   bytes 12..15 u32 flags (bit 0: mean-free, bit 1: complex128 payload)
// followed by n*n complex coefficients, rows k1 = -n/2 .. n/2-1, columns
// k2 = -n/2 .. n/2-1. The payload is complex64 (two float32) unless bit 1
// is set, in which case it is complex128 (two float64) and lossless.

#include <filesystem>
#include <iosfwd>
#include <vector>

#include "npns/spectral.hpp"

namespace npns {

enum class Precision { complex64, complex128 };

inline constexpr unsigned kCheckpointVersion = 1;
inline constexpr unsigned kFlagMeanFree = 1u << 0;
inline constexpr unsigned kFlagDouble = 1u << 1;

void write_field(std::ostream& os, const SpectralField& field, Precision precision);
/// Throws std::runtime_error on bad magic, unsupported version or truncation.
SpectralField read_field(std::istream& is);

/// A snapshot file is a sequence of records; a state uses four
/// (velocity x, velocity y, sigma, rho).
void write_fields(const std::filesystem::path& path, const std::vector<SpectralField>& fields,
                  Precision precision);
std::vector<SpectralField> read_fields(const std::filesystem::path& path);

}  // namespace npns
