#include "npns/field_io.hpp"

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace npns {

namespace {

static_assert(std::endian::native == std::endian::little,
              "checkpoint writer assumes a little-endian host");

void put_u32(std::ostream& os, std::uint32_t v) {
  std::array<char, 4> b;
  for (int i = 0; i < 4; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xFF);
  os.write(b.data(), 4);
}

std::uint32_t get_u32(std::istream& is) {
  std::array<unsigned char, 4> b{};
  if (!is.read(reinterpret_cast<char*>(b.data()), 4)) throw std::runtime_error("truncated checkpoint header");
  return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

template <typename T>
void put_raw(std::ostream& os, T v) {
  char b[sizeof(T)];
  std::memcpy(b, &v, sizeof(T));
  os.write(b, sizeof(T));
}

template <typename T>
T get_raw(std::istream& is) {
  char b[sizeof(T)];
  if (!is.read(b, sizeof(T))) throw std::runtime_error("truncated checkpoint payload");
  T v;
  std::memcpy(&v, b, sizeof(T));
  return v;
}

}  // namespace

void write_field(std::ostream& os, const SpectralField& field, Precision precision) {
  const Grid& g = field.grid();
  const int n = g.n();
  os.write("NPNS", 4);
  put_u32(os, kCheckpointVersion);
  put_u32(os, static_cast<std::uint32_t>(n));
  std::uint32_t flags = 0;
  if (field.mean_free()) flags |= kFlagMeanFree;
  if (precision == Precision::complex128) flags |= kFlagDouble;
  put_u32(os, flags);
  for (int k1 = -n / 2; k1 < n / 2; ++k1) {
    for (int k2 = -n / 2; k2 < n / 2; ++k2) {
      const Complex c = field.coeff(k1, k2);
      if (precision == Precision::complex128) {
        put_raw(os, c.real());
        put_raw(os, c.imag());
      } else {
        put_raw(os, static_cast<float>(c.real()));
        put_raw(os, static_cast<float>(c.imag()));
      }
    }
  }
}

SpectralField read_field(std::istream& is) {
  char magic[4];
  if (!is.read(magic, 4)) throw std::runtime_error("truncated checkpoint header");
  if (std::memcmp(magic, "NPNS", 4) != 0) throw std::runtime_error("bad checkpoint magic");
  const std::uint32_t version = get_u32(is);
  if (version != kCheckpointVersion) throw std::runtime_error("unsupported checkpoint version");
  const int n = static_cast<int>(get_u32(is));
  const std::uint32_t flags = get_u32(is);
  SpectralField field{Grid(n)};
  const Grid& g = field.grid();
  for (int k1 = -n / 2; k1 < n / 2; ++k1) {
    for (int k2 = -n / 2; k2 < n / 2; ++k2) {
      Complex c;
      if (flags & kFlagDouble) {
        const double re = get_raw<double>(is);
        c = Complex(re, get_raw<double>(is));
      } else {
        const float re = get_raw<float>(is);
        c = Complex(re, get_raw<float>(is));
      }
      field.at(g.index_of(k1), g.index_of(k2)) = c;
    }
  }
  if (flags & kFlagMeanFree) field.set_mean_free(true);
  return field;
}

void write_fields(const std::filesystem::path& path, const std::vector<SpectralField>& fields,
                  Precision precision) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw std::runtime_error("cannot open " + path.string() + " for writing");
  for (const auto& f : fields) write_field(os, f, precision);
  if (!os) throw std::runtime_error("write failed: " + path.string());
}

std::vector<SpectralField> read_fields(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open " + path.string());
  std::vector<SpectralField> out;
  while (is.peek() != std::char_traits<char>::eof()) out.push_back(read_field(is));
  return out;
}

}  // namespace npns
