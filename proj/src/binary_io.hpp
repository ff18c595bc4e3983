#ifndef FANET_SRC_BINARY_IO_HPP
#define FANET_SRC_BINARY_IO_HPP

#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <stdexcept>
#include <string>
#include <type_traits>

// Little-endian fixed-width encoding for the on-disk formats.
namespace fanet::binary_io {

static_assert(std::endian::native == std::endian::little, "on-disk formats assume a little-endian host");

class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

template <typename T>
void put(std::ostream& out, T value) {
  static_assert(std::is_trivially_copyable_v<T>);
  out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
T get(std::istream& in) {
  static_assert(std::is_trivially_copyable_v<T>);
  T value;
  if (!in.read(reinterpret_cast<char*>(&value), sizeof(T))) throw FormatError("unexpected end of file");
  return value;
}

inline void put_string(std::ostream& out, const std::string& s) {
  put<std::uint32_t>(out, static_cast<std::uint32_t>(s.size()));
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

inline std::string get_string(std::istream& in, std::uint32_t max_len = 1u << 26) {
  const auto len = get<std::uint32_t>(in);
  if (len > max_len) throw FormatError("string length out of range");
  std::string s(len, '\0');
  if (!in.read(s.data(), len)) throw FormatError("unexpected end of file");
  return s;
}

inline void expect_magic(std::istream& in, const char (&magic)[9]) {
  char buf[8];
  if (!in.read(buf, 8) || std::memcmp(buf, magic, 8) != 0) throw FormatError("bad magic, not a " + std::string(magic, 8) + " file");
}

}  // namespace fanet::binary_io

#endif  // FANET_SRC_BINARY_IO_HPP
