#include "gesturelab/io.hpp"

#include <cstring>
#include <fstream>
#include <sstream>

namespace gesturelab {

namespace {

constexpr char kMagic[4] = {'G', 'L', 'A', '1'};

uint32_t read_u32_le(std::istream& in, const std::string& what) {
  unsigned char buf[4];
  in.read(reinterpret_cast<char*>(buf), 4);
  check(static_cast<bool>(in), ErrorKind::Io, "truncated array file while reading " + what);
  return static_cast<uint32_t>(buf[0]) | (static_cast<uint32_t>(buf[1]) << 8) |
         (static_cast<uint32_t>(buf[2]) << 16) | (static_cast<uint32_t>(buf[3]) << 24);
}

void write_u32_le(std::ostream& out, uint32_t v) {
  unsigned char buf[4] = {static_cast<unsigned char>(v & 0xff),
                          static_cast<unsigned char>((v >> 8) & 0xff),
                          static_cast<unsigned char>((v >> 16) & 0xff),
                          static_cast<unsigned char>((v >> 24) & 0xff)};
  out.write(reinterpret_cast<const char*>(buf), 4);
}

float f32_from_le(const unsigned char* p) {
  uint32_t bits = static_cast<uint32_t>(p[0]) | (static_cast<uint32_t>(p[1]) << 8) |
                  (static_cast<uint32_t>(p[2]) << 16) | (static_cast<uint32_t>(p[3]) << 24);
  float f;
  std::memcpy(&f, &bits, 4);
  return f;
}

void f32_to_le(float f, unsigned char* p) {
  uint32_t bits;
  std::memcpy(&bits, &f, 4);
  p[0] = static_cast<unsigned char>(bits & 0xff);
  p[1] = static_cast<unsigned char>((bits >> 8) & 0xff);
  p[2] = static_cast<unsigned char>((bits >> 16) & 0xff);
  p[3] = static_cast<unsigned char>((bits >> 24) & 0xff);
}

}  // namespace

ArrayFile load_array(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  check(static_cast<bool>(in), ErrorKind::Io, "cannot open array file: " + path.string());
  char magic[4];
  in.read(magic, 4);
  check(static_cast<bool>(in) && std::memcmp(magic, kMagic, 4) == 0, ErrorKind::Io,
        "bad magic in array file: " + path.string());
  uint32_t rank = read_u32_le(in, "rank");
  check(rank <= 4, ErrorKind::Io, "array rank above 4 in " + path.string());
  ArrayFile out;
  int64_t n = 1;
  for (uint32_t i = 0; i < rank; ++i) {
    uint32_t d = read_u32_le(in, "dimension");
    out.shape.push_back(static_cast<int64_t>(d));
    n *= static_cast<int64_t>(d);
  }
  check(n <= (1ll << 31), ErrorKind::Io, "array too large in " + path.string());
  out.data.resize(static_cast<size_t>(n));
  std::vector<unsigned char> raw(static_cast<size_t>(n) * 4);
  in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
  check(static_cast<bool>(in) || n == 0, ErrorKind::Io,
        "truncated payload in array file: " + path.string());
  for (int64_t i = 0; i < n; ++i)
    out.data[static_cast<size_t>(i)] = f32_from_le(raw.data() + 4 * i);
  return out;
}

void save_array(const std::filesystem::path& path, const ArrayFile& array) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  check(static_cast<bool>(out), ErrorKind::Io, "cannot write array file: " + path.string());
  out.write(kMagic, 4);
  write_u32_le(out, static_cast<uint32_t>(array.shape.size()));
  int64_t n = 1;
  for (int64_t d : array.shape) {
    check_arg(d >= 0 && d <= UINT32_MAX, "array dimension out of range");
    write_u32_le(out, static_cast<uint32_t>(d));
    n *= d;
  }
  check_arg(n == static_cast<int64_t>(array.data.size()), "array data does not match shape");
  std::vector<unsigned char> raw(array.data.size() * 4);
  for (size_t i = 0; i < array.data.size(); ++i) f32_to_le(array.data[i], raw.data() + 4 * i);
  out.write(reinterpret_cast<const char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
  check(static_cast<bool>(out), ErrorKind::Io, "failed writing array file: " + path.string());
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  check(static_cast<bool>(in), ErrorKind::Io, "cannot open file: " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file(const std::filesystem::path& path, const std::string& content) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  check(static_cast<bool>(out), ErrorKind::Io, "cannot write file: " + path.string());
  out << content;
  check(static_cast<bool>(out), ErrorKind::Io, "failed writing file: " + path.string());
}

std::string fnv1a_hex(const std::string& bytes) {
  uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  static const char* digits = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i) {
    out[static_cast<size_t>(i)] = digits[h & 0xf];
    h >>= 4;
  }
  return out;
}

}  // namespace gesturelab
