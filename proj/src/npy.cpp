#include "geoxplain/npy.hpp"

#include <cstring>
#include <fstream>
#include <sstream>
#include <string>

#include "geoxplain/errors.hpp"

namespace geoxplain::npy {

namespace {

constexpr char kMagic[] = "\x93NUMPY";

std::string make_header(const char* descr, int rows, int cols) {
  std::ostringstream dict;
  dict << "{'descr': '" << descr << "', 'fortran_order': False, 'shape': (" << rows << ", " << cols
       << "), }";
  std::string body = dict.str();
  // Total header (magic + version + length field + dict) padded to 64 bytes.
  std::size_t unpadded = 6 + 2 + 2 + body.size() + 1;
  std::size_t padded = (unpadded + 63) / 64 * 64;
  body.append(padded - unpadded, ' ');
  body.push_back('\n');
  return body;
}

void write_raw(const std::filesystem::path& path, const char* descr, int rows, int cols,
               const void* data, std::size_t bytes) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::MissingFile, "cannot open for write: " + path.string());
  std::string header = make_header(descr, rows, cols);
  out.write(kMagic, 6);
  out.put(1);
  out.put(0);
  std::uint16_t len = static_cast<std::uint16_t>(header.size());
  out.put(static_cast<char>(len & 0xff));
  out.put(static_cast<char>(len >> 8));
  out.write(header.data(), static_cast<std::streamsize>(header.size()));
  out.write(static_cast<const char*>(data), static_cast<std::streamsize>(bytes));
  if (!out) throw Error(ErrorCode::MissingFile, "write failed: " + path.string());
}

struct ParsedHeader {
  std::string descr;
  int rows = 0;
  int cols = 0;
};

ParsedHeader read_header(std::ifstream& in, const std::filesystem::path& path) {
  char magic[6];
  in.read(magic, 6);
  if (!in || std::memcmp(magic, kMagic, 6) != 0)
    throw Error(ErrorCode::SchemaError, "not an npy file: " + path.string());
  char ver[2];
  in.read(ver, 2);
  unsigned char len_bytes[2];
  in.read(reinterpret_cast<char*>(len_bytes), 2);
  std::size_t header_len = len_bytes[0] | (static_cast<std::size_t>(len_bytes[1]) << 8);
  std::string header(header_len, '\0');
  in.read(header.data(), static_cast<std::streamsize>(header_len));
  if (!in) throw Error(ErrorCode::SchemaError, "truncated npy header: " + path.string());

  ParsedHeader parsed;
  auto find_value = [&](const std::string& key) -> std::string {
    std::size_t at = header.find(key);
    if (at == std::string::npos)
      throw Error(ErrorCode::SchemaError, "npy header missing " + key + ": " + path.string());
    return header.substr(at + key.size());
  };
  std::string descr_tail = find_value("'descr':");
  std::size_t q0 = descr_tail.find('\'');
  std::size_t q1 = descr_tail.find('\'', q0 + 1);
  parsed.descr = descr_tail.substr(q0 + 1, q1 - q0 - 1);
  if (header.find("'fortran_order': False") == std::string::npos)
    throw Error(ErrorCode::SchemaError, "fortran-order npy unsupported: " + path.string());
  std::string shape_tail = find_value("'shape':");
  std::size_t p0 = shape_tail.find('(');
  std::size_t p1 = shape_tail.find(')', p0);
  std::string dims = shape_tail.substr(p0 + 1, p1 - p0 - 1);
  if (std::sscanf(dims.c_str(), "%d , %d", &parsed.rows, &parsed.cols) != 2 &&
      std::sscanf(dims.c_str(), "%d, %d", &parsed.rows, &parsed.cols) != 2)
    throw Error(ErrorCode::SchemaError, "npy shape must be 2-D: " + path.string());
  return parsed;
}

}  // namespace

void write_f32(const std::filesystem::path& path, const Grid<float>& grid) {
  write_raw(path, "<f4", grid.rows(), grid.cols(), grid.data(), grid.size() * sizeof(float));
}

Grid<float> read_f32(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::MissingFile, path.string());
  ParsedHeader header = read_header(in, path);
  if (header.descr != "<f4")
    throw Error(ErrorCode::SchemaError, "expected <f4 npy, got " + header.descr);
  Grid<float> grid(header.rows, header.cols);
  in.read(reinterpret_cast<char*>(grid.data()),
          static_cast<std::streamsize>(grid.size() * sizeof(float)));
  if (!in) throw Error(ErrorCode::SchemaError, "truncated npy payload: " + path.string());
  return grid;
}

void write_u8(const std::filesystem::path& path, const Grid<std::uint8_t>& grid) {
  write_raw(path, "|u1", grid.rows(), grid.cols(), grid.data(), grid.size());
}

Grid<std::uint8_t> read_u8(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::MissingFile, path.string());
  ParsedHeader header = read_header(in, path);
  if (header.descr != "|u1")
    throw Error(ErrorCode::SchemaError, "expected |u1 npy, got " + header.descr);
  Grid<std::uint8_t> grid(header.rows, header.cols);
  in.read(reinterpret_cast<char*>(grid.data()), static_cast<std::streamsize>(grid.size()));
  if (!in) throw Error(ErrorCode::SchemaError, "truncated npy payload: " + path.string());
  return grid;
}

}  // namespace geoxplain::npy
