#include "ssd/io.h"

#include <algorithm>
#include <array>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>

#include "ssd/errors.h"

namespace ssd {

namespace {

void put_u32(std::ostream& os, std::uint32_t v) {
  const std::array<char, 4> b = {static_cast<char>(v & 0xff), static_cast<char>((v >> 8) & 0xff),
                                 static_cast<char>((v >> 16) & 0xff),
                                 static_cast<char>((v >> 24) & 0xff)};
  os.write(b.data(), 4);
}

std::uint32_t get_u32(std::istream& is, const char* what) {
  std::array<unsigned char, 4> b{};
  if (!is.read(reinterpret_cast<char*>(b.data()), 4)) {
    throw FormatError(std::string("truncated file while reading ") + what);
  }
  return std::uint32_t{b[0]} | (std::uint32_t{b[1]} << 8) | (std::uint32_t{b[2]} << 16) |
         (std::uint32_t{b[3]} << 24);
}

std::uint8_t get_u8(std::istream& is, const char* what) {
  char c = 0;
  if (!is.get(c)) throw FormatError(std::string("truncated file while reading ") + what);
  return static_cast<std::uint8_t>(c);
}

void put_f32(std::ostream& os, double v) {
  put_u32(os, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
}

float get_f32(std::istream& is) { return std::bit_cast<float>(get_u32(is, "payload")); }

void expect_magic(std::istream& is, const char* magic) {
  char got[4] = {};
  if (!is.read(got, 4) || std::memcmp(got, magic, 4) != 0) {
    throw FormatError(std::string("bad magic, expected ") + magic);
  }
}

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw ResourceError("cannot open " + path.string() + " for writing");
  return os;
}

std::ifstream open_in(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw NotFoundError("cannot open " + path.string());
  return is;
}

}  // namespace

void write_stf(std::ostream& os, const Tensor& t) {
  os.write("STF1", 4);
  os.put(3);
  put_u32(os, t.channels());
  put_u32(os, t.height());
  put_u32(os, t.width());
  for (std::size_t i = 0; i < t.size(); ++i) put_f32(os, t[i]);
  if (!os) throw ResourceError("write failed");
}

Tensor read_stf(std::istream& is) {
  expect_magic(is, "STF1");
  const int rank = get_u8(is, "rank");
  if (rank < 1 || rank > 3) throw FormatError("STF rank " + std::to_string(rank) + " unsupported");
  std::array<int, 3> dims = {1, 1, 1};
  for (int k = 0; k < rank; ++k) dims[3 - rank + k] = static_cast<int>(get_u32(is, "dims"));
  Tensor t(Shape{dims[0], dims[1], dims[2]});
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = get_f32(is);
  return t;
}

void write_stf(const std::filesystem::path& path, const Tensor& t) {
  std::ofstream os = open_out(path);
  write_stf(os, t);
}

Tensor read_stf(const std::filesystem::path& path) {
  std::ifstream is = open_in(path);
  return read_stf(is);
}

std::uint8_t to_byte(double v) {
  const double x = (std::clamp(v, -1.0, 1.0) + 1.0) * 127.5;
  return static_cast<std::uint8_t>(std::nearbyint(x));
}

void write_pnm(const std::filesystem::path& path, const Tensor& t) {
  if (t.channels() != 1 && t.channels() != 3) {
    throw ShapeError("PNM export needs 1 or 3 channels, got " + std::to_string(t.channels()));
  }
  std::ofstream os = open_out(path);
  os << (t.channels() == 1 ? "P5" : "P6") << "\n" << t.width() << " " << t.height() << "\n255\n";
  for (int y = 0; y < t.height(); ++y) {
    for (int x = 0; x < t.width(); ++x) {
      for (int c = 0; c < t.channels(); ++c) os.put(static_cast<char>(to_byte(t.at(c, y, x))));
    }
  }
  if (!os) throw ResourceError("write failed for " + path.string());
}

void write_checkpoint(const std::filesystem::path& path,
                      const std::vector<ParamTensor>& tensors) {
  std::ofstream os = open_out(path);
  os.write("SSDW", 4);
  put_u32(os, kCheckpointVersion);
  put_u32(os, static_cast<std::uint32_t>(tensors.size()));
  for (const ParamTensor& p : tensors) {
    put_u32(os, static_cast<std::uint32_t>(p.name.size()));
    os.write(p.name.data(), static_cast<std::streamsize>(p.name.size()));
    os.put(static_cast<char>(p.dims.size()));
    for (int d : p.dims) put_u32(os, static_cast<std::uint32_t>(d));
    for (double v : p.data) put_f32(os, v);
  }
  if (!os) throw ResourceError("write failed for " + path.string());
}

std::vector<ParamTensor> read_checkpoint(const std::filesystem::path& path) {
  std::ifstream is = open_in(path);
  expect_magic(is, "SSDW");
  const std::uint32_t version = get_u32(is, "version");
  if (version != kCheckpointVersion) {
    throw FormatError("unsupported checkpoint version " + std::to_string(version));
  }
  const std::uint32_t count = get_u32(is, "tensor count");
  std::vector<ParamTensor> out;
  for (std::uint32_t k = 0; k < count; ++k) {
    ParamTensor p;
    const std::uint32_t len = get_u32(is, "name length");
    if (len > 4096) throw FormatError("tensor name too long");
    p.name.resize(len);
    if (!is.read(p.name.data(), len)) throw FormatError("truncated tensor name");
    const int rank = get_u8(is, "rank");
    std::size_t n = 1;
    for (int r = 0; r < rank; ++r) {
      p.dims.push_back(static_cast<int>(get_u32(is, "dims")));
      n *= static_cast<std::size_t>(p.dims.back());
    }
    if (n > (std::size_t{1} << 28)) throw FormatError("tensor " + p.name + " too large");
    p.data.resize(n);
    for (double& v : p.data) v = get_f32(is);
    out.push_back(std::move(p));
  }
  return out;
}

std::string csv_escape(const std::string& field) {
  if (field.find_first_of(",\"\r\n") == std::string::npos) return field;
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

std::string fmt(double v) {
  std::array<char, 64> buf{};
  auto [end, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  (void)ec;
  return std::string(buf.data(), end);
}

CsvWriter::CsvWriter(const std::filesystem::path& path, const std::vector<std::string>& header)
    : columns_(header.size()) {
  owned_ = std::make_unique<std::ofstream>(path, std::ios::binary);
  if (!*owned_) throw ResourceError("cannot open " + path.string() + " for writing");
  os_ = owned_.get();
  row(header);
}

CsvWriter::CsvWriter(std::ostream& os, const std::vector<std::string>& header)
    : os_(&os), columns_(header.size()) {
  row(header);
}

void CsvWriter::row(const std::vector<std::string>& fields) {
  if (fields.size() != columns_) {
    throw ParameterError("CSV row has " + std::to_string(fields.size()) + " fields, expected " +
                         std::to_string(columns_));
  }
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (i) *os_ << ',';
    *os_ << csv_escape(fields[i]);
  }
  *os_ << "\r\n";
}

}  // namespace ssd
