#include "actflow/npy.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cctype>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <limits>
#include <map>
#include <stdexcept>

static_assert(std::endian::native == std::endian::little,
              "npy reader assumes a little-endian host");
static_assert(sizeof(float) == 4 && sizeof(double) == 8);

namespace actflow {
namespace {

constexpr char kMagic[6] = {'\x93', 'N', 'U', 'M', 'P', 'Y'};

[[noreturn]] void fail(const std::filesystem::path& file, const std::string& msg) {
  throw std::runtime_error("npy: " + file.string() + ": " + msg);
}

std::string trim(std::string s) {
  auto issp = [](unsigned char c) { return std::isspace(c) != 0; };
  while (!s.empty() && issp(s.front())) s.erase(s.begin());
  while (!s.empty() && issp(s.back())) s.pop_back();
  return s;
}

// Parses the Python-literal header dict. Exactly the keys descr,
// fortran_order and shape are allowed.
std::map<std::string, std::string> parse_header_dict(
    const std::filesystem::path& file, const std::string& header) {
  std::string body = trim(header);
  if (body.size() < 2 || body.front() != '{' || body.back() != '}')
    fail(file, "header is not a dictionary");
  body = body.substr(1, body.size() - 2);

  // Locate quoted keys followed by ':'.
  std::vector<std::pair<std::size_t, std::string>> keys;
  std::size_t pos = 0;
  while (pos < body.size()) {
    std::size_t q0 = body.find('\'', pos);
    if (q0 == std::string::npos) break;
    std::size_t q1 = body.find('\'', q0 + 1);
    if (q1 == std::string::npos) fail(file, "unterminated quote in header");
    std::string token = body.substr(q0 + 1, q1 - q0 - 1);
    std::size_t after = body.find_first_not_of(" \t", q1 + 1);
    if (after != std::string::npos && body[after] == ':') {
      keys.emplace_back(q0, token);
      pos = after + 1;
      // Skip a quoted value so it is not mistaken for a key.
      std::size_t v = body.find_first_not_of(" \t", pos);
      if (v != std::string::npos && body[v] == '\'') {
        std::size_t vq = body.find('\'', v + 1);
        if (vq == std::string::npos) fail(file, "unterminated quote in header");
        pos = vq + 1;
      }
    } else {
      pos = q1 + 1;
    }
  }
  if (keys.empty()) fail(file, "empty header dictionary");

  std::map<std::string, std::string> dict;
  for (std::size_t i = 0; i < keys.size(); ++i) {
    std::size_t begin = keys[i].first;
    std::size_t end = i + 1 < keys.size() ? keys[i + 1].first : body.size();
    std::string entry = trim(body.substr(begin, end - begin));
    if (!entry.empty() && entry.back() == ',') entry.pop_back();
    std::size_t colon = entry.find(':');
    if (colon == std::string::npos) fail(file, "malformed header entry");
    if (!dict.emplace(keys[i].second, trim(entry.substr(colon + 1))).second)
      fail(file, "duplicate header key '" + keys[i].second + "'");
  }
  for (const auto& [key, value] : dict) {
    (void)value;
    if (key != "descr" && key != "fortran_order" && key != "shape")
      fail(file, "unexpected header key '" + key + "'");
  }
  for (const char* required : {"descr", "fortran_order", "shape"})
    if (!dict.count(required))
      fail(file, std::string("missing header key '") + required + "'");
  return dict;
}

std::pair<std::size_t, std::size_t> parse_shape(
    const std::filesystem::path& file, const std::string& text) {
  std::string t = trim(text);
  if (t.size() < 2 || t.front() != '(' || t.back() != ')')
    fail(file, "malformed shape tuple");
  t = t.substr(1, t.size() - 2);
  std::vector<std::size_t> dims;
  std::size_t start = 0;
  while (start <= t.size()) {
    std::size_t comma = t.find(',', start);
    std::string part = trim(comma == std::string::npos
                                ? t.substr(start)
                                : t.substr(start, comma - start));
    if (!part.empty()) {
      for (char c : part)
        if (!std::isdigit(static_cast<unsigned char>(c)))
          fail(file, "malformed shape tuple");
      dims.push_back(std::stoull(part));
    }
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  if (dims.size() != 2) fail(file, "expected a 2-D shape");
  return {dims[0], dims[1]};
}

}  // namespace

Tensor read_tensor(const std::filesystem::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) fail(file, "cannot open file");

  std::array<char, 8> magic{};
  in.read(magic.data(), magic.size());
  if (!in) fail(file, "file too short for magic");
  if (std::memcmp(magic.data(), kMagic, 6) != 0) fail(file, "bad magic");
  if (magic[6] != 1 || magic[7] != 0)
    fail(file, "unsupported format version " + std::to_string(magic[6]) + "." +
                   std::to_string(magic[7]));

  std::array<unsigned char, 2> lenb{};
  in.read(reinterpret_cast<char*>(lenb.data()), 2);
  if (!in) fail(file, "file too short for header length");
  std::size_t header_len = lenb[0] | (std::size_t(lenb[1]) << 8);

  std::string header(header_len, '\0');
  in.read(header.data(), static_cast<std::streamsize>(header_len));
  if (!in) fail(file, "file too short for header");
  if (header.empty() || header.back() != '\n') fail(file, "unterminated header");

  auto dict = parse_header_dict(file, header);

  std::string descr = dict["descr"];
  if (descr.size() >= 2 && descr.front() == '\'' && descr.back() == '\'')
    descr = descr.substr(1, descr.size() - 2);
  Dtype dtype;
  if (descr == "<f4")
    dtype = Dtype::f32;
  else if (descr == "<f8")
    dtype = Dtype::f64;
  else
    fail(file, "unsupported element type '" + descr + "'");

  if (dict["fortran_order"] == "True")
    fail(file, "fortran-order arrays are not supported");
  if (dict["fortran_order"] != "False") fail(file, "malformed fortran_order");

  auto [rows, cols] = parse_shape(file, dict["shape"]);

  std::size_t item = dtype == Dtype::f32 ? 4 : 8;
  if (cols != 0 && rows > std::numeric_limits<std::size_t>::max() / cols / item)
    fail(file, "shape overflows");
  std::size_t count = rows * cols;
  std::uintmax_t expected = 10 + header_len + count * item;
  std::uintmax_t actual = std::filesystem::file_size(file);
  if (actual < expected) fail(file, "truncated payload");
  if (actual > expected) fail(file, "trailing bytes after payload");

  Tensor t;
  t.rows = rows;
  t.cols = cols;
  t.source_dtype = dtype;
  t.raw_header = header;
  t.data.resize(count);
  if (dtype == Dtype::f64) {
    in.read(reinterpret_cast<char*>(t.data.data()),
            static_cast<std::streamsize>(count * 8));
  } else {
    std::vector<float> buf(count);
    in.read(reinterpret_cast<char*>(buf.data()),
            static_cast<std::streamsize>(count * 4));
    std::copy(buf.begin(), buf.end(), t.data.begin());
  }
  if (count > 0 && !in) fail(file, "truncated payload");
  return t;
}

void write_tensor(const std::filesystem::path& file, const Tensor& t) {
  if (t.data.size() != t.rows * t.cols)
    throw std::runtime_error("npy: tensor data size does not match its shape");

  std::string header = t.raw_header;
  if (header.empty()) {
    std::string dict = "{'descr': '";
    dict += t.source_dtype == Dtype::f32 ? "<f4" : "<f8";
    dict += "', 'fortran_order': False, 'shape': (";
    dict += std::to_string(t.rows) + ", " + std::to_string(t.cols) + "), }";
    std::size_t base = 10 + dict.size() + 1;
    std::size_t padded = (base + 63) / 64 * 64;
    header = dict + std::string(padded - base, ' ') + "\n";
  }
  if (header.size() > 0xffff)
    throw std::runtime_error("npy: header too long for format version 1.0");

  std::ofstream out(file, std::ios::binary | std::ios::trunc);
  if (!out) fail(file, "cannot open file for writing");
  out.write(kMagic, 6);
  out.put(1);
  out.put(0);
  out.put(static_cast<char>(header.size() & 0xff));
  out.put(static_cast<char>((header.size() >> 8) & 0xff));
  out.write(header.data(), static_cast<std::streamsize>(header.size()));

  if (t.source_dtype == Dtype::f64) {
    out.write(reinterpret_cast<const char*>(t.data.data()),
              static_cast<std::streamsize>(t.data.size() * 8));
  } else {
    std::vector<float> buf(t.data.size());
    std::copy(t.data.begin(), t.data.end(), buf.begin());
    out.write(reinterpret_cast<const char*>(buf.data()),
              static_cast<std::streamsize>(buf.size() * 4));
  }
  if (!out) fail(file, "write failed");
}

}  // namespace actflow
