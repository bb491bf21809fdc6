#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace actflow {

enum class Dtype { f32, f64 };

/// A 2-D row-major matrix in 64-bit working precision. Tensors read from
/// disk remember their on-disk element type and exact header bytes so that
/// write_tensor can reproduce the source file byte for byte.
struct Tensor {
  std::size_t rows = 0;
  std::size_t cols = 0;
  Dtype source_dtype = Dtype::f64;
  std::vector<double> data;     // rows * cols values
  std::string raw_header;       // npy header text as read; empty if in-memory

  Tensor() = default;
  Tensor(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0.0) {}

  double at(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
  double& at(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  std::span<const double> row(std::size_t r) const {
    return {data.data() + r * cols, cols};
  }
  const double* row_ptr(std::size_t r) const { return data.data() + r * cols; }
};

/// Reads a version-1.0 npy file holding a little-endian 2-D float32/float64
/// array in C order. Anything else is rejected. 32-bit payloads are widened
/// to the 64-bit working precision.
Tensor read_tensor(const std::filesystem::path& file);

/// Writes a tensor as an npy file. A tensor read by read_tensor round-trips
/// byte-identically (original header bytes and element type are preserved);
/// in-memory tensors get a canonical numpy-compatible v1.0 header.
void write_tensor(const std::filesystem::path& file, const Tensor& t);

}  // namespace actflow
