#pragma once

#include "jdf/tensor.hpp"

#include <string>

namespace jdf {

/// FieldFile layout (little-endian): "JDF1", u32 version = 1, u8 dtype
/// (0 real64, 1 complex128), u8 rank, u64 extents[rank], row-major payload.
void write_field(const std::string& path, const Tensor& t);
Tensor read_field(const std::string& path);

/// Binary 8-bit greyscale raster of a 2-D real tensor (a trailing extent of 1
/// is ignored), min-max normalized; a constant image maps to 0.
void write_pgm(const std::string& path, const Tensor& image);

} // namespace jdf
