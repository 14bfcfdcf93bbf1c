#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "dsrc/matcore.hpp"

namespace dsrc::matfile {

enum class Dtype : std::uint8_t { binary64 = 0, binary32 = 1 };

// On-disk layout (little-endian):
//   bytes 0..3   magic "DSMX"
//   bytes 4..7   version u32 (currently 1)
//   byte  8      dtype u8 (0 = binary64, 1 = binary32)
//   bytes 9..16  rows u64
//   bytes 17..24 cols u64
//   bytes 25..   payload, row-major
inline constexpr std::uint32_t kVersion = 1;
inline constexpr std::size_t kHeaderBytes = 25;

void write(const std::filesystem::path& path, const matcore::DenseMatrix& m, Dtype dtype);
matcore::DenseMatrix read(const std::filesystem::path& path);

// CRC-32 (IEEE, as used by zlib/PNG) of a byte buffer or whole file.
std::uint32_t crc32(const void* data, std::size_t len);
std::uint32_t crc32_file(const std::filesystem::path& path);

}  // namespace dsrc::matfile
