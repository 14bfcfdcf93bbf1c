#include "dsrc/matfile.hpp"

#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <vector>

namespace dsrc::matfile {

static_assert(std::endian::native == std::endian::little,
              "MatrixFile writer assumes a little-endian host");

namespace {

constexpr std::array<char, 4> kMagic = {'D', 'S', 'M', 'X'};

template <typename T>
void put(std::vector<char>& buf, T v) {
    const char* p = reinterpret_cast<const char*>(&v);
    buf.insert(buf.end(), p, p + sizeof(T));
}

}  // namespace

void write(const std::filesystem::path& path, const matcore::DenseMatrix& m, Dtype dtype) {
    std::vector<char> buf;
    buf.reserve(kHeaderBytes + m.size() * (dtype == Dtype::binary64 ? 8 : 4));
    buf.insert(buf.end(), kMagic.begin(), kMagic.end());
    put<std::uint32_t>(buf, kVersion);
    put<std::uint8_t>(buf, static_cast<std::uint8_t>(dtype));
    put<std::uint64_t>(buf, m.rows());
    put<std::uint64_t>(buf, m.cols());
    if (dtype == Dtype::binary64) {
        for (std::size_t i = 0; i < m.size(); ++i) put<double>(buf, m.data()[i]);
    } else {
        for (std::size_t i = 0; i < m.size(); ++i)
            put<float>(buf, static_cast<float>(m.data()[i]));
    }
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw ContractError("matrix_io: cannot open for writing: " + path.string());
    out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
    if (!out) throw ContractError("matrix_io: short write: " + path.string());
}

matcore::DenseMatrix read(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ContractError("matrix_io: cannot open for reading: " + path.string());
    std::vector<char> buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());

    if (buf.size() < kHeaderBytes)
        throw CorruptError("matrix_io: truncated header in " + path.string(), buf.size());
    if (std::memcmp(buf.data(), kMagic.data(), 4) != 0)
        throw CorruptError("matrix_io: bad magic in " + path.string(), 0);
    std::uint32_t version;
    std::memcpy(&version, buf.data() + 4, 4);
    if (version != kVersion)
        throw CorruptError("matrix_io: unsupported version " + std::to_string(version), 4);
    const std::uint8_t dtype_raw = static_cast<std::uint8_t>(buf[8]);
    if (dtype_raw > 1)
        throw CorruptError("matrix_io: bad dtype " + std::to_string(dtype_raw), 8);
    std::uint64_t rows, cols;
    std::memcpy(&rows, buf.data() + 9, 8);
    std::memcpy(&cols, buf.data() + 17, 8);

    const std::size_t width = dtype_raw == 0 ? 8 : 4;
    const std::size_t expected = kHeaderBytes + rows * cols * width;
    if (buf.size() != expected)
        throw CorruptError("matrix_io: payload is " + std::to_string(buf.size() - kHeaderBytes) +
                               " bytes, expected " + std::to_string(expected - kHeaderBytes),
                           std::min(buf.size(), expected));

    std::vector<double> data(rows * cols);
    if (dtype_raw == 0) {
        std::memcpy(data.data(), buf.data() + kHeaderBytes, data.size() * 8);
    } else {
        const float* src = reinterpret_cast<const float*>(buf.data() + kHeaderBytes);
        for (std::size_t i = 0; i < data.size(); ++i) data[i] = static_cast<double>(src[i]);
    }
    return matcore::DenseMatrix(rows, cols, std::move(data));
}

namespace {

struct CrcTable {
    std::array<std::uint32_t, 256> t;
    CrcTable() {
        for (std::uint32_t i = 0; i < 256; ++i) {
            std::uint32_t c = i;
            for (int k = 0; k < 8; ++k)
                c = (c & 1) ? 0xEDB88320u ^ (c >> 1) : c >> 1;
            t[i] = c;
        }
    }
};

const CrcTable g_crc;

}  // namespace

std::uint32_t crc32(const void* data, std::size_t len) {
    const auto* p = static_cast<const unsigned char*>(data);
    std::uint32_t c = 0xFFFFFFFFu;
    for (std::size_t i = 0; i < len; ++i)
        c = g_crc.t[(c ^ p[i]) & 0xFF] ^ (c >> 8);
    return c ^ 0xFFFFFFFFu;
}

std::uint32_t crc32_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ContractError("crc32_file: cannot open " + path.string());
    std::vector<char> buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return crc32(buf.data(), buf.size());
}

}  // namespace dsrc::matfile
