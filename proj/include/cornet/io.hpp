#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "cornet/linalg.hpp"

namespace cornet {

/// Row-major f64 tensor as stored in a CORT file.
struct TensorData {
    std::vector<std::uint32_t> shape;
    std::vector<double> data;

    std::size_t numel() const;
};

/// "CORT" | u8 version 1 | u8 dtype 0 | 2 reserved | u32 ndim | ndim x u32 | f64 payload, little-endian.
std::vector<std::uint8_t> encode_tensor(const TensorData& t);
TensorData decode_tensor(const std::vector<std::uint8_t>& bytes);
void write_tensor(const std::filesystem::path& path, const TensorData& t);
TensorData read_tensor(const std::filesystem::path& path);

/// "CORL" | u32 count | count x u32.
std::vector<std::uint8_t> encode_labels(const std::vector<std::uint32_t>& labels);
std::vector<std::uint32_t> decode_labels(const std::vector<std::uint8_t>& bytes);
void write_labels(const std::filesystem::path& path, const std::vector<std::uint32_t>& labels);
std::vector<std::uint32_t> read_labels(const std::filesystem::path& path);

TensorData tensor_of(const DenseMatrix& m);
DenseMatrix matrix_of(const TensorData& t);

std::vector<std::uint8_t> read_bytes(const std::filesystem::path& path);
void write_bytes(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes);

/// Flat `key = value` text; '#' starts a comment. Duplicate keys are a ConfigError.
using KeyValues = std::map<std::string, std::string>;
KeyValues parse_key_values(const std::string& text);

}  // namespace cornet
