#pragma once

#include <Eigen/Dense>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

namespace drugprot {

/// Binary tensor container shared by model and stacker checkpoints.
///
/// Layout (all integers little-endian):
///   magic "DPTENSOR" | u32 version | u64 header_len | header JSON bytes |
///   u32 n_tensors | directory entries | tensor data
/// Directory entry: u32 name_len | name | u32 rank (=2) | u64 rows | u64 cols |
///   u64 offset (bytes from start of the data section).
/// Tensor data: row-major little-endian IEEE-754 binary32.
struct TensorFile {
  nlohmann::json header;
  std::vector<std::pair<std::string, Eigen::MatrixXd>> tensors;

  const Eigen::MatrixXd& get(const std::string& name) const;
};

std::vector<char> encode_tensor_file(const TensorFile& file);
TensorFile decode_tensor_file(const std::vector<char>& bytes, const std::string& origin);

/// FNV-1a 64-bit checksum of a file's bytes, as 16 hex digits.
std::string file_checksum(const std::filesystem::path& path);

void save_tensor_file(const std::filesystem::path& path, const TensorFile& file);
TensorFile load_tensor_file(const std::filesystem::path& path);

}  // namespace drugprot
