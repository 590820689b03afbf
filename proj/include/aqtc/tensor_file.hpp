#pragma once

// Little-endian tensor container shared by feature caches and checkpoints.
//
//   magic[8]  u32 version(=1)  u32 count
//   count x { u32 name_len, name bytes, u8 dtype, u8 ndim, u32 dims[ndim], data }
//   [checkpoints only] u32 json_len, json bytes
//
// dtype 1 is f32 (feature caches), dtype 2 is f64 (checkpoint parameters).

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

namespace aqtc {

enum class DType : std::uint8_t { kF32 = 1, kF64 = 2 };

struct TensorEntry {
  std::string name;
  DType dtype = DType::kF32;
  std::vector<std::uint32_t> dims;
  std::vector<double> data;  // row-major; f32 entries hold float-representable values

  static TensorEntry from_matrix(std::string name, const Eigen::MatrixXd& m, DType dtype);
  static TensorEntry from_vector(std::string name, const Eigen::VectorXd& v, DType dtype);
  Eigen::MatrixXd to_matrix() const;  // 2-D entries
  Eigen::VectorXd to_vector() const;  // 1-D entries
};

struct TensorFile {
  std::array<char, 8> magic{};
  std::vector<TensorEntry> entries;
  std::optional<std::string> trailer;

  const TensorEntry* find(std::string_view name) const;
};

inline constexpr std::array<char, 8> kFeatureMagic{'A', 'Q', 'T', 'C', 'F', 'E', 'A', 'T'};
inline constexpr std::array<char, 8> kCheckpointMagic{'A', 'Q', 'T', 'C', 'C', 'K', 'P', 'T'};
inline constexpr std::uint32_t kTensorFileVersion = 1;

std::string serialize_tensor_file(const TensorFile& file);

// Throws CorruptCache on a magic/version mismatch, truncation, or trailing
// garbage. `expect_trailer` selects the checkpoint layout.
TensorFile parse_tensor_file(std::string_view bytes, const std::array<char, 8>& magic, bool expect_trailer);

// Atomic write (temp file + rename).
void write_tensor_file(const std::filesystem::path& path, const TensorFile& file);
TensorFile read_tensor_file(const std::filesystem::path& path, const std::array<char, 8>& magic, bool expect_trailer);

std::string read_binary_file(const std::filesystem::path& path);

}  // namespace aqtc
