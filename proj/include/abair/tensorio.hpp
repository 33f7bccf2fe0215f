#pragma once

// Binary container for named tensors ("ABWT" format).
//
// Layout, all integers little-endian:
//   magic   "ABWT"
//   version u32 (= 1)
//   count   u32
//   count x { name_len u32, name bytes, dtype u8, ndim u8, dims u64[ndim],
//             data: product(dims) values, row-major }
// dtype 0 = float32, 1 = float64.

#include <cstdint>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace abair::tensorio {

inline constexpr char kMagic[4] = {'A', 'B', 'W', 'T'};
inline constexpr std::uint32_t kVersion = 1;

enum class DType : std::uint8_t { kF32 = 0, kF64 = 1 };

struct NamedTensor {
  std::string name;
  std::vector<std::uint64_t> dims;
  std::variant<std::vector<float>, std::vector<double>> data;

  DType dtype() const {
    return std::holds_alternative<std::vector<float>>(data) ? DType::kF32 : DType::kF64;
  }
  std::uint64_t numel() const;
  std::size_t size() const;  // number of stored values

  // Values widened to double (exact for both dtypes).
  std::vector<double> as_doubles() const;

  static NamedTensor f64(std::string name, std::vector<std::uint64_t> dims,
                         std::vector<double> values);
  static NamedTensor f32(std::string name, std::vector<std::uint64_t> dims,
                         std::vector<float> values);

  bool operator==(const NamedTensor& other) const;
};

enum class ErrorCode {
  kIo,
  kBadMagic,
  kBadVersion,
  kTruncated,
  kDuplicateName,
  kMalformed,
};

class TensorIoError : public std::runtime_error {
 public:
  TensorIoError(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}
  ErrorCode code() const { return code_; }

 private:
  ErrorCode code_;
};

std::vector<std::uint8_t> encode_tensors(std::span<const NamedTensor> tensors);
std::vector<NamedTensor> decode_tensors(std::span<const std::uint8_t> bytes);

void write_tensors(const std::filesystem::path& path, std::span<const NamedTensor> tensors);
std::vector<NamedTensor> read_tensors(const std::filesystem::path& path);

// Lookup by name; nullptr when absent.
const NamedTensor* find_tensor(std::span<const NamedTensor> tensors, std::string_view name);

}  // namespace abair::tensorio
