#include "abair/tensorio.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <limits>
#include <unordered_set>

namespace abair::tensorio {

static_assert(std::endian::native == std::endian::little,
              "ABWT encoding assumes a little-endian host");

std::uint64_t NamedTensor::numel() const {
  std::uint64_t n = 1;
  for (auto d : dims) n *= d;
  return n;
}

std::size_t NamedTensor::size() const {
  return std::visit([](const auto& v) { return v.size(); }, data);
}

std::vector<double> NamedTensor::as_doubles() const {
  return std::visit(
      [](const auto& v) { return std::vector<double>(v.begin(), v.end()); }, data);
}

NamedTensor NamedTensor::f64(std::string name, std::vector<std::uint64_t> dims,
                             std::vector<double> values) {
  return NamedTensor{std::move(name), std::move(dims), std::move(values)};
}

NamedTensor NamedTensor::f32(std::string name, std::vector<std::uint64_t> dims,
                             std::vector<float> values) {
  return NamedTensor{std::move(name), std::move(dims), std::move(values)};
}

bool NamedTensor::operator==(const NamedTensor& other) const {
  if (name != other.name || dims != other.dims || dtype() != other.dtype()) return false;
  // Bitwise, so NaN payloads and signed zeros count.
  return std::visit(
      [&](const auto& a) {
        using V = std::decay_t<decltype(a)>;
        const auto& b = std::get<V>(other.data);
        return a.size() == b.size() &&
               (a.empty() || std::memcmp(a.data(), b.data(), a.size() * sizeof(a[0])) == 0);
      },
      data);
}

namespace {

template <typename T>
void put(std::vector<std::uint8_t>& out, T v) {
  const auto* p = reinterpret_cast<const std::uint8_t*>(&v);
  out.insert(out.end(), p, p + sizeof(T));
}

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  template <typename T>
  T get(const char* what) {
    need(sizeof(T), what);
    T v;
    std::memcpy(&v, bytes_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return v;
  }

  void read_into(void* dst, std::size_t n, const char* what) {
    need(n, what);
    if (n) std::memcpy(dst, bytes_.data() + pos_, n);
    pos_ += n;
  }

  std::size_t remaining() const { return bytes_.size() - pos_; }

 private:
  void need(std::size_t n, const char* what) {
    if (remaining() < n) {
      throw TensorIoError(ErrorCode::kTruncated,
                          std::string("truncated ABWT payload while reading ") + what);
    }
  }

  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

std::vector<std::uint8_t> encode_tensors(std::span<const NamedTensor> tensors) {
  std::unordered_set<std::string_view> seen;
  std::vector<std::uint8_t> out;
  out.insert(out.end(), std::begin(kMagic), std::end(kMagic));
  put<std::uint32_t>(out, kVersion);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(tensors.size()));
  for (const auto& t : tensors) {
    if (!seen.insert(t.name).second) {
      throw TensorIoError(ErrorCode::kDuplicateName, "duplicate tensor name: " + t.name);
    }
    if (t.dims.size() > std::numeric_limits<std::uint8_t>::max()) {
      throw TensorIoError(ErrorCode::kMalformed, "too many dims for tensor " + t.name);
    }
    for (auto d : t.dims) {
      if (d == 0) throw TensorIoError(ErrorCode::kMalformed, "zero dim in tensor " + t.name);
    }
    if (t.numel() != t.size()) {
      throw TensorIoError(ErrorCode::kMalformed,
                          "data length does not match dims for tensor " + t.name);
    }
    put<std::uint32_t>(out, static_cast<std::uint32_t>(t.name.size()));
    out.insert(out.end(), t.name.begin(), t.name.end());
    put<std::uint8_t>(out, static_cast<std::uint8_t>(t.dtype()));
    put<std::uint8_t>(out, static_cast<std::uint8_t>(t.dims.size()));
    for (auto d : t.dims) put<std::uint64_t>(out, d);
    std::visit(
        [&](const auto& v) {
          const auto* p = reinterpret_cast<const std::uint8_t*>(v.data());
          out.insert(out.end(), p, p + v.size() * sizeof(v[0]));
        },
        t.data);
  }
  return out;
}

std::vector<NamedTensor> decode_tensors(std::span<const std::uint8_t> bytes) {
  Reader r(bytes);
  char magic[4];
  r.read_into(magic, 4, "magic");
  if (std::memcmp(magic, kMagic, 4) != 0) {
    throw TensorIoError(ErrorCode::kBadMagic, "bad magic: not an ABWT file");
  }
  const auto version = r.get<std::uint32_t>("version");
  if (version != kVersion) {
    throw TensorIoError(ErrorCode::kBadVersion,
                        "unsupported ABWT version " + std::to_string(version));
  }
  const auto count = r.get<std::uint32_t>("count");

  std::vector<NamedTensor> tensors;
  std::unordered_set<std::string> seen;
  for (std::uint32_t i = 0; i < count; ++i) {
    NamedTensor t;
    const auto name_len = r.get<std::uint32_t>("name length");
    if (name_len > r.remaining()) {
      throw TensorIoError(ErrorCode::kTruncated, "truncated ABWT payload while reading name");
    }
    t.name.resize(name_len);
    r.read_into(t.name.data(), name_len, "name");
    if (!seen.insert(t.name).second) {
      throw TensorIoError(ErrorCode::kDuplicateName, "duplicate tensor name: " + t.name);
    }
    const auto dtype = r.get<std::uint8_t>("dtype");
    const auto ndim = r.get<std::uint8_t>("ndim");
    std::uint64_t numel = 1;
    for (std::uint8_t d = 0; d < ndim; ++d) {
      const auto dim = r.get<std::uint64_t>("dims");
      if (dim == 0) throw TensorIoError(ErrorCode::kMalformed, "zero dim in tensor " + t.name);
      if (numel > std::numeric_limits<std::uint64_t>::max() / dim) {
        throw TensorIoError(ErrorCode::kMalformed, "dims overflow in tensor " + t.name);
      }
      numel *= dim;
      t.dims.push_back(dim);
    }
    const std::size_t elem = dtype == 0 ? 4 : 8;
    if (dtype > 1) {
      throw TensorIoError(ErrorCode::kMalformed,
                          "unknown dtype " + std::to_string(dtype) + " in tensor " + t.name);
    }
    if (numel > r.remaining() / elem) {
      throw TensorIoError(ErrorCode::kTruncated,
                          "truncated ABWT payload in data of tensor " + t.name);
    }
    if (dtype == 0) {
      std::vector<float> v(numel);
      r.read_into(v.data(), numel * elem, "data");
      t.data = std::move(v);
    } else {
      std::vector<double> v(numel);
      r.read_into(v.data(), numel * elem, "data");
      t.data = std::move(v);
    }
    tensors.push_back(std::move(t));
  }
  if (r.remaining() != 0) {
    throw TensorIoError(ErrorCode::kMalformed, "trailing bytes after last tensor");
  }
  return tensors;
}

void write_tensors(const std::filesystem::path& path, std::span<const NamedTensor> tensors) {
  const auto bytes = encode_tensors(tensors);
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw TensorIoError(ErrorCode::kIo, "cannot open for writing: " + path.string());
  f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!f) throw TensorIoError(ErrorCode::kIo, "write failed: " + path.string());
}

std::vector<NamedTensor> read_tensors(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw TensorIoError(ErrorCode::kIo, "cannot open for reading: " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(f)),
                                  std::istreambuf_iterator<char>());
  return decode_tensors(bytes);
}

const NamedTensor* find_tensor(std::span<const NamedTensor> tensors, std::string_view name) {
  for (const auto& t : tensors) {
    if (t.name == name) return &t;
  }
  return nullptr;
}

}  // namespace abair::tensorio
