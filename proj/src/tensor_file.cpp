#include "aqtc/tensor_file.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include "aqtc/dataset_io.hpp"
#include "aqtc/errors.hpp"

namespace aqtc {

namespace {

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

class Reader {
 public:
  explicit Reader(std::string_view bytes) : bytes_(bytes) {}

  void need(std::size_t n, const char* what) const {
    if (pos_ + n > bytes_.size()) throw CorruptCache(std::string("truncated while reading ") + what);
  }
  std::uint8_t u8(const char* what) {
    need(1, what);
    return static_cast<std::uint8_t>(bytes_[pos_++]);
  }
  std::uint32_t u32(const char* what) {
    need(4, what);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<std::uint8_t>(bytes_[pos_ + i])) << (8 * i);
    pos_ += 4;
    return v;
  }
  std::uint64_t u64(const char* what) {
    need(8, what);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(static_cast<std::uint8_t>(bytes_[pos_ + i])) << (8 * i);
    pos_ += 8;
    return v;
  }
  std::string_view take(std::size_t n, const char* what) {
    need(n, what);
    auto s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  bool done() const { return pos_ == bytes_.size(); }

 private:
  std::string_view bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

TensorEntry TensorEntry::from_matrix(std::string name, const Eigen::MatrixXd& m, DType dtype) {
  TensorEntry e;
  e.name = std::move(name);
  e.dtype = dtype;
  e.dims = {static_cast<std::uint32_t>(m.rows()), static_cast<std::uint32_t>(m.cols())};
  e.data.resize(static_cast<std::size_t>(m.size()));
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) e.data[static_cast<std::size_t>(r * m.cols() + c)] = m(r, c);
  return e;
}

TensorEntry TensorEntry::from_vector(std::string name, const Eigen::VectorXd& v, DType dtype) {
  TensorEntry e;
  e.name = std::move(name);
  e.dtype = dtype;
  e.dims = {static_cast<std::uint32_t>(v.size())};
  e.data.assign(v.data(), v.data() + v.size());
  return e;
}

Eigen::MatrixXd TensorEntry::to_matrix() const {
  if (dims.size() != 2) throw CorruptCache("tensor '" + name + "' is not 2-D");
  Eigen::MatrixXd m(dims[0], dims[1]);
  for (std::uint32_t r = 0; r < dims[0]; ++r)
    for (std::uint32_t c = 0; c < dims[1]; ++c) m(r, c) = data[static_cast<std::size_t>(r) * dims[1] + c];
  return m;
}

Eigen::VectorXd TensorEntry::to_vector() const {
  if (dims.size() != 1) throw CorruptCache("tensor '" + name + "' is not 1-D");
  return Eigen::Map<const Eigen::VectorXd>(data.data(), static_cast<Eigen::Index>(data.size()));
}

const TensorEntry* TensorFile::find(std::string_view name) const {
  for (const auto& e : entries)
    if (e.name == name) return &e;
  return nullptr;
}

std::string serialize_tensor_file(const TensorFile& file) {
  std::string out(file.magic.begin(), file.magic.end());
  put_u32(out, kTensorFileVersion);
  put_u32(out, static_cast<std::uint32_t>(file.entries.size()));
  for (const auto& e : file.entries) {
    put_u32(out, static_cast<std::uint32_t>(e.name.size()));
    out += e.name;
    out.push_back(static_cast<char>(e.dtype));
    out.push_back(static_cast<char>(e.dims.size()));
    std::size_t count = 1;
    for (auto d : e.dims) {
      put_u32(out, d);
      count *= d;
    }
    if (count != e.data.size()) throw DimensionMismatch("tensor '" + e.name + "' dims do not match data size");
    for (double v : e.data) {
      if (e.dtype == DType::kF32)
        put_u32(out, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
      else
        put_u64(out, std::bit_cast<std::uint64_t>(v));
    }
  }
  if (file.trailer) {
    put_u32(out, static_cast<std::uint32_t>(file.trailer->size()));
    out += *file.trailer;
  }
  return out;
}

TensorFile parse_tensor_file(std::string_view bytes, const std::array<char, 8>& magic, bool expect_trailer) {
  Reader r(bytes);
  TensorFile f;
  auto m = r.take(8, "magic");
  std::copy(m.begin(), m.end(), f.magic.begin());
  if (f.magic != magic) throw CorruptCache("bad magic");
  if (const auto version = r.u32("version"); version != kTensorFileVersion)
    throw CorruptCache("unsupported version " + std::to_string(version));
  const auto count = r.u32("entry count");
  for (std::uint32_t i = 0; i < count; ++i) {
    TensorEntry e;
    const auto len = r.u32("name length");
    e.name = std::string(r.take(len, "name"));
    const auto tag = r.u8("dtype");
    if (tag != static_cast<std::uint8_t>(DType::kF32) && tag != static_cast<std::uint8_t>(DType::kF64))
      throw CorruptCache("tensor '" + e.name + "': unknown dtype " + std::to_string(tag));
    e.dtype = static_cast<DType>(tag);
    const auto ndim = r.u8("ndim");
    std::size_t n = 1;
    for (int d = 0; d < ndim; ++d) {
      e.dims.push_back(r.u32("dims"));
      n *= e.dims.back();
    }
    const std::size_t width = e.dtype == DType::kF32 ? 4 : 8;
    r.need(n * width, "tensor data");
    e.data.resize(n);
    for (std::size_t k = 0; k < n; ++k)
      e.data[k] = e.dtype == DType::kF32 ? static_cast<double>(std::bit_cast<float>(r.u32("data")))
                                         : std::bit_cast<double>(r.u64("data"));
    f.entries.push_back(std::move(e));
  }
  if (expect_trailer) {
    const auto len = r.u32("trailer length");
    f.trailer = std::string(r.take(len, "trailer"));
  }
  if (!r.done()) throw CorruptCache("trailing bytes after last entry");
  return f;
}

void write_tensor_file(const std::filesystem::path& path, const TensorFile& file) {
  write_text_file_atomic(path, serialize_tensor_file(file));
}

std::string read_binary_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw MissingCache(path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

TensorFile read_tensor_file(const std::filesystem::path& path, const std::array<char, 8>& magic, bool expect_trailer) {
  return parse_tensor_file(read_binary_file(path), magic, expect_trailer);
}

}  // namespace aqtc
