#include "trj/io/checkpoint.hpp"

#include <zlib.h>

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <limits>

namespace trj::io {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

Tensor Tensor::from_matrix(const std::string& name, const RowMatrix& m) {
  Tensor t;
  t.name = name;
  t.shape = {static_cast<std::uint64_t>(m.rows()), static_cast<std::uint64_t>(m.cols())};
  t.values.assign(m.data(), m.data() + m.size());
  return t;
}

RowMatrix Tensor::to_matrix() const {
  Eigen::Index rows = 1, cols = 1;
  if (shape.size() == 1) {
    cols = static_cast<Eigen::Index>(shape[0]);
  } else if (shape.size() == 2) {
    rows = static_cast<Eigen::Index>(shape[0]);
    cols = static_cast<Eigen::Index>(shape[1]);
  } else if (!shape.empty()) {
    throw IoError("tensor '" + name + "' has rank " + std::to_string(shape.size()) + "; expected at most 2");
  }
  if (static_cast<size_t>(rows * cols) != values.size()) throw IoError("tensor '" + name + "' payload/shape mismatch");
  return Eigen::Map<const RowMatrix>(values.data(), rows, cols);
}

const Tensor* Checkpoint::find(const std::string& name) const {
  for (const auto& t : tensors) {
    if (t.name == name) return &t;
  }
  return nullptr;
}

const Tensor& Checkpoint::at(const std::string& name) const {
  const Tensor* t = find(name);
  if (t == nullptr) throw IoError("checkpoint is missing tensor '" + name + "'");
  return *t;
}

std::uint32_t crc32_of(std::span<const std::uint8_t> bytes) {
  uLong crc = crc32(0L, Z_NULL, 0);
  size_t done = 0;
  while (done < bytes.size()) {
    const auto chunk = static_cast<uInt>(std::min<size_t>(bytes.size() - done, std::numeric_limits<uInt>::max()));
    crc = crc32(crc, bytes.data() + done, chunk);
    done += chunk;
  }
  return static_cast<std::uint32_t>(crc);
}

namespace {

class Writer {
 public:
  template <typename T>
  void pod(T v) {
    const auto* p = reinterpret_cast<const std::uint8_t*>(&v);
    bytes.insert(bytes.end(), p, p + sizeof(T));
  }
  void raw(const void* data, size_t n) {
    const auto* p = static_cast<const std::uint8_t*>(data);
    bytes.insert(bytes.end(), p, p + n);
  }
  void str(const std::string& s) {
    if (s.size() > std::numeric_limits<std::uint32_t>::max()) throw IoError("string too long for checkpoint");
    pod(static_cast<std::uint32_t>(s.size()));
    raw(s.data(), s.size());
  }
  std::vector<std::uint8_t> bytes;
};

class Reader {
 public:
  Reader(std::span<const std::uint8_t> b, std::string source) : bytes_(b), source_(std::move(source)) {}
  template <typename T>
  T pod() {
    T v;
    std::memcpy(&v, take(sizeof(T)), sizeof(T));
    return v;
  }
  const std::uint8_t* take(size_t n) {
    if (n > bytes_.size() - pos_) throw IoError(source_ + ": checkpoint is truncated");
    const auto* p = bytes_.data() + pos_;
    pos_ += n;
    return p;
  }
  std::string str() {
    const auto n = pod<std::uint32_t>();
    const auto* p = take(n);
    return std::string(reinterpret_cast<const char*>(p), n);
  }
  size_t position() const { return pos_; }

 private:
  std::span<const std::uint8_t> bytes_;
  std::string source_;
  size_t pos_ = 0;
};

}  // namespace

std::vector<std::uint8_t> serialize_checkpoint(const Checkpoint& ckpt) {
  Writer w;
  w.raw("TRJ1", 4);
  w.pod(ckpt.version);
  w.str(ckpt.config);
  w.pod(static_cast<std::uint32_t>(ckpt.tensors.size()));
  for (const auto& t : ckpt.tensors) {
    std::uint64_t count = 1;
    for (auto d : t.shape) count *= d;
    if (count != t.values.size()) throw IoError("tensor '" + t.name + "' payload/shape mismatch");
    w.str(t.name);
    w.pod(static_cast<std::uint8_t>(t.type));
    w.pod(static_cast<std::uint32_t>(t.shape.size()));
    for (auto d : t.shape) w.pod(d);
    if (t.type == ElementType::kFloat64) {
      w.raw(t.values.data(), t.values.size() * sizeof(double));
    } else {
      for (double v : t.values) w.pod(static_cast<float>(v));
    }
  }
  w.pod(crc32_of(w.bytes));
  return std::move(w.bytes);
}

Checkpoint deserialize_checkpoint(std::span<const std::uint8_t> bytes, const std::string& source) {
  if (bytes.size() < 16) throw IoError(source + ": file too short to be a checkpoint");
  if (std::memcmp(bytes.data(), "TRJ1", 4) != 0) throw IoError(source + ": bad checkpoint magic");
  const auto body = bytes.first(bytes.size() - 4);
  std::uint32_t stored;
  std::memcpy(&stored, bytes.data() + body.size(), 4);
  if (crc32_of(body) != stored) throw IoError(source + ": checkpoint checksum mismatch (file corrupted)");

  Reader r(body, source);
  r.take(4);
  Checkpoint ckpt;
  ckpt.version = r.pod<std::uint32_t>();
  if (ckpt.version != kCheckpointVersion) {
    throw IoError(source + ": unsupported checkpoint version " + std::to_string(ckpt.version));
  }
  ckpt.config = r.str();
  const auto count = r.pod<std::uint32_t>();
  for (std::uint32_t i = 0; i < count; ++i) {
    Tensor t;
    t.name = r.str();
    const auto type = r.pod<std::uint8_t>();
    if (type > 1) throw IoError(source + ": tensor '" + t.name + "' has unknown element type");
    t.type = static_cast<ElementType>(type);
    const auto rank = r.pod<std::uint32_t>();
    std::uint64_t n = 1;
    for (std::uint32_t d = 0; d < rank; ++d) {
      t.shape.push_back(r.pod<std::uint64_t>());
      n *= t.shape.back();
    }
    const size_t width = t.type == ElementType::kFloat64 ? 8 : 4;
    if (n > (body.size() - r.position()) / width) throw IoError(source + ": checkpoint is truncated");
    t.values.resize(n);
    if (t.type == ElementType::kFloat64) {
      std::memcpy(t.values.data(), r.take(n * 8), n * 8);
    } else {
      for (auto& v : t.values) v = r.pod<float>();
    }
    ckpt.tensors.push_back(std::move(t));
  }
  if (r.position() != body.size()) throw IoError(source + ": trailing bytes after the last tensor");
  return ckpt;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  const auto bytes = serialize_checkpoint(ckpt);
  const auto tmp = std::filesystem::path(path.string() + ".tmp");
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write checkpoint " + path.string());
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("failed writing checkpoint " + path.string());
  }
  std::filesystem::rename(tmp, path);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint " + path.string());
  const std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return deserialize_checkpoint(bytes, path.string());
}

void add_parameters(Checkpoint& ckpt, std::span<nn::Parameter* const> params, const std::string& prefix) {
  for (const auto* p : params) ckpt.tensors.push_back(Tensor::from_matrix(prefix + p->name(), p->value));
}

void restore_parameters(const Checkpoint& ckpt, std::span<nn::Parameter* const> params, const std::string& prefix) {
  for (auto* p : params) {
    const Tensor& t = ckpt.at(prefix + p->name());
    RowMatrix m = t.to_matrix();
    if (m.rows() != p->value.rows() || m.cols() != p->value.cols()) {
      throw IoError("tensor '" + t.name + "' has shape " + nn::shape_string(m.rows(), m.cols()) + ", parameter expects " +
                    nn::shape_string(p->value.rows(), p->value.cols()));
    }
    p->value = std::move(m);
  }
}

}  // namespace trj::io
