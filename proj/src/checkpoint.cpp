#include "sslt/checkpoint.hpp"

#include <bit>
#include <cstring>

#include "sslt/errors.hpp"

namespace sslt {

namespace {

constexpr char kMagic[8] = {'S', 'S', 'L', 'T', 'C', 'K', 'P', 'T'};

class Writer {
 public:
  void u32(std::uint32_t v) { put(v, 4); }
  void u64(std::uint64_t v) { put(v, 8); }
  void f64(double v) { put(std::bit_cast<std::uint64_t>(v), 8); }
  void raw(const char* p, std::size_t n) { out_.append(p, n); }
  void block(const Matrix& w, const Vector& b) {
    u32(static_cast<std::uint32_t>(w.rows()));
    u32(static_cast<std::uint32_t>(w.cols()));
    for (Eigen::Index i = 0; i < w.size(); ++i) f64(w.data()[i]);
    for (Eigen::Index i = 0; i < b.size(); ++i) f64(b[i]);
  }
  std::string take() { return std::move(out_); }
  const std::string& bytes() const { return out_; }

 private:
  void put(std::uint64_t v, int n) {
    for (int i = 0; i < n; ++i) out_.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
  }
  std::string out_;
};

class Reader {
 public:
  explicit Reader(std::string_view in) : in_(in) {}
  std::uint32_t u32() { return static_cast<std::uint32_t>(get(4)); }
  std::uint64_t u64() { return get(8); }
  double f64() { return std::bit_cast<double>(get(8)); }
  std::string_view raw(std::size_t n) {
    need(n);
    auto s = in_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  void block(Matrix& w, Vector& b) {
    const auto rows = u32();
    const auto cols = u32();
    need((static_cast<std::size_t>(rows) * cols + rows) * 8);
    w.resize(rows, cols);
    b.resize(rows);
    for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = f64();
    for (Eigen::Index i = 0; i < b.size(); ++i) b[i] = f64();
  }
  std::size_t pos() const { return pos_; }

 private:
  void need(std::size_t n) const {
    if (in_.size() - pos_ < n)
      throw DataError("checkpoint truncated at byte offset " + std::to_string(pos_));
  }
  std::uint64_t get(int n) {
    need(static_cast<std::size_t>(n));
    std::uint64_t v = 0;
    for (int i = 0; i < n; ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(in_[pos_ + i])) << (8 * i);
    pos_ += static_cast<std::size_t>(n);
    return v;
  }
  std::string_view in_;
  std::size_t pos_ = 0;
};

}  // namespace

std::string encode_checkpoint(const ModelState& model, std::uint64_t config_hash) {
  Writer w;
  w.raw(kMagic, sizeof kMagic);
  w.u32(kCheckpointVersion);
  w.u64(config_hash);
  w.u32(static_cast<std::uint32_t>(model.embedding.layers.size()));
  for (const auto& l : model.embedding.layers) w.block(l.weight, l.bias);
  w.block(model.head_balanced.weight, model.head_balanced.bias);
  w.block(model.head_random.weight, model.head_random.bias);
  w.u64(fnv1a64(w.bytes()));
  return w.take();
}

Checkpoint decode_checkpoint(std::string_view bytes) {
  Reader r(bytes);
  if (r.raw(sizeof kMagic) != std::string_view(kMagic, sizeof kMagic)) throw DataError("not a checkpoint (bad magic)");
  const auto version = r.u32();
  if (version != kCheckpointVersion) throw DataError("unsupported checkpoint version " + std::to_string(version));
  Checkpoint ck;
  ck.config_hash = r.u64();
  const auto n_layers = r.u32();
  if (n_layers == 0 || n_layers > 1024) throw DataError("implausible embedding depth " + std::to_string(n_layers));
  ck.model.embedding.layers.resize(n_layers);
  for (auto& l : ck.model.embedding.layers) r.block(l.weight, l.bias);
  r.block(ck.model.head_balanced.weight, ck.model.head_balanced.bias);
  r.block(ck.model.head_random.weight, ck.model.head_random.bias);
  const std::size_t payload = r.pos();
  const auto checksum = r.u64();
  if (checksum != fnv1a64(bytes.substr(0, payload))) throw DataError("checkpoint checksum mismatch");
  if (r.pos() != bytes.size())
    throw DataError("trailing bytes after checkpoint at byte offset " + std::to_string(r.pos()));
  try {
    ck.model.validate();
  } catch (const ConfigError& e) {
    throw DataError(std::string("checkpoint holds an inconsistent model: ") + e.what());
  }
  return ck;
}

void save_checkpoint(const std::filesystem::path& path, const ModelState& model, std::uint64_t config_hash) {
  write_file_atomic(path, encode_checkpoint(model, config_hash));
}

Checkpoint load_checkpoint(const std::filesystem::path& path) { return decode_checkpoint(read_file(path)); }

}  // namespace sslt
