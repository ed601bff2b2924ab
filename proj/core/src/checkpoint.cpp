#include "hover/checkpoint.hpp"

#include <array>
#include <cstring>
#include <fstream>
#include <iterator>
#include <vector>

namespace hover {

namespace {

constexpr std::array<char, 8> kMagic{'H', 'V', 'R', 'C', 'K', 'P', 'T', '\0'};

std::uint64_t fnv1a(const char* data, std::size_t n) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (std::size_t i = 0; i < n; ++i) {
    h ^= static_cast<unsigned char>(data[i]);
    h *= 0x100000001b3ULL;
  }
  return h;
}

class Writer {
 public:
  template <typename T>
  void pod(const T& v) {
    const char* p = reinterpret_cast<const char*>(&v);
    buf_.insert(buf_.end(), p, p + sizeof(T));
  }
  void bytes(const char* p, std::size_t n) { buf_.insert(buf_.end(), p, p + n); }
  void string(const std::string& s) {
    pod<std::uint64_t>(s.size());
    bytes(s.data(), s.size());
  }
  void vector(const nn::Vector& v) {
    pod<std::uint64_t>(static_cast<std::uint64_t>(v.size()));
    bytes(reinterpret_cast<const char*>(v.data()), sizeof(double) * static_cast<std::size_t>(v.size()));
  }
  void adam(const nn::AdamState& s) {
    vector(s.first_moment);
    vector(s.second_moment);
    pod<std::int64_t>(s.steps);
  }
  std::vector<char>& buffer() { return buf_; }

 private:
  std::vector<char> buf_;
};

class Reader {
 public:
  Reader(const char* data, std::size_t n) : p_(data), end_(data + n) {}

  template <typename T>
  T pod() {
    T v;
    take(&v, sizeof(T));
    return v;
  }
  std::string string() {
    const auto n = pod<std::uint64_t>();
    check(n);
    std::string s(p_, p_ + n);
    p_ += n;
    return s;
  }
  nn::Vector vector() {
    const auto n = pod<std::uint64_t>();
    check(n * sizeof(double));
    nn::Vector v(static_cast<Eigen::Index>(n));
    take(v.data(), n * sizeof(double));
    return v;
  }
  nn::AdamState adam() {
    nn::AdamState s;
    s.first_moment = vector();
    s.second_moment = vector();
    s.steps = pod<std::int64_t>();
    return s;
  }
  [[nodiscard]] bool exhausted() const { return p_ == end_; }

 private:
  void check(std::uint64_t n) const {
    if (n > static_cast<std::uint64_t>(end_ - p_)) throw CheckpointError("checkpoint truncated");
  }
  void take(void* dst, std::size_t n) {
    check(n);
    std::memcpy(dst, p_, n);
    p_ += n;
  }
  const char* p_;
  const char* end_;
};

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  Writer w;
  w.bytes(kMagic.data(), kMagic.size());
  w.pod(kCheckpointVersion);
  w.vector(ckpt.policy_parameters);
  w.vector(ckpt.value_parameters);
  w.adam(ckpt.policy_optimizer);
  w.adam(ckpt.value_optimizer);
  w.pod(ckpt.clip_epsilon);
  w.pod(ckpt.next_batch);
  w.pod(ckpt.seed);
  w.string(ckpt.rng_state);
  w.string(ckpt.config_json);
  auto& buf = w.buffer();
  const std::uint64_t sum = fnv1a(buf.data(), buf.size());
  w.pod(sum);

  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw CheckpointError("cannot open " + tmp.string() + " for writing");
    out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
    if (!out) throw CheckpointError("write failed: " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open checkpoint " + path.string());
  std::vector<char> buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (buf.size() < kMagic.size() + sizeof(std::uint32_t) + sizeof(std::uint64_t)) {
    throw CheckpointError("checkpoint truncated: " + path.string());
  }
  if (std::memcmp(buf.data(), kMagic.data(), kMagic.size()) != 0) {
    throw CheckpointError("not a checkpoint file: " + path.string());
  }
  const std::size_t body = buf.size() - sizeof(std::uint64_t);
  std::uint64_t stored = 0;
  std::memcpy(&stored, buf.data() + body, sizeof(stored));
  if (stored != fnv1a(buf.data(), body)) throw CheckpointError("checksum mismatch: " + path.string());

  Reader r(buf.data() + kMagic.size(), body - kMagic.size());
  const auto version = r.pod<std::uint32_t>();
  if (version != kCheckpointVersion) {
    throw CheckpointError("unsupported checkpoint version " + std::to_string(version));
  }
  Checkpoint c;
  c.policy_parameters = r.vector();
  c.value_parameters = r.vector();
  c.policy_optimizer = r.adam();
  c.value_optimizer = r.adam();
  c.clip_epsilon = r.pod<double>();
  c.next_batch = r.pod<std::int64_t>();
  c.seed = r.pod<std::uint64_t>();
  c.rng_state = r.string();
  c.config_json = r.string();
  if (!r.exhausted()) throw CheckpointError("trailing bytes in checkpoint " + path.string());
  return c;
}

}  // namespace hover
