#include "tagfont/nn/checkpoint.hpp"

#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "tagfont/common/errors.hpp"

namespace tagfont::nn {

namespace {

constexpr char kMagic[4] = {'T', 'F', 'C', 'K'};

template <typename T>
void put_pod(std::string& out, T v) {
  char buf[sizeof(T)];
  std::memcpy(buf, &v, sizeof(T));
  out.append(buf, sizeof(T));
}

void put_str(std::string& out, const std::string& s) {
  put_pod<std::uint32_t>(out, static_cast<std::uint32_t>(s.size()));
  out.append(s);
}

class Reader {
 public:
  explicit Reader(const std::string& bytes) : bytes_(bytes) {}

  template <typename T>
  T pod() {
    need(sizeof(T));
    T v;
    std::memcpy(&v, bytes_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return v;
  }
  std::string str() {
    const auto n = pod<std::uint32_t>();
    need(n);
    std::string s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  void raw(void* dst, std::size_t n) {
    need(n);
    std::memcpy(dst, bytes_.data() + pos_, n);
    pos_ += n;
  }
  bool done() const { return pos_ == bytes_.size(); }

 private:
  void need(std::size_t n) const {
    if (pos_ + n > bytes_.size()) throw FormatError("checkpoint: truncated data");
  }
  const std::string& bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

const std::string& Checkpoint::text(const std::string& key) const {
  auto it = text_.find(key);
  if (it == text_.end()) throw FormatError("checkpoint: missing entry '" + key + "'");
  return it->second;
}

const Tensor& Checkpoint::tensor(const std::string& name) const {
  auto it = tensors_.find(name);
  if (it == tensors_.end()) throw FormatError("checkpoint: missing tensor '" + name + "'");
  return it->second;
}

void Checkpoint::put(const ParameterList& params, const std::string& prefix) {
  for (const auto* p : params) tensors_[prefix + p->name] = p->value;
}

void Checkpoint::get(const ParameterList& params, const std::string& prefix) const {
  for (auto* p : params) {
    const Tensor& t = tensor(prefix + p->name);
    if (!t.same_shape(p->value)) {
      throw FormatError("checkpoint: shape mismatch for '" + prefix + p->name + "': stored " +
                        t.shape_string() + ", model " + p->value.shape_string());
    }
    p->value = t;
    p->grad = Tensor::like(t);
  }
}

void Checkpoint::merge_from(const Checkpoint& other) {
  for (const auto& [k, v] : other.text_) text_.emplace(k, v);
  for (const auto& [k, v] : other.tensors_) tensors_.emplace(k, v);
}

std::string Checkpoint::serialize() const {
  std::string out(kMagic, 4);
  put_pod<std::uint32_t>(out, kVersion);
  put_pod<std::uint32_t>(out, static_cast<std::uint32_t>(text_.size()));
  put_pod<std::uint32_t>(out, static_cast<std::uint32_t>(tensors_.size()));
  for (const auto& [k, v] : text_) {
    put_str(out, k);
    put_str(out, v);
  }
  for (const auto& [k, t] : tensors_) {
    put_str(out, k);
    put_pod<std::uint32_t>(out, static_cast<std::uint32_t>(t.rank()));
    for (int d : t.shape()) put_pod<std::int32_t>(out, d);
    out.append(reinterpret_cast<const char*>(t.data()), t.size() * sizeof(Scalar));
  }
  return out;
}

Checkpoint Checkpoint::deserialize(const std::string& bytes) {
  if (bytes.size() < 4 || std::memcmp(bytes.data(), kMagic, 4) != 0) {
    throw FormatError("checkpoint: bad magic");
  }
  const std::string body = bytes.substr(4);
  Reader rd(body);
  const auto version = rd.pod<std::uint32_t>();
  if (version != kVersion) {
    throw FormatError("checkpoint: unsupported version " + std::to_string(version));
  }
  const auto n_text = rd.pod<std::uint32_t>();
  const auto n_tensor = rd.pod<std::uint32_t>();
  Checkpoint ck;
  for (std::uint32_t i = 0; i < n_text; ++i) {
    std::string k = rd.str();
    ck.text_[k] = rd.str();
  }
  for (std::uint32_t i = 0; i < n_tensor; ++i) {
    std::string k = rd.str();
    const auto rank = rd.pod<std::uint32_t>();
    std::vector<int> shape(rank);
    for (auto& d : shape) d = rd.pod<std::int32_t>();
    Tensor t(shape);
    rd.raw(t.data(), t.size() * sizeof(Scalar));
    ck.tensors_[k] = std::move(t);
  }
  if (!rd.done()) throw FormatError("checkpoint: trailing bytes");
  return ck;
}

void Checkpoint::save(const std::string& path) const {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw FormatError("cannot write " + path);
    const std::string bytes = serialize();
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  }
  std::filesystem::rename(tmp, path);
}

Checkpoint Checkpoint::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot read checkpoint " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return deserialize(ss.str());
}

}  // namespace tagfont::nn
