#include "auda/checkpoint.hpp"

#include <cstring>
#include <fstream>

namespace auda {

namespace {

constexpr char kMagic[4] = {'A', 'U', 'D', 'A'};
constexpr uint32_t kVersion = 1;

void put_bytes(std::string& out, const void* p, size_t n) {
  out.append(reinterpret_cast<const char*>(p), n);
}

template <typename T>
void put(std::string& out, T v) {
  put_bytes(out, &v, sizeof v);
}

void put_str(std::string& out, const std::string& s) {
  put(out, uint32_t(s.size()));
  out.append(s);
}

void put_tensor(std::string& out, const Tensor& t) {
  put(out, uint8_t(t.dtype()));
  put(out, uint32_t(t.ndim()));
  for (int64_t d : t.shape()) put(out, int64_t(d));
  put_bytes(out, t.impl()->data.data(), t.impl()->data.size());
}

class Reader {
 public:
  Reader(std::string buf, std::string path)
      : buf_(std::move(buf)), path_(std::move(path)) {}

  template <typename T>
  T get() {
    T v;
    raw(&v, sizeof v);
    return v;
  }

  std::string get_str() {
    const uint32_t n = get<uint32_t>();
    std::string s(n, '\0');
    raw(s.data(), n);
    return s;
  }

  Tensor get_tensor(bool requires_grad) {
    const uint8_t dt = get<uint8_t>();
    if (dt > 1) throw ParseError(path_ + ": bad dtype tag in checkpoint");
    const uint32_t ndim = get<uint32_t>();
    if (ndim > 8) throw ParseError(path_ + ": implausible tensor rank");
    std::vector<int64_t> shape;
    for (uint32_t i = 0; i < ndim; ++i) shape.push_back(get<int64_t>());
    Tensor t = Tensor::zeros(shape, DType(dt), requires_grad);
    raw(t.impl()->data.data(), t.impl()->data.size());
    return t;
  }

  bool exhausted() const { return pos_ == buf_.size(); }

 private:
  void raw(void* p, size_t n) {
    if (pos_ + n > buf_.size()) {
      throw ParseError(path_ + ": truncated checkpoint");
    }
    std::memcpy(p, buf_.data() + pos_, n);
    pos_ += n;
  }

  std::string buf_;
  std::string path_;
  size_t pos_ = 0;
};

void put_arch(std::string& out, const ArchDescriptor& a) {
  put(out, uint32_t(a.stem_channels));
  put(out, uint32_t(a.stage_channels.size()));
  for (int c : a.stage_channels) put(out, uint32_t(c));
  put(out, uint32_t(a.res_blocks));
  put(out, uint32_t(a.head_channels));
  put(out, uint32_t(a.num_classes));
  put(out, uint32_t(a.stride));
}

ArchDescriptor get_arch(Reader& r) {
  ArchDescriptor a;
  a.stem_channels = int(r.get<uint32_t>());
  const uint32_t n = r.get<uint32_t>();
  a.stage_channels.clear();
  for (uint32_t i = 0; i < n; ++i) a.stage_channels.push_back(int(r.get<uint32_t>()));
  a.res_blocks = int(r.get<uint32_t>());
  a.head_channels = int(r.get<uint32_t>());
  a.num_classes = int(r.get<uint32_t>());
  a.stride = int(r.get<uint32_t>());
  return a;
}

}  // namespace

void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
  std::string out;
  put_bytes(out, kMagic, 4);
  put(out, kVersion);
  put(out, uint8_t(ckpt.params.dtype));
  put_arch(out, ckpt.params.arch);

  uint8_t flags = 0;
  if (ckpt.optimizer) flags |= 1;
  if (ckpt.config_text) flags |= 2;
  if (ckpt.epoch) flags |= 4;
  put(out, flags);

  put(out, uint64_t(ckpt.params.params.size()));
  for (const auto& [name, tensor] : ckpt.params.params) {
    put_str(out, name);
    put_tensor(out, tensor);
  }
  if (ckpt.optimizer) {
    put(out, int64_t(ckpt.optimizer->step));
    for (const auto& [name, tensor] : ckpt.params.params) {
      (void)tensor;
      put_tensor(out, ckpt.optimizer->m.at(name));
      put_tensor(out, ckpt.optimizer->v.at(name));
    }
  }
  if (ckpt.config_text) put_str(out, *ckpt.config_text);
  if (ckpt.epoch) put(out, int32_t(*ckpt.epoch));

  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot write checkpoint " + path);
  f.write(out.data(), std::streamsize(out.size()));
  if (!f) throw IoError("short write on checkpoint " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open checkpoint " + path);
  std::string buf((std::istreambuf_iterator<char>(f)),
                  std::istreambuf_iterator<char>());
  Reader r(std::move(buf), path);

  char magic[4];
  magic[0] = r.get<char>();
  magic[1] = r.get<char>();
  magic[2] = r.get<char>();
  magic[3] = r.get<char>();
  if (std::memcmp(magic, kMagic, 4) != 0) {
    throw ParseError(path + ": bad magic, not an AUDA checkpoint");
  }
  const uint32_t version = r.get<uint32_t>();
  if (version != kVersion) {
    throw ParseError(path + ": unsupported checkpoint version " +
                     std::to_string(version));
  }

  Checkpoint ckpt;
  ckpt.params.dtype = DType(r.get<uint8_t>());
  ckpt.params.arch = get_arch(r);
  const uint8_t flags = r.get<uint8_t>();

  const uint64_t n_params = r.get<uint64_t>();
  for (uint64_t i = 0; i < n_params; ++i) {
    std::string name = r.get_str();
    ckpt.params.params.emplace(std::move(name), r.get_tensor(true));
  }
  if (flags & 1) {
    OptimizerState opt;
    opt.step = r.get<int64_t>();
    for (const auto& [name, tensor] : ckpt.params.params) {
      (void)tensor;
      opt.m.emplace(name, r.get_tensor(false));
      opt.v.emplace(name, r.get_tensor(false));
    }
    ckpt.optimizer = std::move(opt);
  }
  if (flags & 2) ckpt.config_text = r.get_str();
  if (flags & 4) ckpt.epoch = int(r.get<int32_t>());
  if (!r.exhausted()) {
    throw ParseError(path + ": trailing bytes after checkpoint payload");
  }
  return ckpt;
}

}  // namespace auda
