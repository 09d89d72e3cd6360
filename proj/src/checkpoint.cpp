#include "plbench/checkpoint.hpp"

#include <array>
#include <bit>
#include <cmath>
#include <fstream>
#include <iterator>
#include <map>
#include <string>

#include "plbench/error.hpp"

namespace plbench {

namespace {

constexpr std::array<std::uint8_t, 8> kMagic{'P', 'L', 'B', 'C', 'K', 'P', 'T', 0};
constexpr std::uint32_t kVersion = 1;

class Writer {
 public:
  void bytes(std::span<const std::uint8_t> b) { out_.insert(out_.end(), b.begin(), b.end()); }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }
  void name(std::string_view s) {
    u32(static_cast<std::uint32_t>(s.size()));
    out_.insert(out_.end(), s.begin(), s.end());
  }
  std::vector<std::uint8_t> take() { return std::move(out_); }

 private:
  std::vector<std::uint8_t> out_;
};

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> in) : in_(in) {}

  std::span<const std::uint8_t> bytes(std::size_t n) {
    need(n);
    auto s = in_.subspan(pos_, n);
    pos_ += n;
    return s;
  }
  std::uint32_t u32() {
    auto b = bytes(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
    return v;
  }
  std::uint64_t u64() {
    auto b = bytes(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
    return v;
  }
  float f32() { return std::bit_cast<float>(u32()); }
  std::string name() {
    const std::uint32_t len = u32();
    if (len > 256) fail("entry name too long");
    auto b = bytes(len);
    return std::string(b.begin(), b.end());
  }
  bool done() const noexcept { return pos_ == in_.size(); }

  [[noreturn]] void fail(const std::string& what) const {
    throw ParseError("checkpoint", 0, what + " at byte " + std::to_string(pos_));
  }

 private:
  void need(std::size_t n) const {
    if (in_.size() - pos_ < n) fail("truncated");
  }

  std::span<const std::uint8_t> in_;
  std::size_t pos_ = 0;
};

}  // namespace

std::vector<std::uint8_t> encode_checkpoint(const ModelState& state) {
  const ModelConfig& c = state.config;
  Writer w;
  w.bytes(kMagic);
  w.u32(kVersion);

  const std::array<std::pair<std::string_view, std::size_t>, 5> config{{
      {"input_dim", c.input_dim},
      {"hidden_dim", c.hidden_dim},
      {"feature_dim", c.feature_dim},
      {"num_known_classes", c.num_known_classes},
      {"projection_dim", c.projection_dim},
  }};
  w.u32(static_cast<std::uint32_t>(config.size()));
  for (const auto& [key, value] : config) {
    w.name(key);
    w.u64(value);
  }

  w.u32(8);
  for_each_tensor(state.params, [&](std::string_view name, const Matrix& t) {
    w.name(name);
    w.u32(static_cast<std::uint32_t>(t.rows()));
    w.u32(static_cast<std::uint32_t>(t.cols()));
    for (double v : t.values()) w.f32(static_cast<float>(v));
  });
  return w.take();
}

ModelState decode_checkpoint(std::span<const std::uint8_t> bytes) {
  Reader r(bytes);
  auto magic = r.bytes(kMagic.size());
  if (!std::equal(magic.begin(), magic.end(), kMagic.begin())) r.fail("bad magic");
  if (const auto version = r.u32(); version != kVersion) {
    r.fail("unsupported version " + std::to_string(version));
  }

  std::map<std::string, std::uint64_t> config;
  for (std::uint32_t n = r.u32(), i = 0; i < n; ++i) {
    std::string key = r.name();
    config[key] = r.u64();
  }
  auto get = [&](const char* key) -> std::size_t {
    auto it = config.find(key);
    if (it == config.end()) r.fail(std::string("missing config entry '") + key + "'");
    return static_cast<std::size_t>(it->second);
  };

  ModelState state;
  state.config.input_dim = get("input_dim");
  state.config.hidden_dim = get("hidden_dim");
  state.config.feature_dim = get("feature_dim");
  state.config.num_known_classes = get("num_known_classes");
  state.config.projection_dim = get("projection_dim");
  state.config.validate();
  state.params = Parameters::zeros(state.config);
  state.velocity = Parameters::zeros(state.config);

  std::map<std::string, Matrix> tensors;
  for (std::uint32_t n = r.u32(), i = 0; i < n; ++i) {
    std::string key = r.name();
    const std::uint32_t rows = r.u32();
    const std::uint32_t cols = r.u32();
    std::vector<double> data(static_cast<std::size_t>(rows) * cols);
    for (double& v : data) {
      v = r.f32();
      if (!std::isfinite(v)) r.fail("non-finite value in tensor '" + key + "'");
    }
    tensors.insert_or_assign(std::move(key), Matrix(rows, cols, std::move(data)));
  }
  if (!r.done()) r.fail("trailing bytes");

  for_each_tensor(state.params, [&](std::string_view name, Matrix& t) {
    auto it = tensors.find(std::string(name));
    if (it == tensors.end()) r.fail("missing tensor '" + std::string(name) + "'");
    if (it->second.rows() != t.rows() || it->second.cols() != t.cols()) {
      throw ShapeError("checkpoint tensor '" + std::string(name) + "' has wrong shape");
    }
    t = std::move(it->second);
  });
  return state;
}

void save_checkpoint(const std::filesystem::path& path, const ModelState& state) {
  const auto bytes = encode_checkpoint(state);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error("failed writing " + path.string());
}

ModelState load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open checkpoint " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  return decode_checkpoint(bytes);
}

}  // namespace plbench
