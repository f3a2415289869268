#include <bit>
#include <cstring>
#include <fstream>

#include "dimino/hash.hpp"
#include "dimino/model.hpp"

namespace dimino {

namespace {

constexpr char kMagic[8] = {'D', 'I', 'N', 'O', 'C', 'K', 'P', 'T'};

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

class Writer {
 public:
  template <class T>
  void put(T v) {
    const auto* p = reinterpret_cast<const std::uint8_t*>(&v);
    bytes.insert(bytes.end(), p, p + sizeof(T));
  }
  void put_bytes(std::string_view s) { bytes.insert(bytes.end(), s.begin(), s.end()); }
  std::vector<std::uint8_t> bytes;
};

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> b) : bytes_(b) {}
  template <class T>
  T get() {
    need(sizeof(T));
    T v;
    std::memcpy(&v, bytes_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return v;
  }
  std::string get_string(std::size_t n) {
    need(n);
    std::string s(reinterpret_cast<const char*>(bytes_.data() + pos_), n);
    pos_ += n;
    return s;
  }
  std::size_t position() const { return pos_; }

 private:
  void need(std::size_t n) const {
    if (bytes_.size() - pos_ < n) fail(ErrorCode::kCorruptCheckpoint, "checkpoint is truncated");
  }
  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

std::vector<std::uint8_t> serialize_model(const Model& model) {
  Writer w;
  w.put_bytes(std::string_view(kMagic, sizeof(kMagic)));
  w.put<std::uint32_t>(kCheckpointVersion);
  const std::string json = config_to_json(model.config());
  w.put<std::uint64_t>(json.size());
  w.put_bytes(json);
  w.put<std::uint32_t>(static_cast<std::uint32_t>(model.parameters().size()));
  for (const auto& p : model.parameters()) {
    w.put<std::uint32_t>(static_cast<std::uint32_t>(p.name.size()));
    w.put_bytes(p.name);
    w.put<std::uint32_t>(static_cast<std::uint32_t>(p.value.rank()));
    for (auto d : p.value.shape()) w.put<std::uint64_t>(d);
    w.put<std::uint8_t>(p.value.is_complex() ? 1 : 0);
    w.put<std::uint8_t>(p.trainable ? 1 : 0);
    for (double v : p.value.data()) w.put<double>(v);
  }
  w.put<std::uint64_t>(fnv1a(w.bytes));
  return std::move(w.bytes);
}

Model deserialize_model(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < sizeof(kMagic) + 4 + 8 || std::memcmp(bytes.data(), kMagic, sizeof(kMagic)) != 0) {
    if (bytes.size() >= sizeof(kMagic) && std::memcmp(bytes.data(), kMagic, sizeof(kMagic)) == 0) {
      fail(ErrorCode::kCorruptCheckpoint, "checkpoint is truncated");
    }
    fail(ErrorCode::kCorruptCheckpoint, "not a checkpoint (bad magic)");
  }
  Reader r(bytes);
  r.get_string(sizeof(kMagic));
  const auto version = r.get<std::uint32_t>();
  if (version != kCheckpointVersion) {
    fail(ErrorCode::kCorruptCheckpoint, "checkpoint format version " + std::to_string(version) +
                                            " is not supported (this build reads version " +
                                            std::to_string(kCheckpointVersion) + ", no migration available)");
  }
  if (bytes.size() < 8) fail(ErrorCode::kCorruptCheckpoint, "checkpoint is truncated");
  const std::size_t body = bytes.size() - 8;
  std::uint64_t stored = 0;
  std::memcpy(&stored, bytes.data() + body, 8);
  if (fnv1a(bytes.first(body)) != stored) {
    fail(ErrorCode::kCorruptCheckpoint, "checkpoint content hash mismatch (truncated or modified file)");
  }
  Reader in(bytes.first(body));
  in.get_string(sizeof(kMagic) + 4);
  const auto json_len = in.get<std::uint64_t>();
  if (json_len > body) fail(ErrorCode::kCorruptCheckpoint, "checkpoint config length is out of range");
  ModelConfig cfg;
  try {
    cfg = config_from_json(in.get_string(static_cast<std::size_t>(json_len)));
  } catch (const Error& e) {
    fail(ErrorCode::kCorruptCheckpoint, std::string("checkpoint config: ") + e.what());
  }
  const auto count = in.get<std::uint32_t>();
  std::vector<Parameter> params;
  for (std::uint32_t i = 0; i < count; ++i) {
    Parameter p;
    p.name = in.get_string(in.get<std::uint32_t>());
    const auto rank = in.get<std::uint32_t>();
    if (rank > 8) fail(ErrorCode::kCorruptCheckpoint, "parameter '" + p.name + "' has an implausible rank");
    ad::Shape shape;
    for (std::uint32_t a = 0; a < rank; ++a) shape.push_back(static_cast<std::size_t>(in.get<std::uint64_t>()));
    const bool complex = in.get<std::uint8_t>() != 0;
    p.trainable = in.get<std::uint8_t>() != 0;
    const std::size_t n = ad::numel(shape) * (complex ? 2 : 1);
    if (n > body / sizeof(double)) fail(ErrorCode::kCorruptCheckpoint, "parameter '" + p.name + "' is too large");
    std::vector<double> data(n);
    for (auto& v : data) v = in.get<double>();
    p.value = ad::Tensor<double>(std::move(shape), std::move(data),
                                 complex ? ad::ElementKind::kComplex : ad::ElementKind::kReal);
    params.push_back(std::move(p));
  }
  if (in.position() != body) fail(ErrorCode::kCorruptCheckpoint, "checkpoint has trailing bytes");
  try {
    return Model(std::move(cfg), std::move(params));
  } catch (const Error& e) {
    fail(ErrorCode::kCorruptCheckpoint, std::string("checkpoint parameters: ") + e.what());
  }
}

void save_model(const Model& model, const std::filesystem::path& path) {
  const auto bytes = serialize_model(model);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorCode::kIo, "cannot open '" + path.string() + "' for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) fail(ErrorCode::kIo, "failed writing '" + path.string() + "'");
}

Model load_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::kIo, "cannot open checkpoint '" + path.string() + "'");
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return deserialize_model(bytes);
}

}  // namespace dimino
