#include "mqp/nn/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <iomanip>
#include <iterator>
#include <sstream>

#include "mqp/errors.hpp"

namespace mqp::nn {
namespace {

constexpr char kMagic[8] = {'M', 'Q', 'P', 'C', 'K', 'P', 'T', '\0'};

template <typename T>
void put(std::vector<std::uint8_t>& out, T v) {
  std::uint8_t buf[sizeof(T)];
  std::memcpy(buf, &v, sizeof(T));
  out.insert(out.end(), buf, buf + sizeof(T));
}

class Reader {
 public:
  explicit Reader(const std::vector<std::uint8_t>& b) : bytes_(b) {}

  template <typename T>
  T get() {
    need(sizeof(T));
    T v;
    std::memcpy(&v, bytes_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return v;
  }

  std::string str(std::size_t n) {
    need(n);
    std::string s(reinterpret_cast<const char*>(bytes_.data() + pos_), n);
    pos_ += n;
    return s;
  }

  void doubles(std::vector<double>& dst, std::size_t n) {
    need(n * sizeof(double));
    dst.resize(n);
    std::memcpy(dst.data(), bytes_.data() + pos_, n * sizeof(double));
    pos_ += n * sizeof(double);
  }

  bool done() const { return pos_ == bytes_.size(); }

 private:
  void need(std::size_t n) const {
    if (pos_ + n > bytes_.size()) throw FormatError("checkpoint truncated");
  }
  const std::vector<std::uint8_t>& bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

std::string Checkpoint::id() const {
  std::uint64_t h = 1469598103934665603ull;
  auto mix = [&h](const void* data, std::size_t n) {
    auto* p = static_cast<const std::uint8_t*>(data);
    for (std::size_t i = 0; i < n; ++i) {
      h ^= p[i];
      h *= 1099511628211ull;
    }
  };
  mix(kind.data(), kind.size());
  for (const auto& p : params) {
    mix(p.name.data(), p.name.size());
    mix(p.values.data(), p.values.size() * sizeof(double));
  }
  std::ostringstream ss;
  ss << std::hex << std::setw(16) << std::setfill('0') << h;
  return ss.str();
}

std::vector<std::uint8_t> encode_checkpoint(const Checkpoint& ckpt) {
  std::vector<std::uint8_t> out(kMagic, kMagic + 8);
  put<std::uint32_t>(out, kCheckpointVersion);
  std::string header = nlohmann::json{{"kind", ckpt.kind}, {"config", ckpt.config}}.dump();
  put<std::uint32_t>(out, static_cast<std::uint32_t>(header.size()));
  out.insert(out.end(), header.begin(), header.end());
  put<std::uint32_t>(out, static_cast<std::uint32_t>(ckpt.params.size()));
  for (const auto& p : ckpt.params) {
    put<std::uint32_t>(out, static_cast<std::uint32_t>(p.name.size()));
    out.insert(out.end(), p.name.begin(), p.name.end());
    put<std::uint32_t>(out, static_cast<std::uint32_t>(p.shape.size()));
    for (int d : p.shape) put<std::int32_t>(out, d);
    put<std::uint64_t>(out, p.values.size());
    auto* raw = reinterpret_cast<const std::uint8_t*>(p.values.data());
    out.insert(out.end(), raw, raw + p.values.size() * sizeof(double));
  }
  return out;
}

Checkpoint decode_checkpoint(const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() < 8 || std::memcmp(bytes.data(), kMagic, 8) != 0) {
    throw FormatError("not a checkpoint file (bad magic)");
  }
  std::vector<std::uint8_t> body(bytes.begin() + 8, bytes.end());
  Reader r(body);
  auto version = r.get<std::uint32_t>();
  if (version != kCheckpointVersion) {
    throw FormatError("unsupported checkpoint version " + std::to_string(version));
  }
  Checkpoint ckpt;
  auto header_len = r.get<std::uint32_t>();
  try {
    auto header = nlohmann::json::parse(r.str(header_len));
    ckpt.kind = header.at("kind");
    ckpt.config = header.at("config");
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("checkpoint header: ") + e.what());
  }
  auto count = r.get<std::uint32_t>();
  for (std::uint32_t i = 0; i < count; ++i) {
    ParamBlob p;
    p.name = r.str(r.get<std::uint32_t>());
    auto ndim = r.get<std::uint32_t>();
    std::size_t expected = 1;
    for (std::uint32_t d = 0; d < ndim; ++d) {
      p.shape.push_back(r.get<std::int32_t>());
      expected *= static_cast<std::size_t>(p.shape.back());
    }
    auto n = r.get<std::uint64_t>();
    if (n != expected) throw FormatError("checkpoint blob " + p.name + " has inconsistent size");
    r.doubles(p.values, n);
    ckpt.params.push_back(std::move(p));
  }
  if (!r.done()) throw FormatError("checkpoint has trailing bytes");
  return ckpt;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  auto bytes = encode_checkpoint(ckpt);
  std::ofstream out(path, std::ios::binary);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw MissingDependency("cannot write checkpoint: " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw MissingDependency("cannot open checkpoint: " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return decode_checkpoint(bytes);
}

}  // namespace mqp::nn
