#include "fgnic/checkpoint.hpp"

#include "fgnic/hash.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

namespace fgnic {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

namespace {

constexpr char kMagic[8] = {'F', 'G', 'N', 'I', 'C', 'K', 'P', 'T'};
constexpr std::uint32_t kVersion = 1;

template <typename T>
void put(std::string& out, const T& v) {
  out.append(reinterpret_cast<const char*>(&v), sizeof v);
}

template <typename T>
T get(const std::string& in, std::size_t& pos) {
  if (pos + sizeof(T) > in.size()) throw IoError("checkpoint truncated");
  T v;
  std::memcpy(&v, in.data() + pos, sizeof v);
  pos += sizeof v;
  return v;
}

}  // namespace

const Matrix<double>& Checkpoint::tensor(const std::string& name) const {
  for (const auto& [n, m] : tensors)
    if (n == name) return m;
  throw IoError("checkpoint has no tensor '" + name + "'");
}

bool Checkpoint::has_tensor(const std::string& name) const {
  for (const auto& t : tensors)
    if (t.first == name) return true;
  return false;
}

std::string Checkpoint::serialize() const {
  if (dtype != "f32" && dtype != "f64") throw IoError("unsupported checkpoint dtype " + dtype);
  nlohmann::json header;
  header["meta"] = meta;
  header["dtype"] = dtype;
  header["tensors"] = nlohmann::json::array();
  for (const auto& [name, m] : tensors) header["tensors"].push_back({{"name", name}, {"rows", m.rows()}, {"cols", m.cols()}});
  const std::string h = header.dump();
  std::string out(kMagic, sizeof kMagic);
  put(out, kVersion);
  put(out, static_cast<std::uint64_t>(h.size()));
  out += h;
  for (const auto& [name, m] : tensors) {
    if (dtype == "f64") {
      out.append(reinterpret_cast<const char*>(m.data()), sizeof(double) * m.size());
    } else {
      const Matrix<float> f = m.cast<float>();
      out.append(reinterpret_cast<const char*>(f.data()), sizeof(float) * f.size());
    }
  }
  return out;
}

Checkpoint Checkpoint::deserialize(const std::string& bytes) {
  if (bytes.size() < sizeof kMagic || std::memcmp(bytes.data(), kMagic, sizeof kMagic) != 0)
    throw IoError("not a checkpoint file (bad magic)");
  std::size_t pos = sizeof kMagic;
  const auto version = get<std::uint32_t>(bytes, pos);
  if (version != kVersion) throw IoError("unsupported checkpoint version " + std::to_string(version));
  const auto hlen = get<std::uint64_t>(bytes, pos);
  if (pos + hlen > bytes.size()) throw IoError("checkpoint header truncated");
  const auto header = nlohmann::json::parse(bytes.substr(pos, hlen));
  pos += hlen;
  Checkpoint ck;
  ck.meta = header.at("meta");
  ck.dtype = header.at("dtype").get<std::string>();
  const std::size_t elem = ck.dtype == "f64" ? 8 : 4;
  for (const auto& t : header.at("tensors")) {
    const Index rows = t.at("rows").get<Index>();
    const Index cols = t.at("cols").get<Index>();
    const std::size_t n = std::size_t(rows * cols);
    if (pos + n * elem > bytes.size()) throw IoError("checkpoint tensor data truncated");
    Matrix<double> m(rows, cols);
    if (elem == 8) {
      std::memcpy(m.data(), bytes.data() + pos, n * 8);
    } else {
      Matrix<float> f(rows, cols);
      std::memcpy(f.data(), bytes.data() + pos, n * 4);
      m = f.cast<double>();
    }
    pos += n * elem;
    ck.tensors.emplace_back(t.at("name").get<std::string>(), std::move(m));
  }
  if (pos != bytes.size()) throw IoError("trailing bytes after checkpoint data");
  return ck;
}

void Checkpoint::save(const std::filesystem::path& path) const {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write checkpoint " + path.string());
  const auto bytes = serialize();
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

Checkpoint Checkpoint::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return deserialize(ss.str());
}

template <typename Scalar>
std::string hash_params(const nn::ConstParamList<Scalar>& params) {
  Sha256 h;
  for (const auto* p : params) {
    h.update(p->name);
    const Index dims[2] = {p->value.rows(), p->value.cols()};
    h.update(dims, sizeof dims);
    h.update(p->value.data(), sizeof(Scalar) * p->value.size());
  }
  return h.hex_digest();
}

template std::string hash_params<float>(const nn::ConstParamList<float>&);
template std::string hash_params<double>(const nn::ConstParamList<double>&);

std::string file_sha256(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return sha256_hex(ss.str());
}

}  // namespace fgnic
