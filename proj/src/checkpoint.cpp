#include "dsanet/checkpoint.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>

#include "dsanet/errors.hpp"

namespace dsanet {

static_assert(std::endian::native == std::endian::little, "checkpoint encoding assumes a little-endian host");

namespace {

constexpr char kMagic[8] = {'D', 'S', 'A', 'N', 'E', 'T', 'C', 'K'};

template <typename T>
void put(std::ostream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

void put_string(std::ostream& out, const std::string& s) {
  put<std::uint32_t>(out, static_cast<std::uint32_t>(s.size()));
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

template <typename T>
T get(std::istream& in, const std::filesystem::path& path) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof v);
  if (!in) throw IoError("truncated checkpoint: " + path.string());
  return v;
}

std::string get_string(std::istream& in, const std::filesystem::path& path) {
  const auto n = get<std::uint32_t>(in, path);
  if (n > (1u << 24)) throw IoError("corrupt checkpoint string length in " + path.string());
  std::string s(n, '\0');
  in.read(s.data(), n);
  if (!in) throw IoError("truncated checkpoint: " + path.string());
  return s;
}

}  // namespace

std::string Checkpoint::header_value(const std::string& key, const std::string& fallback) const {
  for (const auto& [k, v] : header)
    if (k == key) return v;
  return fallback;
}

void save_checkpoint(const std::filesystem::path& path, const ParameterStore& params,
                     const std::vector<std::pair<std::string, std::string>>& header) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write checkpoint " + path.string());
  out.write(kMagic, sizeof kMagic);
  put<std::uint32_t>(out, kCheckpointVersion);
  std::ostringstream text;
  for (const auto& [k, v] : header) text << k << '=' << v << '\n';
  put_string(out, text.str());
  put<std::uint32_t>(out, static_cast<std::uint32_t>(params.size()));
  for (const auto& [name, var] : params.entries()) {
    const Tensor& t = var.value();
    put_string(out, name);
    put<std::uint32_t>(out, static_cast<std::uint32_t>(t.rank()));
    for (int d : t.shape()) put<std::int32_t>(out, d);
    out.write(reinterpret_cast<const char*>(t.data()), static_cast<std::streamsize>(t.size() * sizeof(double)));
  }
  if (!out) throw IoError("write failed for checkpoint " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint " + path.string());
  char magic[8];
  in.read(magic, sizeof magic);
  if (!in || std::memcmp(magic, kMagic, sizeof magic) != 0) throw IoError("not a dsanet checkpoint: " + path.string());
  Checkpoint ck;
  ck.version = get<std::uint32_t>(in, path);
  if (ck.version != kCheckpointVersion) {
    throw VersionError("checkpoint " + path.string() + " has format version " + std::to_string(ck.version) +
                       ", expected " + std::to_string(kCheckpointVersion));
  }
  std::istringstream text(get_string(in, path));
  std::string line;
  while (std::getline(text, line)) {
    const auto eq = line.find('=');
    if (eq != std::string::npos) ck.header.emplace_back(line.substr(0, eq), line.substr(eq + 1));
  }
  const auto count = get<std::uint32_t>(in, path);
  for (std::uint32_t i = 0; i < count; ++i) {
    std::string name = get_string(in, path);
    const auto rank = get<std::uint32_t>(in, path);
    if (rank > 8) throw IoError("corrupt tensor rank in " + path.string());
    Shape shape;
    for (std::uint32_t r = 0; r < rank; ++r) shape.push_back(get<std::int32_t>(in, path));
    Tensor t(shape);
    in.read(reinterpret_cast<char*>(t.data()), static_cast<std::streamsize>(t.size() * sizeof(double)));
    if (!in) throw IoError("truncated tensor " + name + " in " + path.string());
    ck.tensors.emplace_back(std::move(name), std::move(t));
  }
  return ck;
}

void restore_parameters(ParameterStore& params, const Checkpoint& checkpoint) {
  if (checkpoint.tensors.size() != params.size()) {
    throw VersionError("checkpoint holds " + std::to_string(checkpoint.tensors.size()) + " tensors, model expects " +
                       std::to_string(params.size()));
  }
  for (const auto& [name, tensor] : checkpoint.tensors) {
    if (!params.contains(name)) throw VersionError("checkpoint tensor " + name + " not present in model");
    Var v = params.get(name);
    if (v.shape() != tensor.shape()) {
      throw VersionError("checkpoint tensor " + name + " has shape " + to_string(tensor.shape()) + ", model expects " +
                         to_string(v.shape()));
    }
    v.mutable_value() = tensor;
  }
}

}  // namespace dsanet
