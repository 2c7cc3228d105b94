#include "factweave/checkpoint.hpp"

#include <cstring>
#include <fstream>

namespace factweave {

namespace {

static_assert(sizeof(double) == 8, "payload format assumes 64-bit doubles");

// The container is little-endian on disk; this code targets little-endian
// hosts (checked at runtime on first use).
void require_little_endian() {
  const std::uint32_t probe = 1;
  unsigned char b;
  std::memcpy(&b, &probe, 1);
  if (b != 1) throw IoError("checkpoint i/o requires a little-endian host");
}

template <typename T>
void write_pod(std::ofstream& os, T v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_pod(std::ifstream& is, const std::string& what) {
  T v{};
  is.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!is) throw ParseError("checkpoint truncated while reading " + what);
  return v;
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path,
                     const std::map<std::string, Tensor>& tensors) {
  require_little_endian();
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("cannot open checkpoint for writing: " + path.string());

  os.write("DCKR", 4);
  write_pod<std::uint32_t>(os, kCheckpointVersion);
  write_pod<std::uint32_t>(os, static_cast<std::uint32_t>(tensors.size()));
  for (const auto& [name, tensor] : tensors) {
    write_pod<std::uint32_t>(os, static_cast<std::uint32_t>(name.size()));
    os.write(name.data(), static_cast<std::streamsize>(name.size()));
    write_pod<std::uint32_t>(os, static_cast<std::uint32_t>(tensor.rank()));
    for (std::size_t d : tensor.shape()) write_pod<std::uint64_t>(os, d);
    os.write(reinterpret_cast<const char*>(tensor.data().data()),
             static_cast<std::streamsize>(tensor.numel() * sizeof(double)));
  }
  if (!os) throw IoError("checkpoint write failed: " + path.string());
}

std::map<std::string, Tensor> load_checkpoint(const std::filesystem::path& path) {
  require_little_endian();
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open checkpoint: " + path.string());

  char magic[4];
  is.read(magic, 4);
  if (!is || std::memcmp(magic, "DCKR", 4) != 0) {
    throw ParseError("bad checkpoint magic in " + path.string());
  }
  const auto version = read_pod<std::uint32_t>(is, "version");
  if (version != kCheckpointVersion) {
    throw ParseError("unsupported checkpoint version " + std::to_string(version));
  }
  const auto count = read_pod<std::uint32_t>(is, "tensor count");

  std::map<std::string, Tensor> out;
  for (std::uint32_t i = 0; i < count; ++i) {
    const auto name_len = read_pod<std::uint32_t>(is, "name length");
    std::string name(name_len, '\0');
    is.read(name.data(), name_len);
    if (!is) throw ParseError("checkpoint truncated while reading a tensor name");
    const auto rank = read_pod<std::uint32_t>(is, "rank");
    std::vector<std::size_t> shape(rank);
    std::size_t numel = 1;
    for (std::uint32_t d = 0; d < rank; ++d) {
      shape[d] = static_cast<std::size_t>(read_pod<std::uint64_t>(is, "dimension"));
      numel *= shape[d];
    }
    std::vector<double> data(numel);
    is.read(reinterpret_cast<char*>(data.data()),
            static_cast<std::streamsize>(numel * sizeof(double)));
    if (!is) throw ParseError("checkpoint truncated while reading payload of '" + name + "'");
    out.emplace(std::move(name), Tensor(std::move(shape), std::move(data)));
  }
  return out;
}

}  // namespace factweave
