#include "fieldbench/nn/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <map>

namespace fieldbench::nn {

namespace {

constexpr char kMagic[4] = {'U', 'Q', 'C', 'K'};
constexpr std::uint32_t kVersion = 1;

template <typename T>
void put_le(std::vector<char>& buf, T x) {
  for (std::size_t i = 0; i < sizeof(T); ++i) buf.push_back(char((x >> (8 * i)) & 0xff));
}

template <typename T>
T get_le(const unsigned char* p) {
  T x = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) x |= T(p[i]) << (8 * i);
  return x;
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, UNetBackbone& model) {
  const auto refs = model.state();
  std::vector<char> buf;
  buf.insert(buf.end(), kMagic, kMagic + 4);
  put_le<std::uint32_t>(buf, kVersion);
  put_le<std::uint32_t>(buf, std::uint32_t(refs.size()));
  for (const auto& ref : refs) {
    put_le<std::uint16_t>(buf, std::uint16_t(ref.name.size()));
    buf.insert(buf.end(), ref.name.begin(), ref.name.end());
    buf.push_back(0);  // dtype float32
    put_le<std::uint64_t>(buf, std::uint64_t(ref.data->size()));
    for (float f : *ref.data) {
      std::uint32_t bits;
      std::memcpy(&bits, &f, 4);
      put_le<std::uint32_t>(buf, bits);
    }
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw CheckpointError("cannot open for writing: " + path.string());
  out.write(buf.data(), std::streamsize(buf.size()));
  if (!out) throw CheckpointError("short write: " + path.string());
}

void load_checkpoint(const std::filesystem::path& path, UNetBackbone& model) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open: " + path.string());
  std::vector<unsigned char> buf((std::istreambuf_iterator<char>(in)),
                                 std::istreambuf_iterator<char>());
  if (buf.size() < 12 || std::memcmp(buf.data(), kMagic, 4) != 0)
    throw CheckpointError("not a UQCK checkpoint: " + path.string());
  const auto version = get_le<std::uint32_t>(buf.data() + 4);
  if (version != kVersion)
    throw CheckpointError("unsupported checkpoint version " + std::to_string(version));
  const auto count = get_le<std::uint32_t>(buf.data() + 8);

  std::map<std::string, std::vector<float>*> targets;
  for (const auto& ref : model.state()) targets[ref.name] = ref.data;

  std::size_t pos = 12;
  std::size_t loaded = 0;
  for (std::uint32_t t = 0; t < count; ++t) {
    if (pos + 2 > buf.size()) throw CheckpointError("truncated checkpoint: " + path.string());
    const auto name_len = get_le<std::uint16_t>(buf.data() + pos);
    pos += 2;
    if (pos + name_len + 9 > buf.size())
      throw CheckpointError("truncated checkpoint: " + path.string());
    const std::string name(reinterpret_cast<const char*>(buf.data() + pos), name_len);
    pos += name_len;
    const auto dtype = buf[pos++];
    if (dtype != 0) throw CheckpointError("unsupported dtype in: " + path.string());
    const auto n = get_le<std::uint64_t>(buf.data() + pos);
    pos += 8;
    if (pos + n * 4 > buf.size()) throw CheckpointError("truncated checkpoint: " + path.string());

    const auto it = targets.find(name);
    if (it == targets.end())
      throw CheckpointError("checkpoint tensor `" + name + "` does not match the model");
    if (it->second->size() != n)
      throw CheckpointError("checkpoint tensor `" + name + "` has wrong size");
    for (std::uint64_t j = 0; j < n; ++j) {
      const std::uint32_t bits = get_le<std::uint32_t>(buf.data() + pos + j * 4);
      std::memcpy(&(*it->second)[j], &bits, 4);
    }
    pos += n * 4;
    ++loaded;
  }
  if (loaded != targets.size())
    throw CheckpointError("checkpoint is missing tensors for this model");
}

}  // namespace fieldbench::nn
