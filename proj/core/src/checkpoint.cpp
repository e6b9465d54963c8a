#include <cstring>
#include <map>

#include "maskwave/checkpoint.hpp"
#include "maskwave/errors.hpp"
#include "maskwave/io_util.hpp"

namespace maskwave::nn {

void save_params(const std::filesystem::path& path,
                 const std::vector<Param>& params) {
  io::atomic_write_file(path, [&](std::ostream& os) {
    os.write("NNP1", 4);
    io::write_le<std::uint32_t>(os, static_cast<std::uint32_t>(params.size()));
    for (const auto& p : params) {
      io::write_le<std::uint32_t>(os,
                                  static_cast<std::uint32_t>(p.name.size()));
      os.write(p.name.data(), static_cast<std::streamsize>(p.name.size()));
      const auto& shape = p.tensor.shape();
      io::write_le<std::uint32_t>(os, static_cast<std::uint32_t>(shape.size()));
      for (int d : shape)
        io::write_le<std::uint32_t>(os, static_cast<std::uint32_t>(d));
      for (double v : p.tensor.values())
        io::write_le<float>(os, static_cast<float>(v));
    }
  });
}

void load_params(const std::filesystem::path& path,
                 std::vector<Param>& params) {
  const auto bytes = io::read_file_bytes(path);
  std::size_t off = 0;
  auto need = [&](std::size_t n) {
    if (off + n > bytes.size())
      throw FormatError("truncated NNP1 file: " + path.string());
  };
  auto u32 = [&]() {
    need(4);
    std::uint32_t v = static_cast<std::uint32_t>(bytes[off]) |
                      static_cast<std::uint32_t>(bytes[off + 1]) << 8 |
                      static_cast<std::uint32_t>(bytes[off + 2]) << 16 |
                      static_cast<std::uint32_t>(bytes[off + 3]) << 24;
    off += 4;
    return v;
  };

  need(4);
  if (std::memcmp(bytes.data(), "NNP1", 4) != 0)
    throw FormatError("not an NNP1 file: " + path.string());
  off = 4;
  const std::uint32_t count = u32();
  if (count != params.size())
    throw FormatError("NNP1 parameter count mismatch: " + path.string());

  std::map<std::string, Param*> by_name;
  for (auto& p : params) by_name[p.name] = &p;

  for (std::uint32_t i = 0; i < count; ++i) {
    const std::uint32_t name_len = u32();
    need(name_len);
    std::string name(reinterpret_cast<const char*>(bytes.data() + off),
                     name_len);
    off += name_len;
    const std::uint32_t rank = u32();
    ad::Shape shape(rank);
    for (std::uint32_t d = 0; d < rank; ++d)
      shape[d] = static_cast<int>(u32());
    const std::size_t n = ad::numel(shape);
    need(n * 4);

    auto it = by_name.find(name);
    if (it == by_name.end())
      throw FormatError("unknown parameter '" + name + "' in " + path.string());
    Param& p = *it->second;
    if (p.tensor.shape() != shape)
      throw ShapeError("checkpoint shape mismatch for '" + name + "'");
    auto& values = p.tensor.values();
    for (std::size_t j = 0; j < n; ++j) {
      float f;
      std::memcpy(&f, bytes.data() + off + j * 4, 4);
      values[j] = static_cast<double>(f);
    }
    off += n * 4;
  }
}

}  // namespace maskwave::nn
