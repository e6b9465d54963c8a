#include "maskwave/io_util.hpp"

#include <fstream>

#include "maskwave/errors.hpp"

namespace maskwave::io {

std::vector<unsigned char> read_file_bytes(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open file: " + path.string());
  is.seekg(0, std::ios::end);
  const auto size = static_cast<std::size_t>(is.tellg());
  is.seekg(0, std::ios::beg);
  std::vector<unsigned char> bytes(size);
  if (size > 0) is.read(reinterpret_cast<char*>(bytes.data()), size);
  if (!is) throw IoError("short read: " + path.string());
  return bytes;
}

void atomic_write_file(const std::filesystem::path& path,
                       const std::function<void(std::ostream&)>& writer) {
  namespace fs = std::filesystem;
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    if (!os) throw IoError("cannot open for write: " + tmp.string());
    writer(os);
    os.flush();
    if (!os) {
      std::error_code ec;
      fs::remove(tmp, ec);
      throw IoError("write failed: " + tmp.string());
    }
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) {
    fs::remove(tmp, ec);
    throw IoError("rename failed for: " + path.string());
  }
}

void atomic_write_text(const std::filesystem::path& path,
                       const std::string& text) {
  atomic_write_file(path, [&](std::ostream& os) { os << text; });
}

}  // namespace maskwave::io
