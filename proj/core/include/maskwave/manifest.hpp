#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace maskwave {

enum class Label { mask, non_mask };
enum class Split { train, dev, test };
enum class Provenance { original, translated, perturbed };

std::string to_string(Label l);
std::string to_string(Split s);
std::string to_string(Provenance p);
Label parse_label(const std::string& s);
Split parse_split(const std::string& s);
Provenance parse_provenance(const std::string& s);

inline Label opposite(Label l) {
  return l == Label::mask ? Label::non_mask : Label::mask;
}

struct ManifestRecord {
  std::string id;
  std::string path;  // relative paths resolve against the manifest directory
  Label label = Label::mask;
  Split split = Split::train;
  Provenance provenance = Provenance::original;
};

// Header-bearing CSV with columns id,path,label,split,provenance.
struct Manifest {
  std::vector<ManifestRecord> records;
  std::filesystem::path base_dir;

  static Manifest load(const std::filesystem::path& path);
  void save(const std::filesystem::path& path) const;

  std::filesystem::path resolve(const ManifestRecord& r) const;

  // Unique ids, derived records confined to the training split and tied to
  // an existing source record. With check_paths, every path must exist.
  void validate(bool check_paths = false) const;

  std::vector<const ManifestRecord*> subset(Split split) const;
  long count(Split split, Label label) const;
};

}  // namespace maskwave
