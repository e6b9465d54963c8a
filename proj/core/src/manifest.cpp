#include <fstream>
#include <sstream>
#include <unordered_map>

#include "maskwave/errors.hpp"
#include "maskwave/io_util.hpp"
#include "maskwave/manifest.hpp"

namespace maskwave {

std::string to_string(Label l) { return l == Label::mask ? "mask" : "non-mask"; }
std::string to_string(Split s) {
  switch (s) {
    case Split::train: return "train";
    case Split::dev: return "dev";
    case Split::test: return "test";
  }
  return "?";
}
std::string to_string(Provenance p) {
  switch (p) {
    case Provenance::original: return "original";
    case Provenance::translated: return "translated";
    case Provenance::perturbed: return "perturbed";
  }
  return "?";
}

Label parse_label(const std::string& s) {
  if (s == "mask") return Label::mask;
  if (s == "non-mask") return Label::non_mask;
  throw FormatError("unknown label '" + s + "'");
}

Split parse_split(const std::string& s) {
  if (s == "train") return Split::train;
  if (s == "dev") return Split::dev;
  if (s == "test") return Split::test;
  throw FormatError("unknown split '" + s + "'");
}

Provenance parse_provenance(const std::string& s) {
  if (s == "original") return Provenance::original;
  if (s == "translated") return Provenance::translated;
  if (s == "perturbed") return Provenance::perturbed;
  throw FormatError("unknown provenance '" + s + "'");
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  std::istringstream is(line);
  while (std::getline(is, field, ',')) fields.push_back(field);
  if (!line.empty() && line.back() == ',') fields.emplace_back();
  return fields;
}

}  // namespace

Manifest Manifest::load(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open manifest: " + path.string());
  Manifest m;
  m.base_dir = path.has_parent_path() ? path.parent_path()
                                      : std::filesystem::path(".");
  std::string line;
  if (!std::getline(is, line))
    throw FormatError("empty manifest: " + path.string());
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != "id,path,label,split,provenance")
    throw FormatError("bad manifest header: " + path.string());
  std::size_t line_no = 1;
  while (std::getline(is, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto fields = split_csv_line(line);
    if (fields.size() != 5)
      throw FormatError(path.string() + ":" + std::to_string(line_no) +
                        ": expected 5 fields");
    ManifestRecord r;
    r.id = fields[0];
    r.path = fields[1];
    r.label = parse_label(fields[2]);
    r.split = parse_split(fields[3]);
    r.provenance = parse_provenance(fields[4]);
    if (r.id.empty())
      throw FormatError(path.string() + ":" + std::to_string(line_no) +
                        ": empty id");
    m.records.push_back(std::move(r));
  }
  return m;
}

void Manifest::save(const std::filesystem::path& path) const {
  std::ostringstream os;
  os << "id,path,label,split,provenance\n";
  for (const auto& r : records) {
    if (r.id.find(',') != std::string::npos ||
        r.path.find(',') != std::string::npos)
      throw FormatError("manifest fields must not contain commas: " + r.id);
    os << r.id << ',' << r.path << ',' << to_string(r.label) << ','
       << to_string(r.split) << ',' << to_string(r.provenance) << '\n';
  }
  io::atomic_write_text(path, os.str());
}

std::filesystem::path Manifest::resolve(const ManifestRecord& r) const {
  std::filesystem::path p(r.path);
  return p.is_absolute() ? p : base_dir / p;
}

void Manifest::validate(bool check_paths) const {
  std::unordered_map<std::string, const ManifestRecord*> by_id;
  for (const auto& r : records) {
    if (!by_id.emplace(r.id, &r).second)
      throw FormatError("duplicate manifest id: " + r.id);
  }
  for (const auto& r : records) {
    if (r.provenance != Provenance::original) {
      if (r.split != Split::train)
        throw FormatError("derived record outside the training split: " + r.id);
      const auto sep = r.id.rfind("__");
      if (sep == std::string::npos)
        throw FormatError("derived record id lacks a '__' source stem: " + r.id);
      const auto it = by_id.find(r.id.substr(0, sep));
      if (it == by_id.end())
        throw FormatError("derived record has no source record: " + r.id);
      if (it->second->split != r.split)
        throw FormatError("derived record crosses splits: " + r.id);
    }
    if (check_paths && !std::filesystem::exists(resolve(r)))
      throw IoError("manifest path does not exist: " + resolve(r).string());
  }
}

std::vector<const ManifestRecord*> Manifest::subset(Split split) const {
  std::vector<const ManifestRecord*> out;
  for (const auto& r : records)
    if (r.split == split) out.push_back(&r);
  return out;
}

long Manifest::count(Split split, Label label) const {
  long n = 0;
  for (const auto& r : records)
    if (r.split == split && r.label == label) ++n;
  return n;
}

}  // namespace maskwave
