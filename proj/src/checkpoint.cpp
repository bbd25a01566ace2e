#include "aia/checkpoint.hpp"

#include <fstream>
#include <sstream>

namespace aia {

namespace {
constexpr char kArchiveMagic[] = "AIA_CHECKPOINT_V1";
}

void Archive::put_meta(const std::string& key, const std::string& value) {
  meta.emplace_back(key, value);
}

const std::string& Archive::require_meta(const std::string& key) const {
  for (const auto& [k, v] : meta)
    if (k == key) return v;
  throw IoError("checkpoint is missing meta key '" + key + "'");
}

bool Archive::has_meta(const std::string& key) const {
  for (const auto& [k, v] : meta)
    if (k == key) return true;
  return false;
}

void Archive::put_array(const std::string& name, Matrix m) {
  arrays.emplace_back(name, std::move(m));
}

const Matrix& Archive::require_array(const std::string& name) const {
  for (const auto& [n, m] : arrays)
    if (n == name) return m;
  throw IoError("checkpoint is missing array '" + name + "'");
}

bool Archive::has_array(const std::string& name) const {
  for (const auto& [n, m] : arrays)
    if (n == name) return true;
  return false;
}

void save_archive(const Archive& archive, const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open checkpoint for writing: " + path);
  out << kArchiveMagic << "\n";
  for (const auto& [k, v] : archive.meta) out << "meta " << k << " " << v << "\n";
  for (const auto& [name, m] : archive.arrays)
    out << "array " << name << " " << m.rows() << " " << m.cols() << "\n";
  out << "data\n";
  for (const auto& [name, m] : archive.arrays) {
    for (Eigen::Index r = 0; r < m.rows(); ++r)
      for (Eigen::Index c = 0; c < m.cols(); ++c)
        out.write(reinterpret_cast<const char*>(&m(r, c)), sizeof(double));
  }
  if (!out) throw IoError("failed writing checkpoint: " + path);
}

Archive load_archive(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint: " + path);
  std::string line;
  if (!std::getline(in, line) || line != kArchiveMagic) {
    throw IoError("bad checkpoint header in " + path + ": '" + line + "'");
  }
  Archive archive;
  bool saw_data = false;
  while (std::getline(in, line)) {
    if (line == "data") {
      saw_data = true;
      break;
    }
    std::istringstream ls(line);
    std::string kind;
    ls >> kind;
    if (kind == "meta") {
      std::string key;
      ls >> key;
      std::string value;
      std::getline(ls, value);
      if (!value.empty() && value.front() == ' ') value.erase(0, 1);
      archive.put_meta(key, value);
    } else if (kind == "array") {
      std::string name;
      Eigen::Index rows = 0, cols = 0;
      ls >> name >> rows >> cols;
      if (!ls || rows < 0 || cols < 0) {
        throw IoError("bad array declaration in " + path + ": '" + line + "'");
      }
      archive.put_array(name, Matrix(rows, cols));
    } else {
      throw IoError("unexpected checkpoint line in " + path + ": '" + line + "'");
    }
  }
  if (!saw_data) throw IoError("checkpoint has no data section: " + path);
  for (auto& [name, m] : archive.arrays) {
    for (Eigen::Index r = 0; r < m.rows(); ++r)
      for (Eigen::Index c = 0; c < m.cols(); ++c)
        in.read(reinterpret_cast<char*>(&m(r, c)), sizeof(double));
  }
  if (!in) throw IoError("checkpoint data truncated: " + path);
  return archive;
}

}  // namespace aia
