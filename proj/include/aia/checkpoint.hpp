#pragma once

#include <string>
#include <utility>
#include <vector>

#include "aia/types.hpp"

namespace aia {

// Checkpoint container: ordered named arrays plus string metadata, stored
// as a text header manifest followed by the raw little-endian doubles of
// every array in header order. Round trips are bit-exact.
struct Archive {
  std::vector<std::pair<std::string, std::string>> meta;
  std::vector<std::pair<std::string, Matrix>> arrays;

  void put_meta(const std::string& key, const std::string& value);
  const std::string& require_meta(const std::string& key) const;
  bool has_meta(const std::string& key) const;

  void put_array(const std::string& name, Matrix m);
  const Matrix& require_array(const std::string& name) const;
  bool has_array(const std::string& name) const;
};

void save_archive(const Archive& archive, const std::string& path);
Archive load_archive(const std::string& path);

}  // namespace aia
