#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "geoemu/tensor.hpp"

namespace geoemu {

// Minimal self-describing array container ("GEMU1" format): named dimensions,
// named double arrays with explicit shapes, named byte arrays (masks), and
// string attributes. Doubles are written raw (IEEE-754 little endian), so
// save/load round-trips bit-exactly.
struct ArrayFile {
  std::map<std::string, int64_t> dims;
  std::map<std::string, Tensor> arrays;
  std::map<std::string, std::vector<uint8_t>> byte_arrays;
  std::map<std::string, std::string> attrs;

  bool has_array(const std::string& name) const { return arrays.count(name) > 0; }
  const Tensor& array(const std::string& name) const;
  const std::string& attr(const std::string& name) const;

  void save(const std::string& path) const;
  static ArrayFile load(const std::string& path);
};

}  // namespace geoemu
