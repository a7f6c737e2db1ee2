#include "geoemu/container.hpp"

#include <cstring>
#include <fstream>

#include "geoemu/error.hpp"

namespace geoemu {

namespace {

constexpr char kMagic[8] = {'G', 'E', 'M', 'U', '1', '\0', '\0', '\0'};

void write_u64(std::ostream& os, uint64_t v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(v));
}
uint64_t read_u64(std::istream& is) {
  uint64_t v = 0;
  is.read(reinterpret_cast<char*>(&v), sizeof(v));
  return v;
}
void write_str(std::ostream& os, const std::string& s) {
  write_u64(os, s.size());
  os.write(s.data(), std::streamsize(s.size()));
}
std::string read_str(std::istream& is) {
  uint64_t n = read_u64(is);
  std::string s(n, '\0');
  is.read(s.data(), std::streamsize(n));
  return s;
}

}  // namespace

const Tensor& ArrayFile::array(const std::string& name) const {
  auto it = arrays.find(name);
  if (it == arrays.end())
    throw validation_error("container: missing array \"" + name + "\"");
  return it->second;
}

const std::string& ArrayFile::attr(const std::string& name) const {
  auto it = attrs.find(name);
  if (it == attrs.end())
    throw validation_error("container: missing attribute \"" + name + "\"");
  return it->second;
}

void ArrayFile::save(const std::string& path) const {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw runtime_error("cannot open for write: " + path);
  os.write(kMagic, sizeof(kMagic));
  write_u64(os, dims.size());
  for (const auto& [k, v] : dims) {
    write_str(os, k);
    write_u64(os, uint64_t(v));
  }
  write_u64(os, attrs.size());
  for (const auto& [k, v] : attrs) {
    write_str(os, k);
    write_str(os, v);
  }
  write_u64(os, arrays.size());
  for (const auto& [k, t] : arrays) {
    write_str(os, k);
    write_u64(os, uint64_t(t.rank()));
    for (int i = 0; i < t.rank(); ++i) write_u64(os, uint64_t(t.dim(i)));
    os.write(reinterpret_cast<const char*>(t.data()),
             std::streamsize(t.size() * int64_t(sizeof(double))));
  }
  write_u64(os, byte_arrays.size());
  for (const auto& [k, v] : byte_arrays) {
    write_str(os, k);
    write_u64(os, v.size());
    os.write(reinterpret_cast<const char*>(v.data()), std::streamsize(v.size()));
  }
  if (!os) throw runtime_error("write failed: " + path);
}

ArrayFile ArrayFile::load(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw runtime_error("cannot open: " + path);
  char magic[8];
  is.read(magic, sizeof(magic));
  if (!is || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
    throw validation_error("not a GEMU1 container: " + path);
  ArrayFile f;
  uint64_t nd = read_u64(is);
  for (uint64_t i = 0; i < nd; ++i) {
    std::string k = read_str(is);
    f.dims[k] = int64_t(read_u64(is));
  }
  uint64_t na = read_u64(is);
  for (uint64_t i = 0; i < na; ++i) {
    std::string k = read_str(is);
    f.attrs[k] = read_str(is);
  }
  uint64_t nt = read_u64(is);
  for (uint64_t i = 0; i < nt; ++i) {
    std::string k = read_str(is);
    uint64_t rank = read_u64(is);
    std::vector<int> shape;
    for (uint64_t r = 0; r < rank; ++r) shape.push_back(int(read_u64(is)));
    Tensor t(shape);
    is.read(reinterpret_cast<char*>(t.data()),
            std::streamsize(t.size() * int64_t(sizeof(double))));
    f.arrays.emplace(k, std::move(t));
  }
  uint64_t nb = read_u64(is);
  for (uint64_t i = 0; i < nb; ++i) {
    std::string k = read_str(is);
    uint64_t n = read_u64(is);
    std::vector<uint8_t> v(n);
    is.read(reinterpret_cast<char*>(v.data()), std::streamsize(n));
    f.byte_arrays.emplace(k, std::move(v));
  }
  if (!is) throw runtime_error("truncated container: " + path);
  return f;
}

}  // namespace geoemu
