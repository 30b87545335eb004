#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "bnav/common.hpp"

namespace bnav {

static_assert(std::endian::native == std::endian::little,
              "file formats are little-endian; big-endian hosts unsupported");

class BinWriter {
 public:
  explicit BinWriter(const std::string& path) : os_(path, std::ios::binary) {
    if (!os_) throw IoError("cannot open for write: " + path);
  }

  template <typename T>
  void put(const T& v) {
    static_assert(std::is_trivially_copyable_v<T>);
    os_.write(reinterpret_cast<const char*>(&v), sizeof(T));
  }

  template <typename T>
  void put_array(const T* p, size_t n) {
    static_assert(std::is_trivially_copyable_v<T>);
    os_.write(reinterpret_cast<const char*>(p), sizeof(T) * n);
  }

  void put_string(const std::string& s) {
    put<uint32_t>(static_cast<uint32_t>(s.size()));
    os_.write(s.data(), static_cast<std::streamsize>(s.size()));
  }

  void check() {
    if (!os_) throw IoError("write failed");
  }

 private:
  std::ofstream os_;
};

class BinReader {
 public:
  explicit BinReader(const std::string& path) : is_(path, std::ios::binary) {
    if (!is_) throw IoError("cannot open for read: " + path);
  }

  template <typename T>
  T get() {
    T v;
    is_.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!is_) throw IoError("truncated read");
    return v;
  }

  template <typename T>
  void get_array(T* p, size_t n) {
    is_.read(reinterpret_cast<char*>(p), sizeof(T) * n);
    if (!is_) throw IoError("truncated read");
  }

  std::string get_string() {
    auto n = get<uint32_t>();
    std::string s(n, '\0');
    is_.read(s.data(), n);
    if (!is_) throw IoError("truncated read");
    return s;
  }

  bool at_eof() {
    return is_.peek() == std::char_traits<char>::eof();
  }

 private:
  std::ifstream is_;
};

}  // namespace bnav
