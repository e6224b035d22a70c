#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <span>
#include <string>
#include <vector>

#include "lipbench/core/errors.hpp"

// Little-endian encoding helpers for the dataset and checkpoint containers.

namespace lipbench::binary {

template <class T>
T byteswap_if_needed(T v) {
  if constexpr (std::endian::native == std::endian::little) {
    return v;
  } else {
    unsigned char b[sizeof(T)];
    std::memcpy(b, &v, sizeof(T));
    for (std::size_t i = 0; i < sizeof(T) / 2; ++i) std::swap(b[i], b[sizeof(T) - 1 - i]);
    std::memcpy(&v, b, sizeof(T));
    return v;
  }
}

class Writer {
 public:
  void put_i32(std::int32_t v) { put_raw(byteswap_if_needed(v)); }
  void put_u64(std::uint64_t v) { put_raw(byteswap_if_needed(v)); }
  void put_f64(double v) { put_raw(byteswap_if_needed(std::bit_cast<std::uint64_t>(v))); }
  void put_f64s(std::span<const double> values) {
    for (double v : values) put_f64(v);
  }
  const std::string& bytes() const { return buffer_; }

 private:
  template <class T>
  void put_raw(T v) {
    char b[sizeof(T)];
    std::memcpy(b, &v, sizeof(T));
    buffer_.append(b, sizeof(T));
  }
  std::string buffer_;
};

class Reader {
 public:
  Reader(const std::string& bytes, std::size_t begin, std::string what)
      : bytes_(bytes), pos_(begin), what_(std::move(what)) {}

  std::int32_t get_i32() { return byteswap_if_needed(get_raw<std::int32_t>()); }
  std::uint64_t get_u64() { return byteswap_if_needed(get_raw<std::uint64_t>()); }
  double get_f64() { return std::bit_cast<double>(byteswap_if_needed(get_raw<std::uint64_t>())); }
  void get_f64s(std::span<double> out) {
    for (double& v : out) v = get_f64();
  }
  std::size_t position() const { return pos_; }
  bool at_end() const { return pos_ == bytes_.size(); }

 private:
  template <class T>
  T get_raw() {
    if (pos_ + sizeof(T) > bytes_.size()) {
      throw DataError(what_ + ": truncated payload at byte " + std::to_string(pos_));
    }
    T v;
    std::memcpy(&v, bytes_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return v;
  }
  const std::string& bytes_;
  std::size_t pos_;
  std::string what_;
};

}  // namespace lipbench::binary
