#pragma once

// Little-endian fixed-width encoding helpers shared by the codec and the
// segment format. Byte buffers are std::string, views are std::string_view.

#include <bit>
#include <cstdint>
#include <cstring>
#include <string>
#include <string_view>

#include "scalesearch/error.h"

namespace scalesearch {

static_assert(std::endian::native == std::endian::little,
              "on-disk formats assume a little-endian host");

class ByteWriter {
 public:
  explicit ByteWriter(std::string* out) : out_(out) {}

  void U8(uint8_t v) { out_->push_back(static_cast<char>(v)); }
  void U16(uint16_t v) { Raw(&v, sizeof(v)); }
  void U32(uint32_t v) { Raw(&v, sizeof(v)); }
  void U64(uint64_t v) { Raw(&v, sizeof(v)); }
  void I64(int64_t v) { Raw(&v, sizeof(v)); }
  void F64(double v) { Raw(&v, sizeof(v)); }
  void Bytes(std::string_view s) { out_->append(s); }
  void Raw(const void* p, size_t n) {
    out_->append(static_cast<const char*>(p), n);
  }

  // Overwrites a previously reserved u64 slot.
  void PatchU64(size_t at, uint64_t v) { std::memcpy(out_->data() + at, &v, sizeof(v)); }

  size_t size() const { return out_->size(); }

 private:
  std::string* out_;
};

class ByteReader {
 public:
  // base_offset is added to reported offsets so errors point into the
  // enclosing buffer rather than the sub-view.
  explicit ByteReader(std::string_view data, size_t base_offset = 0)
      : data_(data), base_(base_offset) {}

  uint8_t U8() { return Fixed<uint8_t>(); }
  uint16_t U16() { return Fixed<uint16_t>(); }
  uint32_t U32() { return Fixed<uint32_t>(); }
  uint64_t U64() { return Fixed<uint64_t>(); }
  int64_t I64() { return Fixed<int64_t>(); }
  double F64() { return Fixed<double>(); }

  std::string_view Bytes(size_t n) {
    Need(n);
    std::string_view s = data_.substr(pos_, n);
    pos_ += n;
    return s;
  }

  void Skip(size_t n) { Need(n); pos_ += n; }

  size_t position() const { return pos_; }
  size_t absolute_position() const { return base_ + pos_; }
  size_t remaining() const { return data_.size() - pos_; }
  bool done() const { return pos_ == data_.size(); }

  [[noreturn]] void Fail(const std::string& what) const {
    throw Error(ErrorCode::kCorruptPayload,
                what + " at offset " + std::to_string(base_ + pos_));
  }

 private:
  template <typename T>
  T Fixed() {
    Need(sizeof(T));
    T v;
    std::memcpy(&v, data_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return v;
  }

  void Need(size_t n) const {
    if (n > data_.size() - pos_) Fail("truncated input, need " + std::to_string(n) + " bytes");
  }

  std::string_view data_;
  size_t base_;
  size_t pos_ = 0;
};

}  // namespace scalesearch
