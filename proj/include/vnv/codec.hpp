#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "vnv/error.hpp"

// Little-endian field packing for on-NVM records.
namespace vnv::codec {

class Writer {
 public:
  void u8(std::uint8_t v) { buf_.push_back(static_cast<std::byte>(v)); }
  void u16(std::uint16_t v) {
    u8(static_cast<std::uint8_t>(v));
    u8(static_cast<std::uint8_t>(v >> 8));
  }
  void u32(std::uint32_t v) {
    u16(static_cast<std::uint16_t>(v));
    u16(static_cast<std::uint16_t>(v >> 16));
  }
  void append(std::span<const std::byte> raw) { buf_.insert(buf_.end(), raw.begin(), raw.end()); }

  std::span<const std::byte> bytes() const { return buf_; }
  std::size_t size() const { return buf_.size(); }
  std::vector<std::byte> take() { return std::move(buf_); }

 private:
  std::vector<std::byte> buf_;
};

class Reader {
 public:
  explicit Reader(std::span<const std::byte> data) : data_(data) {}

  std::uint8_t u8() {
    if (pos_ >= data_.size()) throw Error(ErrorCode::kOutOfRange, "record truncated");
    return static_cast<std::uint8_t>(data_[pos_++]);
  }
  std::uint16_t u16() {
    const std::uint16_t lo = u8();
    return static_cast<std::uint16_t>(lo | (static_cast<std::uint16_t>(u8()) << 8));
  }
  std::uint32_t u32() {
    const std::uint32_t lo = u16();
    return lo | (static_cast<std::uint32_t>(u16()) << 16);
  }
  void skip(std::size_t n) {
    if (pos_ + n > data_.size()) throw Error(ErrorCode::kOutOfRange, "record truncated");
    pos_ += n;
  }
  std::size_t position() const { return pos_; }

 private:
  std::span<const std::byte> data_;
  std::size_t pos_ = 0;
};

}  // namespace vnv::codec
