#pragma once

#include <cstdint>
#include <cstring>
#include <stdexcept>
#include <string>
#include <vector>

namespace lpt {

// Base64 for binary tensor payloads inside JSON checkpoints. Doubles are
// serialized little endian so round trips are bit exact across runs.
namespace b64 {

inline constexpr char kAlphabet[] =
    "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";

inline std::string encode(const std::uint8_t* bytes, std::size_t n) {
  std::string out;
  out.reserve((n + 2) / 3 * 4);
  std::size_t i = 0;
  for (; i + 2 < n; i += 3) {
    std::uint32_t v = (std::uint32_t(bytes[i]) << 16) |
                      (std::uint32_t(bytes[i + 1]) << 8) | bytes[i + 2];
    out.push_back(kAlphabet[(v >> 18) & 63]);
    out.push_back(kAlphabet[(v >> 12) & 63]);
    out.push_back(kAlphabet[(v >> 6) & 63]);
    out.push_back(kAlphabet[v & 63]);
  }
  if (i + 1 == n) {
    std::uint32_t v = std::uint32_t(bytes[i]) << 16;
    out.push_back(kAlphabet[(v >> 18) & 63]);
    out.push_back(kAlphabet[(v >> 12) & 63]);
    out += "==";
  } else if (i + 2 == n) {
    std::uint32_t v = (std::uint32_t(bytes[i]) << 16) |
                      (std::uint32_t(bytes[i + 1]) << 8);
    out.push_back(kAlphabet[(v >> 18) & 63]);
    out.push_back(kAlphabet[(v >> 12) & 63]);
    out.push_back(kAlphabet[(v >> 6) & 63]);
    out.push_back('=');
  }
  return out;
}

inline int decode_char(char c) {
  if (c >= 'A' && c <= 'Z') return c - 'A';
  if (c >= 'a' && c <= 'z') return c - 'a' + 26;
  if (c >= '0' && c <= '9') return c - '0' + 52;
  if (c == '+') return 62;
  if (c == '/') return 63;
  return -1;
}

inline std::vector<std::uint8_t> decode(const std::string& s) {
  if (s.size() % 4 != 0) throw std::invalid_argument("base64: bad length");
  std::vector<std::uint8_t> out;
  out.reserve(s.size() / 4 * 3);
  for (std::size_t i = 0; i < s.size(); i += 4) {
    int pad = 0;
    std::uint32_t v = 0;
    for (int j = 0; j < 4; ++j) {
      char c = s[i + j];
      if (c == '=') {
        if (i + 4 != s.size() || j < 2) throw std::invalid_argument("base64: bad padding");
        ++pad;
        v <<= 6;
        continue;
      }
      if (pad > 0) throw std::invalid_argument("base64: data after padding");
      int d = decode_char(c);
      if (d < 0) throw std::invalid_argument("base64: bad character");
      v = (v << 6) | std::uint32_t(d);
    }
    out.push_back(std::uint8_t((v >> 16) & 0xff));
    if (pad < 2) out.push_back(std::uint8_t((v >> 8) & 0xff));
    if (pad < 1) out.push_back(std::uint8_t(v & 0xff));
  }
  return out;
}

}  // namespace b64

inline std::string encode_f64(const std::vector<double>& v) {
  std::vector<std::uint8_t> bytes(v.size() * 8);
  for (std::size_t i = 0; i < v.size(); ++i) {
    std::uint64_t u;
    std::memcpy(&u, &v[i], 8);
    for (int j = 0; j < 8; ++j) bytes[i * 8 + j] = std::uint8_t((u >> (8 * j)) & 0xff);
  }
  return b64::encode(bytes.data(), bytes.size());
}

inline std::vector<double> decode_f64(const std::string& s) {
  auto bytes = b64::decode(s);
  if (bytes.size() % 8 != 0) throw std::invalid_argument("decode_f64: truncated payload");
  std::vector<double> v(bytes.size() / 8);
  for (std::size_t i = 0; i < v.size(); ++i) {
    std::uint64_t u = 0;
    for (int j = 0; j < 8; ++j) u |= std::uint64_t(bytes[i * 8 + j]) << (8 * j);
    std::memcpy(&v[i], &u, 8);
  }
  return v;
}

inline std::string encode_u64(const std::vector<std::uint64_t>& v) {
  std::vector<std::uint8_t> bytes(v.size() * 8);
  for (std::size_t i = 0; i < v.size(); ++i)
    for (int j = 0; j < 8; ++j) bytes[i * 8 + j] = std::uint8_t((v[i] >> (8 * j)) & 0xff);
  return b64::encode(bytes.data(), bytes.size());
}

inline std::vector<std::uint64_t> decode_u64(const std::string& s) {
  auto bytes = b64::decode(s);
  if (bytes.size() % 8 != 0) throw std::invalid_argument("decode_u64: truncated payload");
  std::vector<std::uint64_t> v(bytes.size() / 8);
  for (std::size_t i = 0; i < v.size(); ++i) {
    std::uint64_t u = 0;
    for (int j = 0; j < 8; ++j) u |= std::uint64_t(bytes[i * 8 + j]) << (8 * j);
    v[i] = u;
  }
  return v;
}

}  // namespace lpt
