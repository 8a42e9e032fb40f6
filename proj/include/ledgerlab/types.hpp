#pragma once

#include <array>
#include <compare>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

namespace ledgerlab {

/// Simulated time. All protocols share the same integer clock.
using Tick = std::uint64_t;

struct MemberId
{
   std::uint32_t index = 0;

   auto operator<=>(const MemberId&) const = default;
};

inline std::string display_name(MemberId m) { return "member-" + std::to_string(m.index); }

/// 32-byte digest. Ordered lexicographically, which is what the consensus
/// tie-break uses.
struct Digest
{
   std::array<std::uint8_t, 32> bytes{};

   auto operator<=>(const Digest&) const = default;

   bool is_zero() const
   {
      for (auto b : bytes)
         if (b != 0)
            return false;
      return true;
   }

   std::string hex() const;
   std::string short_hex() const { return hex().substr(0, 12); }
};

Digest sha256(const std::vector<std::uint8_t>& data);

struct Transaction
{
   std::uint64_t id = 0;
   MemberId submitter;
   Tick submitted_at = 0;
   std::vector<std::uint8_t> payload;

   bool operator==(const Transaction&) const = default;
};

/// Base class for every error the library raises. `code()` is a stable
/// machine-readable tag; `what()` carries the human detail.
class Error : public std::runtime_error
{
public:
   Error(std::string code, const std::string& detail)
      : std::runtime_error(code + ": " + detail), code_(std::move(code))
   {}

   const std::string& code() const noexcept { return code_; }

private:
   std::string code_;
};

/// Raised for an invalid scenario (n < 2, zero duration, bad shares...).
class ConfigError : public Error
{
public:
   explicit ConfigError(const std::string& detail) : Error("ConfigError", detail) {}
};

/// Schema / semantic validation failure. `field()` is a JSON-pointer-ish path.
class ValidationError : public Error
{
public:
   ValidationError(std::string field, const std::string& detail)
      : Error("ValidationError", field + ": " + detail), field_(std::move(field))
   {}

   const std::string& field() const noexcept { return field_; }

private:
   std::string field_;
};

class ParseError : public Error
{
public:
   explicit ParseError(const std::string& detail) : Error("ParseError", detail) {}
};

// Little-endian writers/readers shared by every canonical serialization.
namespace wire {

inline void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v)
{
   for (int i = 0; i < 4; ++i)
      out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

inline void put_u64(std::vector<std::uint8_t>& out, std::uint64_t v)
{
   for (int i = 0; i < 8; ++i)
      out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

inline void put_digest(std::vector<std::uint8_t>& out, const Digest& d)
{
   out.insert(out.end(), d.bytes.begin(), d.bytes.end());
}

class Reader
{
public:
   Reader(const std::uint8_t* data, std::size_t size) : data_(data), size_(size) {}

   std::uint32_t u32()
   {
      need(4);
      std::uint32_t v = 0;
      for (int i = 0; i < 4; ++i)
         v |= static_cast<std::uint32_t>(data_[pos_ + i]) << (8 * i);
      pos_ += 4;
      return v;
   }

   std::uint64_t u64()
   {
      need(8);
      std::uint64_t v = 0;
      for (int i = 0; i < 8; ++i)
         v |= static_cast<std::uint64_t>(data_[pos_ + i]) << (8 * i);
      pos_ += 8;
      return v;
   }

   Digest digest()
   {
      need(32);
      Digest d;
      std::copy(data_ + pos_, data_ + pos_ + 32, d.bytes.begin());
      pos_ += 32;
      return d;
   }

   std::vector<std::uint8_t> bytes(std::size_t n)
   {
      need(n);
      std::vector<std::uint8_t> v(data_ + pos_, data_ + pos_ + n);
      pos_ += n;
      return v;
   }

   bool done() const { return pos_ == size_; }

private:
   void need(std::size_t n) const
   {
      if (size_ - pos_ < n)
         throw ParseError("truncated record");
   }

   const std::uint8_t* data_;
   std::size_t size_;
   std::size_t pos_ = 0;
};

} // namespace wire

} // namespace ledgerlab

template <>
struct std::hash<ledgerlab::Digest>
{
   std::size_t operator()(const ledgerlab::Digest& d) const noexcept
   {
      std::size_t h = 0;
      for (int i = 0; i < 8; ++i)
         h |= static_cast<std::size_t>(d.bytes[i]) << (8 * i);
      return h;
   }
};
