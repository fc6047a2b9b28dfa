#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "retro/sql/catalog.hpp"
#include "retro/value.hpp"

namespace retro::hash {

/// 256-bit state in [0, 2^256); addition and subtraction wrap, which is
/// exactly arithmetic modulo p = 2^256.
struct U256 {
    std::array<uint64_t, 4> limbs{}; // little-endian

    static U256 zero() { return {}; }

    U256 operator+(const U256 &other) const;
    U256 operator-(const U256 &other) const;
    U256 &operator+=(const U256 &other) { return *this = *this + other; }
    U256 &operator-=(const U256 &other) { return *this = *this - other; }
    bool operator==(const U256 &) const = default;

    std::string toHex() const; // 64 lowercase hex chars, big-endian
    static U256 fromHex(const std::string &hex);
    static U256 fromBigEndianBytes(const uint8_t *bytes32);
};

/// Canonical row encoding: fields sorted by column name, each field as
/// (u16 BE name length, name bytes, type tag byte, u32 BE value length,
/// value bytes). INT64/TIMESTAMP big-endian 8 bytes; DECIMAL scale byte +
/// big-endian 8-byte mantissa; TEXT UTF-8; NULL empty.
std::vector<uint8_t> encodeRow(const std::vector<Value> &row,
                               const std::vector<sql::ColumnDef> &columns);

/// SHA-256 of the canonical encoding, as a 256-bit integer.
U256 rowHash(const std::vector<Value> &row, const std::vector<sql::ColumnDef> &columns);

U256 sha256(const uint8_t *data, size_t size);

/// h' = (h + sum(inserted) - sum(deleted)) mod 2^256; linear in the number of
/// changed rows.
U256 updateHash(U256 h, const std::vector<U256> &insertedHashes,
                const std::vector<U256> &deletedHashes);

} // namespace retro::hash
