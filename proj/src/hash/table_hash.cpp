#include "retro/hash/table_hash.hpp"

#include <algorithm>
#include <cstring>

#include <openssl/evp.h>

#include "retro/errors.hpp"

namespace retro::hash {

U256 U256::operator+(const U256 &other) const {
    U256 out;
    unsigned __int128 carry = 0;
    for (int i = 0; i < 4; ++i) {
        unsigned __int128 sum = static_cast<unsigned __int128>(limbs[i]) + other.limbs[i] + carry;
        out.limbs[i] = static_cast<uint64_t>(sum);
        carry = sum >> 64;
    }
    return out;
}

U256 U256::operator-(const U256 &other) const {
    U256 out;
    unsigned __int128 borrow = 0;
    for (int i = 0; i < 4; ++i) {
        unsigned __int128 lhs = limbs[i];
        unsigned __int128 rhs = static_cast<unsigned __int128>(other.limbs[i]) + borrow;
        if (lhs >= rhs) {
            out.limbs[i] = static_cast<uint64_t>(lhs - rhs);
            borrow = 0;
        } else {
            out.limbs[i] = static_cast<uint64_t>((static_cast<unsigned __int128>(1) << 64) + lhs -
                                                 rhs);
            borrow = 1;
        }
    }
    return out;
}

std::string U256::toHex() const {
    static const char *digits = "0123456789abcdef";
    std::string out(64, '0');
    for (int limb = 0; limb < 4; ++limb) {
        uint64_t v = limbs[3 - limb];
        for (int nibble = 0; nibble < 16; ++nibble) {
            out[limb * 16 + nibble] = digits[(v >> (60 - 4 * nibble)) & 0xf];
        }
    }
    return out;
}

U256 U256::fromHex(const std::string &hex) {
    if (hex.size() != 64) {
        raise(ErrorKind::MalformedLine, "hash must be 64 hex chars");
    }
    U256 out;
    for (int limb = 0; limb < 4; ++limb) {
        uint64_t v = 0;
        for (int nibble = 0; nibble < 16; ++nibble) {
            char c = hex[limb * 16 + nibble];
            uint64_t d;
            if (c >= '0' && c <= '9') d = c - '0';
            else if (c >= 'a' && c <= 'f') d = c - 'a' + 10;
            else if (c >= 'A' && c <= 'F') d = c - 'A' + 10;
            else raise(ErrorKind::MalformedLine, "bad hex digit in hash");
            v = (v << 4) | d;
        }
        out.limbs[3 - limb] = v;
    }
    return out;
}

U256 U256::fromBigEndianBytes(const uint8_t *bytes32) {
    U256 out;
    for (int limb = 0; limb < 4; ++limb) {
        uint64_t v = 0;
        for (int b = 0; b < 8; ++b) {
            v = (v << 8) | bytes32[limb * 8 + b];
        }
        out.limbs[3 - limb] = v;
    }
    return out;
}

U256 sha256(const uint8_t *data, size_t size) {
    uint8_t digest[32];
    unsigned int len = 32;
    if (EVP_Digest(data, size, digest, &len, EVP_sha256(), nullptr) != 1 || len != 32) {
        raise(ErrorKind::Internal, "SHA-256 failed");
    }
    return U256::fromBigEndianBytes(digest);
}

namespace {

void putU16be(std::vector<uint8_t> &out, uint16_t v) {
    out.push_back(static_cast<uint8_t>(v >> 8));
    out.push_back(static_cast<uint8_t>(v));
}

void putU32be(std::vector<uint8_t> &out, uint32_t v) {
    out.push_back(static_cast<uint8_t>(v >> 24));
    out.push_back(static_cast<uint8_t>(v >> 16));
    out.push_back(static_cast<uint8_t>(v >> 8));
    out.push_back(static_cast<uint8_t>(v));
}

void putI64be(std::vector<uint8_t> &out, int64_t sv) {
    uint64_t v = static_cast<uint64_t>(sv);
    for (int i = 7; i >= 0; --i) {
        out.push_back(static_cast<uint8_t>(v >> (8 * i)));
    }
}

} // namespace

std::vector<uint8_t> encodeRow(const std::vector<Value> &row,
                               const std::vector<sql::ColumnDef> &columns) {
    if (row.size() != columns.size()) {
        raise(ErrorKind::SchemaMismatch, "row width does not match schema");
    }
    std::vector<size_t> order(columns.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](size_t a, size_t b) {
        return columns[a].name < columns[b].name;
    });

    std::vector<uint8_t> out;
    for (size_t i : order) {
        const std::string &name = columns[i].name;
        const Value &value = row[i];
        putU16be(out, static_cast<uint16_t>(name.size()));
        out.insert(out.end(), name.begin(), name.end());
        out.push_back(static_cast<uint8_t>(value.type()));
        switch (value.type()) {
        case ValueType::Null:
            putU32be(out, 0);
            break;
        case ValueType::Int64:
            putU32be(out, 8);
            putI64be(out, value.asInt64());
            break;
        case ValueType::Decimal:
            putU32be(out, 9);
            out.push_back(value.scale());
            putI64be(out, value.mantissa());
            break;
        case ValueType::Text: {
            const std::string &text = value.asText();
            putU32be(out, static_cast<uint32_t>(text.size()));
            out.insert(out.end(), text.begin(), text.end());
            break;
        }
        case ValueType::Timestamp:
            putU32be(out, 8);
            putI64be(out, value.asMicros());
            break;
        }
    }
    return out;
}

U256 rowHash(const std::vector<Value> &row, const std::vector<sql::ColumnDef> &columns) {
    std::vector<uint8_t> encoded = encodeRow(row, columns);
    return sha256(encoded.data(), encoded.size());
}

U256 updateHash(U256 h, const std::vector<U256> &insertedHashes,
                const std::vector<U256> &deletedHashes) {
    for (const U256 &x : insertedHashes) h += x;
    for (const U256 &x : deletedHashes) h -= x;
    return h;
}

} // namespace retro::hash
