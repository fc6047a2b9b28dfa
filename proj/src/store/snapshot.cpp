#include <cstring>
#include <fstream>

#include "retro/errors.hpp"
#include "retro/store/store.hpp"

// Snapshot file: length-prefixed binary. Header = {u32 format version,
// u16 name length + table name, 32-byte schema digest, u64 row count},
// then a u16 column-count + column descriptors, then each row as a u32
// length-prefixed canonical row encoding (shared with the hash ledger).

namespace retro::store {

namespace {

constexpr uint32_t kFormatVersion = 1;

void putU16(std::ostream &out, uint16_t v) {
    uint8_t b[2] = {static_cast<uint8_t>(v >> 8), static_cast<uint8_t>(v)};
    out.write(reinterpret_cast<const char *>(b), 2);
}

void putU32(std::ostream &out, uint32_t v) {
    uint8_t b[4];
    for (int i = 0; i < 4; ++i) b[i] = static_cast<uint8_t>(v >> (24 - 8 * i));
    out.write(reinterpret_cast<const char *>(b), 4);
}

void putU64(std::ostream &out, uint64_t v) {
    uint8_t b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<uint8_t>(v >> (56 - 8 * i));
    out.write(reinterpret_cast<const char *>(b), 8);
}

uint16_t getU16(std::istream &in) {
    uint8_t b[2];
    in.read(reinterpret_cast<char *>(b), 2);
    return static_cast<uint16_t>((b[0] << 8) | b[1]);
}

uint32_t getU32(std::istream &in) {
    uint8_t b[4];
    in.read(reinterpret_cast<char *>(b), 4);
    uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v = (v << 8) | b[i];
    return v;
}

uint64_t getU64(std::istream &in) {
    uint8_t b[8];
    in.read(reinterpret_cast<char *>(b), 8);
    uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v = (v << 8) | b[i];
    return v;
}

std::vector<uint8_t> schemaBytes(const std::vector<sql::ColumnDef> &columns) {
    std::vector<uint8_t> out;
    for (const auto &col : columns) {
        out.insert(out.end(), col.name.begin(), col.name.end());
        out.push_back(0);
        out.push_back(static_cast<uint8_t>(col.type));
        out.push_back(col.decimalScale);
        out.push_back(static_cast<uint8_t>((col.primaryKey ? 1 : 0) | (col.autoIncrement ? 2 : 0) |
                                            (col.unique ? 4 : 0)));
    }
    return out;
}

Value decodeValue(ValueType type, const uint8_t *data, uint32_t len) {
    switch (type) {
    case ValueType::Null:
        return Value::null();
    case ValueType::Int64:
    case ValueType::Timestamp: {
        if (len != 8) raise(ErrorKind::SchemaMismatch, "bad int64 field length");
        uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v = (v << 8) | data[i];
        return type == ValueType::Int64 ? Value::int64(static_cast<int64_t>(v))
                                        : Value::timestamp(static_cast<int64_t>(v));
    }
    case ValueType::Decimal: {
        if (len != 9) raise(ErrorKind::SchemaMismatch, "bad decimal field length");
        uint8_t scale = data[0];
        uint64_t v = 0;
        for (int i = 1; i < 9; ++i) v = (v << 8) | data[i];
        return Value::decimal(static_cast<int64_t>(v), scale);
    }
    case ValueType::Text:
        return Value::text(std::string(reinterpret_cast<const char *>(data), len));
    }
    return Value::null();
}

Row decodeRow(const std::vector<uint8_t> &bytes, const std::vector<sql::ColumnDef> &columns) {
    // Canonical encoding sorts fields by column name; rebuild by name.
    Row row(columns.size(), Value::null());
    size_t at = 0;
    auto need = [&](size_t n) {
        if (at + n > bytes.size()) {
            raise(ErrorKind::SchemaMismatch, "truncated snapshot row");
        }
    };
    while (at < bytes.size()) {
        need(2);
        uint16_t nameLen = static_cast<uint16_t>((bytes[at] << 8) | bytes[at + 1]);
        at += 2;
        need(nameLen);
        std::string name(reinterpret_cast<const char *>(bytes.data() + at), nameLen);
        at += nameLen;
        need(5);
        ValueType type = static_cast<ValueType>(bytes[at]);
        uint32_t len = 0;
        for (int i = 1; i <= 4; ++i) len = (len << 8) | bytes[at + i];
        at += 5;
        need(len);
        int idx = -1;
        for (size_t i = 0; i < columns.size(); ++i) {
            if (columns[i].name == name) idx = static_cast<int>(i);
        }
        if (idx < 0) {
            raise(ErrorKind::SchemaMismatch, "snapshot column not in schema: " + name);
        }
        row[idx] = decodeValue(type, bytes.data() + at, len);
        at += len;
    }
    return row;
}

} // namespace

void VersionedStore::exportSnapshot(const std::string &table, const std::string &path) const {
    const TableData *data = findTable(table);
    if (data == nullptr) {
        raise(ErrorKind::UnresolvedName, "table not found: " + table);
    }
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        raise(ErrorKind::MissingArtifacts, "cannot write snapshot: " + path);
    }
    putU32(out, kFormatVersion);
    putU16(out, static_cast<uint16_t>(table.size()));
    out.write(table.data(), static_cast<std::streamsize>(table.size()));
    auto schema = schemaBytes(data->columns);
    hash::U256 digest = hash::sha256(schema.data(), schema.size());
    std::string digestHex = digest.toHex();
    uint8_t digestBytes[32];
    for (int i = 0; i < 32; ++i) {
        digestBytes[i] = static_cast<uint8_t>(std::stoi(digestHex.substr(i * 2, 2), nullptr, 16));
    }
    out.write(reinterpret_cast<const char *>(digestBytes), 32);
    putU64(out, data->rows.size());
    putU16(out, static_cast<uint16_t>(data->columns.size()));
    for (const auto &col : data->columns) {
        putU16(out, static_cast<uint16_t>(col.name.size()));
        out.write(col.name.data(), static_cast<std::streamsize>(col.name.size()));
        out.put(static_cast<char>(col.type));
        out.put(static_cast<char>(col.decimalScale));
        out.put(static_cast<char>((col.primaryKey ? 1 : 0) | (col.autoIncrement ? 2 : 0) |
                                  (col.unique ? 4 : 0)));
        auto counter = data->autoCounter.find(col.name);
        putU64(out, counter == data->autoCounter.end()
                        ? 0
                        : static_cast<uint64_t>(counter->second));
    }
    for (const Row &row : data->rows) {
        auto encoded = hash::encodeRow(row, data->columns);
        putU32(out, static_cast<uint32_t>(encoded.size()));
        out.write(reinterpret_cast<const char *>(encoded.data()),
                  static_cast<std::streamsize>(encoded.size()));
    }
}

void VersionedStore::importSnapshot(const std::string &path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        raise(ErrorKind::MissingArtifacts, "cannot open snapshot: " + path);
    }
    if (getU32(in) != kFormatVersion) {
        raise(ErrorKind::SchemaMismatch, "unsupported snapshot format version");
    }
    uint16_t nameLen = getU16(in);
    std::string table(nameLen, '\0');
    in.read(table.data(), nameLen);
    uint8_t digest[32];
    in.read(reinterpret_cast<char *>(digest), 32);
    uint64_t rowCount = getU64(in);
    uint16_t columnCount = getU16(in);
    TableData data;
    for (uint16_t i = 0; i < columnCount; ++i) {
        sql::ColumnDef col;
        uint16_t len = getU16(in);
        col.name.resize(len);
        in.read(col.name.data(), len);
        col.type = static_cast<ValueType>(in.get());
        col.decimalScale = static_cast<uint8_t>(in.get());
        int flags = in.get();
        col.primaryKey = flags & 1;
        col.autoIncrement = flags & 2;
        col.unique = flags & 4;
        uint64_t counter = getU64(in);
        if (col.autoIncrement) {
            data.autoCounter[col.name] = static_cast<int64_t>(counter);
        }
        data.columns.push_back(std::move(col));
    }
    auto schema = schemaBytes(data.columns);
    hash::U256 expect = hash::sha256(schema.data(), schema.size());
    if (!(expect == hash::U256::fromBigEndianBytes(digest))) {
        raise(ErrorKind::SchemaMismatch, "snapshot schema digest mismatch for " + table);
    }
    for (uint64_t r = 0; r < rowCount; ++r) {
        uint32_t len = getU32(in);
        std::vector<uint8_t> bytes(len);
        in.read(reinterpret_cast<char *>(bytes.data()), len);
        if (!in) {
            raise(ErrorKind::SchemaMismatch, "truncated snapshot file");
        }
        data.rows.push_back(decodeRow(bytes, data.columns));
    }
    replaceTable(table, std::move(data));
}

} // namespace retro::store
