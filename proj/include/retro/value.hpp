#pragma once

#include <cstdint>
#include <string>

namespace retro {

enum class ValueType : uint8_t {
    Null = 0,
    Int64 = 1,
    Decimal = 2,
    Text = 3,
    Timestamp = 4,
};

const char *valueTypeName(ValueType t);

/// A single table cell. Decimals are scaled integers (mantissa, scale);
/// timestamps are epoch microseconds.
class Value {
public:
    Value() : _type(ValueType::Null), _num(0), _scale(0) {}

    static Value null() { return Value(); }
    static Value int64(int64_t v);
    static Value decimal(int64_t mantissa, uint8_t scale);
    static Value text(std::string v);
    static Value timestamp(int64_t micros);

    ValueType type() const { return _type; }
    bool isNull() const { return _type == ValueType::Null; }
    bool isNumeric() const { return _type == ValueType::Int64 || _type == ValueType::Decimal; }

    int64_t asInt64() const { return _num; }
    int64_t mantissa() const { return _num; }
    uint8_t scale() const { return _scale; }
    const std::string &asText() const { return _text; }
    int64_t asMicros() const { return _num; }

    /// Exact representation equality (multiset/row identity).
    bool operator==(const Value &other) const;
    bool operator!=(const Value &other) const { return !(*this == other); }

    /// Total order over all values: Null < numeric < Text < Timestamp.
    /// Numerics compare by magnitude across Int64/Decimal.
    int compareTotal(const Value &other) const;

    /// SQL predicate comparison; returns false for any NULL operand or
    /// incomparable type mix (never throws).
    bool compareSql(const Value &other, int &out) const;

    Value add(const Value &other) const;
    Value sub(const Value &other) const;
    Value mul(const Value &other) const;
    Value div(const Value &other) const;

    /// Coerce to a column type (Int64<->Decimal rescale); returns Null
    /// unchanged. Throws SchemaMismatch on impossible coercions.
    Value coerceTo(ValueType t, uint8_t scale) const;

    /// Render as a SQL literal.
    std::string toSqlLiteral() const;
    /// Render as a plain string (for sidecar JSON / nondet values).
    std::string toPlainString() const;
    /// Parse back the plain-string form given a type.
    static Value fromPlainString(ValueType t, const std::string &s);

    size_t hashCode() const;

private:
    ValueType _type;
    int64_t _num;
    uint8_t _scale;
    std::string _text;
};

std::string formatTimestamp(int64_t micros);
int64_t parseTimestamp(const std::string &s); // accepts RFC3339 and 'YYYY-MM-DD HH:MM:SS[.ffffff]'

} // namespace retro
