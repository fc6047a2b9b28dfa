#include "retro/value.hpp"

#include <array>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <ctime>

#include "retro/errors.hpp"

namespace retro {

const char *valueTypeName(ValueType t) {
    switch (t) {
    case ValueType::Null: return "NULL";
    case ValueType::Int64: return "INT64";
    case ValueType::Decimal: return "DECIMAL";
    case ValueType::Text: return "TEXT";
    case ValueType::Timestamp: return "TIMESTAMP";
    }
    return "?";
}

Value Value::int64(int64_t v) {
    Value out;
    out._type = ValueType::Int64;
    out._num = v;
    return out;
}

Value Value::decimal(int64_t mantissa, uint8_t scale) {
    Value out;
    out._type = ValueType::Decimal;
    out._num = mantissa;
    out._scale = scale;
    return out;
}

Value Value::text(std::string v) {
    Value out;
    out._type = ValueType::Text;
    out._text = std::move(v);
    return out;
}

Value Value::timestamp(int64_t micros) {
    Value out;
    out._type = ValueType::Timestamp;
    out._num = micros;
    return out;
}

bool Value::operator==(const Value &other) const {
    if (_type != other._type) {
        return false;
    }
    switch (_type) {
    case ValueType::Null: return true;
    case ValueType::Int64:
    case ValueType::Timestamp: return _num == other._num;
    case ValueType::Decimal: return _num == other._num && _scale == other._scale;
    case ValueType::Text: return _text == other._text;
    }
    return false;
}

namespace {

int typeRank(ValueType t) {
    switch (t) {
    case ValueType::Null: return 0;
    case ValueType::Int64:
    case ValueType::Decimal: return 1;
    case ValueType::Text: return 2;
    case ValueType::Timestamp: return 3;
    }
    return 4;
}

// Compare a*10^-sa vs b*10^-sb without overflow: scale the smaller-scale
// mantissa up in 128-bit.
int compareNumeric(int64_t a, uint8_t sa, int64_t b, uint8_t sb) {
    __int128 wa = a;
    __int128 wb = b;
    uint8_t s = sa > sb ? sa : sb;
    for (uint8_t i = sa; i < s; ++i) wa *= 10;
    for (uint8_t i = sb; i < s; ++i) wb *= 10;
    if (wa < wb) return -1;
    if (wa > wb) return 1;
    return 0;
}

} // namespace

int Value::compareTotal(const Value &other) const {
    int ra = typeRank(_type), rb = typeRank(other._type);
    if (ra != rb) {
        return ra < rb ? -1 : 1;
    }
    switch (_type) {
    case ValueType::Null:
        return 0;
    case ValueType::Int64:
    case ValueType::Decimal: {
        uint8_t sa = _type == ValueType::Decimal ? _scale : 0;
        uint8_t sb = other._type == ValueType::Decimal ? other._scale : 0;
        int c = compareNumeric(_num, sa, other._num, sb);
        if (c != 0) return c;
        // Distinguish representations so the order is total over identity.
        if (_type != other._type) return _type == ValueType::Int64 ? -1 : 1;
        if (_scale != other._scale) return _scale < other._scale ? -1 : 1;
        return 0;
    }
    case ValueType::Text:
        return _text.compare(other._text) < 0 ? -1 : (_text == other._text ? 0 : 1);
    case ValueType::Timestamp:
        return _num < other._num ? -1 : (_num == other._num ? 0 : 1);
    }
    return 0;
}

bool Value::compareSql(const Value &other, int &out) const {
    if (isNull() || other.isNull()) {
        return false;
    }
    if (isNumeric() && other.isNumeric()) {
        uint8_t sa = _type == ValueType::Decimal ? _scale : 0;
        uint8_t sb = other._type == ValueType::Decimal ? other._scale : 0;
        out = compareNumeric(_num, sa, other._num, sb);
        return true;
    }
    if (_type != other._type) {
        return false;
    }
    out = compareTotal(other);
    return true;
}

namespace {

Value numericOp(const Value &a, const Value &b, char op) {
    if (a.isNull() || b.isNull()) {
        return Value::null();
    }
    if (!a.isNumeric() || !b.isNumeric()) {
        raise(ErrorKind::SchemaMismatch, "arithmetic on non-numeric value");
    }
    uint8_t sa = a.type() == ValueType::Decimal ? a.scale() : 0;
    uint8_t sb = b.type() == ValueType::Decimal ? b.scale() : 0;
    if (op == '*') {
        int64_t m = a.mantissa() * b.mantissa();
        uint8_t s = static_cast<uint8_t>(sa + sb);
        return s == 0 ? Value::int64(m) : Value::decimal(m, s);
    }
    if (op == '/') {
        if (b.mantissa() == 0) {
            return Value::null();
        }
        // Truncating division; result keeps the wider operand scale.
        uint8_t s = sa > sb ? sa : sb;
        __int128 num = a.mantissa();
        for (uint8_t i = 0; i < sb + s; ++i) num *= 10;
        __int128 den = b.mantissa();
        for (uint8_t i = 0; i < sa; ++i) den *= 10;
        int64_t q = static_cast<int64_t>(num / den);
        return s == 0 ? Value::int64(q) : Value::decimal(q, s);
    }
    uint8_t s = sa > sb ? sa : sb;
    __int128 wa = a.mantissa(), wb = b.mantissa();
    for (uint8_t i = sa; i < s; ++i) wa *= 10;
    for (uint8_t i = sb; i < s; ++i) wb *= 10;
    __int128 r = op == '+' ? wa + wb : wa - wb;
    int64_t m = static_cast<int64_t>(r);
    return s == 0 ? Value::int64(m) : Value::decimal(m, s);
}

} // namespace

Value Value::add(const Value &other) const { return numericOp(*this, other, '+'); }
Value Value::sub(const Value &other) const { return numericOp(*this, other, '-'); }
Value Value::mul(const Value &other) const { return numericOp(*this, other, '*'); }
Value Value::div(const Value &other) const { return numericOp(*this, other, '/'); }

Value Value::coerceTo(ValueType t, uint8_t scale) const {
    if (isNull() || _type == t) {
        if (t == ValueType::Decimal && !isNull() && _scale != scale) {
            int64_t m = _num;
            if (_scale < scale) {
                for (uint8_t i = _scale; i < scale; ++i) m *= 10;
            } else {
                for (uint8_t i = scale; i < _scale; ++i) m /= 10;
            }
            return Value::decimal(m, scale);
        }
        return *this;
    }
    if (t == ValueType::Decimal && _type == ValueType::Int64) {
        int64_t m = _num;
        for (uint8_t i = 0; i < scale; ++i) m *= 10;
        return Value::decimal(m, scale);
    }
    if (t == ValueType::Int64 && _type == ValueType::Decimal) {
        int64_t m = _num;
        for (uint8_t i = 0; i < _scale; ++i) m /= 10;
        return Value::int64(m);
    }
    if (t == ValueType::Timestamp && _type == ValueType::Text) {
        return Value::timestamp(parseTimestamp(_text));
    }
    raise(ErrorKind::SchemaMismatch,
          std::string("cannot coerce ") + valueTypeName(_type) + " to " + valueTypeName(t));
}

std::string Value::toSqlLiteral() const {
    switch (_type) {
    case ValueType::Null:
        return "NULL";
    case ValueType::Int64:
        return std::to_string(_num);
    case ValueType::Decimal: {
        bool neg = _num < 0;
        uint64_t mag = neg ? static_cast<uint64_t>(-(_num + 1)) + 1 : static_cast<uint64_t>(_num);
        std::string digits = std::to_string(mag);
        if (digits.size() <= _scale) {
            digits.insert(0, _scale + 1 - digits.size(), '0');
        }
        if (_scale > 0) {
            digits.insert(digits.size() - _scale, ".");
        }
        return (neg ? "-" : "") + digits;
    }
    case ValueType::Text: {
        std::string out = "'";
        for (char c : _text) {
            if (c == '\'') out += "''";
            else out += c;
        }
        out += "'";
        return out;
    }
    case ValueType::Timestamp:
        return "TIMESTAMP '" + formatTimestamp(_num) + "'";
    }
    return "NULL";
}

std::string Value::toPlainString() const {
    switch (_type) {
    case ValueType::Null: return "";
    case ValueType::Text: return _text;
    case ValueType::Timestamp: return formatTimestamp(_num);
    default: {
        Value v = *this;
        std::string lit = v.toSqlLiteral();
        return lit;
    }
    }
}

Value Value::fromPlainString(ValueType t, const std::string &s) {
    switch (t) {
    case ValueType::Null:
        return Value::null();
    case ValueType::Text:
        return Value::text(s);
    case ValueType::Timestamp:
        return Value::timestamp(parseTimestamp(s));
    case ValueType::Int64: {
        int64_t v = 0;
        auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
        if (ec != std::errc() || p != s.data() + s.size()) {
            raise(ErrorKind::MalformedLine, "bad int64 literal: " + s);
        }
        return Value::int64(v);
    }
    case ValueType::Decimal: {
        auto dot = s.find('.');
        if (dot == std::string::npos) {
            return Value::decimal(std::stoll(s), 0);
        }
        std::string digits = s.substr(0, dot) + s.substr(dot + 1);
        uint8_t scale = static_cast<uint8_t>(s.size() - dot - 1);
        return Value::decimal(std::stoll(digits), scale);
    }
    }
    return Value::null();
}

size_t Value::hashCode() const {
    size_t h = static_cast<size_t>(_type) * 0x9e3779b97f4a7c15ULL;
    h ^= std::hash<int64_t>()(_num) + 0x9e3779b9 + (h << 6) + (h >> 2);
    h ^= std::hash<uint8_t>()(_scale) + 0x9e3779b9 + (h << 6) + (h >> 2);
    if (_type == ValueType::Text) {
        h ^= std::hash<std::string>()(_text) + 0x9e3779b9 + (h << 6) + (h >> 2);
    }
    return h;
}

std::string formatTimestamp(int64_t micros) {
    time_t secs = static_cast<time_t>(micros / 1000000);
    int64_t frac = micros % 1000000;
    if (frac < 0) {
        frac += 1000000;
        secs -= 1;
    }
    struct tm tmv;
    gmtime_r(&secs, &tmv);
    char buf[40];
    snprintf(buf, sizeof(buf), "%04d-%02d-%02dT%02d:%02d:%02d", tmv.tm_year + 1900,
             tmv.tm_mon + 1, tmv.tm_mday, tmv.tm_hour, tmv.tm_min, tmv.tm_sec);
    std::string out(buf);
    if (frac != 0) {
        char fb[10];
        snprintf(fb, sizeof(fb), ".%06lld", static_cast<long long>(frac));
        out += fb;
    }
    out += "Z";
    return out;
}

int64_t parseTimestamp(const std::string &s) {
    struct tm tmv;
    memset(&tmv, 0, sizeof(tmv));
    int year, mon, day, hour, min, sec;
    char sep;
    if (sscanf(s.c_str(), "%4d-%2d-%2d%c%2d:%2d:%2d", &year, &mon, &day, &sep, &hour, &min,
               &sec) != 7 ||
        (sep != 'T' && sep != ' ')) {
        raise(ErrorKind::MalformedLine, "bad timestamp literal: " + s);
    }
    tmv.tm_year = year - 1900;
    tmv.tm_mon = mon - 1;
    tmv.tm_mday = day;
    tmv.tm_hour = hour;
    tmv.tm_min = min;
    tmv.tm_sec = sec;
    int64_t micros = 0;
    auto dot = s.find('.', 19);
    if (dot != std::string::npos) {
        size_t i = dot + 1;
        int digits = 0;
        while (i < s.size() && isdigit(static_cast<unsigned char>(s[i])) && digits < 6) {
            micros = micros * 10 + (s[i] - '0');
            ++i;
            ++digits;
        }
        while (digits < 6) {
            micros *= 10;
            ++digits;
        }
    }
    return static_cast<int64_t>(timegm(&tmv)) * 1000000 + micros;
}

const char *errorKindName(ErrorKind kind) {
    switch (kind) {
    case ErrorKind::SyntaxError: return "SyntaxError";
    case ErrorKind::UnresolvedName: return "UnresolvedName";
    case ErrorKind::UnsupportedFeature: return "UnsupportedFeature";
    case ErrorKind::DuplicateName: return "DuplicateName";
    case ErrorKind::DropMissing: return "DropMissing";
    case ErrorKind::MalformedLine: return "MalformedLine";
    case ErrorKind::NonMonotonicIndex: return "NonMonotonicIndex";
    case ErrorKind::WindowOutOfRange: return "WindowOutOfRange";
    case ErrorKind::TargetKindMismatch: return "TargetKindMismatch";
    case ErrorKind::SchemaMismatch: return "SchemaMismatch";
    case ErrorKind::LedgerGap: return "LedgerGap";
    case ErrorKind::NoSnapshot: return "NoSnapshot";
    case ErrorKind::NondetExhausted: return "NondetExhausted";
    case ErrorKind::SpecError: return "SpecError";
    case ErrorKind::MissingArtifacts: return "MissingArtifacts";
    case ErrorKind::VerifyMismatch: return "VerifyMismatch";
    case ErrorKind::Internal: return "Internal";
    }
    return "Error";
}

} // namespace retro
