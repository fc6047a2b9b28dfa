#include "lexer.hpp"

#include <algorithm>
#include <set>

namespace retro::sql {

namespace {

const std::set<std::string> &keywordSet() {
    static const std::set<std::string> kw = {
        "CREATE", "ALTER", "ADD", "COLUMN", "DROP", "TRUNCATE", "TABLE", "VIEW", "TRIGGER",
        "PROCEDURE",
        "SELECT", "INSERT", "UPDATE", "DELETE", "INTO", "VALUES", "FROM", "WHERE", "SET",
        "JOIN", "ON", "AND", "OR", "IN", "BETWEEN", "ORDER", "BY", "ASC", "DESC", "LIMIT",
        "AS", "BEGIN", "COMMIT", "END", "IF", "THEN", "ELSE", "CALL", "DECLARE", "DEFAULT",
        "BEFORE", "AFTER", "FOR", "EACH", "ROW", "NEW", "OLD", "NULL", "PRIMARY", "KEY",
        "AUTO_INCREMENT", "UNIQUE", "FOREIGN", "REFERENCES", "CASCADE", "CHECK", "CONSTRAINT",
        "REPLACE", "SIGNAL", "SQLSTATE", "MESSAGE_TEXT", "INT", "BIGINT", "INT64", "TEXT",
        "VARCHAR", "DECIMAL", "TIMESTAMP", "COUNT", "SUM", "MIN", "MAX", "CURTIME", "NOW",
        "RAND",
        // Recognized-but-unsupported; kept as keywords so the parser can fail
        // with UnsupportedFeature rather than a generic syntax error.
        "INDEX", "GROUP", "HAVING", "LIKE", "UNION", "DISTINCT",
    };
    return kw;
}

const std::set<std::string> &reservedSet() {
    static const std::set<std::string> kw = {
        "CREATE", "ALTER", "DROP", "TRUNCATE", "SELECT", "INSERT", "UPDATE", "DELETE",
        "FROM", "WHERE", "SET", "JOIN", "ON", "AND", "OR", "IN", "BETWEEN", "ORDER",
        "LIMIT", "AS", "BEGIN", "COMMIT", "END", "IF", "THEN", "ELSE", "CALL", "DECLARE",
        "NULL", "VALUES", "GROUP", "HAVING", "LIKE", "UNION",
    };
    return kw;
}

} // namespace

bool Lexer::isKeyword(const std::string &upper) { return keywordSet().count(upper) > 0; }

bool Lexer::isReserved(const std::string &upper) { return reservedSet().count(upper) > 0; }

void Lexer::tokenize() {
    size_t i = 0;
    const std::string &s = _input;
    while (i < s.size()) {
        char c = s[i];
        if (isspace(static_cast<unsigned char>(c))) {
            ++i;
            continue;
        }
        Token t;
        t.offset = i;
        if (isalpha(static_cast<unsigned char>(c)) || c == '_') {
            size_t j = i;
            while (j < s.size() &&
                   (isalnum(static_cast<unsigned char>(s[j])) || s[j] == '_')) {
                ++j;
            }
            t.raw = s.substr(i, j - i);
            std::string upper = t.raw;
            std::transform(upper.begin(), upper.end(), upper.begin(),
                           [](unsigned char ch) { return toupper(ch); });
            if (isKeyword(upper)) {
                t.type = TokenType::Keyword;
                t.text = upper;
            } else {
                t.type = TokenType::Identifier;
                t.text = t.raw;
            }
            i = j;
        } else if (isdigit(static_cast<unsigned char>(c)) ||
                   (c == '.' && i + 1 < s.size() && isdigit(static_cast<unsigned char>(s[i + 1])))) {
            size_t j = i;
            bool dot = false;
            while (j < s.size() && (isdigit(static_cast<unsigned char>(s[j])) ||
                                    (s[j] == '.' && !dot))) {
                if (s[j] == '.') dot = true;
                ++j;
            }
            t.type = TokenType::Number;
            t.raw = t.text = s.substr(i, j - i);
            i = j;
        } else if (c == '\'') {
            std::string text;
            size_t j = i + 1;
            bool closed = false;
            while (j < s.size()) {
                if (s[j] == '\'') {
                    if (j + 1 < s.size() && s[j + 1] == '\'') {
                        text += '\'';
                        j += 2;
                        continue;
                    }
                    closed = true;
                    ++j;
                    break;
                }
                text += s[j];
                ++j;
            }
            if (!closed) {
                raise(ErrorKind::SyntaxError,
                      "at offset " + std::to_string(i) + ": unterminated string literal");
            }
            t.type = TokenType::String;
            t.text = text;
            t.raw = s.substr(i, j - i);
            i = j;
        } else {
            std::string two = s.substr(i, 2);
            if (two == "<=" || two == ">=" || two == "<>" || two == "!=") {
                t.type = TokenType::Punct;
                t.raw = t.text = two;
                i += 2;
            } else {
                t.type = TokenType::Punct;
                t.raw = t.text = std::string(1, c);
                i += 1;
            }
        }
        _tokens.push_back(std::move(t));
    }
}

} // namespace retro::sql
