#pragma once

#include <cctype>
#include <string>
#include <vector>

#include "retro/errors.hpp"

namespace retro::sql {

enum class TokenType { Identifier, Keyword, Number, String, Punct, End };

struct Token {
    TokenType type = TokenType::End;
    std::string text;   // keywords uppercased; identifiers verbatim
    std::string raw;    // original spelling
    size_t offset = 0;
};

/// Keywords are matched case-insensitively; identifiers stay case-sensitive.
class Lexer {
public:
    explicit Lexer(const std::string &input) : _input(input) { tokenize(); }

    const Token &peek(size_t ahead = 0) const {
        size_t i = _cursor + ahead;
        return i < _tokens.size() ? _tokens[i] : _end;
    }

    Token next() {
        const Token &t = peek();
        if (t.type != TokenType::End) {
            ++_cursor;
        }
        return t;
    }

    bool atEnd() const { return peek().type == TokenType::End; }

    bool peekKeyword(const char *kw, size_t ahead = 0) const {
        const Token &t = peek(ahead);
        return t.type == TokenType::Keyword && t.text == kw;
    }

    bool peekPunct(const char *p, size_t ahead = 0) const {
        const Token &t = peek(ahead);
        return t.type == TokenType::Punct && t.text == p;
    }

    bool acceptKeyword(const char *kw) {
        if (peekKeyword(kw)) {
            ++_cursor;
            return true;
        }
        return false;
    }

    bool acceptPunct(const char *p) {
        if (peekPunct(p)) {
            ++_cursor;
            return true;
        }
        return false;
    }

    void expectKeyword(const char *kw) {
        if (!acceptKeyword(kw)) {
            fail(std::string("expected ") + kw);
        }
    }

    void expectPunct(const char *p) {
        if (!acceptPunct(p)) {
            fail(std::string("expected '") + p + "'");
        }
    }

    std::string expectIdentifier(const char *what) {
        const Token &t = peek();
        if (t.type == TokenType::Identifier) {
            ++_cursor;
            return t.text;
        }
        // Non-reserved keywords may double as identifiers where unambiguous.
        if (t.type == TokenType::Keyword && !isReserved(t.text)) {
            ++_cursor;
            return t.raw;
        }
        fail(std::string("expected ") + what);
    }

    [[noreturn]] void fail(const std::string &expected) const {
        const Token &t = peek();
        raise(ErrorKind::SyntaxError, "at offset " + std::to_string(t.offset) + " near '" +
                                          (t.type == TokenType::End ? "<end>" : t.raw) + "': " +
                                          expected);
    }

private:
    static bool isKeyword(const std::string &upper);
    static bool isReserved(const std::string &upper);
    void tokenize();

    std::string _input;
    std::vector<Token> _tokens;
    size_t _cursor = 0;
    Token _end;
};

} // namespace retro::sql
