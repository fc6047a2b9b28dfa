#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "retro/sql/ast.hpp"
#include "retro/sql/catalog.hpp"

namespace retro::sql {

struct NondetValue {
    std::string fn;     // CURTIME / NOW / RAND
    uint32_t seq = 0;   // dense from 0 per record
    std::string value;  // concretized value, plain-string form

    bool operator==(const NondetValue &) const = default;
};

/// One committed log entry.
struct QueryRecord {
    uint64_t idx = 0;
    int64_t tsMicros = 0;
    std::string session;
    std::string text;
    Statement stmt;
    std::vector<NondetValue> nondet;
};

struct ParsedLog {
    std::vector<QueryRecord> records;
    Catalog catalog; // evolved over the whole log
};

/// Reads a JSON-Lines query log; statements are resolved against the catalog
/// as it stood at each record's index. Raises MalformedLine (with the line
/// number) and NonMonotonicIndex.
ParsedLog parseLog(std::istream &in);
ParsedLog parseLogFile(const std::string &path);

/// Serializes one record to its JSON-Lines form.
std::string recordToJsonLine(const QueryRecord &record);
void writeLogFile(const std::string &path, const std::vector<QueryRecord> &records);

} // namespace retro::sql
