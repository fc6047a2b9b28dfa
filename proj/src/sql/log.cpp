#include "retro/sql/log.hpp"

#include <fstream>
#include <sstream>

#include <json.hpp>

#include "retro/errors.hpp"
#include "retro/sql/parser.hpp"

namespace retro::sql {

using nlohmann::json;

namespace {

bool isDdl(StatementKind kind) {
    switch (kind) {
    case StatementKind::CreateTable:
    case StatementKind::AlterTable:
    case StatementKind::DropTable:
    case StatementKind::CreateView:
    case StatementKind::DropView:
    case StatementKind::CreateTrigger:
    case StatementKind::DropTrigger:
    case StatementKind::CreateProcedure:
        return true;
    default:
        return false;
    }
}

} // namespace

ParsedLog parseLog(std::istream &in) {
    ParsedLog out;
    std::string line;
    size_t lineNo = 0;
    uint64_t lastIdx = 0;
    bool first = true;
    while (std::getline(in, line)) {
        ++lineNo;
        if (line.empty()) {
            continue;
        }
        json doc;
        try {
            doc = json::parse(line);
        } catch (const json::exception &e) {
            raise(ErrorKind::MalformedLine, "line " + std::to_string(lineNo) + ": " + e.what());
        }
        if (!doc.is_object()) {
            raise(ErrorKind::MalformedLine, "line " + std::to_string(lineNo) + ": not an object");
        }
        for (const auto &[key, value] : doc.items()) {
            if (key != "idx" && key != "ts" && key != "session" && key != "stmt" &&
                key != "nondet") {
                raise(ErrorKind::MalformedLine,
                      "line " + std::to_string(lineNo) + ": unknown field '" + key + "'");
            }
        }
        QueryRecord record;
        try {
            record.idx = doc.at("idx").get<uint64_t>();
            record.tsMicros = parseTimestamp(doc.at("ts").get<std::string>());
            record.session = doc.at("session").get<std::string>();
            record.text = doc.at("stmt").get<std::string>();
            if (doc.contains("nondet")) {
                uint32_t expectSeq = 0;
                for (const auto &nd : doc.at("nondet")) {
                    NondetValue value;
                    value.fn = nd.at("fn").get<std::string>();
                    value.seq = nd.at("seq").get<uint32_t>();
                    value.value = nd.at("value").get<std::string>();
                    if (value.seq != expectSeq) {
                        raise(ErrorKind::MalformedLine,
                              "line " + std::to_string(lineNo) + ": nondet seq not dense");
                    }
                    ++expectSeq;
                    record.nondet.push_back(std::move(value));
                }
            }
        } catch (const json::exception &e) {
            raise(ErrorKind::MalformedLine, "line " + std::to_string(lineNo) + ": " + e.what());
        }
        if (!first && record.idx <= lastIdx) {
            raise(ErrorKind::NonMonotonicIndex,
                  "line " + std::to_string(lineNo) + ": idx " + std::to_string(record.idx) +
                      " after " + std::to_string(lastIdx));
        }
        first = false;
        lastIdx = record.idx;
        record.stmt = parseStatement(record.text, out.catalog, record.idx);
        if (isDdl(record.stmt.kind)) {
            out.catalog.apply(record.stmt, record.idx);
        }
        out.records.push_back(std::move(record));
    }
    return out;
}

ParsedLog parseLogFile(const std::string &path) {
    std::ifstream in(path);
    if (!in) {
        raise(ErrorKind::MissingArtifacts, "cannot open log file: " + path);
    }
    return parseLog(in);
}

std::string recordToJsonLine(const QueryRecord &record) {
    json doc;
    doc["idx"] = record.idx;
    doc["ts"] = formatTimestamp(record.tsMicros);
    doc["session"] = record.session;
    doc["stmt"] = record.text;
    if (!record.nondet.empty()) {
        json list = json::array();
        for (const auto &nd : record.nondet) {
            list.push_back({{"fn", nd.fn}, {"seq", nd.seq}, {"value", nd.value}});
        }
        doc["nondet"] = std::move(list);
    }
    return doc.dump();
}

void writeLogFile(const std::string &path, const std::vector<QueryRecord> &records) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) {
        raise(ErrorKind::MissingArtifacts, "cannot write log file: " + path);
    }
    for (const auto &record : records) {
        out << recordToJsonLine(record) << "\n";
    }
}

} // namespace retro::sql
