#include "retro/hash/ledger.hpp"

#include <algorithm>
#include <fstream>

#include <json.hpp>

#include "retro/errors.hpp"

namespace retro::hash {

using nlohmann::json;

void HashLedger::append(const std::string &table, uint64_t idx, U256 hash) {
    auto &entries = _entries[table];
    if (!entries.empty() && entries.back().idx > idx) {
        raise(ErrorKind::Internal, "ledger entries must be appended in idx order");
    }
    entries.push_back({idx, hash});
}

std::optional<U256> HashLedger::effectiveAt(const std::string &table, uint64_t idx) const {
    auto it = _entries.find(table);
    if (it == _entries.end()) {
        return std::nullopt;
    }
    std::optional<U256> found;
    for (const auto &entry : it->second) {
        if (entry.idx > idx) {
            break;
        }
        found = entry.hash;
    }
    return found;
}

const std::vector<LedgerEntry> &HashLedger::entriesFor(const std::string &table) const {
    static const std::vector<LedgerEntry> kEmpty;
    auto it = _entries.find(table);
    return it == _entries.end() ? kEmpty : it->second;
}

std::vector<std::string> HashLedger::tables() const {
    std::vector<std::string> out;
    for (const auto &[table, entries] : _entries) {
        out.push_back(table);
    }
    return out;
}

void HashLedger::rewriteRange(const std::string &table, uint64_t from, uint64_t to,
                              const std::vector<LedgerEntry> &entries) {
    auto &existing = _entries[table];
    std::vector<LedgerEntry> merged;
    for (const auto &entry : existing) {
        if (entry.idx < from) {
            merged.push_back(entry);
        }
    }
    for (const auto &entry : entries) {
        merged.push_back(entry);
    }
    for (const auto &entry : existing) {
        if (entry.idx > to) {
            merged.push_back(entry);
        }
    }
    existing = std::move(merged);
}

void HashLedger::writeJsonl(const std::string &path) const {
    std::ofstream out(path, std::ios::trunc);
    if (!out) {
        raise(ErrorKind::MissingArtifacts, "cannot write ledger file: " + path);
    }
    // Interleave tables by idx so the sidecar reads like a commit log.
    std::vector<std::pair<std::string, LedgerEntry>> flat;
    for (const auto &[table, entries] : _entries) {
        for (const auto &entry : entries) {
            flat.emplace_back(table, entry);
        }
    }
    std::stable_sort(flat.begin(), flat.end(), [](const auto &a, const auto &b) {
        if (a.second.idx != b.second.idx) return a.second.idx < b.second.idx;
        return a.first < b.first;
    });
    for (const auto &[table, entry] : flat) {
        json doc;
        doc["idx"] = entry.idx;
        doc["table"] = table;
        doc["hash"] = entry.hash.toHex();
        out << doc.dump() << "\n";
    }
}

HashLedger HashLedger::readJsonl(const std::string &path) {
    std::ifstream in(path);
    if (!in) {
        raise(ErrorKind::MissingArtifacts, "cannot open ledger file: " + path);
    }
    HashLedger ledger;
    std::string line;
    size_t lineNo = 0;
    while (std::getline(in, line)) {
        ++lineNo;
        if (line.empty()) continue;
        try {
            json doc = json::parse(line);
            ledger.append(doc.at("table").get<std::string>(), doc.at("idx").get<uint64_t>(),
                          U256::fromHex(doc.at("hash").get<std::string>()));
        } catch (const json::exception &e) {
            raise(ErrorKind::MalformedLine, "line " + std::to_string(lineNo) + ": " + e.what());
        }
    }
    return ledger;
}

JumpDecision checkJump(const HashLedger &ledger,
                       const std::map<std::string, std::optional<U256>> &live, uint64_t idx,
                       const std::set<std::string> &mutated, const RemainingReplay &remaining) {
    if (remaining.retroDivergentBeyond) {
        return JumpDecision::cont();
    }
    JumpDecision out;
    for (const auto &table : mutated) {
        if (!ledger.hasTable(table)) {
            raise(ErrorKind::LedgerGap, "no ledger coverage for table " + table);
        }
        auto historical = ledger.effectiveAt(table, idx);
        auto it = live.find(table);
        std::optional<U256> liveHash = it == live.end() ? std::nullopt : it->second;
        if (historical.has_value() != liveHash.has_value()) {
            return JumpDecision::cont();
        }
        if (historical && !(*historical == *liveHash)) {
            return JumpDecision::cont();
        }
        out.matchedTables.push_back(table);
    }
    out.jump = true;
    out.atIdx = idx;
    return out;
}

} // namespace retro::hash
