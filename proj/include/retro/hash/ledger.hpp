#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "retro/hash/table_hash.hpp"

namespace retro::hash {

struct LedgerEntry {
    uint64_t idx = 0;
    U256 hash;
};

/// Per-table append-only list of (commit idx, table hash), one entry per
/// commit that modified the table.
class HashLedger {
public:
    void append(const std::string &table, uint64_t idx, U256 hash);

    /// Effective hash at `idx` (last entry with entry.idx <= idx). nullopt if
    /// the table has no entry at or before idx (it did not exist yet).
    std::optional<U256> effectiveAt(const std::string &table, uint64_t idx) const;

    bool hasTable(const std::string &table) const { return _entries.count(table) > 0; }
    const std::vector<LedgerEntry> &entriesFor(const std::string &table) const;
    std::vector<std::string> tables() const;

    /// Drops all entries for `table` with idx in [from, to] and re-appends
    /// the given ones (used by sync to rewrite history for mutated tables).
    void rewriteRange(const std::string &table, uint64_t from, uint64_t to,
                      const std::vector<LedgerEntry> &entries);

    void writeJsonl(const std::string &path) const;
    static HashLedger readJsonl(const std::string &path);

    bool operator==(const HashLedger &) const = default;

private:
    std::map<std::string, std::vector<LedgerEntry>> _entries;
};

inline bool operator==(const LedgerEntry &a, const LedgerEntry &b) {
    return a.idx == b.idx && a.hash == b.hash;
}

struct JumpDecision {
    bool jump = false;
    uint64_t atIdx = 0;
    std::vector<std::string> matchedTables;

    static JumpDecision cont() { return {}; }
};

struct RemainingReplay {
    /// True when a retroactively added/removed/changed statement has not yet
    /// been applied at a position beyond the checked idx.
    bool retroDivergentBeyond = false;
};

/// Jump iff every mutated table's live hash equals its ledger hash effective
/// at `idx` (both sides must agree on the table existing) and no retro
/// divergence remains beyond idx. The caller is responsible for adjusting
/// live hashes for effects it intentionally kept in place (cluster-skipped
/// queries).
JumpDecision checkJump(const HashLedger &ledger,
                       const std::map<std::string, std::optional<U256>> &live, uint64_t idx,
                       const std::set<std::string> &mutated, const RemainingReplay &remaining);

} // namespace retro::hash
