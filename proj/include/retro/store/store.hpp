#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "retro/hash/ledger.hpp"
#include "retro/hash/table_hash.hpp"
#include "retro/sql/catalog.hpp"
#include "retro/sql/log.hpp"

namespace retro::store {

using Row = std::vector<Value>;

struct TableData {
    std::vector<sql::ColumnDef> columns;
    std::vector<Row> rows; // multiset
    std::map<std::string, int64_t> autoCounter; // last issued value per auto column

    int columnIndex(const std::string &name) const;
};

enum class DdlChange { None, Create, Drop, Alter, Truncate };

struct TableEffect {
    DdlChange ddl = DdlChange::None;
    std::vector<sql::ColumnDef> columnsBefore;
    std::vector<sql::ColumnDef> columnsAfter;
    std::vector<Row> inserted; // layout: columnsAfter
    std::vector<Row> deleted;  // layout: columnsBefore
    std::map<std::string, int64_t> countersBefore;
    std::map<std::string, int64_t> countersAfter;
    std::map<std::string, std::vector<int64_t>> autoAllocated; // per column, in order

    bool empty() const {
        return ddl == DdlChange::None && inserted.empty() && deleted.empty() &&
               countersBefore == countersAfter;
    }
    /// Multiset-hash delta of this effect.
    hash::U256 hashDelta() const;
};

struct ExecEffect {
    std::map<std::string, TableEffect> tables;
    bool aborted = false;
    std::string abortReason;
    std::vector<sql::NondetValue> nondetUsed;
    std::vector<Row> selectResult;
    std::vector<std::string> selectColumns;
};

enum class ExecMode { Regular, Replay };
enum class AutoIncMode { Off, Tombstone };

using ColumnKey = std::pair<std::string, std::string>; // table, column

struct ExecOptions {
    ExecMode mode = ExecMode::Regular;
    sql::Pos pos = 0;
    uint64_t seed = 0;
    AutoIncMode autoMode = AutoIncMode::Off;
    const ExecEffect *historical = nullptr; // identity auto-inc allocations
    const std::map<ColumnKey, std::set<int64_t>> *tombstones = nullptr;
    const std::map<ColumnKey, int64_t> *historicalMax = nullptr;
};

/// Mutable table storage the executor runs against. Implementations provide
/// the current-table map semantics (direct for the primary store,
/// copy-on-first-write for replay temporaries).
class StorageView {
public:
    virtual ~StorageView() = default;
    virtual const TableData *findTable(const std::string &name) const = 0;
    virtual TableData *writableTable(const std::string &name) = 0;
    virtual void createTable(const std::string &name, TableData data) = 0;
    virtual void dropTable(const std::string &name) = 0;
    virtual const sql::Catalog &catalog() const = 0;
    virtual sql::Catalog &mutableCatalog() = 0;
};

/// Executes one record against the view. Statement/transaction aborts leave
/// the view unchanged and are reported in the effect, not thrown.
ExecEffect execute(StorageView &view, const sql::QueryRecord &record, const ExecOptions &options);

/// Applies/undoes a recorded effect (row-level, exact).
void applyEffect(StorageView &view, const std::string &table, const TableEffect &effect);
void undoEffect(StorageView &view, const std::string &table, const TableEffect &effect);

// ---------------------------------------------------------------------------

struct StoreOptions {
    uint64_t seed = 0;
    AutoIncMode regularAutoMode = AutoIncMode::Off;
    uint64_t snapshotEvery = 256; // full per-table snapshot cadence
};

/// The embedded versioned store: current tables, per-commit effects, periodic
/// per-table snapshots, versioned catalog and the hash ledger.
class VersionedStore : public StorageView {
public:
    explicit VersionedStore(StoreOptions options = {});

    /// Executes in Regular mode at the record's index and commits the effect,
    /// snapshots and ledger entries.
    const ExecEffect &commit(const sql::QueryRecord &record);

    const TableData *findTable(const std::string &name) const override;
    TableData *writableTable(const std::string &name) override;
    void createTable(const std::string &name, TableData data) override;
    void dropTable(const std::string &name) override;
    const sql::Catalog &catalog() const override { return _catalog; }
    sql::Catalog &mutableCatalog() override { return _catalog; }

    const std::map<uint64_t, ExecEffect> &effects() const { return _effects; }
    const ExecEffect *effectAt(uint64_t idx) const;
    const hash::HashLedger &ledger() const { return _ledger; }
    hash::HashLedger &mutableLedger() { return _ledger; }
    std::optional<hash::U256> liveHash(const std::string &table) const;
    std::map<std::string, hash::U256> allLiveHashes() const;
    const std::map<std::string, TableData> &tables() const { return _tables; }
    uint64_t lastIdx() const { return _lastIdx; }
    const StoreOptions &options() const { return _options; }

    /// State of `table` as of commit idx (nearest snapshot + forward deltas).
    /// nullopt when the table is not alive at idx. Raises NoSnapshot when idx
    /// precedes snapshot coverage.
    std::optional<TableData> tableAt(const std::string &table, uint64_t idx) const;

    /// Replaces a mutated table's content (sync step) and recomputes its live
    /// hash.
    void replaceTable(const std::string &name, std::optional<TableData> data);

    /// Highest auto-increment value ever allocated per column (tombstone
    /// baseline).
    const std::map<ColumnKey, int64_t> &historicalAutoMax() const { return _autoMax; }

    void exportSnapshot(const std::string &table, const std::string &path) const;
    void importSnapshot(const std::string &path);

private:
    friend class TempStore;

    StoreOptions _options;
    sql::Catalog _catalog;
    std::map<std::string, TableData> _tables;
    std::map<uint64_t, ExecEffect> _effects;
    std::map<std::string, std::vector<std::pair<uint64_t, std::optional<TableData>>>> _snapshots;
    std::map<std::string, uint64_t> _mutationCount;
    std::map<std::string, hash::U256> _liveHash;
    hash::HashLedger _ledger;
    std::map<ColumnKey, int64_t> _autoMax;
    uint64_t _lastIdx = 0;
    uint64_t _coverageFloor = 0;
};

/// Copy-on-first-write overlay over a VersionedStore used by replay: tables
/// are materialized locally the first time they are written (or explicitly
/// pinned to a rolled-back state); reads of untouched tables see the base.
class TempStore : public StorageView {
public:
    explicit TempStore(const VersionedStore &base);

    const TableData *findTable(const std::string &name) const override;
    TableData *writableTable(const std::string &name) override;
    void createTable(const std::string &name, TableData data) override;
    void dropTable(const std::string &name) override;
    const sql::Catalog &catalog() const override { return _catalog; }
    sql::Catalog &mutableCatalog() override { return _catalog; }

    /// Pins a table to the given state (rollback materialization).
    void pinTable(const std::string &name, std::optional<TableData> data);
    bool materialized(const std::string &name) const;
    /// Tables materialized locally (created, pinned or written).
    std::vector<std::string> localTables() const;
    std::optional<TableData> takeLocal(const std::string &name);

    const VersionedStore &base() const { return _base; }

    /// Optional per-access hook (scheduler disjointness assertion).
    void setAccessHook(std::function<void(const std::string &)> hook) {
        _accessHook = std::move(hook);
    }

private:
    const VersionedStore &_base;
    sql::Catalog _catalog; // cloned; replayed DDL lands here
    std::map<std::string, std::optional<TableData>> _local; // nullopt = dropped
    std::function<void(const std::string &)> _accessHook;
};

/// Computes the multiset hash of a table's current rows.
hash::U256 tableHash(const TableData &data);

} // namespace retro::store
