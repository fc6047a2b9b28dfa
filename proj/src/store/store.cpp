#include "retro/store/store.hpp"

#include <algorithm>

#include "retro/errors.hpp"

namespace retro::store {

using namespace retro::sql;

VersionedStore::VersionedStore(StoreOptions options) : _options(options) {}

const ExecEffect &VersionedStore::commit(const sql::QueryRecord &record) {
    if (record.idx <= _lastIdx && _lastIdx != 0) {
        raise(ErrorKind::NonMonotonicIndex, "commit idx " + std::to_string(record.idx) +
                                                " after " + std::to_string(_lastIdx));
    }
    ExecOptions options;
    options.mode = ExecMode::Regular;
    options.pos = posOf(record.idx);
    options.seed = _options.seed;
    options.autoMode = _options.regularAutoMode;
    ExecEffect effect = execute(*this, record, options);
    _lastIdx = record.idx;

    for (auto &[table, tableEffect] : effect.tables) {
        if (tableEffect.empty()) {
            continue;
        }
        // Live hash and ledger.
        hash::U256 h = hash::U256::zero();
        auto liveIt = _liveHash.find(table);
        if (liveIt != _liveHash.end()) {
            h = liveIt->second;
        }
        h += tableEffect.hashDelta();
        if (tableEffect.ddl == DdlChange::Drop) {
            _liveHash.erase(table);
            _ledger.append(table, record.idx, hash::U256::zero());
        } else {
            _liveHash[table] = h;
            _ledger.append(table, record.idx, h);
        }
        // Auto-increment history.
        for (const auto &[column, values] : tableEffect.autoAllocated) {
            for (int64_t v : values) {
                ColumnKey key{table, column};
                auto it = _autoMax.find(key);
                if (it == _autoMax.end() || it->second < v) {
                    _autoMax[key] = v;
                }
            }
        }
        for (const auto &[column, value] : tableEffect.countersAfter) {
            ColumnKey key{table, column};
            auto it = _autoMax.find(key);
            if (it == _autoMax.end() || it->second < value) {
                _autoMax[key] = value;
            }
        }
        // Snapshot cadence: full post-commit state every S mutations (always
        // at creation).
        uint64_t count = ++_mutationCount[table];
        auto present = _tables.find(table);
        if (tableEffect.ddl == DdlChange::Create || count % _options.snapshotEvery == 1 ||
            _options.snapshotEvery == 1) {
            std::optional<TableData> snap;
            if (present != _tables.end()) {
                snap = present->second;
            }
            _snapshots[table].emplace_back(record.idx, std::move(snap));
        }
    }
    auto [it, inserted] = _effects.emplace(record.idx, std::move(effect));
    return it->second;
}

const TableData *VersionedStore::findTable(const std::string &name) const {
    auto it = _tables.find(name);
    return it == _tables.end() ? nullptr : &it->second;
}

TableData *VersionedStore::writableTable(const std::string &name) {
    auto it = _tables.find(name);
    if (it == _tables.end()) {
        raise(ErrorKind::UnresolvedName, "table not found: " + name);
    }
    return &it->second;
}

void VersionedStore::createTable(const std::string &name, TableData data) {
    _tables[name] = std::move(data);
}

void VersionedStore::dropTable(const std::string &name) { _tables.erase(name); }

const ExecEffect *VersionedStore::effectAt(uint64_t idx) const {
    auto it = _effects.find(idx);
    return it == _effects.end() ? nullptr : &it->second;
}

std::optional<hash::U256> VersionedStore::liveHash(const std::string &table) const {
    auto it = _liveHash.find(table);
    if (it == _liveHash.end()) {
        return std::nullopt;
    }
    return it->second;
}

std::map<std::string, hash::U256> VersionedStore::allLiveHashes() const { return _liveHash; }

std::optional<TableData> VersionedStore::tableAt(const std::string &table, uint64_t idx) const {
    if (idx < _coverageFloor) {
        raise(ErrorKind::NoSnapshot, "no snapshot coverage at idx " + std::to_string(idx));
    }
    // Snapshots hold the post-commit state at their key; the nearest one at or
    // before idx seeds the state and effects in (snapAt, idx] roll forward.
    auto snapIt = _snapshots.find(table);
    std::optional<TableData> state;
    uint64_t from = 0;
    bool haveBase = false;
    if (snapIt != _snapshots.end()) {
        for (const auto &[snapAt, data] : snapIt->second) {
            if (snapAt > idx) {
                break;
            }
            state = data;
            from = snapAt;
            haveBase = true;
        }
    }
    if (!haveBase) {
        return std::nullopt; // created after idx (creation always snapshots)
    }
    struct LocalView : StorageView {
        std::optional<TableData> *slot;
        const sql::Catalog *cat;
        const TableData *findTable(const std::string &) const override {
            return slot->has_value() ? &**slot : nullptr;
        }
        TableData *writableTable(const std::string &) override {
            if (!slot->has_value()) {
                raise(ErrorKind::Internal, "effect applies to absent table");
            }
            return &**slot;
        }
        void createTable(const std::string &, TableData data) override { *slot = std::move(data); }
        void dropTable(const std::string &) override { slot->reset(); }
        const sql::Catalog &catalog() const override { return *cat; }
        sql::Catalog &mutableCatalog() override {
            raise(ErrorKind::Internal, "catalog immutable here");
        }
    } local;
    local.slot = &state;
    local.cat = &_catalog;
    for (auto it = _effects.upper_bound(from); it != _effects.end() && it->first <= idx; ++it) {
        auto te = it->second.tables.find(table);
        if (te == it->second.tables.end() || te->second.empty()) {
            continue;
        }
        applyEffect(local, table, te->second);
    }
    return state;
}

void VersionedStore::replaceTable(const std::string &name, std::optional<TableData> data) {
    if (!data.has_value()) {
        _tables.erase(name);
        _liveHash.erase(name);
        return;
    }
    hash::U256 h = tableHash(*data);
    _tables[name] = std::move(*data);
    _liveHash[name] = h;
}

// ---------------------------------------------------------------------------

TempStore::TempStore(const VersionedStore &base) : _base(base), _catalog(base.catalog()) {}

const TableData *TempStore::findTable(const std::string &name) const {
    if (_accessHook) {
        _accessHook(name);
    }
    auto it = _local.find(name);
    if (it != _local.end()) {
        return it->second.has_value() ? &*it->second : nullptr;
    }
    return _base.findTable(name);
}

TableData *TempStore::writableTable(const std::string &name) {
    if (_accessHook) {
        _accessHook(name);
    }
    auto it = _local.find(name);
    if (it == _local.end()) {
        const TableData *baseData = _base.findTable(name);
        if (baseData == nullptr) {
            raise(ErrorKind::UnresolvedName, "table not found: " + name);
        }
        it = _local.emplace(name, *baseData).first;
    }
    if (!it->second.has_value()) {
        raise(ErrorKind::UnresolvedName, "table not found: " + name);
    }
    return &*it->second;
}

void TempStore::createTable(const std::string &name, TableData data) {
    if (_accessHook) {
        _accessHook(name);
    }
    _local[name] = std::move(data);
}

void TempStore::dropTable(const std::string &name) {
    if (_accessHook) {
        _accessHook(name);
    }
    _local[name] = std::nullopt;
}

void TempStore::pinTable(const std::string &name, std::optional<TableData> data) {
    _local[name] = std::move(data);
}

bool TempStore::materialized(const std::string &name) const { return _local.count(name) > 0; }

std::vector<std::string> TempStore::localTables() const {
    std::vector<std::string> out;
    for (const auto &[name, data] : _local) {
        out.push_back(name);
    }
    return out;
}

std::optional<TableData> TempStore::takeLocal(const std::string &name) {
    auto it = _local.find(name);
    if (it == _local.end()) {
        const TableData *baseData = _base.findTable(name);
        return baseData == nullptr ? std::nullopt : std::optional<TableData>(*baseData);
    }
    return std::move(it->second);
}

} // namespace retro::store
