#pragma once

#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "retro/sql/catalog.hpp"
#include "retro/sql/log.hpp"
#include "retro/value.hpp"

namespace retro::analysis {

struct ValueLess {
    bool operator()(const Value &a, const Value &b) const { return a.compareTotal(b) < 0; }
};

/// A typed cluster key: the origin key column plus a point value or interval.
struct ClusterKey {
    std::string originTable;
    std::string originColumn;
    Value lo;
    Value hi;

    bool isPoint() const { return lo == hi; }
    bool overlaps(const ClusterKey &other) const;
    bool operator==(const ClusterKey &) const = default;
};

/// K set: Universal (could touch any row), a deferred marker (DDL/trigger
/// kinds, resolved by row-cluster as unions over linked queries), or a finite
/// set of typed keys.
struct ClusterKeySet {
    bool universal = false;
    bool deferred = false;
    std::vector<ClusterKey> keys;

    static ClusterKeySet universalSet() {
        ClusterKeySet out;
        out.universal = true;
        return out;
    }
    static ClusterKeySet deferredSet() {
        ClusterKeySet out;
        out.deferred = true;
        return out;
    }

    void addPoint(const std::string &table, const std::string &column, const Value &v);
    void addRange(const std::string &table, const std::string &column, const Value &lo,
                  const Value &hi);
    void unionWith(const ClusterKeySet &other);
    bool intersects(const ClusterKeySet &other) const;
    size_t size() const { return keys.size(); }
};

enum class SchemeColKind { Key, Foreign, Alias };

struct SchemeColumn {
    std::string table;
    std::string column;
    SchemeColKind kind = SchemeColKind::Key;
    // Foreign: the referenced column; Alias: the carrier column in the same
    // table whose per-row value maps the alias to the origin key.
    std::string parentTable;
    std::string parentColumn;
    std::string originTable;
    std::string originColumn;
    bool viaAlias = false; // resolution path passes an alias mapping
};

/// Per alias column: observed alias value -> origin cluster-key value. A
/// recorded mapping is immutable; a conflicting re-mapping demotes the column.
class AliasMap {
public:
    using ColumnId = std::pair<std::string, std::string>;

    /// Returns false on a conflicting re-mapping.
    bool record(const ColumnId &column, const Value &aliasValue, const Value &originValue);
    std::optional<Value> translate(const ColumnId &column, const Value &aliasValue) const;
    bool hasColumn(const ColumnId &column) const { return _map.count(column) > 0; }

private:
    std::map<ColumnId, std::map<Value, Value, ValueLess>> _map;
};

struct ClusterScheme {
    std::vector<SchemeColumn> columns;     // key columns first, then derived
    std::set<std::string> coveredTables;   // tables whose accesses must pin keys
    std::set<std::string> staticTables;    // uncovered but window-static: ignorable

    bool enabled() const { return !columns.empty(); }
    const SchemeColumn *find(const std::string &table, const std::string &column) const;
    std::vector<const SchemeColumn *> columnsOf(const std::string &table) const;
    std::vector<const SchemeColumn *> keyColumns() const;
};

/// Harvests the query's cluster keys from equality/IN/BETWEEN predicates and
/// VALUES rows on scheme columns; alias values translate through the alias
/// map; DDL and trigger statements return a deferred marker; any access to a
/// covered table that fails to pin its key yields Universal.
ClusterKeySet extractK(const sql::Statement &stmt, const sql::Catalog &catalog, uint64_t atIdx,
                       const ClusterScheme &scheme, const AliasMap &aliasMap);

} // namespace retro::analysis
