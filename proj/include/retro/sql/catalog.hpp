#pragma once

#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "retro/sql/ast.hpp"

namespace retro::sql {

/// Commit positions order catalog versions. Each commit index occupies two
/// slots so a retroactively added statement can splice in "right before" an
/// existing commit.
using Pos = uint64_t;
constexpr Pos posOf(uint64_t idx) { return idx * 2; }
constexpr Pos posJustBefore(uint64_t idx) { return idx * 2 - 1; }
constexpr Pos kPosMax = ~0ULL;

struct TableSchema {
    std::string name;
    std::vector<ColumnDef> columns;
    std::vector<ForeignKeyDef> foreignKeys;
    std::vector<CheckDef> checks;

    int columnIndex(const std::string &column) const;
    const ColumnDef *findColumn(const std::string &column) const;
    /// Primary key column index, or -1.
    int primaryKeyIndex() const;
};

struct ViewDef {
    std::string name;
    SelectStmt select;
    /// Output columns in order (alias or source column name), with their types.
    std::vector<ColumnDef> outputColumns;
    /// Base-table columns this view transitively reads.
    std::vector<std::pair<std::string, std::string>> baseColumns;
};

struct TriggerDef {
    std::string name;
    CreateTriggerStmt stmt;
};

struct ProcedureDef {
    std::string name;
    CreateProcedureStmt stmt;
};

/// Append-only versioned schema catalog. Every DDL application records a new
/// version entry; lookups are "as of" a commit position, so earlier states
/// stay retrievable after later DDL.
class Catalog {
public:
    void apply(const Statement &stmt, uint64_t idx) { applyAt(stmt, posOf(idx)); }
    void applyAt(const Statement &stmt, Pos pos);

    /// Removes all version entries recorded exactly at `pos` (used when a DDL
    /// statement is retroactively removed from history).
    void eraseEntriesAt(Pos pos);

    const TableSchema *tableAt(const std::string &name, Pos pos) const;
    const ViewDef *viewAt(const std::string &name, Pos pos) const;
    const ProcedureDef *procedureAt(const std::string &name, Pos pos) const;

    bool triggerAliveAt(const std::string &name, Pos pos) const;
    const TriggerDef *triggerDef(const std::string &name) const;
    /// Triggers alive at `pos` linked to `table` with the given event.
    std::vector<const TriggerDef *> triggersFor(const std::string &table, TriggerEvent event,
                                                Pos pos) const;
    /// All trigger names ever defined.
    std::vector<std::string> allTriggerNames() const;
    /// Trigger lifecycle events (pos, alive) in order.
    const std::vector<std::pair<Pos, bool>> *triggerEvents(const std::string &name) const;

    std::vector<std::string> tablesAliveAt(Pos pos) const;
    std::vector<std::string> viewsAliveAt(Pos pos) const;

    bool isView(const std::string &name, Pos pos) const;

private:
    template <class T>
    using Chain = std::vector<std::pair<Pos, std::shared_ptr<const T>>>;

    template <class T>
    static const T *lookup(const std::map<std::string, Chain<T>> &chains,
                           const std::string &name, Pos pos);

    std::map<std::string, Chain<TableSchema>> _tables;
    std::map<std::string, Chain<ViewDef>> _views;
    std::map<std::string, Chain<ProcedureDef>> _procedures;
    std::map<std::string, std::shared_ptr<const TriggerDef>> _triggerDefs;
    std::map<std::string, std::vector<std::pair<Pos, bool>>> _triggerEvents;
};

} // namespace retro::sql
