#pragma once

#include <compare>
#include <set>
#include <string>

#include "retro/sql/catalog.hpp"
#include "retro/sql/log.hpp"

namespace retro::analysis {

/// A column reference; allColumns marks "t.*", expanded before graph
/// construction.
struct ColumnRef {
    std::string table;
    std::string column;
    bool allColumns = false;

    auto operator<=>(const ColumnRef &) const = default;

    static ColumnRef of(std::string table, std::string column) {
        return {std::move(table), std::move(column), false};
    }
    static ColumnRef all(std::string table) { return {std::move(table), "", true}; }
    std::string display() const { return table + "." + (allColumns ? "*" : column); }
};

struct RWSet {
    std::set<ColumnRef> reads;
    std::set<ColumnRef> writes;

    bool operator==(const RWSet &) const = default;
};

/// Column-level read/write sets per the per-statement-type policy: FK read
/// edges, FK write propagation for updated/deleted FK-target columns, view
/// cascades to base columns, both IF branches merged, trigger bodies folded
/// into linked statements over the trigger's alive interval.
RWSet extractRw(const sql::Statement &stmt, const sql::Catalog &catalog, uint64_t atIdx);

/// Replaces every t.* marker with the relation's concrete columns; idempotent.
RWSet expandWildcards(const RWSet &rw, const sql::Catalog &catalog, uint64_t atIdx);

} // namespace retro::analysis
