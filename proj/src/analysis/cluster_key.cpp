#include "retro/analysis/cluster_key.hpp"

#include <algorithm>
#include <functional>

namespace retro::analysis {

using namespace retro::sql;

bool ClusterKey::overlaps(const ClusterKey &other) const {
    if (originTable != other.originTable || originColumn != other.originColumn) {
        return false;
    }
    return lo.compareTotal(other.hi) <= 0 && other.lo.compareTotal(hi) <= 0;
}

void ClusterKeySet::addPoint(const std::string &table, const std::string &column,
                             const Value &v) {
    addRange(table, column, v, v);
}

void ClusterKeySet::addRange(const std::string &table, const std::string &column, const Value &lo,
                             const Value &hi) {
    if (universal) {
        return;
    }
    ClusterKey key{table, column, lo, hi};
    if (std::find(keys.begin(), keys.end(), key) == keys.end()) {
        keys.push_back(std::move(key));
    }
}

void ClusterKeySet::unionWith(const ClusterKeySet &other) {
    if (other.universal) {
        universal = true;
        keys.clear();
        return;
    }
    if (universal) {
        return;
    }
    deferred = deferred || other.deferred;
    for (const auto &key : other.keys) {
        if (std::find(keys.begin(), keys.end(), key) == keys.end()) {
            keys.push_back(key);
        }
    }
}

bool ClusterKeySet::intersects(const ClusterKeySet &other) const {
    if (universal || other.universal) {
        return true;
    }
    for (const auto &a : keys) {
        for (const auto &b : other.keys) {
            if (a.overlaps(b)) {
                return true;
            }
        }
    }
    return false;
}

bool AliasMap::record(const ColumnId &column, const Value &aliasValue, const Value &originValue) {
    auto &forColumn = _map[column];
    auto it = forColumn.find(aliasValue);
    if (it != forColumn.end()) {
        return it->second == originValue;
    }
    forColumn.emplace(aliasValue, originValue);
    return true;
}

std::optional<Value> AliasMap::translate(const ColumnId &column, const Value &aliasValue) const {
    auto it = _map.find(column);
    if (it == _map.end()) {
        return std::nullopt;
    }
    auto v = it->second.find(aliasValue);
    if (v == it->second.end()) {
        return std::nullopt;
    }
    return v->second;
}

const SchemeColumn *ClusterScheme::find(const std::string &table,
                                        const std::string &column) const {
    for (const auto &col : columns) {
        if (col.table == table && col.column == column) {
            return &col;
        }
    }
    return nullptr;
}

std::vector<const SchemeColumn *> ClusterScheme::columnsOf(const std::string &table) const {
    std::vector<const SchemeColumn *> out;
    for (const auto &col : columns) {
        if (col.table == table) {
            out.push_back(&col);
        }
    }
    return out;
}

std::vector<const SchemeColumn *> ClusterScheme::keyColumns() const {
    std::vector<const SchemeColumn *> out;
    for (const auto &col : columns) {
        if (col.kind == SchemeColKind::Key) {
            out.push_back(&col);
        }
    }
    return out;
}

namespace {

class KExtractor {
public:
    KExtractor(const Catalog &catalog, Pos pos, const ClusterScheme &scheme,
               const AliasMap &aliasMap)
        : _catalog(catalog), _pos(pos), _scheme(scheme), _aliasMap(aliasMap) {}

    ClusterKeySet extract(const Statement &stmt) {
        std::map<std::string, Value> params;
        visit(stmt, params, "");
        if (_universal) {
            return ClusterKeySet::universalSet();
        }
        if (_deferred) {
            return ClusterKeySet::deferredSet();
        }
        return std::move(_keys);
    }

private:
    const Catalog &_catalog;
    Pos _pos;
    const ClusterScheme &_scheme;
    const AliasMap &_aliasMap;
    ClusterKeySet _keys;
    bool _universal = false;
    bool _deferred = false;
    int _depth = 0;

    std::string baseOf(std::string relation) const {
        while (const ViewDef *view = _catalog.viewAt(relation, _pos)) {
            relation = view->select.fromTable;
        }
        return relation;
    }

    /// Resolves a raw value observed on a scheme column to the origin key
    /// value; nullopt when the alias mapping is unknown.
    std::optional<Value> resolve(const SchemeColumn &column, const Value &value) const {
        if (column.kind == SchemeColKind::Key) {
            return value;
        }
        if (column.kind == SchemeColKind::Alias) {
            return _aliasMap.translate({column.table, column.column}, value);
        }
        const SchemeColumn *parent = _scheme.find(column.parentTable, column.parentColumn);
        if (parent == nullptr) {
            return std::nullopt;
        }
        return resolve(*parent, value);
    }

    void harvest(const SchemeColumn &column, const Value &value, bool &pinned) {
        auto origin = resolve(column, value);
        if (!origin.has_value()) {
            _universal = true;
            return;
        }
        _keys.addPoint(column.originTable, column.originColumn, *origin);
        pinned = true;
    }

    void harvestRange(const SchemeColumn &column, const Value &lo, const Value &hi,
                      bool &pinned) {
        // Alias translation is not order-preserving; ranges only pin on pure
        // FK chains.
        if (column.viaAlias) {
            _universal = true;
            return;
        }
        _keys.addRange(column.originTable, column.originColumn, lo, hi);
        pinned = true;
    }

    /// A value expression that is statically concrete: literal or an
    /// untransformed bound parameter.
    std::optional<Value> concreteValue(const Expr &expr,
                                       const std::map<std::string, Value> &params) const {
        if (expr.kind == ExprKind::Literal) {
            return expr.literal;
        }
        if (expr.kind == ExprKind::Var) {
            auto it = params.find(expr.name);
            if (it != params.end()) {
                return it->second;
            }
        }
        return std::nullopt;
    }

    /// NEW./OLD. reference to a scheme column of the trigger's linked table
    /// pins without contributing keys (the linked statement's own pins cover
    /// the same rows).
    bool inheritedPin(const Expr &expr, const std::string &triggerTable) const {
        if (triggerTable.empty()) {
            return false;
        }
        if (expr.kind != ExprKind::NewRef && expr.kind != ExprKind::OldRef) {
            return false;
        }
        return _scheme.find(triggerTable, expr.column) != nullptr;
    }

    struct TableState {
        bool accessed = false;
        bool pinned = false;
    };

    using PinMap = std::map<std::string, TableState>;

    void access(PinMap &pins, const std::string &relation) {
        std::string base = baseOf(relation);
        if (_scheme.coveredTables.count(base)) {
            pins[base].accessed = true;
        } else if (!_scheme.staticTables.count(base)) {
            // Window-mutable table outside every covered flow group: row
            // overlap there is invisible to the scheme.
            _universal = true;
        }
    }

    void scanPredicate(const Expr &expr, PinMap &pins,
                       const std::map<std::string, Value> &params,
                       const std::string &triggerTable) {
        if (_universal || expr.kind != ExprKind::Binary) {
            return;
        }
        switch (expr.op) {
        case BinOp::And:
        case BinOp::Or: {
            // OR requires both branches to pin on their own; track by running
            // branches against fresh pin copies.
            if (expr.op == BinOp::And) {
                scanPredicate(expr.args[0], pins, params, triggerTable);
                scanPredicate(expr.args[1], pins, params, triggerTable);
                return;
            }
            PinMap left = pins, right = pins;
            scanPredicate(expr.args[0], left, params, triggerTable);
            scanPredicate(expr.args[1], right, params, triggerTable);
            for (auto &[table, state] : pins) {
                bool l = left.count(table) && left[table].pinned;
                bool r = right.count(table) && right[table].pinned;
                state.pinned = state.pinned || (l && r);
            }
            return;
        }
        case BinOp::Eq: {
            const Expr &lhs = expr.args[0];
            const Expr &rhs = expr.args[1];
            for (int side = 0; side < 2; ++side) {
                const Expr &col = side == 0 ? lhs : rhs;
                const Expr &val = side == 0 ? rhs : lhs;
                if (col.kind != ExprKind::Column) {
                    continue;
                }
                std::string base = baseOf(col.table);
                const SchemeColumn *scheme = _scheme.find(base, col.column);
                if (scheme == nullptr) {
                    continue;
                }
                if (auto v = concreteValue(val, params)) {
                    bool pinned = false;
                    harvest(*scheme, *v, pinned);
                    if (pinned) {
                        pins[base].pinned = true;
                    }
                } else if (inheritedPin(val, triggerTable)) {
                    pins[base].pinned = true;
                } else if (val.kind == ExprKind::Column) {
                    // Join-style equality between two scheme columns of the
                    // same origin: pin propagates (handled by caller fixpoint
                    // through _joins).
                    std::string otherBase = baseOf(val.table);
                    const SchemeColumn *other = _scheme.find(otherBase, val.column);
                    if (other != nullptr && other->originTable == scheme->originTable &&
                        other->originColumn == scheme->originColumn) {
                        _joins.emplace_back(base, otherBase);
                    } else {
                        _universal = true;
                    }
                } else {
                    // Runtime-dependent binding on a key column.
                    _universal = true;
                }
                return;
            }
            return;
        }
        case BinOp::In: {
            const Expr &lhs = expr.args[0];
            if (lhs.kind != ExprKind::Column) {
                return;
            }
            std::string base = baseOf(lhs.table);
            const SchemeColumn *scheme = _scheme.find(base, lhs.column);
            if (scheme == nullptr) {
                return;
            }
            bool pinned = true;
            for (size_t i = 1; i < expr.args.size() && !_universal; ++i) {
                auto v = concreteValue(expr.args[i], params);
                if (!v.has_value()) {
                    _universal = true;
                    return;
                }
                bool itemPinned = false;
                harvest(*scheme, *v, itemPinned);
                pinned = pinned && itemPinned;
            }
            if (pinned) {
                pins[base].pinned = true;
            }
            return;
        }
        case BinOp::Between: {
            const Expr &lhs = expr.args[0];
            if (lhs.kind != ExprKind::Column) {
                return;
            }
            std::string base = baseOf(lhs.table);
            const SchemeColumn *scheme = _scheme.find(base, lhs.column);
            if (scheme == nullptr) {
                return;
            }
            auto lo = concreteValue(expr.args[1], params);
            auto hi = concreteValue(expr.args[2], params);
            if (!lo || !hi) {
                _universal = true;
                return;
            }
            bool pinned = false;
            harvestRange(*scheme, *lo, *hi, pinned);
            if (pinned) {
                pins[base].pinned = true;
            }
            return;
        }
        case BinOp::Lt:
        case BinOp::Le:
        case BinOp::Gt:
        case BinOp::Ge: {
            // Ordered comparisons cannot guarantee row disjointness on a key
            // column.
            for (int side = 0; side < 2; ++side) {
                const Expr &col = expr.args[side];
                if (col.kind == ExprKind::Column &&
                    _scheme.find(baseOf(col.table), col.column) != nullptr) {
                    _universal = true;
                }
            }
            return;
        }
        default:
            return;
        }
    }

    void finishStatement(PinMap &pins) {
        // Propagate pins across scheme-column join equalities.
        bool changed = true;
        while (changed) {
            changed = false;
            for (const auto &[a, b] : _joins) {
                bool pa = pins.count(a) && pins[a].pinned;
                bool pb = pins.count(b) && pins[b].pinned;
                if (pa != pb) {
                    pins[pa ? b : a].pinned = true;
                    changed = true;
                }
            }
        }
        _joins.clear();
        for (const auto &[table, state] : pins) {
            if (state.accessed && !state.pinned) {
                _universal = true;
            }
        }
    }

    std::vector<std::pair<std::string, std::string>> _joins;

    void visitSelectSources(const SelectStmt &select, PinMap &pins,
                            const std::map<std::string, Value> &params,
                            const std::string &triggerTable) {
        if (select.fromTable.empty()) {
            return;
        }
        access(pins, select.fromTable);
        for (const auto &join : select.joins) {
            access(pins, join.table);
            scanPredicate(join.on, pins, params, triggerTable);
        }
        if (select.where) {
            scanPredicate(*select.where, pins, params, triggerTable);
        }
    }

    void visitTriggers(const std::string &relation, TriggerEvent event,
                       std::map<std::string, Value> &params) {
        std::string base = baseOf(relation);
        for (const TriggerDef *trigger : _catalog.triggersFor(base, event, _pos)) {
            if (_depth > 8) {
                continue;
            }
            ++_depth;
            for (const Statement &inner : trigger->stmt.body) {
                visit(inner, params, base);
            }
            --_depth;
        }
    }

    void visit(const Statement &stmt, std::map<std::string, Value> &params,
               const std::string &triggerTable) {
        if (_universal) {
            return;
        }
        switch (stmt.kind) {
        case StatementKind::CreateTable:
        case StatementKind::AlterTable:
        case StatementKind::DropTable:
        case StatementKind::TruncateTable:
        case StatementKind::CreateView:
        case StatementKind::DropView:
        case StatementKind::CreateTrigger:
        case StatementKind::DropTrigger:
            _deferred = true;
            return;
        case StatementKind::CreateProcedure:
            return; // registers code, touches no rows
        case StatementKind::Select: {
            PinMap pins;
            const auto &select = stmt.as<SelectStmt>();
            visitSelectSources(select, pins, params, triggerTable);
            finishStatement(pins);
            return;
        }
        case StatementKind::Insert: {
            const auto &insert = stmt.as<InsertStmt>();
            PinMap pins;
            std::string base = baseOf(insert.table);
            access(pins, insert.table);
            std::vector<std::string> targetColumns = insert.columns;
            if (targetColumns.empty()) {
                if (const ViewDef *view = _catalog.viewAt(insert.table, _pos)) {
                    for (const auto &col : view->outputColumns) targetColumns.push_back(col.name);
                } else if (const TableSchema *schema = _catalog.tableAt(insert.table, _pos)) {
                    for (const auto &col : schema->columns) targetColumns.push_back(col.name);
                }
            }
            for (const auto &row : insert.rows) {
                bool rowPinned = false;
                for (size_t i = 0; i < row.size() && i < targetColumns.size(); ++i) {
                    const SchemeColumn *scheme = _scheme.find(base, targetColumns[i]);
                    if (scheme == nullptr) {
                        continue;
                    }
                    if (auto v = concreteValue(row[i], params)) {
                        harvest(*scheme, *v, rowPinned);
                    } else if (inheritedPin(row[i], triggerTable)) {
                        rowPinned = true;
                    } else {
                        _universal = true; // derived value lands on a key column
                    }
                }
                // A row with no harvestable key leaves the table unpinned; the
                // accessed-unpinned rule in finishStatement then forces
                // Universal for covered tables.
                if (rowPinned) {
                    pins[base].pinned = true;
                }
            }
            if (insert.select) {
                visitSelectSources(*insert.select, pins, params, triggerTable);
                // Key-carrying target columns must be fed by literals (already
                // harvested via select items below) or direct copies of scheme
                // columns; anything derived is unpinnable.
                bool flowOk = true;
                if (!insert.select->star) {
                    for (size_t i = 0; i < insert.select->items.size() &&
                                       i < targetColumns.size();
                         ++i) {
                        const SchemeColumn *scheme = _scheme.find(base, targetColumns[i]);
                        if (scheme == nullptr) {
                            continue;
                        }
                        const Expr &item = insert.select->items[i].expr;
                        if (auto v = concreteValue(item, params)) {
                            bool pinned = false;
                            harvest(*scheme, *v, pinned);
                        } else if (item.kind == ExprKind::Column &&
                                   _scheme.find(baseOf(item.table), item.column) != nullptr) {
                            // direct copy of a scheme column: covered by the
                            // read side's pins
                        } else {
                            flowOk = false;
                        }
                    }
                }
                if (!flowOk) {
                    _universal = true;
                } else {
                    // Write side pinned by flow when every read table pinned.
                    bool sourcesPinned = true;
                    for (const auto &[table, state] : pins) {
                        if (table != base && state.accessed && !state.pinned) {
                            sourcesPinned = false;
                        }
                    }
                    if (sourcesPinned) {
                        pins[base].pinned = true;
                    }
                }
            }
            finishStatement(pins);
            if (!_universal) {
                visitTriggers(insert.table, TriggerEvent::Insert, params);
            }
            return;
        }
        case StatementKind::Update: {
            const auto &update = stmt.as<UpdateStmt>();
            PinMap pins;
            std::string base = baseOf(update.table);
            access(pins, update.table);
            for (const auto &[column, expr] : update.assignments) {
                const SchemeColumn *scheme = _scheme.find(base, column);
                if (scheme != nullptr) {
                    if (auto v = concreteValue(expr, params)) {
                        bool pinned = false;
                        harvest(*scheme, *v, pinned);
                        if (pinned) {
                            pins[base].pinned = true;
                        }
                    } else if (!inheritedPin(expr, triggerTable)) {
                        // Rewriting a key column to a derived value re-maps
                        // cluster membership.
                        _universal = true;
                    }
                }
            }
            if (update.where) {
                scanPredicate(*update.where, pins, params, triggerTable);
            }
            finishStatement(pins);
            if (!_universal) {
                visitTriggers(update.table, TriggerEvent::Update, params);
            }
            return;
        }
        case StatementKind::Delete: {
            const auto &del = stmt.as<DeleteStmt>();
            PinMap pins;
            access(pins, del.table);
            if (del.where) {
                scanPredicate(*del.where, pins, params, triggerTable);
            }
            finishStatement(pins);
            if (!_universal) {
                visitTriggers(del.table, TriggerEvent::Delete, params);
            }
            return;
        }
        case StatementKind::TransactionBlock:
            for (const Statement &inner : stmt.as<TransactionStmt>().statements) {
                visit(inner, params, triggerTable);
            }
            return;
        case StatementKind::CallProcedure: {
            const auto &call = stmt.as<CallStmt>();
            const ProcedureDef *proc = _catalog.procedureAt(call.procedure, _pos);
            if (proc == nullptr) {
                _universal = true;
                return;
            }
            std::map<std::string, Value> bound;
            for (size_t i = 0; i < proc->stmt.params.size() && i < call.args.size(); ++i) {
                if (call.args[i].kind == ExprKind::Literal) {
                    bound[proc->stmt.params[i].name] = call.args[i].literal;
                }
            }
            // Parameters reassigned anywhere in the body (any branch) are
            // tainted and stop pinning.
            std::set<std::string> tainted;
            collectAssignedVars(proc->stmt.body, tainted);
            for (const auto &name : tainted) {
                bound.erase(name);
            }
            if (_depth > 8) {
                return;
            }
            ++_depth;
            for (const Statement &inner : proc->stmt.body) {
                visit(inner, bound, triggerTable);
            }
            --_depth;
            return;
        }
        case StatementKind::Declare: {
            const auto &decl = stmt.as<DeclareStmt>();
            if (decl.init && decl.init->kind == ExprKind::Literal) {
                params[decl.var] = decl.init->literal;
            }
            return;
        }
        case StatementKind::SetVar:
            params.erase(stmt.as<SetVarStmt>().var);
            return;
        case StatementKind::If: {
            const auto &branch = stmt.as<IfStmt>();
            for (const Statement &inner : branch.thenBlock) {
                visit(inner, params, triggerTable);
            }
            for (const Statement &inner : branch.elseBlock) {
                visit(inner, params, triggerTable);
            }
            return;
        }
        case StatementKind::Signal:
            return;
        }
    }

    std::vector<const SchemeColumn *> schemeColumnsAmong(const std::string &table,
                                                         const std::vector<std::string> &names) {
        std::vector<const SchemeColumn *> out;
        for (const auto &name : names) {
            if (const SchemeColumn *scheme = _scheme.find(table, name)) {
                out.push_back(scheme);
            }
        }
        return out;
    }

    static void collectAssignedVars(const std::vector<Statement> &body,
                                    std::set<std::string> &out) {
        for (const Statement &stmt : body) {
            switch (stmt.kind) {
            case StatementKind::SetVar:
                out.insert(stmt.as<SetVarStmt>().var);
                break;
            case StatementKind::Select:
                for (const auto &var : stmt.as<SelectStmt>().intoVars) {
                    out.insert(var);
                }
                break;
            case StatementKind::If:
                collectAssignedVars(stmt.as<IfStmt>().thenBlock, out);
                collectAssignedVars(stmt.as<IfStmt>().elseBlock, out);
                break;
            default:
                break;
            }
        }
    }
};

} // namespace

ClusterKeySet extractK(const Statement &stmt, const Catalog &catalog, uint64_t atIdx,
                       const ClusterScheme &scheme, const AliasMap &aliasMap) {
    Pos pos = atIdx == 0 ? 0 : posOf(atIdx) - 1;
    KExtractor extractor(catalog, pos, scheme, aliasMap);
    return extractor.extract(stmt);
}

} // namespace retro::analysis
