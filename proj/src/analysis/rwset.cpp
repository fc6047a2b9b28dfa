#include "retro/analysis/rwset.hpp"

#include <functional>

#include "retro/errors.hpp"

namespace retro::analysis {

using namespace retro::sql;

namespace {

class RwExtractor {
public:
    RwExtractor(const Catalog &catalog, Pos pos) : _catalog(catalog), _pos(pos) {}

    RWSet extract(const Statement &stmt) {
        visitStatement(stmt, "");
        return std::move(_rw);
    }

private:
    const Catalog &_catalog;
    Pos _pos;
    RWSet _rw;
    int _depth = 0;

    bool isView(const std::string &name) const { return _catalog.viewAt(name, _pos) != nullptr; }

    void read(ColumnRef ref) { _rw.reads.insert(std::move(ref)); }
    void write(ColumnRef ref) { _rw.writes.insert(std::move(ref)); }

    /// Reading a relation name cascades view reads down to base columns.
    void readAll(const std::string &relation) {
        read(ColumnRef::all(relation));
        if (const ViewDef *view = _catalog.viewAt(relation, _pos)) {
            for (const auto &[table, column] : view->baseColumns) {
                read(ColumnRef::of(table, column));
            }
        }
    }

    void readColumn(const std::string &relation, const std::string &column) {
        read(ColumnRef::of(relation, column));
        if (const ViewDef *view = _catalog.viewAt(relation, _pos)) {
            for (const auto &[table, col] : view->baseColumns) {
                read(ColumnRef::of(table, col));
            }
        }
        addFkRead(relation, column);
    }

    /// Writing through a view cascades to the base relation's columns.
    void writeAll(const std::string &relation) {
        write(ColumnRef::all(relation));
        if (const ViewDef *view = _catalog.viewAt(relation, _pos)) {
            writeAll(view->select.fromTable);
        }
    }

    void writeColumn(const std::string &relation, const std::string &column,
                     bool fkPropagation) {
        write(ColumnRef::of(relation, column));
        if (const ViewDef *view = _catalog.viewAt(relation, _pos)) {
            writeColumn(view->select.fromTable, column, fkPropagation);
            return;
        }
        if (fkPropagation) {
            propagateFkWrite(relation, column);
        }
    }

    /// Table A: accessing an FK column also reads the referenced column.
    void addFkRead(const std::string &relation, const std::string &column) {
        const TableSchema *schema = _catalog.tableAt(relation, _pos);
        if (schema == nullptr) {
            return;
        }
        for (const auto &fk : schema->foreignKeys) {
            if (fk.localColumn == column) {
                read(ColumnRef::of(fk.refTable, fk.refColumn));
            }
        }
    }

    void addFkReadsForAll(const std::string &relation) {
        const TableSchema *schema = _catalog.tableAt(relation, _pos);
        if (schema == nullptr) {
            return;
        }
        for (const auto &fk : schema->foreignKeys) {
            read(ColumnRef::of(fk.refTable, fk.refColumn));
        }
    }

    /// Table A UPDATE/DELETE: writes to an FK-target column propagate to the
    /// external FK columns referencing it.
    void propagateFkWrite(const std::string &table, const std::string &column) {
        for (const auto &other : _catalog.tablesAliveAt(_pos)) {
            const TableSchema *schema = _catalog.tableAt(other, _pos);
            if (schema == nullptr) {
                continue;
            }
            for (const auto &fk : schema->foreignKeys) {
                if (fk.refTable == table && (column.empty() || fk.refColumn == column)) {
                    write(ColumnRef::of(other, fk.localColumn));
                }
            }
        }
    }

    void readExpr(const Expr &expr, const std::string &triggerTable) {
        switch (expr.kind) {
        case ExprKind::Column:
            readColumn(expr.table, expr.column);
            return;
        case ExprKind::NewRef:
        case ExprKind::OldRef:
            if (!triggerTable.empty()) {
                readColumn(triggerTable, expr.column);
            }
            return;
        default:
            for (const auto &arg : expr.args) {
                readExpr(arg, triggerTable);
            }
            return;
        }
    }

    void readSelect(const SelectStmt &select, const std::string &triggerTable) {
        if (select.fromTable.empty()) {
            for (const auto &item : select.items) {
                readExpr(item.expr, triggerTable);
            }
            return;
        }
        if (select.star) {
            readAll(select.fromTable);
            for (const auto &join : select.joins) {
                readAll(join.table);
            }
        }
        for (const auto &item : select.items) {
            readExpr(item.expr, triggerTable);
        }
        for (const auto &join : select.joins) {
            readExpr(join.on, triggerTable);
        }
        if (select.where) {
            readExpr(*select.where, triggerTable);
        }
        for (const auto &key : select.orderBy) {
            readColumn(key.table, key.column);
        }
    }

    /// Folds the bodies of triggers alive at _pos linked to (table, event).
    void foldTriggers(const std::string &relation, TriggerEvent event) {
        std::string base = relation;
        while (const ViewDef *view = _catalog.viewAt(base, _pos)) {
            base = view->select.fromTable;
        }
        for (const TriggerDef *trigger : _catalog.triggersFor(base, event, _pos)) {
            if (_depth > 8) {
                continue;
            }
            ++_depth;
            for (const Statement &inner : trigger->stmt.body) {
                visitStatement(inner, base);
            }
            --_depth;
        }
    }

    void visitStatement(const Statement &stmt, const std::string &triggerTable) {
        switch (stmt.kind) {
        case StatementKind::CreateTable: {
            const auto &create = stmt.as<CreateTableStmt>();
            for (const auto &fk : create.foreignKeys) {
                read(ColumnRef::of(fk.refTable, fk.refColumn));
            }
            write(ColumnRef::all(create.table));
            return;
        }
        case StatementKind::AlterTable: {
            const auto &alter = stmt.as<AlterTableStmt>();
            if (alter.action == AlterAction::AddForeignKey) {
                read(ColumnRef::of(alter.foreignKey.refTable, alter.foreignKey.refColumn));
            }
            write(ColumnRef::all(alter.table));
            return;
        }
        case StatementKind::DropTable:
        case StatementKind::TruncateTable: {
            const std::string &table = stmt.kind == StatementKind::DropTable
                                           ? stmt.as<DropTableStmt>().table
                                           : stmt.as<TruncateTableStmt>().table;
            write(ColumnRef::all(table));
            propagateFkWrite(table, "");
            return;
        }
        case StatementKind::CreateView: {
            const auto &create = stmt.as<CreateViewStmt>();
            readAll(create.select.fromTable);
            readSelect(create.select, triggerTable);
            write(ColumnRef::all(create.view));
            return;
        }
        case StatementKind::DropView:
            write(ColumnRef::all(stmt.as<DropViewStmt>().view));
            return;
        case StatementKind::Select:
            readSelect(stmt.as<SelectStmt>(), triggerTable);
            return;
        case StatementKind::Insert: {
            const auto &insert = stmt.as<InsertStmt>();
            if (insert.select) {
                readSelect(*insert.select, triggerTable);
            }
            for (const auto &row : insert.rows) {
                for (const auto &expr : row) {
                    readExpr(expr, triggerTable);
                }
            }
            // FK reads for the written FK columns of the target.
            std::string base = insert.table;
            while (const ViewDef *view = _catalog.viewAt(base, _pos)) {
                base = view->select.fromTable;
            }
            addFkReadsForAll(base);
            writeAll(insert.table);
            foldTriggers(insert.table, TriggerEvent::Insert);
            return;
        }
        case StatementKind::Update: {
            const auto &update = stmt.as<UpdateStmt>();
            for (const auto &[column, expr] : update.assignments) {
                readExpr(expr, triggerTable);
                writeColumn(update.table, column, /*fkPropagation=*/true);
                addFkRead(update.table, column);
            }
            if (update.where) {
                readExpr(*update.where, triggerTable);
            }
            foldTriggers(update.table, TriggerEvent::Update);
            return;
        }
        case StatementKind::Delete: {
            const auto &del = stmt.as<DeleteStmt>();
            if (del.where) {
                readExpr(*del.where, triggerTable);
            }
            writeAll(del.table);
            std::string base = del.table;
            while (const ViewDef *view = _catalog.viewAt(base, _pos)) {
                base = view->select.fromTable;
            }
            propagateFkWrite(base, "");
            addFkReadsForAll(base);
            foldTriggers(del.table, TriggerEvent::Delete);
            return;
        }
        case StatementKind::CreateTrigger: {
            const auto &create = stmt.as<CreateTriggerStmt>();
            for (const Statement &inner : create.body) {
                visitStatement(inner, create.table);
            }
            return;
        }
        case StatementKind::DropTrigger: {
            const TriggerDef *def = _catalog.triggerDef(stmt.as<DropTriggerStmt>().name);
            if (def != nullptr) {
                Statement create;
                create.kind = StatementKind::CreateTrigger;
                create.payload = def->stmt;
                visitStatement(create, triggerTable);
            }
            return;
        }
        case StatementKind::TransactionBlock:
            for (const Statement &inner : stmt.as<TransactionStmt>().statements) {
                visitStatement(inner, triggerTable);
            }
            return;
        case StatementKind::CreateProcedure:
            for (const Statement &inner : stmt.as<CreateProcedureStmt>().body) {
                visitStatement(inner, triggerTable);
            }
            return;
        case StatementKind::CallProcedure: {
            const auto &call = stmt.as<CallStmt>();
            for (const auto &arg : call.args) {
                readExpr(arg, triggerTable);
            }
            const ProcedureDef *proc = _catalog.procedureAt(call.procedure, _pos);
            if (proc != nullptr && _depth <= 8) {
                ++_depth;
                for (const Statement &inner : proc->stmt.body) {
                    visitStatement(inner, triggerTable);
                }
                --_depth;
            }
            return;
        }
        case StatementKind::Declare: {
            const auto &decl = stmt.as<DeclareStmt>();
            if (decl.init) {
                readExpr(*decl.init, triggerTable);
            }
            return;
        }
        case StatementKind::SetVar:
            readExpr(stmt.as<SetVarStmt>().expr, triggerTable);
            return;
        case StatementKind::If: {
            // Both branches merged.
            const auto &branch = stmt.as<IfStmt>();
            readExpr(branch.condition, triggerTable);
            for (const Statement &inner : branch.thenBlock) {
                visitStatement(inner, triggerTable);
            }
            for (const Statement &inner : branch.elseBlock) {
                visitStatement(inner, triggerTable);
            }
            return;
        }
        case StatementKind::Signal:
            return;
        }
    }
};

} // namespace

RWSet extractRw(const Statement &stmt, const Catalog &catalog, uint64_t atIdx) {
    // Analysis sees the catalog as it stood just before the statement's own
    // commit (a DROP TABLE still resolves its target, later DDL is invisible).
    Pos pos = atIdx == 0 ? 0 : posOf(atIdx) - 1;
    RwExtractor extractor(catalog, pos);
    return extractor.extract(stmt);
}

RWSet expandWildcards(const RWSet &rw, const Catalog &catalog, uint64_t atIdx) {
    Pos pos = atIdx == 0 ? 0 : posOf(atIdx) - 1;
    auto expandSet = [&](const std::set<ColumnRef> &in) {
        std::set<ColumnRef> out;
        for (const auto &ref : in) {
            if (!ref.allColumns) {
                out.insert(ref);
                continue;
            }
            if (const ViewDef *view = catalog.viewAt(ref.table, pos)) {
                for (const auto &col : view->outputColumns) {
                    out.insert(ColumnRef::of(ref.table, col.name));
                }
                continue;
            }
            const TableSchema *schema = catalog.tableAt(ref.table, pos);
            if (schema == nullptr) {
                raise(ErrorKind::UnresolvedName, "relation not found expanding " + ref.table);
            }
            for (const auto &col : schema->columns) {
                out.insert(ColumnRef::of(ref.table, col.name));
            }
        }
        return out;
    };
    RWSet out;
    out.reads = expandSet(rw.reads);
    out.writes = expandSet(rw.writes);
    return out;
}

} // namespace retro::analysis
