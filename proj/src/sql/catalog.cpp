#include "retro/sql/catalog.hpp"

#include <algorithm>

#include "retro/errors.hpp"

namespace retro::sql {

int TableSchema::columnIndex(const std::string &column) const {
    for (size_t i = 0; i < columns.size(); ++i) {
        if (columns[i].name == column) {
            return static_cast<int>(i);
        }
    }
    return -1;
}

const ColumnDef *TableSchema::findColumn(const std::string &column) const {
    int i = columnIndex(column);
    return i < 0 ? nullptr : &columns[i];
}

int TableSchema::primaryKeyIndex() const {
    for (size_t i = 0; i < columns.size(); ++i) {
        if (columns[i].primaryKey) {
            return static_cast<int>(i);
        }
    }
    return -1;
}

template <class T>
const T *Catalog::lookup(const std::map<std::string, Chain<T>> &chains, const std::string &name,
                         Pos pos) {
    auto it = chains.find(name);
    if (it == chains.end()) {
        return nullptr;
    }
    const T *found = nullptr;
    for (const auto &[entryPos, value] : it->second) {
        if (entryPos > pos) {
            break;
        }
        found = value.get();
    }
    return found;
}

const TableSchema *Catalog::tableAt(const std::string &name, Pos pos) const {
    return lookup(_tables, name, pos);
}

const ViewDef *Catalog::viewAt(const std::string &name, Pos pos) const {
    return lookup(_views, name, pos);
}

const ProcedureDef *Catalog::procedureAt(const std::string &name, Pos pos) const {
    return lookup(_procedures, name, pos);
}

bool Catalog::triggerAliveAt(const std::string &name, Pos pos) const {
    auto it = _triggerEvents.find(name);
    if (it == _triggerEvents.end()) {
        return false;
    }
    bool alive = false;
    for (const auto &[entryPos, state] : it->second) {
        // A trigger is alive strictly after its creation commit.
        if (entryPos >= pos) {
            break;
        }
        alive = state;
    }
    return alive;
}

const TriggerDef *Catalog::triggerDef(const std::string &name) const {
    auto it = _triggerDefs.find(name);
    return it == _triggerDefs.end() ? nullptr : it->second.get();
}

std::vector<const TriggerDef *> Catalog::triggersFor(const std::string &table, TriggerEvent event,
                                                     Pos pos) const {
    std::vector<const TriggerDef *> out;
    for (const auto &[name, def] : _triggerDefs) {
        if (def->stmt.table == table && def->stmt.event == event && triggerAliveAt(name, pos)) {
            out.push_back(def.get());
        }
    }
    return out;
}

std::vector<std::string> Catalog::allTriggerNames() const {
    std::vector<std::string> out;
    out.reserve(_triggerDefs.size());
    for (const auto &[name, def] : _triggerDefs) {
        out.push_back(name);
    }
    return out;
}

const std::vector<std::pair<Pos, bool>> *Catalog::triggerEvents(const std::string &name) const {
    auto it = _triggerEvents.find(name);
    return it == _triggerEvents.end() ? nullptr : &it->second;
}

std::vector<std::string> Catalog::tablesAliveAt(Pos pos) const {
    std::vector<std::string> out;
    for (const auto &[name, chain] : _tables) {
        if (lookup(_tables, name, pos) != nullptr) {
            out.push_back(name);
        }
    }
    return out;
}

std::vector<std::string> Catalog::viewsAliveAt(Pos pos) const {
    std::vector<std::string> out;
    for (const auto &[name, chain] : _views) {
        if (lookup(_views, name, pos) != nullptr) {
            out.push_back(name);
        }
    }
    return out;
}

bool Catalog::isView(const std::string &name, Pos pos) const {
    return viewAt(name, pos) != nullptr;
}

namespace {

// Transitively resolved base columns read by a view's select.
std::vector<std::pair<std::string, std::string>> resolveBaseColumns(const Catalog &catalog,
                                                                    const SelectStmt &select,
                                                                    Pos pos) {
    std::set<std::pair<std::string, std::string>> base;
    auto addSource = [&](const std::string &table, const std::string &column) {
        if (const ViewDef *view = catalog.viewAt(table, pos)) {
            if (column.empty()) {
                base.insert(view->baseColumns.begin(), view->baseColumns.end());
                return;
            }
            // A view output column maps onto the underlying expression's
            // columns; conservatively take all of the view's base columns.
            base.insert(view->baseColumns.begin(), view->baseColumns.end());
            return;
        }
        if (const TableSchema *schema = catalog.tableAt(table, pos)) {
            if (column.empty()) {
                for (const auto &col : schema->columns) {
                    base.insert({table, col.name});
                }
            } else {
                base.insert({table, column});
            }
        }
    };
    if (select.fromTable.empty()) {
        return {};
    }
    if (select.star) {
        addSource(select.fromTable, "");
    }
    std::vector<const Expr *> stack;
    for (const auto &item : select.items) stack.push_back(&item.expr);
    if (select.where) stack.push_back(&*select.where);
    while (!stack.empty()) {
        const Expr *e = stack.back();
        stack.pop_back();
        if (e->kind == ExprKind::Column) {
            addSource(e->table, e->column);
        }
        for (const auto &arg : e->args) stack.push_back(&arg);
    }
    return {base.begin(), base.end()};
}

std::vector<ColumnDef> viewOutputColumns(const Catalog &catalog, const SelectStmt &select,
                                         Pos pos) {
    std::vector<ColumnDef> out;
    auto columnsOf = [&](const std::string &name) -> std::vector<ColumnDef> {
        if (const ViewDef *view = catalog.viewAt(name, pos)) {
            return view->outputColumns;
        }
        if (const TableSchema *schema = catalog.tableAt(name, pos)) {
            return schema->columns;
        }
        return {};
    };
    if (select.star) {
        for (auto col : columnsOf(select.fromTable)) {
            col.primaryKey = false;
            col.autoIncrement = false;
            col.unique = false;
            out.push_back(col);
        }
        return out;
    }
    for (const auto &item : select.items) {
        ColumnDef col;
        col.name = !item.alias.empty()
                       ? item.alias
                       : (item.expr.kind == ExprKind::Column ? item.expr.column : "expr");
        col.type = ValueType::Int64;
        if (item.expr.kind == ExprKind::Column) {
            for (const auto &src : columnsOf(item.expr.table)) {
                if (src.name == item.expr.column) {
                    col.type = src.type;
                    col.decimalScale = src.decimalScale;
                }
            }
        } else if (item.expr.kind == ExprKind::Literal) {
            col.type = item.expr.literal.type();
            col.decimalScale = item.expr.literal.scale();
        }
        out.push_back(col);
    }
    return out;
}

} // namespace

void Catalog::applyAt(const Statement &stmt, Pos pos) {
    switch (stmt.kind) {
    case StatementKind::CreateTable: {
        const auto &create = stmt.as<CreateTableStmt>();
        if (tableAt(create.table, kPosMax) != nullptr || viewAt(create.table, kPosMax) != nullptr) {
            // Name currently in use (a dropped table may be re-created).
            if (tableAt(create.table, pos) != nullptr || viewAt(create.table, pos) != nullptr) {
                raise(ErrorKind::DuplicateName, "table or view already exists: " + create.table);
            }
        }
        for (const auto &fk : create.foreignKeys) {
            const TableSchema *ref = tableAt(fk.refTable, pos);
            if (ref == nullptr || ref->findColumn(fk.refColumn) == nullptr) {
                raise(ErrorKind::UnresolvedName,
                      "foreign key target " + fk.refTable + "." + fk.refColumn + " not found");
            }
        }
        auto schema = std::make_shared<TableSchema>();
        schema->name = create.table;
        schema->columns = create.columns;
        schema->foreignKeys = create.foreignKeys;
        schema->checks = create.checks;
        _tables[create.table].emplace_back(pos, std::move(schema));
        break;
    }
    case StatementKind::AlterTable: {
        const auto &alter = stmt.as<AlterTableStmt>();
        const TableSchema *current = tableAt(alter.table, pos);
        if (current == nullptr) {
            raise(ErrorKind::UnresolvedName, "table not found: " + alter.table);
        }
        auto schema = std::make_shared<TableSchema>(*current);
        switch (alter.action) {
        case AlterAction::AddColumn:
            if (schema->findColumn(alter.column.name) != nullptr) {
                raise(ErrorKind::DuplicateName,
                      "column already exists: " + alter.table + "." + alter.column.name);
            }
            schema->columns.push_back(alter.column);
            break;
        case AlterAction::AddForeignKey: {
            const TableSchema *ref = tableAt(alter.foreignKey.refTable, pos);
            if (ref == nullptr || ref->findColumn(alter.foreignKey.refColumn) == nullptr) {
                raise(ErrorKind::UnresolvedName, "foreign key target " + alter.foreignKey.refTable +
                                                     "." + alter.foreignKey.refColumn +
                                                     " not found");
            }
            if (schema->findColumn(alter.foreignKey.localColumn) == nullptr) {
                raise(ErrorKind::UnresolvedName,
                      "column not found: " + alter.table + "." + alter.foreignKey.localColumn);
            }
            schema->foreignKeys.push_back(alter.foreignKey);
            break;
        }
        case AlterAction::AddCheck:
            schema->checks.push_back(alter.check);
            break;
        }
        _tables[alter.table].emplace_back(pos, std::move(schema));
        break;
    }
    case StatementKind::DropTable: {
        const auto &drop = stmt.as<DropTableStmt>();
        if (tableAt(drop.table, pos) == nullptr) {
            raise(ErrorKind::DropMissing, "table not found: " + drop.table);
        }
        _tables[drop.table].emplace_back(pos, nullptr);
        break;
    }
    case StatementKind::CreateView: {
        const auto &create = stmt.as<CreateViewStmt>();
        bool exists = viewAt(create.view, pos) != nullptr;
        if (!create.orReplace && (exists || tableAt(create.view, pos) != nullptr)) {
            raise(ErrorKind::DuplicateName, "table or view already exists: " + create.view);
        }
        if (tableAt(create.select.fromTable, pos) == nullptr &&
            viewAt(create.select.fromTable, pos) == nullptr) {
            raise(ErrorKind::UnresolvedName, "view source not found: " + create.select.fromTable);
        }
        auto view = std::make_shared<ViewDef>();
        view->name = create.view;
        view->select = create.select;
        view->outputColumns = viewOutputColumns(*this, create.select, pos);
        view->baseColumns = resolveBaseColumns(*this, create.select, pos);
        _views[create.view].emplace_back(pos, std::move(view));
        break;
    }
    case StatementKind::DropView: {
        const auto &drop = stmt.as<DropViewStmt>();
        if (viewAt(drop.view, pos) == nullptr) {
            raise(ErrorKind::DropMissing, "view not found: " + drop.view);
        }
        _views[drop.view].emplace_back(pos, nullptr);
        break;
    }
    case StatementKind::CreateTrigger: {
        const auto &create = stmt.as<CreateTriggerStmt>();
        if (triggerAliveAt(create.name, pos) ||
            (_triggerDefs.count(create.name) && triggerAliveAt(create.name, kPosMax))) {
            if (triggerAliveAt(create.name, pos)) {
                raise(ErrorKind::DuplicateName, "trigger already exists: " + create.name);
            }
        }
        if (tableAt(create.table, pos) == nullptr) {
            raise(ErrorKind::UnresolvedName, "trigger table not found: " + create.table);
        }
        auto def = std::make_shared<TriggerDef>();
        def->name = create.name;
        def->stmt = create;
        _triggerDefs[create.name] = std::move(def);
        _triggerEvents[create.name].emplace_back(pos, true);
        break;
    }
    case StatementKind::DropTrigger: {
        const auto &drop = stmt.as<DropTriggerStmt>();
        if (!triggerAliveAt(drop.name, pos + 1)) {
            raise(ErrorKind::DropMissing, "trigger not found: " + drop.name);
        }
        _triggerEvents[drop.name].emplace_back(pos, false);
        break;
    }
    case StatementKind::CreateProcedure: {
        const auto &create = stmt.as<CreateProcedureStmt>();
        if (procedureAt(create.name, pos) != nullptr) {
            raise(ErrorKind::DuplicateName, "procedure already exists: " + create.name);
        }
        auto def = std::make_shared<ProcedureDef>();
        def->name = create.name;
        def->stmt = create;
        _procedures[create.name].emplace_back(pos, std::move(def));
        break;
    }
    case StatementKind::TruncateTable: {
        // No schema change.
        break;
    }
    default:
        raise(ErrorKind::Internal,
              std::string("not a DDL statement: ") + statementKindName(stmt.kind));
    }
}

void Catalog::eraseEntriesAt(Pos pos) {
    auto purgeChainMap = [pos](auto &chains) {
        for (auto &[name, chain] : chains) {
            std::erase_if(chain, [pos](const auto &entry) { return entry.first == pos; });
        }
    };
    purgeChainMap(_tables);
    purgeChainMap(_views);
    purgeChainMap(_procedures);
    for (auto &[name, events] : _triggerEvents) {
        std::erase_if(events, [pos](const auto &entry) { return entry.first == pos; });
    }
}

} // namespace retro::sql
