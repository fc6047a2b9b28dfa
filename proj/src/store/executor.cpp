#include <algorithm>
#include <cassert>

#include "retro/errors.hpp"
#include "retro/sql/parser.hpp"
#include "retro/store/store.hpp"

namespace retro::store {

using namespace retro::sql;

int TableData::columnIndex(const std::string &name) const {
    for (size_t i = 0; i < columns.size(); ++i) {
        if (columns[i].name == name) {
            return static_cast<int>(i);
        }
    }
    return -1;
}

hash::U256 TableEffect::hashDelta() const {
    hash::U256 delta = hash::U256::zero();
    for (const Row &row : inserted) {
        delta += hash::rowHash(row, columnsAfter);
    }
    for (const Row &row : deleted) {
        delta -= hash::rowHash(row, columnsBefore);
    }
    return delta;
}

hash::U256 tableHash(const TableData &data) {
    hash::U256 h = hash::U256::zero();
    for (const Row &row : data.rows) {
        h += hash::rowHash(row, data.columns);
    }
    return h;
}

namespace {

// Internal statement/transaction abort; converted to ExecEffect.aborted.
struct AbortSignal {
    std::string reason;
};

uint64_t splitmix64(uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

class NondetSource {
public:
    NondetSource(const QueryRecord &record, const ExecOptions &options)
        : _record(record), _options(options) {}

    Value next(const std::string &fn) {
        Value out;
        if (_cursor < _record.nondet.size()) {
            const auto &recorded = _record.nondet[_cursor];
            out = concretize(fn, recorded.value);
        } else if (_options.mode == ExecMode::Replay && !_record.nondet.empty()) {
            throw AbortSignal{"NondetExhausted: statement calls more non-deterministic "
                              "functions than the log recorded"};
        } else {
            out = derive(fn);
        }
        sql::NondetValue used;
        used.fn = fn;
        used.seq = _cursor;
        used.value = out.toPlainString();
        _used.push_back(std::move(used));
        ++_cursor;
        return out;
    }

    std::vector<sql::NondetValue> takeUsed() { return std::move(_used); }

private:
    Value concretize(const std::string &fn, const std::string &text) const {
        if (fn == "RAND") {
            return Value::fromPlainString(ValueType::Int64, text);
        }
        return Value::timestamp(parseTimestamp(text));
    }

    Value derive(const std::string &fn) const {
        if (fn == "RAND") {
            uint64_t raw = splitmix64(_options.seed ^ (_record.idx * 0x51ed2701u) ^ _cursor);
            return Value::int64(static_cast<int64_t>(raw % 2147483647ULL));
        }
        // CURTIME()/NOW() concretize to the record's own timestamp.
        return Value::timestamp(_record.tsMicros);
    }

    const QueryRecord &_record;
    const ExecOptions &_options;
    uint32_t _cursor = 0;
    std::vector<sql::NondetValue> _used;
};

using VarScope = std::map<std::string, Value>;

struct RowBinding {
    std::string name; // relation name as written in the query
    const std::vector<ColumnDef> *columns = nullptr;
    const Row *row = nullptr;
};

struct EvalCtx {
    std::vector<RowBinding> bindings;
    VarScope *vars = nullptr;
    const Row *newRow = nullptr;
    const Row *oldRow = nullptr;
    const std::vector<ColumnDef> *triggerColumns = nullptr;
};

// One journal entry per primitive mutation, enough to undo an aborted block.
struct JournalOp {
    enum class Kind { InsertRow, DeleteRow, CreateTable, DropTable, AlterTable, Counter, Catalog };
    Kind kind;
    std::string table;
    Row row;
    TableData saved;
    std::string counterColumn;
    int64_t counterBefore = 0;
    Pos catalogPos = 0;
};

bool rowsEqual(const Row &a, const Row &b) { return a == b; }

void eraseOneRow(TableData &data, const Row &row) {
    for (auto it = data.rows.begin(); it != data.rows.end(); ++it) {
        if (rowsEqual(*it, row)) {
            data.rows.erase(it);
            return;
        }
    }
    raise(ErrorKind::Internal, "row to erase not present");
}

class ExecSession {
public:
    ExecSession(StorageView &view, const QueryRecord &record, const ExecOptions &options)
        : _view(view), _record(record), _options(options), _nondet(record, options) {}

    ExecEffect run() {
        try {
            VarScope vars;
            execStatement(_record.stmt, vars, nullptr);
        } catch (const AbortSignal &abort) {
            undoAll();
            _effect.tables.clear();
            _effect.aborted = true;
            _effect.abortReason = abort.reason;
        } catch (const Error &error) {
            // Runtime resolution/constraint failures abort the statement; the
            // store stays unchanged.
            undoAll();
            _effect.tables.clear();
            _effect.aborted = true;
            _effect.abortReason = error.what();
        }
        _effect.nondetUsed = _nondet.takeUsed();
        return std::move(_effect);
    }

private:
    StorageView &_view;
    const QueryRecord &_record;
    const ExecOptions &_options;
    NondetSource _nondet;
    ExecEffect _effect;
    std::vector<JournalOp> _journal;
    int _triggerDepth = 0;

    // -- effect & journal helpers ------------------------------------------

    TableEffect &effectFor(const std::string &table) {
        auto it = _effect.tables.find(table);
        if (it != _effect.tables.end()) {
            return it->second;
        }
        TableEffect effect;
        if (const TableData *data = _view.findTable(table)) {
            effect.columnsBefore = data->columns;
            effect.columnsAfter = data->columns;
            effect.countersBefore = data->autoCounter;
            effect.countersAfter = data->autoCounter;
        }
        return _effect.tables.emplace(table, std::move(effect)).first->second;
    }

    void journalCatalog(Pos pos) {
        JournalOp op;
        op.kind = JournalOp::Kind::Catalog;
        op.catalogPos = pos;
        _journal.push_back(std::move(op));
    }

    void undoAll() {
        for (auto it = _journal.rbegin(); it != _journal.rend(); ++it) {
            switch (it->kind) {
            case JournalOp::Kind::InsertRow:
                eraseOneRow(*_view.writableTable(it->table), it->row);
                break;
            case JournalOp::Kind::DeleteRow:
                _view.writableTable(it->table)->rows.push_back(it->row);
                break;
            case JournalOp::Kind::CreateTable:
                _view.dropTable(it->table);
                break;
            case JournalOp::Kind::DropTable:
            case JournalOp::Kind::AlterTable: {
                if (it->kind == JournalOp::Kind::AlterTable) {
                    _view.dropTable(it->table);
                }
                _view.createTable(it->table, it->saved);
                break;
            }
            case JournalOp::Kind::Counter: {
                TableData *data = _view.writableTable(it->table);
                data->autoCounter[it->counterColumn] = it->counterBefore;
                break;
            }
            case JournalOp::Kind::Catalog:
                _view.mutableCatalog().eraseEntriesAt(it->catalogPos);
                break;
            }
        }
        _journal.clear();
    }

    void insertRow(const std::string &table, Row row) {
        TableData *data = _view.writableTable(table);
        TableEffect &effect = effectFor(table);
        JournalOp op;
        op.kind = JournalOp::Kind::InsertRow;
        op.table = table;
        op.row = row;
        _journal.push_back(op);
        effect.inserted.push_back(row);
        data->rows.push_back(std::move(row));
    }

    void deleteRow(const std::string &table, const Row &row) {
        TableData *data = _view.writableTable(table);
        TableEffect &effect = effectFor(table);
        JournalOp op;
        op.kind = JournalOp::Kind::DeleteRow;
        op.table = table;
        op.row = row;
        _journal.push_back(op);
        // A delete cancels a pending insert of the same row so effects stay
        // exact against the pre-state.
        auto pending = std::find_if(effect.inserted.begin(), effect.inserted.end(),
                                    [&](const Row &r) { return rowsEqual(r, row); });
        if (pending != effect.inserted.end()) {
            effect.inserted.erase(pending);
        } else {
            effect.deleted.push_back(row);
        }
        eraseOneRow(*data, row);
    }

    void bumpCounter(const std::string &table, const std::string &column, int64_t value) {
        TableData *data = _view.writableTable(table);
        int64_t &counter = data->autoCounter[column];
        if (value <= counter) {
            return;
        }
        JournalOp op;
        op.kind = JournalOp::Kind::Counter;
        op.table = table;
        op.counterColumn = column;
        op.counterBefore = counter;
        _journal.push_back(op);
        counter = value;
        effectFor(table).countersAfter[column] = value;
    }

    // -- expression evaluation ---------------------------------------------

    Value evalExpr(const Expr &expr, const EvalCtx &ctx) {
        switch (expr.kind) {
        case ExprKind::Literal:
            return expr.literal;
        case ExprKind::Column: {
            for (const auto &binding : ctx.bindings) {
                if (binding.name == expr.table) {
                    for (size_t i = 0; i < binding.columns->size(); ++i) {
                        if ((*binding.columns)[i].name == expr.column) {
                            return (*binding.row)[i];
                        }
                    }
                }
            }
            throw AbortSignal{"column not bound: " + expr.table + "." + expr.column};
        }
        case ExprKind::Var: {
            if (ctx.vars == nullptr || !ctx.vars->count(expr.name)) {
                throw AbortSignal{"variable not bound: " + expr.name};
            }
            return ctx.vars->at(expr.name);
        }
        case ExprKind::NewRef:
        case ExprKind::OldRef: {
            const Row *row = expr.kind == ExprKind::NewRef ? ctx.newRow : ctx.oldRow;
            if (row == nullptr || ctx.triggerColumns == nullptr) {
                throw AbortSignal{"NEW/OLD outside trigger context"};
            }
            for (size_t i = 0; i < ctx.triggerColumns->size(); ++i) {
                if ((*ctx.triggerColumns)[i].name == expr.column) {
                    return (*row)[i];
                }
            }
            throw AbortSignal{"trigger column not found: " + expr.column};
        }
        case ExprKind::Func:
            return _nondet.next(expr.name);
        case ExprKind::Binary: {
            switch (expr.op) {
            case BinOp::Add:
                return evalExpr(expr.args[0], ctx).add(evalExpr(expr.args[1], ctx));
            case BinOp::Sub:
                return evalExpr(expr.args[0], ctx).sub(evalExpr(expr.args[1], ctx));
            case BinOp::Mul:
                return evalExpr(expr.args[0], ctx).mul(evalExpr(expr.args[1], ctx));
            case BinOp::Div:
                return evalExpr(expr.args[0], ctx).div(evalExpr(expr.args[1], ctx));
            default:
                return Value::int64(evalPredicate(expr, ctx) ? 1 : 0);
            }
        }
        case ExprKind::Aggregate:
        case ExprKind::Star:
            throw AbortSignal{"aggregate outside SELECT"};
        }
        throw AbortSignal{"unreachable expression kind"};
    }

    bool evalPredicate(const Expr &expr, const EvalCtx &ctx) {
        if (expr.kind != ExprKind::Binary) {
            Value v = evalExpr(expr, ctx);
            return !v.isNull() && !(v.type() == ValueType::Int64 && v.asInt64() == 0);
        }
        switch (expr.op) {
        case BinOp::And:
            return evalPredicate(expr.args[0], ctx) && evalPredicate(expr.args[1], ctx);
        case BinOp::Or:
            return evalPredicate(expr.args[0], ctx) || evalPredicate(expr.args[1], ctx);
        case BinOp::In: {
            Value lhs = evalExpr(expr.args[0], ctx);
            for (size_t i = 1; i < expr.args.size(); ++i) {
                int cmp;
                if (lhs.compareSql(evalExpr(expr.args[i], ctx), cmp) && cmp == 0) {
                    return true;
                }
            }
            return false;
        }
        case BinOp::Between: {
            Value v = evalExpr(expr.args[0], ctx);
            Value lo = evalExpr(expr.args[1], ctx);
            Value hi = evalExpr(expr.args[2], ctx);
            int cl, ch;
            return v.compareSql(lo, cl) && cl >= 0 && v.compareSql(hi, ch) && ch <= 0;
        }
        case BinOp::Eq:
        case BinOp::Lt:
        case BinOp::Le:
        case BinOp::Gt:
        case BinOp::Ge: {
            Value lhs = evalExpr(expr.args[0], ctx);
            Value rhs = evalExpr(expr.args[1], ctx);
            int cmp;
            if (!lhs.compareSql(rhs, cmp)) {
                return false;
            }
            switch (expr.op) {
            case BinOp::Eq: return cmp == 0;
            case BinOp::Lt: return cmp < 0;
            case BinOp::Le: return cmp <= 0;
            case BinOp::Gt: return cmp > 0;
            case BinOp::Ge: return cmp >= 0;
            default: return false;
            }
        }
        default: {
            Value v = evalExpr(expr, ctx);
            return !v.isNull() && !(v.type() == ValueType::Int64 && v.asInt64() == 0);
        }
        }
    }

    // -- relations ------------------------------------------------------------

    struct Relation {
        std::vector<ColumnDef> columns;
        std::vector<Row> rows;
    };

    const TableData *requireTable(const std::string &name) {
        const TableData *data = _view.findTable(name);
        if (data == nullptr) {
            throw AbortSignal{"table not found at execution: " + name};
        }
        return data;
    }

    /// Materializes a table's or view's rows (views evaluated recursively).
    Relation materialize(const std::string &name, VarScope *vars) {
        if (const ViewDef *view = _view.catalog().viewAt(name, _options.pos)) {
            Relation source = materialize(view->select.fromTable, vars);
            Relation out;
            out.columns = view->outputColumns;
            for (const Row &row : source.rows) {
                EvalCtx ctx;
                ctx.bindings.push_back({view->select.fromTable, &source.columns, &row});
                ctx.vars = vars;
                if (view->select.where && !evalPredicate(*view->select.where, ctx)) {
                    continue;
                }
                Row projected;
                if (view->select.star) {
                    projected = row;
                } else {
                    for (const auto &item : view->select.items) {
                        projected.push_back(evalExpr(item.expr, ctx));
                    }
                }
                out.rows.push_back(std::move(projected));
            }
            return out;
        }
        const TableData *data = requireTable(name);
        Relation out;
        out.columns = data->columns;
        out.rows = data->rows;
        return out;
    }

    /// Resolves a DML target through views down to a base table. Only plain
    /// projection views (no renaming, no computed items) are updatable.
    std::string resolveDmlTarget(const std::string &name) {
        std::string current = name;
        int depth = 0;
        while (const ViewDef *view = _view.catalog().viewAt(current, _options.pos)) {
            for (const auto &item : view->select.items) {
                bool plain = item.expr.kind == ExprKind::Column &&
                             (item.alias.empty() || item.alias == item.expr.column);
                if (!plain && !view->select.star) {
                    throw AbortSignal{"view is not updatable: " + current};
                }
            }
            current = view->select.fromTable;
            if (++depth > 16) {
                throw AbortSignal{"view nesting too deep"};
            }
        }
        return current;
    }

    /// Conjunction of the view predicates along the chain (applied to base
    /// rows during UPDATE/DELETE on views).
    std::vector<const Expr *> viewPredicates(const std::string &name) {
        std::vector<const Expr *> out;
        std::string current = name;
        while (const ViewDef *view = _view.catalog().viewAt(current, _options.pos)) {
            if (view->select.where) {
                out.push_back(&*view->select.where);
            }
            current = view->select.fromTable;
        }
        return out;
    }

    // -- constraints ----------------------------------------------------------

    void checkRowConstraints(const std::string &table, const TableData &data, const Row &row,
                             const Row *replacing) {
        const TableSchema *schema = _view.catalog().tableAt(table, _options.pos);
        for (size_t i = 0; i < data.columns.size(); ++i) {
            const ColumnDef &col = data.columns[i];
            if ((col.primaryKey || col.unique) && !row[i].isNull()) {
                for (const Row &existing : data.rows) {
                    if (replacing != nullptr && rowsEqual(existing, *replacing)) {
                        continue;
                    }
                    int cmp;
                    if (existing[i].compareSql(row[i], cmp) && cmp == 0) {
                        throw AbortSignal{"constraint violation: duplicate key " + table + "." +
                                          col.name};
                    }
                }
            }
        }
        if (schema != nullptr) {
            for (const auto &fk : schema->foreignKeys) {
                int local = data.columnIndex(fk.localColumn);
                if (local < 0 || row[local].isNull()) {
                    continue;
                }
                const TableData *ref = _view.findTable(fk.refTable);
                if (ref == nullptr) {
                    continue; // dangling reference: vacuously satisfied
                }
                int refCol = ref->columnIndex(fk.refColumn);
                if (refCol < 0) {
                    continue;
                }
                bool found = false;
                for (const Row &parent : ref->rows) {
                    int cmp;
                    if (parent[refCol].compareSql(row[local], cmp) && cmp == 0) {
                        found = true;
                        break;
                    }
                }
                if (!found) {
                    throw AbortSignal{"constraint violation: foreign key " + table + "." +
                                      fk.localColumn};
                }
            }
            for (const auto &check : schema->checks) {
                EvalCtx ctx;
                ctx.bindings.push_back({table, &data.columns, &row});
                // Unqualified CHECK columns were left bare at parse; bind the
                // table under its own name and empty.
                ctx.bindings.push_back({"", &data.columns, &row});
                Value dummy;
                if (!checkPasses(check.predicate, ctx)) {
                    throw AbortSignal{"constraint violation: CHECK on " + table};
                }
            }
        }
    }

    bool checkPasses(const Expr &predicate, const EvalCtx &ctx) {
        // SQL CHECK semantics: NULL comparisons pass. evalPredicate returns
        // false for NULL operands, so probe for NULL operands first.
        return evalPredicateLenient(predicate, ctx);
    }

    bool evalPredicateLenient(const Expr &expr, const EvalCtx &ctx) {
        if (expr.kind == ExprKind::Binary) {
            if (expr.op == BinOp::And) {
                return evalPredicateLenient(expr.args[0], ctx) &&
                       evalPredicateLenient(expr.args[1], ctx);
            }
            if (expr.op == BinOp::Or) {
                return evalPredicateLenient(expr.args[0], ctx) ||
                       evalPredicateLenient(expr.args[1], ctx);
            }
            for (size_t i = 0; i < expr.args.size(); ++i) {
                if (evalExpr(expr.args[i], ctx).isNull()) {
                    return true;
                }
            }
        }
        return evalPredicate(expr, ctx);
    }

    void checkFkRestrictions(const std::string &table, const TableData &data, const Row &oldRow,
                             const Row *newRow, std::vector<std::string> &cascade) {
        // Children referencing a changed/deleted parent value: cascade if
        // declared, otherwise abort.
        for (const auto &childName : _view.catalog().tablesAliveAt(_options.pos)) {
            const TableSchema *childSchema = _view.catalog().tableAt(childName, _options.pos);
            if (childSchema == nullptr) {
                continue;
            }
            for (const auto &fk : childSchema->foreignKeys) {
                if (fk.refTable != table) {
                    continue;
                }
                int refCol = data.columnIndex(fk.refColumn);
                if (refCol < 0) {
                    continue;
                }
                const Value &oldValue = oldRow[refCol];
                if (oldValue.isNull()) {
                    continue;
                }
                if (newRow != nullptr) {
                    int cmp;
                    if ((*newRow)[refCol].compareSql(oldValue, cmp) && cmp == 0) {
                        continue; // referenced value unchanged
                    }
                }
                const TableData *child = _view.findTable(childName);
                if (child == nullptr) {
                    continue;
                }
                int local = child->columnIndex(fk.localColumn);
                if (local < 0) {
                    continue;
                }
                bool referenced = false;
                for (const Row &childRow : child->rows) {
                    int cmp;
                    if (childRow[local].compareSql(oldValue, cmp) && cmp == 0) {
                        referenced = true;
                        break;
                    }
                }
                if (!referenced) {
                    continue;
                }
                if (newRow == nullptr && fk.cascadeDelete) {
                    cascade.push_back(childName);
                } else {
                    throw AbortSignal{"constraint violation: row referenced by " + childName +
                                      "." + fk.localColumn};
                }
            }
        }
    }

    void cascadeDelete(const std::string &childName, const std::string &parentTable,
                       const Row &parentRow, const TableData &parentData) {
        const TableSchema *childSchema = _view.catalog().tableAt(childName, _options.pos);
        const TableData *child = _view.findTable(childName);
        if (childSchema == nullptr || child == nullptr) {
            return;
        }
        std::vector<Row> victims;
        for (const auto &fk : childSchema->foreignKeys) {
            if (fk.refTable != parentTable || !fk.cascadeDelete) {
                continue;
            }
            int refCol = parentData.columnIndex(fk.refColumn);
            int local = child->columnIndex(fk.localColumn);
            if (refCol < 0 || local < 0 || parentRow[refCol].isNull()) {
                continue;
            }
            for (const Row &childRow : child->rows) {
                int cmp;
                if (childRow[local].compareSql(parentRow[refCol], cmp) && cmp == 0) {
                    victims.push_back(childRow);
                }
            }
        }
        for (const Row &victim : victims) {
            std::vector<std::string> nestedCascade;
            checkFkRestrictions(childName, *child, victim, nullptr, nestedCascade);
            deleteRow(childName, victim);
            for (const auto &nested : nestedCascade) {
                cascadeDelete(nested, childName, victim, *child);
            }
        }
    }

    // -- triggers -------------------------------------------------------------

    void fireTriggers(const std::string &table, TriggerEvent event, TriggerTiming timing,
                      const Row *newRow, const Row *oldRow) {
        auto triggers = _view.catalog().triggersFor(table, event, _options.pos);
        if (triggers.empty()) {
            return;
        }
        const TableData *data = _view.findTable(table);
        if (data == nullptr) {
            return;
        }
        if (_triggerDepth > 8) {
            throw AbortSignal{"trigger recursion too deep"};
        }
        ++_triggerDepth;
        for (const TriggerDef *trigger : triggers) {
            if (trigger->stmt.timing != timing) {
                continue;
            }
            VarScope vars;
            TriggerFrame frame;
            frame.columns = &data->columns;
            frame.newRow = newRow;
            frame.oldRow = oldRow;
            for (const Statement &stmt : trigger->stmt.body) {
                execStatement(stmt, vars, &frame);
            }
        }
        --_triggerDepth;
    }

    struct TriggerFrame {
        const std::vector<ColumnDef> *columns = nullptr;
        const Row *newRow = nullptr;
        const Row *oldRow = nullptr;
    };

    EvalCtx makeCtx(VarScope &vars, const TriggerFrame *frame) {
        EvalCtx ctx;
        ctx.vars = &vars;
        if (frame != nullptr) {
            ctx.newRow = frame->newRow;
            ctx.oldRow = frame->oldRow;
            ctx.triggerColumns = frame->columns;
        }
        return ctx;
    }

    // -- SELECT -----------------------------------------------------------------

    struct SelectOutput {
        std::vector<std::string> names;
        std::vector<Row> rows;
    };

    SelectOutput execSelect(const SelectStmt &select, VarScope &vars, const TriggerFrame *frame) {
        SelectOutput out;
        if (select.fromTable.empty()) {
            EvalCtx ctx = makeCtx(vars, frame);
            Row row;
            for (const auto &item : select.items) {
                out.names.push_back(item.alias.empty() ? printExpr(item.expr) : item.alias);
                row.push_back(evalExpr(item.expr, ctx));
            }
            out.rows.push_back(std::move(row));
            return out;
        }

        // Materialize sources and build joined rows.
        std::vector<std::pair<std::string, Relation>> sources;
        sources.emplace_back(select.fromTable, materialize(select.fromTable, &vars));
        for (const auto &join : select.joins) {
            sources.emplace_back(join.table, materialize(join.table, &vars));
        }
        struct Joined {
            std::vector<const Row *> parts;
        };
        std::vector<Joined> joined;
        for (const Row &row : sources[0].second.rows) {
            joined.push_back({{&row}});
        }
        for (size_t j = 0; j < select.joins.size(); ++j) {
            std::vector<Joined> next;
            for (const Joined &left : joined) {
                for (const Row &row : sources[j + 1].second.rows) {
                    Joined candidate = left;
                    candidate.parts.push_back(&row);
                    EvalCtx ctx = makeCtx(vars, frame);
                    for (size_t s = 0; s < candidate.parts.size(); ++s) {
                        ctx.bindings.push_back({sources[s].first, &sources[s].second.columns,
                                                candidate.parts[s]});
                    }
                    if (evalPredicate(select.joins[j].on, ctx)) {
                        next.push_back(std::move(candidate));
                    }
                }
            }
            joined = std::move(next);
        }

        std::vector<Joined> matched;
        for (const Joined &candidate : joined) {
            EvalCtx ctx = makeCtx(vars, frame);
            for (size_t s = 0; s < candidate.parts.size(); ++s) {
                ctx.bindings.push_back(
                    {sources[s].first, &sources[s].second.columns, candidate.parts[s]});
            }
            if (!select.where || evalPredicate(*select.where, ctx)) {
                matched.push_back(candidate);
            }
        }

        // Canonical physical order: sort matched rows by their full content so
        // results never depend on storage order.
        auto joinedKey = [&](const Joined &a, const Joined &b) {
            for (size_t s = 0; s < a.parts.size(); ++s) {
                const Row &ra = *a.parts[s];
                const Row &rb = *b.parts[s];
                for (size_t i = 0; i < ra.size() && i < rb.size(); ++i) {
                    int c = ra[i].compareTotal(rb[i]);
                    if (c != 0) return c < 0;
                }
            }
            return false;
        };
        std::stable_sort(matched.begin(), matched.end(), joinedKey);

        if (!select.orderBy.empty()) {
            std::stable_sort(matched.begin(), matched.end(), [&](const Joined &a, const Joined &b) {
                for (const auto &key : select.orderBy) {
                    Value va, vb;
                    for (size_t s = 0; s < sources.size(); ++s) {
                        if (sources[s].first == key.table) {
                            for (size_t i = 0; i < sources[s].second.columns.size(); ++i) {
                                if (sources[s].second.columns[i].name == key.column) {
                                    va = (*a.parts[s])[i];
                                    vb = (*b.parts[s])[i];
                                }
                            }
                        }
                    }
                    int c = va.compareTotal(vb);
                    if (c != 0) return key.desc ? c > 0 : c < 0;
                }
                return false;
            });
        }

        if (select.limit && static_cast<size_t>(*select.limit) < matched.size()) {
            matched.resize(static_cast<size_t>(*select.limit));
        }

        bool hasAggregate = false;
        for (const auto &item : select.items) {
            hasAggregate |= item.expr.kind == ExprKind::Aggregate;
        }

        auto bindCtx = [&](const Joined &candidate) {
            EvalCtx ctx = makeCtx(vars, frame);
            for (size_t s = 0; s < candidate.parts.size(); ++s) {
                ctx.bindings.push_back(
                    {sources[s].first, &sources[s].second.columns, candidate.parts[s]});
            }
            return ctx;
        };

        if (select.star) {
            for (const auto &[name, relation] : sources) {
                for (const auto &col : relation.columns) {
                    out.names.push_back(col.name);
                }
            }
            for (const Joined &candidate : matched) {
                Row row;
                for (const Row *part : candidate.parts) {
                    row.insert(row.end(), part->begin(), part->end());
                }
                out.rows.push_back(std::move(row));
            }
            return out;
        }

        for (const auto &item : select.items) {
            out.names.push_back(item.alias.empty() ? printExpr(item.expr) : item.alias);
        }

        if (hasAggregate) {
            Row row;
            for (const auto &item : select.items) {
                row.push_back(evalAggregateItem(item.expr, matched, bindCtx, vars, frame));
            }
            out.rows.push_back(std::move(row));
            return out;
        }

        for (const Joined &candidate : matched) {
            EvalCtx ctx = bindCtx(candidate);
            Row row;
            for (const auto &item : select.items) {
                row.push_back(evalExpr(item.expr, ctx));
            }
            out.rows.push_back(std::move(row));
        }
        return out;
    }

    template <class BindFn, class JoinedT>
    Value evalAggregateItem(const Expr &expr, const std::vector<JoinedT> &matched, BindFn bindCtx,
                            VarScope &vars, const TriggerFrame *frame) {
        if (expr.kind != ExprKind::Aggregate) {
            // Non-aggregate item in an aggregate select: first row's value, or
            // row-independent evaluation when no rows matched.
            if (!matched.empty()) {
                EvalCtx ctx = bindCtx(matched.front());
                return evalExpr(expr, ctx);
            }
            EvalCtx ctx = makeCtx(vars, frame);
            try {
                return evalExpr(expr, ctx);
            } catch (const AbortSignal &) {
                return Value::null();
            }
        }
        const Expr &arg = expr.args[0];
        if (expr.agg == AggKind::Count && arg.kind == ExprKind::Star) {
            return Value::int64(static_cast<int64_t>(matched.size()));
        }
        int64_t count = 0;
        Value acc; // null
        for (const auto &candidate : matched) {
            EvalCtx ctx = bindCtx(candidate);
            Value v = evalExpr(arg, ctx);
            if (v.isNull()) {
                continue;
            }
            ++count;
            switch (expr.agg) {
            case AggKind::Count:
                break;
            case AggKind::Sum:
                acc = acc.isNull() ? v : acc.add(v);
                break;
            case AggKind::Min:
                if (acc.isNull() || v.compareTotal(acc) < 0) acc = v;
                break;
            case AggKind::Max:
                if (acc.isNull() || v.compareTotal(acc) > 0) acc = v;
                break;
            }
        }
        if (expr.agg == AggKind::Count) {
            return Value::int64(count);
        }
        return acc;
    }

    // -- DML --------------------------------------------------------------------

    int64_t allocateAutoValue(const std::string &table, const std::string &column,
                              const TableData &data) {
        ColumnKey key{table, column};
        if (_options.autoMode == AutoIncMode::Tombstone) {
            // Identity re-allocation: a replayed statement re-takes the values
            // it allocated historically, in order.
            if (_options.historical != nullptr) {
                auto it = _options.historical->tables.find(table);
                if (it != _options.historical->tables.end()) {
                    auto alloc = it->second.autoAllocated.find(column);
                    if (alloc != it->second.autoAllocated.end()) {
                        size_t cursor = _identityCursor[key];
                        if (cursor < alloc->second.size()) {
                            _identityCursor[key] = cursor + 1;
                            return alloc->second[cursor];
                        }
                    }
                }
            }
            int64_t floor = 0;
            if (_options.historicalMax != nullptr) {
                auto it = _options.historicalMax->find(key);
                if (it != _options.historicalMax->end()) {
                    floor = it->second;
                }
            }
            auto counterIt = data.autoCounter.find(column);
            int64_t counter = counterIt == data.autoCounter.end() ? 0 : counterIt->second;
            int64_t next = std::max(floor, counter) + 1;
            if (_options.tombstones != nullptr) {
                auto ts = _options.tombstones->find(key);
                if (ts != _options.tombstones->end()) {
                    while (ts->second.count(next)) {
                        ++next;
                    }
                }
            }
            return next;
        }
        auto counterIt = data.autoCounter.find(column);
        int64_t counter = counterIt == data.autoCounter.end() ? 0 : counterIt->second;
        return counter + 1;
    }

    void execInsert(const InsertStmt &insert, VarScope &vars, const TriggerFrame *frame) {
        std::string base = resolveDmlTarget(insert.table);
        const TableData *data = requireTable(base);
        std::vector<ColumnDef> namedColumns;
        if (_view.catalog().isView(insert.table, _options.pos)) {
            namedColumns = _view.catalog().viewAt(insert.table, _options.pos)->outputColumns;
        } else {
            namedColumns = data->columns;
        }

        // Column positions in the base row for each supplied value.
        std::vector<int> targets;
        if (insert.columns.empty()) {
            for (const auto &col : namedColumns) {
                targets.push_back(data->columnIndex(col.name));
            }
        } else {
            for (const auto &name : insert.columns) {
                targets.push_back(data->columnIndex(name));
            }
        }
        for (int t : targets) {
            if (t < 0) {
                throw AbortSignal{"column not found inserting into " + insert.table};
            }
        }

        std::vector<Row> sourceRows;
        if (insert.select) {
            SelectOutput selected = execSelect(*insert.select, vars, frame);
            sourceRows = std::move(selected.rows);
        } else {
            EvalCtx ctx = makeCtx(vars, frame);
            for (const auto &exprRow : insert.rows) {
                Row row;
                for (const auto &expr : exprRow) {
                    row.push_back(evalExpr(expr, ctx));
                }
                sourceRows.push_back(std::move(row));
            }
        }

        for (const Row &source : sourceRows) {
            if (source.size() != targets.size()) {
                throw AbortSignal{"INSERT row width mismatch for " + insert.table};
            }
            Row row(data->columns.size(), Value::null());
            std::vector<bool> supplied(data->columns.size(), false);
            for (size_t i = 0; i < targets.size(); ++i) {
                int t = targets[i];
                const ColumnDef &col = data->columns[t];
                row[t] = source[i].coerceTo(col.type, col.decimalScale);
                supplied[t] = true;
            }
            for (size_t i = 0; i < data->columns.size(); ++i) {
                const ColumnDef &col = data->columns[i];
                if (!supplied[i] && col.autoIncrement) {
                    int64_t v = allocateAutoValue(base, col.name, *data);
                    row[i] = Value::int64(v);
                    effectFor(base).autoAllocated[col.name].push_back(v);
                }
            }
            fireTriggers(base, TriggerEvent::Insert, TriggerTiming::Before, &row, nullptr);
            data = requireTable(base); // trigger may have touched the table
            checkRowConstraints(base, *data, row, nullptr);
            for (size_t i = 0; i < data->columns.size(); ++i) {
                const ColumnDef &col = data->columns[i];
                if (col.autoIncrement && !row[i].isNull()) {
                    bumpCounter(base, col.name, row[i].asInt64());
                }
            }
            insertRow(base, row);
            fireTriggers(base, TriggerEvent::Insert, TriggerTiming::After, &row, nullptr);
        }
    }

    void execUpdate(const UpdateStmt &update, VarScope &vars, const TriggerFrame *frame) {
        std::string base = resolveDmlTarget(update.table);
        auto predicates = viewPredicates(update.table);
        const TableData *data = requireTable(base);

        std::vector<Row> matched;
        for (const Row &row : data->rows) {
            EvalCtx ctx = makeCtx(vars, frame);
            ctx.bindings.push_back({update.table, &data->columns, &row});
            ctx.bindings.push_back({base, &data->columns, &row});
            bool ok = !update.where || evalPredicate(*update.where, ctx);
            for (const Expr *pred : predicates) {
                EvalCtx viewCtx = makeCtx(vars, frame);
                viewCtx.bindings.push_back({viewSourceName(update.table), &data->columns, &row});
                viewCtx.bindings.push_back({base, &data->columns, &row});
                ok = ok && evalPredicate(*pred, viewCtx);
            }
            if (ok) {
                matched.push_back(row);
            }
        }

        for (const Row &oldRow : matched) {
            EvalCtx ctx = makeCtx(vars, frame);
            ctx.bindings.push_back({update.table, &data->columns, &oldRow});
            ctx.bindings.push_back({base, &data->columns, &oldRow});
            Row newRow = oldRow;
            for (const auto &[column, expr] : update.assignments) {
                int i = data->columnIndex(column);
                if (i < 0) {
                    throw AbortSignal{"column not found: " + base + "." + column};
                }
                newRow[i] = evalExpr(expr, ctx).coerceTo(data->columns[i].type,
                                                         data->columns[i].decimalScale);
            }
            if (rowsEqual(newRow, oldRow)) {
                continue;
            }
            fireTriggers(base, TriggerEvent::Update, TriggerTiming::Before, &newRow, &oldRow);
            data = requireTable(base);
            std::vector<std::string> cascade;
            checkFkRestrictions(base, *data, oldRow, &newRow, cascade);
            checkRowConstraints(base, *data, newRow, &oldRow);
            for (size_t i = 0; i < data->columns.size(); ++i) {
                const ColumnDef &col = data->columns[i];
                if (col.autoIncrement && !newRow[i].isNull()) {
                    bumpCounter(base, col.name, newRow[i].asInt64());
                }
            }
            deleteRow(base, oldRow);
            insertRow(base, newRow);
            fireTriggers(base, TriggerEvent::Update, TriggerTiming::After, &newRow, &oldRow);
        }
    }

    std::string viewSourceName(const std::string &viewName) {
        const ViewDef *view = _view.catalog().viewAt(viewName, _options.pos);
        return view == nullptr ? viewName : view->select.fromTable;
    }

    void execDelete(const DeleteStmt &del, VarScope &vars, const TriggerFrame *frame) {
        std::string base = resolveDmlTarget(del.table);
        auto predicates = viewPredicates(del.table);
        const TableData *data = requireTable(base);

        std::vector<Row> matched;
        for (const Row &row : data->rows) {
            EvalCtx ctx = makeCtx(vars, frame);
            ctx.bindings.push_back({del.table, &data->columns, &row});
            ctx.bindings.push_back({base, &data->columns, &row});
            bool ok = !del.where || evalPredicate(*del.where, ctx);
            for (const Expr *pred : predicates) {
                EvalCtx viewCtx = makeCtx(vars, frame);
                viewCtx.bindings.push_back({viewSourceName(del.table), &data->columns, &row});
                viewCtx.bindings.push_back({base, &data->columns, &row});
                ok = ok && evalPredicate(*pred, viewCtx);
            }
            if (ok) {
                matched.push_back(row);
            }
        }

        for (const Row &victim : matched) {
            fireTriggers(base, TriggerEvent::Delete, TriggerTiming::Before, nullptr, &victim);
            data = requireTable(base);
            std::vector<std::string> cascade;
            checkFkRestrictions(base, *data, victim, nullptr, cascade);
            deleteRow(base, victim);
            for (const auto &child : cascade) {
                cascadeDelete(child, base, victim, *data);
            }
            fireTriggers(base, TriggerEvent::Delete, TriggerTiming::After, nullptr, &victim);
        }
    }

    // -- DDL --------------------------------------------------------------------

    void applyCatalog(const Statement &stmt) {
        try {
            _view.mutableCatalog().applyAt(stmt, _options.pos);
        } catch (const Error &error) {
            throw AbortSignal{error.what()};
        }
        journalCatalog(_options.pos);
    }

    void execDdl(const Statement &stmt) {
        switch (stmt.kind) {
        case StatementKind::CreateTable: {
            const auto &create = stmt.as<CreateTableStmt>();
            if (_view.findTable(create.table) != nullptr) {
                throw AbortSignal{"table already exists: " + create.table};
            }
            applyCatalog(stmt);
            TableData data;
            data.columns = create.columns;
            for (const auto &col : create.columns) {
                if (col.autoIncrement) {
                    data.autoCounter[col.name] = 0;
                }
            }
            TableEffect &effect = effectFor(create.table);
            effect.ddl = DdlChange::Create;
            effect.columnsAfter = data.columns;
            effect.countersAfter = data.autoCounter;
            _view.createTable(create.table, data);
            JournalOp op;
            op.kind = JournalOp::Kind::CreateTable;
            op.table = create.table;
            _journal.push_back(std::move(op));
            break;
        }
        case StatementKind::AlterTable: {
            const auto &alter = stmt.as<AlterTableStmt>();
            const TableData *existing = requireTable(alter.table);
            TableData saved = *existing;
            applyCatalog(stmt);
            TableEffect &effect = effectFor(alter.table);
            effect.ddl = DdlChange::Alter;
            effect.deleted = saved.rows;
            TableData *data = _view.writableTable(alter.table);
            if (alter.action == AlterAction::AddColumn) {
                data->columns.push_back(alter.column);
                for (Row &row : data->rows) {
                    row.push_back(Value::null());
                }
            }
            effect.columnsAfter = data->columns;
            effect.inserted = data->rows;
            JournalOp op;
            op.kind = JournalOp::Kind::AlterTable;
            op.table = alter.table;
            op.saved = std::move(saved);
            _journal.push_back(std::move(op));
            break;
        }
        case StatementKind::DropTable: {
            const auto &drop = stmt.as<DropTableStmt>();
            const TableData *existing = requireTable(drop.table);
            TableData saved = *existing;
            applyCatalog(stmt);
            TableEffect &effect = effectFor(drop.table);
            effect.ddl = DdlChange::Drop;
            effect.deleted = saved.rows;
            effect.columnsAfter.clear();
            effect.countersAfter.clear();
            _view.dropTable(drop.table);
            JournalOp op;
            op.kind = JournalOp::Kind::DropTable;
            op.table = drop.table;
            op.saved = std::move(saved);
            _journal.push_back(std::move(op));
            break;
        }
        case StatementKind::TruncateTable: {
            const auto &truncate = stmt.as<TruncateTableStmt>();
            const TableData *data = requireTable(truncate.table);
            TableEffect &effect = effectFor(truncate.table);
            effect.ddl = DdlChange::Truncate;
            std::vector<Row> victims = data->rows;
            for (const Row &row : victims) {
                deleteRow(truncate.table, row);
            }
            (void)effect;
            break;
        }
        case StatementKind::CreateView:
        case StatementKind::DropView:
        case StatementKind::CreateTrigger:
        case StatementKind::DropTrigger:
        case StatementKind::CreateProcedure:
            applyCatalog(stmt);
            break;
        default:
            raise(ErrorKind::Internal, "not a DDL statement");
        }
    }

    // -- statement dispatch -------------------------------------------------

    void execStatement(const Statement &stmt, VarScope &vars, const TriggerFrame *frame) {
        switch (stmt.kind) {
        case StatementKind::Select: {
            const auto &select = stmt.as<SelectStmt>();
            SelectOutput out = execSelect(select, vars, frame);
            if (!select.intoVars.empty()) {
                // First row of the canonical order; no rows leaves NULLs.
                for (size_t i = 0; i < select.intoVars.size(); ++i) {
                    Value v = out.rows.empty() || i >= out.rows[0].size() ? Value::null()
                                                                          : out.rows[0][i];
                    vars[select.intoVars[i]] = std::move(v);
                }
            } else if (frame == nullptr) {
                _effect.selectColumns = out.names;
                _effect.selectResult = out.rows;
            }
            return;
        }
        case StatementKind::Insert:
            execInsert(stmt.as<InsertStmt>(), vars, frame);
            return;
        case StatementKind::Update:
            execUpdate(stmt.as<UpdateStmt>(), vars, frame);
            return;
        case StatementKind::Delete:
            execDelete(stmt.as<DeleteStmt>(), vars, frame);
            return;
        case StatementKind::CreateTable:
        case StatementKind::AlterTable:
        case StatementKind::DropTable:
        case StatementKind::TruncateTable:
        case StatementKind::CreateView:
        case StatementKind::DropView:
        case StatementKind::CreateTrigger:
        case StatementKind::DropTrigger:
        case StatementKind::CreateProcedure:
            execDdl(stmt);
            return;
        case StatementKind::TransactionBlock:
            for (const Statement &inner : stmt.as<TransactionStmt>().statements) {
                execStatement(inner, vars, frame);
            }
            return;
        case StatementKind::CallProcedure: {
            const auto &call = stmt.as<CallStmt>();
            const ProcedureDef *proc = _view.catalog().procedureAt(call.procedure, _options.pos);
            if (proc == nullptr) {
                throw AbortSignal{"procedure not found at execution: " + call.procedure};
            }
            EvalCtx ctx = makeCtx(vars, frame);
            VarScope procVars;
            for (size_t i = 0; i < proc->stmt.params.size(); ++i) {
                const ProcParam &param = proc->stmt.params[i];
                procVars[param.name] =
                    evalExpr(call.args[i], ctx).coerceTo(param.type, param.decimalScale);
            }
            for (const Statement &inner : proc->stmt.body) {
                execStatement(inner, procVars, frame);
            }
            return;
        }
        case StatementKind::Declare: {
            const auto &decl = stmt.as<DeclareStmt>();
            Value v = Value::null();
            if (decl.init) {
                v = evalExpr(*decl.init, makeCtx(vars, frame))
                        .coerceTo(decl.type, decl.decimalScale);
            }
            vars[decl.var] = std::move(v);
            return;
        }
        case StatementKind::SetVar: {
            const auto &set = stmt.as<SetVarStmt>();
            vars[set.var] = evalExpr(set.expr, makeCtx(vars, frame));
            return;
        }
        case StatementKind::If: {
            const auto &branch = stmt.as<IfStmt>();
            bool cond = evalPredicate(branch.condition, makeCtx(vars, frame));
            const auto &block = cond ? branch.thenBlock : branch.elseBlock;
            for (const Statement &inner : block) {
                execStatement(inner, vars, frame);
            }
            return;
        }
        case StatementKind::Signal: {
            const auto &signal = stmt.as<SignalStmt>();
            throw AbortSignal{"SQLSTATE " + signal.sqlstate +
                              (signal.message.empty() ? "" : ": " + signal.message)};
        }
        }
    }

    std::map<ColumnKey, size_t> _identityCursor;
};

} // namespace

ExecEffect execute(StorageView &view, const sql::QueryRecord &record,
                   const ExecOptions &options) {
    ExecSession session(view, record, options);
    return session.run();
}

void applyEffect(StorageView &view, const std::string &table, const TableEffect &effect) {
    if (effect.ddl == DdlChange::Create) {
        TableData data;
        data.columns = effect.columnsAfter;
        data.rows = effect.inserted;
        data.autoCounter = effect.countersAfter;
        view.createTable(table, std::move(data));
        return;
    }
    if (effect.ddl == DdlChange::Drop) {
        view.dropTable(table);
        return;
    }
    TableData *data = view.writableTable(table);
    if (effect.ddl == DdlChange::Alter) {
        data->rows.clear();
        data->columns = effect.columnsAfter;
        data->rows = effect.inserted;
    } else {
        for (const Row &row : effect.deleted) {
            eraseOneRow(*data, row);
        }
        for (const Row &row : effect.inserted) {
            data->rows.push_back(row);
        }
    }
    data->autoCounter = effect.countersAfter;
}

void undoEffect(StorageView &view, const std::string &table, const TableEffect &effect) {
    if (effect.ddl == DdlChange::Create) {
        view.dropTable(table);
        return;
    }
    if (effect.ddl == DdlChange::Drop) {
        TableData data;
        data.columns = effect.columnsBefore;
        data.rows = effect.deleted;
        data.autoCounter = effect.countersBefore;
        view.createTable(table, std::move(data));
        return;
    }
    TableData *data = view.writableTable(table);
    if (effect.ddl == DdlChange::Alter) {
        data->rows.clear();
        data->columns = effect.columnsBefore;
        data->rows = effect.deleted;
    } else {
        for (const Row &row : effect.inserted) {
            eraseOneRow(*data, row);
        }
        for (const Row &row : effect.deleted) {
            data->rows.push_back(row);
        }
    }
    data->autoCounter = effect.countersBefore;
}

} // namespace retro::store
