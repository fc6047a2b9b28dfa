#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "retro/value.hpp"

namespace retro::sql {

enum class StatementKind {
    CreateTable,
    AlterTable,
    DropTable,
    TruncateTable,
    CreateView,
    DropView,
    Select,
    Insert,
    Update,
    Delete,
    CreateTrigger,
    DropTrigger,
    TransactionBlock,
    CreateProcedure,
    CallProcedure,
    // Body-only statements (procedure/trigger blocks); parse_statement never
    // returns these at top level.
    Declare,
    SetVar,
    If,
    Signal,
};

const char *statementKindName(StatementKind kind);

// ---------------------------------------------------------------------------
// Expressions

enum class ExprKind {
    Literal,
    Column,   // table.column (table filled during resolution)
    Var,      // procedure parameter / DECLAREd variable
    NewRef,   // NEW.column inside trigger bodies
    OldRef,   // OLD.column inside trigger bodies
    Func,     // CURTIME() / NOW() / RAND()
    Binary,
    Aggregate,
    Star,     // COUNT(*) argument marker
};

enum class BinOp { Eq, Lt, Le, Gt, Ge, And, Or, Add, Sub, Mul, Div, In, Between };
enum class AggKind { Count, Sum, Min, Max };

struct Expr {
    ExprKind kind = ExprKind::Literal;
    Value literal;
    std::string table;   // Column
    std::string column;  // Column / NewRef / OldRef
    std::string name;    // Var / Func
    BinOp op = BinOp::Eq;
    AggKind agg = AggKind::Count;
    // Binary: [lhs, rhs]; In: [lhs, item...]; Between: [lhs, lo, hi];
    // Aggregate: [arg] (or Star); Func: [].
    std::vector<Expr> args;

    bool operator==(const Expr &) const = default;

    static Expr lit(Value v) {
        Expr e;
        e.kind = ExprKind::Literal;
        e.literal = std::move(v);
        return e;
    }
    static Expr col(std::string table, std::string column) {
        Expr e;
        e.kind = ExprKind::Column;
        e.table = std::move(table);
        e.column = std::move(column);
        return e;
    }
    static Expr var(std::string name) {
        Expr e;
        e.kind = ExprKind::Var;
        e.name = std::move(name);
        return e;
    }
    static Expr binary(BinOp op, Expr lhs, Expr rhs) {
        Expr e;
        e.kind = ExprKind::Binary;
        e.op = op;
        e.args.push_back(std::move(lhs));
        e.args.push_back(std::move(rhs));
        return e;
    }
};

// ---------------------------------------------------------------------------
// Schema elements

struct ColumnDef {
    std::string name;
    ValueType type = ValueType::Int64;
    uint8_t decimalScale = 0;
    bool autoIncrement = false;
    bool primaryKey = false;
    bool unique = false;

    bool operator==(const ColumnDef &) const = default;
};

struct ForeignKeyDef {
    std::string localColumn;
    std::string refTable;
    std::string refColumn;
    bool cascadeDelete = false;

    bool operator==(const ForeignKeyDef &) const = default;
};

struct CheckDef {
    Expr predicate;

    bool operator==(const CheckDef &) const = default;
};

// ---------------------------------------------------------------------------
// Statement payloads

struct Statement;

struct OrderKey {
    std::string table;
    std::string column;
    bool desc = false;

    bool operator==(const OrderKey &) const = default;
};

struct JoinClause {
    std::string table;
    Expr on; // single equality between two columns

    bool operator==(const JoinClause &) const = default;
};

struct SelectItem {
    Expr expr;
    std::string alias;

    bool operator==(const SelectItem &) const = default;
};

struct SelectStmt {
    bool star = false;
    std::vector<SelectItem> items;
    std::vector<std::string> intoVars; // SELECT ... INTO (bodies only)
    std::string fromTable;             // empty: table-less SELECT
    std::vector<JoinClause> joins;
    std::optional<Expr> where;
    std::vector<OrderKey> orderBy;
    std::optional<int64_t> limit;

    bool operator==(const SelectStmt &) const = default;
};

struct InsertStmt {
    std::string table;
    std::vector<std::string> columns;     // empty: full-width VALUES rows
    std::vector<std::vector<Expr>> rows;  // INSERT ... VALUES
    std::shared_ptr<SelectStmt> select;   // INSERT ... SELECT

    bool operator==(const InsertStmt &other) const {
        bool lhsSel = select != nullptr, rhsSel = other.select != nullptr;
        if (lhsSel != rhsSel) return false;
        if (lhsSel && !(*select == *other.select)) return false;
        return table == other.table && columns == other.columns && rows == other.rows;
    }
};

struct UpdateStmt {
    std::string table;
    std::vector<std::pair<std::string, Expr>> assignments;
    std::optional<Expr> where;

    bool operator==(const UpdateStmt &) const = default;
};

struct DeleteStmt {
    std::string table;
    std::optional<Expr> where;

    bool operator==(const DeleteStmt &) const = default;
};

struct CreateTableStmt {
    std::string table;
    std::vector<ColumnDef> columns;
    std::vector<ForeignKeyDef> foreignKeys;
    std::vector<CheckDef> checks;

    bool operator==(const CreateTableStmt &) const = default;
};

enum class AlterAction { AddColumn, AddForeignKey, AddCheck };

struct AlterTableStmt {
    std::string table;
    AlterAction action = AlterAction::AddColumn;
    ColumnDef column;
    ForeignKeyDef foreignKey;
    CheckDef check;

    bool operator==(const AlterTableStmt &) const = default;
};

struct DropTableStmt {
    std::string table;
    bool operator==(const DropTableStmt &) const = default;
};

struct TruncateTableStmt {
    std::string table;
    bool operator==(const TruncateTableStmt &) const = default;
};

struct CreateViewStmt {
    std::string view;
    bool orReplace = false;
    SelectStmt select;

    bool operator==(const CreateViewStmt &) const = default;
};

struct DropViewStmt {
    std::string view;
    bool operator==(const DropViewStmt &) const = default;
};

enum class TriggerTiming { Before, After };
enum class TriggerEvent { Insert, Update, Delete };

struct CreateTriggerStmt {
    std::string name;
    TriggerTiming timing = TriggerTiming::Before;
    TriggerEvent event = TriggerEvent::Insert;
    std::string table;
    std::vector<Statement> body;

    bool operator==(const CreateTriggerStmt &) const;
};

struct DropTriggerStmt {
    std::string name;
    bool operator==(const DropTriggerStmt &) const = default;
};

struct TransactionStmt {
    std::vector<Statement> statements;
    bool operator==(const TransactionStmt &) const;
};

struct ProcParam {
    std::string name;
    ValueType type = ValueType::Int64;
    uint8_t decimalScale = 0;
    bool operator==(const ProcParam &) const = default;
};

struct CreateProcedureStmt {
    std::string name;
    std::vector<ProcParam> params;
    std::vector<Statement> body;
    bool operator==(const CreateProcedureStmt &) const;
};

struct CallStmt {
    std::string procedure;
    std::vector<Expr> args;
    bool operator==(const CallStmt &) const = default;
};

struct DeclareStmt {
    std::string var;
    ValueType type = ValueType::Int64;
    uint8_t decimalScale = 0;
    std::optional<Expr> init;
    bool operator==(const DeclareStmt &) const = default;
};

struct SetVarStmt {
    std::string var;
    Expr expr;
    bool operator==(const SetVarStmt &) const = default;
};

struct IfStmt {
    Expr condition;
    std::vector<Statement> thenBlock;
    std::vector<Statement> elseBlock;
    bool operator==(const IfStmt &) const;
};

struct SignalStmt {
    std::string sqlstate;
    std::string message;
    bool operator==(const SignalStmt &) const = default;
};

using StatementPayload =
    std::variant<CreateTableStmt, AlterTableStmt, DropTableStmt, TruncateTableStmt,
                 CreateViewStmt, DropViewStmt, SelectStmt, InsertStmt, UpdateStmt, DeleteStmt,
                 CreateTriggerStmt, DropTriggerStmt, TransactionStmt, CreateProcedureStmt,
                 CallStmt, DeclareStmt, SetVarStmt, IfStmt, SignalStmt>;

struct Statement {
    StatementKind kind = StatementKind::Select;
    StatementPayload payload = SelectStmt{};

    template <class T> const T &as() const { return std::get<T>(payload); }
    template <class T> T &as() { return std::get<T>(payload); }
    template <class T> const T *tryAs() const { return std::get_if<T>(&payload); }

    bool operator==(const Statement &) const = default;
};

inline bool CreateTriggerStmt::operator==(const CreateTriggerStmt &o) const {
    return name == o.name && timing == o.timing && event == o.event && table == o.table &&
           body == o.body;
}
inline bool TransactionStmt::operator==(const TransactionStmt &o) const {
    return statements == o.statements;
}
inline bool CreateProcedureStmt::operator==(const CreateProcedureStmt &o) const {
    return name == o.name && params == o.params && body == o.body;
}
inline bool IfStmt::operator==(const IfStmt &o) const {
    return condition == o.condition && thenBlock == o.thenBlock && elseBlock == o.elseBlock;
}

/// Visits every directly nested statement (transaction members, trigger and
/// procedure bodies, both IF branches).
template <class Fn> void forEachChild(const Statement &stmt, Fn &&fn) {
    switch (stmt.kind) {
    case StatementKind::TransactionBlock:
        for (const auto &s : stmt.as<TransactionStmt>().statements) fn(s);
        break;
    case StatementKind::CreateTrigger:
        for (const auto &s : stmt.as<CreateTriggerStmt>().body) fn(s);
        break;
    case StatementKind::CreateProcedure:
        for (const auto &s : stmt.as<CreateProcedureStmt>().body) fn(s);
        break;
    case StatementKind::If:
        for (const auto &s : stmt.as<IfStmt>().thenBlock) fn(s);
        for (const auto &s : stmt.as<IfStmt>().elseBlock) fn(s);
        break;
    default:
        break;
    }
}

} // namespace retro::sql
