#include <sstream>

#include "retro/sql/parser.hpp"

namespace retro::sql {

namespace {

const char *binOpToken(BinOp op) {
    switch (op) {
    case BinOp::Eq: return "=";
    case BinOp::Lt: return "<";
    case BinOp::Le: return "<=";
    case BinOp::Gt: return ">";
    case BinOp::Ge: return ">=";
    case BinOp::And: return "AND";
    case BinOp::Or: return "OR";
    case BinOp::Add: return "+";
    case BinOp::Sub: return "-";
    case BinOp::Mul: return "*";
    case BinOp::Div: return "/";
    case BinOp::In: return "IN";
    case BinOp::Between: return "BETWEEN";
    }
    return "?";
}

bool isPredicateOp(BinOp op) {
    switch (op) {
    case BinOp::Eq:
    case BinOp::Lt:
    case BinOp::Le:
    case BinOp::Gt:
    case BinOp::Ge:
    case BinOp::And:
    case BinOp::Or:
    case BinOp::In:
    case BinOp::Between:
        return true;
    default:
        return false;
    }
}

void printExprTo(std::ostream &out, const Expr &expr) {
    switch (expr.kind) {
    case ExprKind::Literal:
        out << expr.literal.toSqlLiteral();
        return;
    case ExprKind::Column:
        if (!expr.table.empty()) {
            out << expr.table << ".";
        }
        out << expr.column;
        return;
    case ExprKind::Var:
        out << expr.name;
        return;
    case ExprKind::NewRef:
        out << "NEW." << expr.column;
        return;
    case ExprKind::OldRef:
        out << "OLD." << expr.column;
        return;
    case ExprKind::Func:
        out << expr.name << "()";
        return;
    case ExprKind::Star:
        out << "*";
        return;
    case ExprKind::Aggregate: {
        switch (expr.agg) {
        case AggKind::Count: out << "COUNT("; break;
        case AggKind::Sum: out << "SUM("; break;
        case AggKind::Min: out << "MIN("; break;
        case AggKind::Max: out << "MAX("; break;
        }
        printExprTo(out, expr.args[0]);
        out << ")";
        return;
    }
    case ExprKind::Binary: {
        if (expr.op == BinOp::In) {
            printExprTo(out, expr.args[0]);
            out << " IN (";
            for (size_t i = 1; i < expr.args.size(); ++i) {
                if (i > 1) out << ", ";
                printExprTo(out, expr.args[i]);
            }
            out << ")";
            return;
        }
        if (expr.op == BinOp::Between) {
            printExprTo(out, expr.args[0]);
            out << " BETWEEN ";
            printExprTo(out, expr.args[1]);
            out << " AND ";
            printExprTo(out, expr.args[2]);
            return;
        }
        bool parens = isPredicateOp(expr.op);
        auto printSide = [&](const Expr &side) {
            bool sideParens = side.kind == ExprKind::Binary && !isPredicateOp(expr.op) &&
                              !isPredicateOp(side.op);
            if (parens && side.kind == ExprKind::Binary && isPredicateOp(side.op) &&
                (side.op == BinOp::And || side.op == BinOp::Or)) {
                out << "(";
                printExprTo(out, side);
                out << ")";
                return;
            }
            if (sideParens) {
                out << "(";
                printExprTo(out, side);
                out << ")";
            } else {
                printExprTo(out, side);
            }
        };
        printSide(expr.args[0]);
        out << " " << binOpToken(expr.op) << " ";
        printSide(expr.args[1]);
        return;
    }
    }
}

void printType(std::ostream &out, ValueType type, uint8_t scale) {
    switch (type) {
    case ValueType::Int64: out << "INT"; break;
    case ValueType::Decimal: out << "DECIMAL(18," << int(scale) << ")"; break;
    case ValueType::Text: out << "TEXT"; break;
    case ValueType::Timestamp: out << "TIMESTAMP"; break;
    case ValueType::Null: out << "INT"; break;
    }
}

void printSelectTo(std::ostream &out, const SelectStmt &select) {
    out << "SELECT ";
    if (select.star) {
        out << "*";
    } else {
        for (size_t i = 0; i < select.items.size(); ++i) {
            if (i > 0) out << ", ";
            printExprTo(out, select.items[i].expr);
            if (!select.items[i].alias.empty()) {
                out << " AS " << select.items[i].alias;
            }
        }
    }
    if (!select.intoVars.empty()) {
        out << " INTO ";
        for (size_t i = 0; i < select.intoVars.size(); ++i) {
            if (i > 0) out << ", ";
            out << select.intoVars[i];
        }
    }
    if (!select.fromTable.empty()) {
        out << " FROM " << select.fromTable;
        for (const auto &join : select.joins) {
            out << " JOIN " << join.table << " ON ";
            printExprTo(out, join.on);
        }
    }
    if (select.where) {
        out << " WHERE ";
        printExprTo(out, *select.where);
    }
    if (!select.orderBy.empty()) {
        out << " ORDER BY ";
        for (size_t i = 0; i < select.orderBy.size(); ++i) {
            if (i > 0) out << ", ";
            const auto &key = select.orderBy[i];
            if (!key.table.empty()) out << key.table << ".";
            out << key.column;
            if (key.desc) out << " DESC";
        }
    }
    if (select.limit) {
        out << " LIMIT " << *select.limit;
    }
}

void printStatementTo(std::ostream &out, const Statement &stmt);

void printBodyTo(std::ostream &out, const std::vector<Statement> &body) {
    out << "BEGIN ";
    for (const auto &stmt : body) {
        printStatementTo(out, stmt);
        out << "; ";
    }
    out << "END";
}

void printStatementTo(std::ostream &out, const Statement &stmt) {
    switch (stmt.kind) {
    case StatementKind::CreateTable: {
        const auto &create = stmt.as<CreateTableStmt>();
        out << "CREATE TABLE " << create.table << " (";
        for (size_t i = 0; i < create.columns.size(); ++i) {
            const auto &col = create.columns[i];
            if (i > 0) out << ", ";
            out << col.name << " ";
            printType(out, col.type, col.decimalScale);
            if (col.primaryKey) out << " PRIMARY KEY";
            if (col.autoIncrement) out << " AUTO_INCREMENT";
            if (col.unique) out << " UNIQUE";
        }
        for (const auto &fk : create.foreignKeys) {
            out << ", FOREIGN KEY (" << fk.localColumn << ") REFERENCES " << fk.refTable << "("
                << fk.refColumn << ")";
            if (fk.cascadeDelete) out << " ON DELETE CASCADE";
        }
        for (const auto &check : create.checks) {
            out << ", CHECK (";
            printExprTo(out, check.predicate);
            out << ")";
        }
        out << ")";
        return;
    }
    case StatementKind::AlterTable: {
        const auto &alter = stmt.as<AlterTableStmt>();
        out << "ALTER TABLE " << alter.table << " ADD ";
        switch (alter.action) {
        case AlterAction::AddColumn:
            out << "COLUMN " << alter.column.name << " ";
            printType(out, alter.column.type, alter.column.decimalScale);
            break;
        case AlterAction::AddForeignKey:
            out << "FOREIGN KEY (" << alter.foreignKey.localColumn << ") REFERENCES "
                << alter.foreignKey.refTable << "(" << alter.foreignKey.refColumn << ")";
            if (alter.foreignKey.cascadeDelete) out << " ON DELETE CASCADE";
            break;
        case AlterAction::AddCheck:
            out << "CHECK (";
            printExprTo(out, alter.check.predicate);
            out << ")";
            break;
        }
        return;
    }
    case StatementKind::DropTable:
        out << "DROP TABLE " << stmt.as<DropTableStmt>().table;
        return;
    case StatementKind::TruncateTable:
        out << "TRUNCATE TABLE " << stmt.as<TruncateTableStmt>().table;
        return;
    case StatementKind::CreateView: {
        const auto &create = stmt.as<CreateViewStmt>();
        out << "CREATE ";
        if (create.orReplace) out << "OR REPLACE ";
        out << "VIEW " << create.view << " AS ";
        printSelectTo(out, create.select);
        return;
    }
    case StatementKind::DropView:
        out << "DROP VIEW " << stmt.as<DropViewStmt>().view;
        return;
    case StatementKind::Select:
        printSelectTo(out, stmt.as<SelectStmt>());
        return;
    case StatementKind::Insert: {
        const auto &insert = stmt.as<InsertStmt>();
        out << "INSERT INTO " << insert.table;
        if (!insert.columns.empty()) {
            out << " (";
            for (size_t i = 0; i < insert.columns.size(); ++i) {
                if (i > 0) out << ", ";
                out << insert.columns[i];
            }
            out << ")";
        }
        if (insert.select) {
            out << " ";
            printSelectTo(out, *insert.select);
        } else {
            out << " VALUES ";
            for (size_t r = 0; r < insert.rows.size(); ++r) {
                if (r > 0) out << ", ";
                out << "(";
                for (size_t i = 0; i < insert.rows[r].size(); ++i) {
                    if (i > 0) out << ", ";
                    printExprTo(out, insert.rows[r][i]);
                }
                out << ")";
            }
        }
        return;
    }
    case StatementKind::Update: {
        const auto &update = stmt.as<UpdateStmt>();
        out << "UPDATE " << update.table << " SET ";
        for (size_t i = 0; i < update.assignments.size(); ++i) {
            if (i > 0) out << ", ";
            out << update.assignments[i].first << " = ";
            printExprTo(out, update.assignments[i].second);
        }
        if (update.where) {
            out << " WHERE ";
            printExprTo(out, *update.where);
        }
        return;
    }
    case StatementKind::Delete: {
        const auto &del = stmt.as<DeleteStmt>();
        out << "DELETE FROM " << del.table;
        if (del.where) {
            out << " WHERE ";
            printExprTo(out, *del.where);
        }
        return;
    }
    case StatementKind::CreateTrigger: {
        const auto &create = stmt.as<CreateTriggerStmt>();
        out << "CREATE TRIGGER " << create.name << " "
            << (create.timing == TriggerTiming::Before ? "BEFORE" : "AFTER") << " ";
        switch (create.event) {
        case TriggerEvent::Insert: out << "INSERT"; break;
        case TriggerEvent::Update: out << "UPDATE"; break;
        case TriggerEvent::Delete: out << "DELETE"; break;
        }
        out << " ON " << create.table << " FOR EACH ROW ";
        printBodyTo(out, create.body);
        return;
    }
    case StatementKind::DropTrigger:
        out << "DROP TRIGGER " << stmt.as<DropTriggerStmt>().name;
        return;
    case StatementKind::TransactionBlock: {
        out << "BEGIN; ";
        for (const auto &inner : stmt.as<TransactionStmt>().statements) {
            printStatementTo(out, inner);
            out << "; ";
        }
        out << "COMMIT";
        return;
    }
    case StatementKind::CreateProcedure: {
        const auto &create = stmt.as<CreateProcedureStmt>();
        out << "CREATE PROCEDURE " << create.name << " (";
        for (size_t i = 0; i < create.params.size(); ++i) {
            if (i > 0) out << ", ";
            out << "IN " << create.params[i].name << " ";
            printType(out, create.params[i].type, create.params[i].decimalScale);
        }
        out << ") ";
        printBodyTo(out, create.body);
        return;
    }
    case StatementKind::CallProcedure: {
        const auto &call = stmt.as<CallStmt>();
        out << "CALL " << call.procedure << " (";
        for (size_t i = 0; i < call.args.size(); ++i) {
            if (i > 0) out << ", ";
            printExprTo(out, call.args[i]);
        }
        out << ")";
        return;
    }
    case StatementKind::Declare: {
        const auto &decl = stmt.as<DeclareStmt>();
        out << "DECLARE " << decl.var << " ";
        printType(out, decl.type, decl.decimalScale);
        if (decl.init) {
            out << " DEFAULT ";
            printExprTo(out, *decl.init);
        }
        return;
    }
    case StatementKind::SetVar: {
        const auto &set = stmt.as<SetVarStmt>();
        out << "SET " << set.var << " = ";
        printExprTo(out, set.expr);
        return;
    }
    case StatementKind::If: {
        const auto &branch = stmt.as<IfStmt>();
        out << "IF ";
        printExprTo(out, branch.condition);
        out << " THEN ";
        for (const auto &inner : branch.thenBlock) {
            printStatementTo(out, inner);
            out << "; ";
        }
        if (!branch.elseBlock.empty()) {
            out << "ELSE ";
            for (const auto &inner : branch.elseBlock) {
                printStatementTo(out, inner);
                out << "; ";
            }
        }
        out << "END IF";
        return;
    }
    case StatementKind::Signal: {
        const auto &signal = stmt.as<SignalStmt>();
        out << "SIGNAL SQLSTATE '" << signal.sqlstate << "'";
        if (!signal.message.empty()) {
            out << " SET MESSAGE_TEXT = '" << signal.message << "'";
        }
        return;
    }
    }
}

} // namespace

std::string printStatement(const Statement &stmt) {
    std::ostringstream out;
    printStatementTo(out, stmt);
    return out.str();
}

std::string printExpr(const Expr &expr) {
    std::ostringstream out;
    printExprTo(out, expr);
    return out.str();
}

const char *statementKindName(StatementKind kind) {
    switch (kind) {
    case StatementKind::CreateTable: return "CreateTable";
    case StatementKind::AlterTable: return "AlterTable";
    case StatementKind::DropTable: return "DropTable";
    case StatementKind::TruncateTable: return "TruncateTable";
    case StatementKind::CreateView: return "CreateView";
    case StatementKind::DropView: return "DropView";
    case StatementKind::Select: return "Select";
    case StatementKind::Insert: return "Insert";
    case StatementKind::Update: return "Update";
    case StatementKind::Delete: return "Delete";
    case StatementKind::CreateTrigger: return "CreateTrigger";
    case StatementKind::DropTrigger: return "DropTrigger";
    case StatementKind::TransactionBlock: return "TransactionBlock";
    case StatementKind::CreateProcedure: return "CreateProcedure";
    case StatementKind::CallProcedure: return "CallProcedure";
    case StatementKind::Declare: return "Declare";
    case StatementKind::SetVar: return "SetVar";
    case StatementKind::If: return "If";
    case StatementKind::Signal: return "Signal";
    }
    return "?";
}

} // namespace retro::sql
