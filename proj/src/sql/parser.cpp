#include "retro/sql/parser.hpp"

#include <algorithm>
#include <set>

#include "lexer.hpp"

namespace retro::sql {

namespace {

class Parser {
public:
    explicit Parser(const std::string &text) : _lex(text) {}

    Statement parseTopLevel() {
        Statement stmt = parseStatementInner(/*inBody=*/false);
        _lex.acceptPunct(";");
        if (!_lex.atEnd()) {
            _lex.fail("expected end of statement");
        }
        return stmt;
    }

private:
    Lexer _lex;

    Statement parseStatementInner(bool inBody) {
        if (_lex.peekKeyword("CREATE")) {
            if (_lex.peekKeyword("TABLE", 1)) return parseCreateTable();
            if (_lex.peekKeyword("VIEW", 1) ||
                (_lex.peekKeyword("OR", 1) && _lex.peekKeyword("REPLACE", 2))) {
                return parseCreateView();
            }
            if (_lex.peekKeyword("TRIGGER", 1)) return parseCreateTrigger();
            if (_lex.peekKeyword("PROCEDURE", 1)) return parseCreateProcedure();
            if (_lex.peekKeyword("INDEX", 1)) {
                raise(ErrorKind::UnsupportedFeature, "CREATE INDEX is outside the subset");
            }
            _lex.fail("expected TABLE, VIEW, TRIGGER or PROCEDURE after CREATE");
        }
        if (_lex.peekKeyword("ALTER")) return parseAlterTable();
        if (_lex.peekKeyword("DROP")) return parseDrop();
        if (_lex.peekKeyword("TRUNCATE")) return parseTruncate();
        if (_lex.peekKeyword("SELECT")) return parseSelectStatement(inBody);
        if (_lex.peekKeyword("INSERT")) return parseInsert();
        if (_lex.peekKeyword("UPDATE")) return parseUpdate();
        if (_lex.peekKeyword("DELETE")) return parseDelete();
        if (_lex.peekKeyword("BEGIN")) {
            if (inBody) {
                _lex.fail("nested BEGIN blocks are not supported");
            }
            return parseTransaction();
        }
        if (_lex.peekKeyword("CALL")) return parseCall();
        if (inBody) {
            if (_lex.peekKeyword("DECLARE")) return parseDeclare();
            if (_lex.peekKeyword("SET")) return parseSetVar();
            if (_lex.peekKeyword("IF")) return parseIf();
            if (_lex.peekKeyword("SIGNAL")) return parseSignal();
        }
        const Token &t = _lex.peek();
        if (t.type == TokenType::Keyword) {
            raise(ErrorKind::UnsupportedFeature,
                  "statement '" + t.text + "' is outside the supported subset");
        }
        _lex.fail("expected a statement");
    }

    // -- DDL ----------------------------------------------------------------

    ValueType parseType(uint8_t &scale) {
        scale = 0;
        if (_lex.acceptKeyword("INT") || _lex.acceptKeyword("BIGINT") ||
            _lex.acceptKeyword("INT64")) {
            return ValueType::Int64;
        }
        if (_lex.acceptKeyword("TEXT")) {
            return ValueType::Text;
        }
        if (_lex.acceptKeyword("VARCHAR")) {
            if (_lex.acceptPunct("(")) {
                _lex.next();
                _lex.expectPunct(")");
            }
            return ValueType::Text;
        }
        if (_lex.acceptKeyword("DECIMAL")) {
            if (_lex.acceptPunct("(")) {
                _lex.next(); // precision, unused
                if (_lex.acceptPunct(",")) {
                    const Token &s = _lex.peek();
                    if (s.type != TokenType::Number) _lex.fail("expected scale");
                    scale = static_cast<uint8_t>(std::stoi(_lex.next().text));
                }
                _lex.expectPunct(")");
            }
            return ValueType::Decimal;
        }
        if (_lex.acceptKeyword("TIMESTAMP")) {
            return ValueType::Timestamp;
        }
        _lex.fail("expected a type (INT, DECIMAL, TEXT, TIMESTAMP)");
    }

    ForeignKeyDef parseReferences(std::string localColumn) {
        ForeignKeyDef fk;
        fk.localColumn = std::move(localColumn);
        _lex.expectKeyword("REFERENCES");
        fk.refTable = _lex.expectIdentifier("referenced table");
        _lex.expectPunct("(");
        fk.refColumn = _lex.expectIdentifier("referenced column");
        _lex.expectPunct(")");
        if (_lex.acceptKeyword("ON")) {
            _lex.expectKeyword("DELETE");
            _lex.expectKeyword("CASCADE");
            fk.cascadeDelete = true;
        }
        return fk;
    }

    Statement parseCreateTable() {
        _lex.expectKeyword("CREATE");
        _lex.expectKeyword("TABLE");
        CreateTableStmt create;
        create.table = _lex.expectIdentifier("table name");
        _lex.expectPunct("(");
        bool first = true;
        while (!_lex.acceptPunct(")")) {
            if (!first) _lex.expectPunct(",");
            first = false;
            if (_lex.peekKeyword("FOREIGN")) {
                _lex.expectKeyword("FOREIGN");
                _lex.expectKeyword("KEY");
                _lex.expectPunct("(");
                std::string local = _lex.expectIdentifier("column name");
                _lex.expectPunct(")");
                create.foreignKeys.push_back(parseReferences(local));
                continue;
            }
            if (_lex.peekKeyword("CHECK")) {
                _lex.expectKeyword("CHECK");
                _lex.expectPunct("(");
                CheckDef check;
                check.predicate = parsePredicate();
                _lex.expectPunct(")");
                create.checks.push_back(check);
                continue;
            }
            if (_lex.peekKeyword("PRIMARY")) {
                _lex.expectKeyword("PRIMARY");
                _lex.expectKeyword("KEY");
                _lex.expectPunct("(");
                std::string col = _lex.expectIdentifier("column name");
                _lex.expectPunct(")");
                bool found = false;
                for (auto &c : create.columns) {
                    if (c.name == col) {
                        c.primaryKey = true;
                        found = true;
                    }
                }
                if (!found) _lex.fail("PRIMARY KEY names an unknown column");
                continue;
            }
            ColumnDef col;
            col.name = _lex.expectIdentifier("column name");
            col.type = parseType(col.decimalScale);
            for (;;) {
                if (_lex.acceptKeyword("PRIMARY")) {
                    _lex.expectKeyword("KEY");
                    col.primaryKey = true;
                } else if (_lex.acceptKeyword("AUTO_INCREMENT")) {
                    col.autoIncrement = true;
                } else if (_lex.acceptKeyword("UNIQUE")) {
                    col.unique = true;
                } else if (_lex.peekKeyword("REFERENCES")) {
                    create.foreignKeys.push_back(parseReferences(col.name));
                } else {
                    break;
                }
            }
            create.columns.push_back(std::move(col));
        }
        Statement stmt;
        stmt.kind = StatementKind::CreateTable;
        stmt.payload = std::move(create);
        return stmt;
    }

    Statement parseAlterTable() {
        _lex.expectKeyword("ALTER");
        _lex.expectKeyword("TABLE");
        AlterTableStmt alter;
        alter.table = _lex.expectIdentifier("table name");
        _lex.expectKeyword("ADD");
        if (_lex.acceptKeyword("FOREIGN")) {
            _lex.expectKeyword("KEY");
            _lex.expectPunct("(");
            std::string local = _lex.expectIdentifier("column name");
            _lex.expectPunct(")");
            alter.action = AlterAction::AddForeignKey;
            alter.foreignKey = parseReferences(local);
        } else if (_lex.acceptKeyword("CHECK")) {
            _lex.expectPunct("(");
            alter.action = AlterAction::AddCheck;
            alter.check.predicate = parsePredicate();
            _lex.expectPunct(")");
        } else {
            _lex.acceptKeyword("COLUMN");
            alter.action = AlterAction::AddColumn;
            alter.column.name = _lex.expectIdentifier("column name");
            alter.column.type = parseType(alter.column.decimalScale);
        }
        Statement stmt;
        stmt.kind = StatementKind::AlterTable;
        stmt.payload = std::move(alter);
        return stmt;
    }

    Statement parseDrop() {
        _lex.expectKeyword("DROP");
        Statement stmt;
        if (_lex.acceptKeyword("TABLE")) {
            stmt.kind = StatementKind::DropTable;
            stmt.payload = DropTableStmt{_lex.expectIdentifier("table name")};
        } else if (_lex.acceptKeyword("VIEW")) {
            stmt.kind = StatementKind::DropView;
            stmt.payload = DropViewStmt{_lex.expectIdentifier("view name")};
        } else if (_lex.acceptKeyword("TRIGGER")) {
            stmt.kind = StatementKind::DropTrigger;
            stmt.payload = DropTriggerStmt{_lex.expectIdentifier("trigger name")};
        } else {
            _lex.fail("expected TABLE, VIEW or TRIGGER after DROP");
        }
        return stmt;
    }

    Statement parseTruncate() {
        _lex.expectKeyword("TRUNCATE");
        _lex.expectKeyword("TABLE");
        Statement stmt;
        stmt.kind = StatementKind::TruncateTable;
        stmt.payload = TruncateTableStmt{_lex.expectIdentifier("table name")};
        return stmt;
    }

    Statement parseCreateView() {
        _lex.expectKeyword("CREATE");
        CreateViewStmt create;
        if (_lex.acceptKeyword("OR")) {
            _lex.expectKeyword("REPLACE");
            create.orReplace = true;
        }
        _lex.expectKeyword("VIEW");
        create.view = _lex.expectIdentifier("view name");
        _lex.expectKeyword("AS");
        create.select = parseSelectBody(/*allowInto=*/false);
        Statement stmt;
        stmt.kind = StatementKind::CreateView;
        stmt.payload = std::move(create);
        return stmt;
    }

    Statement parseCreateTrigger() {
        _lex.expectKeyword("CREATE");
        _lex.expectKeyword("TRIGGER");
        CreateTriggerStmt create;
        create.name = _lex.expectIdentifier("trigger name");
        if (_lex.acceptKeyword("BEFORE")) {
            create.timing = TriggerTiming::Before;
        } else if (_lex.acceptKeyword("AFTER")) {
            create.timing = TriggerTiming::After;
        } else {
            _lex.fail("expected BEFORE or AFTER");
        }
        if (_lex.acceptKeyword("INSERT")) {
            create.event = TriggerEvent::Insert;
        } else if (_lex.acceptKeyword("UPDATE")) {
            create.event = TriggerEvent::Update;
        } else if (_lex.acceptKeyword("DELETE")) {
            create.event = TriggerEvent::Delete;
        } else {
            _lex.fail("expected INSERT, UPDATE or DELETE");
        }
        _lex.expectKeyword("ON");
        create.table = _lex.expectIdentifier("table name");
        if (_lex.acceptKeyword("FOR")) {
            _lex.expectKeyword("EACH");
            _lex.expectKeyword("ROW");
        }
        create.body = parseBody();
        Statement stmt;
        stmt.kind = StatementKind::CreateTrigger;
        stmt.payload = std::move(create);
        return stmt;
    }

    Statement parseCreateProcedure() {
        _lex.expectKeyword("CREATE");
        _lex.expectKeyword("PROCEDURE");
        CreateProcedureStmt create;
        create.name = _lex.expectIdentifier("procedure name");
        _lex.expectPunct("(");
        bool first = true;
        while (!_lex.acceptPunct(")")) {
            if (!first) _lex.expectPunct(",");
            first = false;
            _lex.acceptKeyword("IN");
            ProcParam param;
            param.name = _lex.expectIdentifier("parameter name");
            param.type = parseType(param.decimalScale);
            create.params.push_back(std::move(param));
        }
        create.body = parseBody();
        Statement stmt;
        stmt.kind = StatementKind::CreateProcedure;
        stmt.payload = std::move(create);
        return stmt;
    }

    std::vector<Statement> parseBody() {
        std::vector<Statement> body;
        _lex.expectKeyword("BEGIN");
        while (!_lex.acceptKeyword("END")) {
            body.push_back(parseStatementInner(/*inBody=*/true));
            _lex.acceptPunct(";");
        }
        return body;
    }

    Statement parseTransaction() {
        _lex.expectKeyword("BEGIN");
        _lex.acceptPunct(";");
        TransactionStmt txn;
        while (!_lex.acceptKeyword("COMMIT")) {
            txn.statements.push_back(parseStatementInner(/*inBody=*/true));
            _lex.acceptPunct(";");
        }
        Statement stmt;
        stmt.kind = StatementKind::TransactionBlock;
        stmt.payload = std::move(txn);
        return stmt;
    }

    Statement parseCall() {
        _lex.expectKeyword("CALL");
        CallStmt call;
        call.procedure = _lex.expectIdentifier("procedure name");
        _lex.expectPunct("(");
        bool first = true;
        while (!_lex.acceptPunct(")")) {
            if (!first) _lex.expectPunct(",");
            first = false;
            call.args.push_back(parseValueExpr());
        }
        Statement stmt;
        stmt.kind = StatementKind::CallProcedure;
        stmt.payload = std::move(call);
        return stmt;
    }

    Statement parseDeclare() {
        _lex.expectKeyword("DECLARE");
        DeclareStmt decl;
        decl.var = _lex.expectIdentifier("variable name");
        decl.type = parseType(decl.decimalScale);
        if (_lex.acceptKeyword("DEFAULT")) {
            decl.init = parseValueExpr();
        }
        Statement stmt;
        stmt.kind = StatementKind::Declare;
        stmt.payload = std::move(decl);
        return stmt;
    }

    Statement parseSetVar() {
        _lex.expectKeyword("SET");
        SetVarStmt set;
        set.var = _lex.expectIdentifier("variable name");
        _lex.expectPunct("=");
        set.expr = parseValueExpr();
        Statement stmt;
        stmt.kind = StatementKind::SetVar;
        stmt.payload = std::move(set);
        return stmt;
    }

    Statement parseIf() {
        _lex.expectKeyword("IF");
        IfStmt branch;
        branch.condition = parsePredicate();
        _lex.expectKeyword("THEN");
        while (!_lex.peekKeyword("ELSE") && !_lex.peekKeyword("END")) {
            branch.thenBlock.push_back(parseStatementInner(/*inBody=*/true));
            _lex.acceptPunct(";");
        }
        if (_lex.acceptKeyword("ELSE")) {
            while (!_lex.peekKeyword("END")) {
                branch.elseBlock.push_back(parseStatementInner(/*inBody=*/true));
                _lex.acceptPunct(";");
            }
        }
        _lex.expectKeyword("END");
        _lex.expectKeyword("IF");
        Statement stmt;
        stmt.kind = StatementKind::If;
        stmt.payload = std::move(branch);
        return stmt;
    }

    Statement parseSignal() {
        _lex.expectKeyword("SIGNAL");
        _lex.expectKeyword("SQLSTATE");
        SignalStmt signal;
        const Token &state = _lex.peek();
        if (state.type != TokenType::String) _lex.fail("expected SQLSTATE string");
        signal.sqlstate = _lex.next().text;
        if (_lex.acceptKeyword("SET")) {
            _lex.expectKeyword("MESSAGE_TEXT");
            _lex.expectPunct("=");
            const Token &msg = _lex.peek();
            if (msg.type != TokenType::String) _lex.fail("expected message string");
            signal.message = _lex.next().text;
        }
        Statement stmt;
        stmt.kind = StatementKind::Signal;
        stmt.payload = std::move(signal);
        return stmt;
    }

    // -- DML ----------------------------------------------------------------

    Statement parseSelectStatement(bool inBody) {
        SelectStmt select = parseSelectBody(/*allowInto=*/inBody);
        Statement stmt;
        stmt.kind = StatementKind::Select;
        stmt.payload = std::move(select);
        return stmt;
    }

    SelectStmt parseSelectBody(bool allowInto) {
        _lex.expectKeyword("SELECT");
        SelectStmt select;
        if (_lex.peekKeyword("DISTINCT")) {
            raise(ErrorKind::UnsupportedFeature, "SELECT DISTINCT is outside the subset");
        }
        if (_lex.acceptPunct("*")) {
            select.star = true;
        } else {
            for (;;) {
                SelectItem item;
                item.expr = parseValueExpr();
                if (_lex.acceptKeyword("AS")) {
                    item.alias = _lex.expectIdentifier("alias");
                }
                select.items.push_back(std::move(item));
                if (!_lex.acceptPunct(",")) break;
            }
        }
        if (_lex.peekKeyword("INTO")) {
            if (!allowInto) {
                raise(ErrorKind::UnsupportedFeature,
                      "SELECT ... INTO is only valid inside procedure or trigger bodies");
            }
            _lex.expectKeyword("INTO");
            for (;;) {
                select.intoVars.push_back(_lex.expectIdentifier("variable name"));
                if (!_lex.acceptPunct(",")) break;
            }
        }
        if (_lex.acceptKeyword("FROM")) {
            select.fromTable = _lex.expectIdentifier("table name");
            while (_lex.acceptKeyword("JOIN")) {
                JoinClause join;
                join.table = _lex.expectIdentifier("table name");
                _lex.expectKeyword("ON");
                Expr lhs = parseColumnRef();
                _lex.expectPunct("=");
                Expr rhs = parseColumnRef();
                join.on = Expr::binary(BinOp::Eq, std::move(lhs), std::move(rhs));
                select.joins.push_back(std::move(join));
            }
        }
        if (_lex.acceptKeyword("WHERE")) {
            select.where = parsePredicate();
        }
        if (_lex.acceptKeyword("ORDER")) {
            _lex.expectKeyword("BY");
            for (;;) {
                OrderKey key;
                Expr col = parseColumnRef();
                key.table = col.table;
                key.column = col.column;
                if (_lex.acceptKeyword("DESC")) {
                    key.desc = true;
                } else {
                    _lex.acceptKeyword("ASC");
                }
                select.orderBy.push_back(std::move(key));
                if (!_lex.acceptPunct(",")) break;
            }
        }
        if (_lex.peekKeyword("GROUP") || _lex.peekKeyword("HAVING")) {
            raise(ErrorKind::UnsupportedFeature, "GROUP BY / HAVING are outside the subset");
        }
        if (_lex.acceptKeyword("LIMIT")) {
            const Token &n = _lex.peek();
            if (n.type != TokenType::Number) _lex.fail("expected LIMIT count");
            select.limit = std::stoll(_lex.next().text);
        }
        return select;
    }

    Statement parseInsert() {
        _lex.expectKeyword("INSERT");
        _lex.expectKeyword("INTO");
        InsertStmt insert;
        insert.table = _lex.expectIdentifier("table name");
        if (_lex.acceptPunct("(")) {
            for (;;) {
                insert.columns.push_back(_lex.expectIdentifier("column name"));
                if (!_lex.acceptPunct(",")) break;
            }
            _lex.expectPunct(")");
        }
        if (_lex.acceptKeyword("VALUES")) {
            for (;;) {
                _lex.expectPunct("(");
                std::vector<Expr> row;
                for (;;) {
                    row.push_back(parseValueExpr());
                    if (!_lex.acceptPunct(",")) break;
                }
                _lex.expectPunct(")");
                insert.rows.push_back(std::move(row));
                if (!_lex.acceptPunct(",")) break;
            }
        } else if (_lex.peekKeyword("SELECT")) {
            insert.select = std::make_shared<SelectStmt>(parseSelectBody(/*allowInto=*/false));
        } else {
            _lex.fail("expected VALUES or SELECT");
        }
        Statement stmt;
        stmt.kind = StatementKind::Insert;
        stmt.payload = std::move(insert);
        return stmt;
    }

    Statement parseUpdate() {
        _lex.expectKeyword("UPDATE");
        UpdateStmt update;
        update.table = _lex.expectIdentifier("table name");
        _lex.expectKeyword("SET");
        for (;;) {
            std::string column = _lex.expectIdentifier("column name");
            _lex.expectPunct("=");
            update.assignments.emplace_back(std::move(column), parseValueExpr());
            if (!_lex.acceptPunct(",")) break;
        }
        if (_lex.acceptKeyword("WHERE")) {
            update.where = parsePredicate();
        }
        Statement stmt;
        stmt.kind = StatementKind::Update;
        stmt.payload = std::move(update);
        return stmt;
    }

    Statement parseDelete() {
        _lex.expectKeyword("DELETE");
        _lex.expectKeyword("FROM");
        DeleteStmt del;
        del.table = _lex.expectIdentifier("table name");
        if (_lex.acceptKeyword("WHERE")) {
            del.where = parsePredicate();
        }
        Statement stmt;
        stmt.kind = StatementKind::Delete;
        stmt.payload = std::move(del);
        return stmt;
    }

    // -- Expressions ----------------------------------------------------------
    //
    // Predicates are conjunctions/disjunctions of comparisons; parentheses in
    // predicate position always group predicates, not arithmetic.

    Expr parsePredicate() { return parseOr(); }

    Expr parseOr() {
        Expr lhs = parseAnd();
        while (_lex.acceptKeyword("OR")) {
            lhs = Expr::binary(BinOp::Or, std::move(lhs), parseAnd());
        }
        return lhs;
    }

    Expr parseAnd() {
        Expr lhs = parseComparison();
        while (_lex.acceptKeyword("AND")) {
            lhs = Expr::binary(BinOp::And, std::move(lhs), parseComparison());
        }
        return lhs;
    }

    Expr parseComparison() {
        if (_lex.peekPunct("(")) {
            _lex.expectPunct("(");
            Expr inner = parsePredicate();
            _lex.expectPunct(")");
            return inner;
        }
        Expr lhs = parseValueExpr();
        if (_lex.peekKeyword("LIKE")) {
            raise(ErrorKind::UnsupportedFeature, "LIKE predicates are outside the subset");
        }
        if (_lex.acceptKeyword("IN")) {
            Expr e;
            e.kind = ExprKind::Binary;
            e.op = BinOp::In;
            e.args.push_back(std::move(lhs));
            _lex.expectPunct("(");
            for (;;) {
                e.args.push_back(parseValueExpr());
                if (!_lex.acceptPunct(",")) break;
            }
            _lex.expectPunct(")");
            return e;
        }
        if (_lex.acceptKeyword("BETWEEN")) {
            Expr e;
            e.kind = ExprKind::Binary;
            e.op = BinOp::Between;
            e.args.push_back(std::move(lhs));
            e.args.push_back(parseValueExpr());
            _lex.expectKeyword("AND");
            e.args.push_back(parseValueExpr());
            return e;
        }
        BinOp op;
        if (_lex.acceptPunct("=")) {
            op = BinOp::Eq;
        } else if (_lex.acceptPunct("<=")) {
            op = BinOp::Le;
        } else if (_lex.acceptPunct(">=")) {
            op = BinOp::Ge;
        } else if (_lex.acceptPunct("<")) {
            op = BinOp::Lt;
        } else if (_lex.acceptPunct(">")) {
            op = BinOp::Gt;
        } else if (_lex.peekPunct("<>") || _lex.peekPunct("!=")) {
            raise(ErrorKind::UnsupportedFeature, "inequality predicates are outside the subset");
        } else {
            _lex.fail("expected a comparison operator");
        }
        return Expr::binary(op, std::move(lhs), parseValueExpr());
    }

    Expr parseValueExpr() { return parseAdditive(); }

    Expr parseAdditive() {
        Expr lhs = parseMultiplicative();
        for (;;) {
            if (_lex.acceptPunct("+")) {
                lhs = Expr::binary(BinOp::Add, std::move(lhs), parseMultiplicative());
            } else if (_lex.acceptPunct("-")) {
                lhs = Expr::binary(BinOp::Sub, std::move(lhs), parseMultiplicative());
            } else {
                break;
            }
        }
        return lhs;
    }

    Expr parseMultiplicative() {
        Expr lhs = parseAtom();
        for (;;) {
            if (_lex.acceptPunct("*")) {
                lhs = Expr::binary(BinOp::Mul, std::move(lhs), parseAtom());
            } else if (_lex.acceptPunct("/")) {
                lhs = Expr::binary(BinOp::Div, std::move(lhs), parseAtom());
            } else {
                break;
            }
        }
        return lhs;
    }

    Expr parseColumnRef() {
        std::string first = _lex.expectIdentifier("column reference");
        if (_lex.acceptPunct(".")) {
            std::string second = _lex.expectIdentifier("column name");
            return Expr::col(first, second);
        }
        return Expr::col("", first);
    }

    Expr parseAtom() {
        const Token &t = _lex.peek();
        if (_lex.acceptPunct("(")) {
            Expr inner = parseValueExpr();
            _lex.expectPunct(")");
            return inner;
        }
        if (_lex.acceptPunct("-")) {
            Expr zero = Expr::lit(Value::int64(0));
            return Expr::binary(BinOp::Sub, std::move(zero), parseAtom());
        }
        if (t.type == TokenType::Number) {
            _lex.next();
            if (t.text.find('.') != std::string::npos) {
                return Expr::lit(Value::fromPlainString(ValueType::Decimal, t.text));
            }
            return Expr::lit(Value::int64(std::stoll(t.text)));
        }
        if (t.type == TokenType::String) {
            _lex.next();
            return Expr::lit(Value::text(t.text));
        }
        if (_lex.acceptKeyword("NULL")) {
            return Expr::lit(Value::null());
        }
        if (_lex.peekKeyword("TIMESTAMP") && _lex.peek(1).type == TokenType::String) {
            _lex.next();
            Token lit = _lex.next();
            return Expr::lit(Value::timestamp(parseTimestamp(lit.text)));
        }
        if (_lex.peekKeyword("NEW") && _lex.peekPunct(".", 1)) {
            _lex.next();
            _lex.next();
            Expr e;
            e.kind = ExprKind::NewRef;
            e.column = _lex.expectIdentifier("column name");
            return e;
        }
        if (_lex.peekKeyword("OLD") && _lex.peekPunct(".", 1)) {
            _lex.next();
            _lex.next();
            Expr e;
            e.kind = ExprKind::OldRef;
            e.column = _lex.expectIdentifier("column name");
            return e;
        }
        if ((_lex.peekKeyword("CURTIME") || _lex.peekKeyword("NOW") || _lex.peekKeyword("RAND")) &&
            _lex.peekPunct("(", 1)) {
            Token fn = _lex.next();
            _lex.expectPunct("(");
            _lex.expectPunct(")");
            Expr e;
            e.kind = ExprKind::Func;
            e.name = fn.text;
            return e;
        }
        if ((_lex.peekKeyword("COUNT") || _lex.peekKeyword("SUM") || _lex.peekKeyword("MIN") ||
             _lex.peekKeyword("MAX")) &&
            _lex.peekPunct("(", 1)) {
            Token fn = _lex.next();
            _lex.expectPunct("(");
            Expr e;
            e.kind = ExprKind::Aggregate;
            if (fn.text == "COUNT") e.agg = AggKind::Count;
            if (fn.text == "SUM") e.agg = AggKind::Sum;
            if (fn.text == "MIN") e.agg = AggKind::Min;
            if (fn.text == "MAX") e.agg = AggKind::Max;
            if (_lex.acceptPunct("*")) {
                Expr star;
                star.kind = ExprKind::Star;
                e.args.push_back(std::move(star));
            } else {
                e.args.push_back(parseValueExpr());
            }
            _lex.expectPunct(")");
            return e;
        }
        if (t.type == TokenType::Identifier ||
            (t.type == TokenType::Keyword && _lex.peek(1).type == TokenType::Punct &&
             _lex.peekPunct(".", 1))) {
            return parseColumnRef();
        }
        if (t.type == TokenType::Keyword) {
            // Allow non-reserved keywords as bare identifiers.
            return parseColumnRef();
        }
        _lex.fail("expected an expression");
    }
};

} // namespace

Statement parseStatementRaw(const std::string &text) {
    Parser parser(text);
    return parser.parseTopLevel();
}

// ---------------------------------------------------------------------------
// Name resolution

namespace {

struct Scope {
    const Catalog *catalog = nullptr;
    Pos pos = 0;
    std::vector<std::string> tables;       // FROM/JOIN/target tables in scope
    std::set<std::string> vars;            // declared variables and parameters
    const TableSchema *triggerTable = nullptr;
    TriggerEvent triggerEvent = TriggerEvent::Insert;
    bool inTrigger = false;

    std::vector<ColumnDef> columnsOf(const std::string &name) const {
        if (const ViewDef *view = catalog->viewAt(name, pos)) {
            return view->outputColumns;
        }
        if (const TableSchema *schema = catalog->tableAt(name, pos)) {
            return schema->columns;
        }
        raise(ErrorKind::UnresolvedName, "table or view not found: " + name);
    }

    bool relationExists(const std::string &name) const {
        return catalog->tableAt(name, pos) != nullptr || catalog->viewAt(name, pos) != nullptr;
    }

    void requireRelation(const std::string &name) const {
        if (!relationExists(name)) {
            raise(ErrorKind::UnresolvedName, "table or view not found: " + name);
        }
    }

    void requireColumn(const std::string &table, const std::string &column) const {
        for (const auto &col : columnsOf(table)) {
            if (col.name == column) {
                return;
            }
        }
        raise(ErrorKind::UnresolvedName, "column not found: " + table + "." + column);
    }
};

void resolveExpr(Expr &expr, Scope &scope, bool allowColumns) {
    switch (expr.kind) {
    case ExprKind::Column: {
        if (!expr.table.empty()) {
            if (std::find(scope.tables.begin(), scope.tables.end(), expr.table) ==
                scope.tables.end()) {
                raise(ErrorKind::UnresolvedName, "table not in scope: " + expr.table);
            }
            scope.requireColumn(expr.table, expr.column);
            return;
        }
        // Bare identifier: resolve to a scoped table column first, then to a
        // variable.
        if (allowColumns) {
            std::string owner;
            int matches = 0;
            for (const auto &table : scope.tables) {
                for (const auto &col : scope.columnsOf(table)) {
                    if (col.name == expr.column) {
                        owner = table;
                        ++matches;
                        break;
                    }
                }
            }
            if (matches > 1) {
                raise(ErrorKind::SyntaxError, "ambiguous column: " + expr.column);
            }
            if (matches == 1) {
                expr.table = owner;
                return;
            }
        }
        if (scope.vars.count(expr.column)) {
            expr.kind = ExprKind::Var;
            expr.name = expr.column;
            expr.column.clear();
            return;
        }
        raise(ErrorKind::UnresolvedName, "name not found: " + expr.column);
    }
    case ExprKind::Var:
        if (!scope.vars.count(expr.name)) {
            raise(ErrorKind::UnresolvedName, "variable not found: " + expr.name);
        }
        return;
    case ExprKind::NewRef:
    case ExprKind::OldRef: {
        if (!scope.inTrigger || scope.triggerTable == nullptr) {
            raise(ErrorKind::SyntaxError, "NEW/OLD outside a trigger body");
        }
        if (expr.kind == ExprKind::NewRef && scope.triggerEvent == TriggerEvent::Delete) {
            raise(ErrorKind::SyntaxError, "NEW is not available in DELETE triggers");
        }
        if (expr.kind == ExprKind::OldRef && scope.triggerEvent == TriggerEvent::Insert) {
            raise(ErrorKind::SyntaxError, "OLD is not available in INSERT triggers");
        }
        if (scope.triggerTable->findColumn(expr.column) == nullptr) {
            raise(ErrorKind::UnresolvedName,
                  "column not found: " + scope.triggerTable->name + "." + expr.column);
        }
        return;
    }
    default:
        for (auto &arg : expr.args) {
            resolveExpr(arg, scope, allowColumns);
        }
        return;
    }
}

void resolveSelect(SelectStmt &select, Scope &scope) {
    Scope inner = scope;
    if (!select.fromTable.empty()) {
        inner.requireRelation(select.fromTable);
        inner.tables.push_back(select.fromTable);
        for (auto &join : select.joins) {
            inner.requireRelation(join.table);
            inner.tables.push_back(join.table);
        }
        for (auto &join : select.joins) {
            resolveExpr(join.on, inner, /*allowColumns=*/true);
        }
    }
    bool columns = !select.fromTable.empty();
    for (auto &item : select.items) {
        resolveExpr(item.expr, inner, columns);
    }
    if (select.where) {
        resolveExpr(*select.where, inner, columns);
    }
    for (auto &key : select.orderBy) {
        Expr col = Expr::col(key.table, key.column);
        resolveExpr(col, inner, columns);
        key.table = col.table;
        key.column = col.column;
    }
    for (const auto &var : select.intoVars) {
        if (!scope.vars.count(var)) {
            raise(ErrorKind::UnresolvedName, "variable not found: " + var);
        }
    }
}

void resolveStatement(Statement &stmt, Scope &scope);

void resolveBody(std::vector<Statement> &body, Scope scope) {
    for (auto &stmt : body) {
        resolveStatement(stmt, scope);
        if (stmt.kind == StatementKind::Declare) {
            scope.vars.insert(stmt.as<DeclareStmt>().var);
        }
    }
}

void resolveStatement(Statement &stmt, Scope &scope) {
    switch (stmt.kind) {
    case StatementKind::CreateTable: {
        auto &create = stmt.as<CreateTableStmt>();
        for (const auto &fk : create.foreignKeys) {
            const TableSchema *ref = scope.catalog->tableAt(fk.refTable, scope.pos);
            if (ref == nullptr || ref->findColumn(fk.refColumn) == nullptr) {
                raise(ErrorKind::UnresolvedName,
                      "foreign key target not found: " + fk.refTable + "." + fk.refColumn);
            }
            bool local = false;
            for (const auto &col : create.columns) {
                local |= col.name == fk.localColumn;
            }
            if (!local) {
                raise(ErrorKind::UnresolvedName, "foreign key column not found: " + fk.localColumn);
            }
        }
        Scope inner = scope;
        inner.tables.clear();
        for (auto &check : create.checks) {
            // CHECK predicates reference the table's own columns.
            std::vector<const Expr *> stack{&check.predicate};
            while (!stack.empty()) {
                const Expr *e = stack.back();
                stack.pop_back();
                if (e->kind == ExprKind::Column) {
                    bool found = false;
                    for (const auto &col : create.columns) {
                        found |= col.name == e->column;
                    }
                    if (!found) {
                        raise(ErrorKind::UnresolvedName, "column not found: " + e->column);
                    }
                }
                for (const auto &arg : e->args) {
                    stack.push_back(&arg);
                }
            }
        }
        return;
    }
    case StatementKind::AlterTable: {
        auto &alter = stmt.as<AlterTableStmt>();
        const TableSchema *schema = scope.catalog->tableAt(alter.table, scope.pos);
        if (schema == nullptr) {
            raise(ErrorKind::UnresolvedName, "table not found: " + alter.table);
        }
        if (alter.action == AlterAction::AddForeignKey) {
            const TableSchema *ref = scope.catalog->tableAt(alter.foreignKey.refTable, scope.pos);
            if (ref == nullptr || ref->findColumn(alter.foreignKey.refColumn) == nullptr) {
                raise(ErrorKind::UnresolvedName,
                      "foreign key target not found: " + alter.foreignKey.refTable + "." +
                          alter.foreignKey.refColumn);
            }
        }
        return;
    }
    case StatementKind::DropTable:
        if (scope.catalog->tableAt(stmt.as<DropTableStmt>().table, scope.pos) == nullptr) {
            raise(ErrorKind::UnresolvedName, "table not found: " + stmt.as<DropTableStmt>().table);
        }
        return;
    case StatementKind::TruncateTable:
        if (scope.catalog->tableAt(stmt.as<TruncateTableStmt>().table, scope.pos) == nullptr) {
            raise(ErrorKind::UnresolvedName,
                  "table not found: " + stmt.as<TruncateTableStmt>().table);
        }
        return;
    case StatementKind::CreateView: {
        auto &create = stmt.as<CreateViewStmt>();
        Scope inner = scope;
        resolveSelect(create.select, inner);
        if (!create.select.intoVars.empty() || create.select.fromTable.empty()) {
            raise(ErrorKind::UnsupportedFeature, "views must select from a single relation");
        }
        for (const auto &item : create.select.items) {
            if (item.expr.kind == ExprKind::Aggregate) {
                raise(ErrorKind::UnsupportedFeature, "aggregate views are outside the subset");
            }
        }
        return;
    }
    case StatementKind::DropView:
        if (scope.catalog->viewAt(stmt.as<DropViewStmt>().view, scope.pos) == nullptr) {
            raise(ErrorKind::UnresolvedName, "view not found: " + stmt.as<DropViewStmt>().view);
        }
        return;
    case StatementKind::Select:
        resolveSelect(stmt.as<SelectStmt>(), scope);
        return;
    case StatementKind::Insert: {
        auto &insert = stmt.as<InsertStmt>();
        scope.requireRelation(insert.table);
        auto columns = scope.columnsOf(insert.table);
        for (const auto &name : insert.columns) {
            bool found = false;
            for (const auto &col : columns) {
                found |= col.name == name;
            }
            if (!found) {
                raise(ErrorKind::UnresolvedName, "column not found: " + insert.table + "." + name);
            }
        }
        size_t width = insert.columns.empty() ? columns.size() : insert.columns.size();
        Scope inner = scope; // VALUES expressions see vars, not columns
        for (auto &row : insert.rows) {
            if (row.size() != width) {
                raise(ErrorKind::SyntaxError, "VALUES row width mismatch for " + insert.table);
            }
            for (auto &expr : row) {
                resolveExpr(expr, inner, /*allowColumns=*/false);
            }
        }
        if (insert.select) {
            resolveSelect(*insert.select, inner);
            size_t produced = insert.select->star
                                  ? inner.columnsOf(insert.select->fromTable).size()
                                  : insert.select->items.size();
            if (produced != width) {
                raise(ErrorKind::SyntaxError, "INSERT ... SELECT width mismatch");
            }
        }
        return;
    }
    case StatementKind::Update: {
        auto &update = stmt.as<UpdateStmt>();
        scope.requireRelation(update.table);
        Scope inner = scope;
        inner.tables.push_back(update.table);
        for (auto &[column, expr] : update.assignments) {
            inner.requireColumn(update.table, column);
            resolveExpr(expr, inner, /*allowColumns=*/true);
        }
        if (update.where) {
            resolveExpr(*update.where, inner, /*allowColumns=*/true);
        }
        return;
    }
    case StatementKind::Delete: {
        auto &del = stmt.as<DeleteStmt>();
        scope.requireRelation(del.table);
        Scope inner = scope;
        inner.tables.push_back(del.table);
        if (del.where) {
            resolveExpr(*del.where, inner, /*allowColumns=*/true);
        }
        return;
    }
    case StatementKind::CreateTrigger: {
        auto &create = stmt.as<CreateTriggerStmt>();
        const TableSchema *schema = scope.catalog->tableAt(create.table, scope.pos);
        if (schema == nullptr) {
            raise(ErrorKind::UnresolvedName, "table not found: " + create.table);
        }
        Scope inner = scope;
        inner.inTrigger = true;
        inner.triggerTable = schema;
        inner.triggerEvent = create.event;
        resolveBody(create.body, inner);
        return;
    }
    case StatementKind::DropTrigger:
        if (!scope.catalog->triggerAliveAt(stmt.as<DropTriggerStmt>().name, scope.pos + 1)) {
            raise(ErrorKind::UnresolvedName,
                  "trigger not found: " + stmt.as<DropTriggerStmt>().name);
        }
        return;
    case StatementKind::TransactionBlock:
        resolveBody(stmt.as<TransactionStmt>().statements, scope);
        return;
    case StatementKind::CreateProcedure: {
        auto &create = stmt.as<CreateProcedureStmt>();
        Scope inner = scope;
        for (const auto &param : create.params) {
            inner.vars.insert(param.name);
        }
        resolveBody(create.body, inner);
        return;
    }
    case StatementKind::CallProcedure: {
        auto &call = stmt.as<CallStmt>();
        const ProcedureDef *proc = scope.catalog->procedureAt(call.procedure, scope.pos);
        if (proc == nullptr) {
            raise(ErrorKind::UnresolvedName, "procedure not found: " + call.procedure);
        }
        if (proc->stmt.params.size() != call.args.size()) {
            raise(ErrorKind::SyntaxError, "argument count mismatch calling " + call.procedure);
        }
        for (auto &arg : call.args) {
            resolveExpr(arg, scope, /*allowColumns=*/false);
        }
        return;
    }
    case StatementKind::Declare: {
        auto &decl = stmt.as<DeclareStmt>();
        if (decl.init) {
            resolveExpr(*decl.init, scope, /*allowColumns=*/false);
        }
        return;
    }
    case StatementKind::SetVar: {
        auto &set = stmt.as<SetVarStmt>();
        if (!scope.vars.count(set.var)) {
            raise(ErrorKind::UnresolvedName, "variable not found: " + set.var);
        }
        resolveExpr(set.expr, scope, /*allowColumns=*/false);
        return;
    }
    case StatementKind::If: {
        auto &branch = stmt.as<IfStmt>();
        resolveExpr(branch.condition, scope, /*allowColumns=*/false);
        resolveBody(branch.thenBlock, scope);
        resolveBody(branch.elseBlock, scope);
        return;
    }
    case StatementKind::Signal:
        return;
    }
}

} // namespace

Statement parseStatement(const std::string &text, const Catalog &catalog, uint64_t atIdx) {
    Statement stmt = parseStatementRaw(text);
    Scope scope;
    scope.catalog = &catalog;
    scope.pos = posOf(atIdx);
    resolveStatement(stmt, scope);
    return stmt;
}

} // namespace retro::sql
