#include <doctest.h>

#include <sstream>

#include "retro/errors.hpp"
#include "retro/sql/catalog.hpp"
#include "retro/sql/log.hpp"
#include "retro/sql/parser.hpp"
#include "test_fixtures.hpp"

using namespace retro;
using namespace retro::sql;

namespace {

Catalog bankCatalog() {
    Catalog catalog;
    uint64_t idx = 1;
    for (const char *ddl : testing::kBankDdl) {
        Statement stmt = parseStatement(ddl, catalog, idx);
        catalog.apply(stmt, idx);
        ++idx;
    }
    return catalog;
}

} // namespace

TEST_CASE("parse INSERT resolves against the catalog") {
    Catalog catalog = bankCatalog();
    Statement stmt = parseStatement(
        "INSERT INTO Accounts(aid,uid,balance) VALUES (0001,'alice',100)", catalog, 8);
    CHECK(stmt.kind == StatementKind::Insert);
    const auto &insert = stmt.as<InsertStmt>();
    CHECK(insert.table == "Accounts");
    CHECK(insert.rows.size() == 1);
    CHECK(insert.rows[0][0].literal == Value::int64(1));
    CHECK(insert.rows[0][1].literal == Value::text("alice"));
}

TEST_CASE("parse table-less SELECT") {
    Catalog catalog;
    Statement stmt = parseStatement("SELECT 1", catalog, 1);
    CHECK(stmt.kind == StatementKind::Select);
    const auto &select = stmt.as<SelectStmt>();
    CHECK(select.fromTable.empty());
    CHECK(select.items.size() == 1);
}

TEST_CASE("parse INSERT into a missing table is UnresolvedName") {
    Catalog catalog;
    CHECK_THROWS_WITH_AS(parseStatement("INSERT INTO NoSuchTable VALUES (1)", catalog, 1),
                         doctest::Contains("NoSuchTable"), Error);
    try {
        parseStatement("INSERT INTO NoSuchTable VALUES (1)", catalog, 1);
    } catch (const Error &e) {
        CHECK(e.kind() == ErrorKind::UnresolvedName);
    }
}

TEST_CASE("recognized SQL outside the subset fails distinctly") {
    Catalog catalog = bankCatalog();
    try {
        parseStatement("SELECT uid FROM Users GROUP BY uid", catalog, 9);
        FAIL("expected UnsupportedFeature");
    } catch (const Error &e) {
        CHECK(e.kind() == ErrorKind::UnsupportedFeature);
    }
    try {
        parseStatement("SELECT uid FROM Users WHERE uid LIKE 'a%'", catalog, 9);
        FAIL("expected UnsupportedFeature");
    } catch (const Error &e) {
        CHECK(e.kind() == ErrorKind::UnsupportedFeature);
    }
}

TEST_CASE("syntax errors carry position hints") {
    Catalog catalog;
    try {
        parseStatement("SELEC 1", catalog, 1);
        FAIL("expected SyntaxError");
    } catch (const Error &e) {
        CHECK(e.kind() == ErrorKind::SyntaxError);
    }
    try {
        parseStatement("INSERT Users VALUES (1)", catalog, 1);
        FAIL("expected SyntaxError");
    } catch (const Error &e) {
        CHECK(e.kind() == ErrorKind::SyntaxError);
        CHECK(std::string(e.what()).find("offset") != std::string::npos);
    }
}

TEST_CASE("apply_ddl CREATE TABLE with FK registers the FK") {
    Catalog catalog = bankCatalog();
    const TableSchema *accounts = catalog.tableAt("Accounts", posOf(100));
    REQUIRE(accounts != nullptr);
    REQUIRE(accounts->foreignKeys.size() == 1);
    CHECK(accounts->foreignKeys[0].refTable == "Users");
    CHECK(accounts->foreignKeys[0].refColumn == "uid");
}

TEST_CASE("apply_ddl DROP TRIGGER closes the alive interval") {
    Catalog catalog = bankCatalog();
    CHECK(catalog.triggerAliveAt("BalanceCheck", posOf(6)));
    Statement drop = parseStatement("DROP TRIGGER BalanceCheck", catalog, 20);
    catalog.apply(drop, 20);
    CHECK(catalog.triggerAliveAt("BalanceCheck", posOf(20)));
    CHECK_FALSE(catalog.triggerAliveAt("BalanceCheck", posOf(21)));
    // The pre-image state is still retrievable.
    CHECK(catalog.triggerAliveAt("BalanceCheck", posOf(10)));
}

TEST_CASE("apply_ddl duplicate CREATE TABLE is DuplicateName") {
    Catalog catalog;
    Statement create = parseStatement("CREATE TABLE Users (uid TEXT PRIMARY KEY)", catalog, 1);
    catalog.apply(create, 1);
    try {
        catalog.apply(create, 2);
        FAIL("expected DuplicateName");
    } catch (const Error &e) {
        CHECK(e.kind() == ErrorKind::DuplicateName);
    }
}

TEST_CASE("catalog versioning: earlier states never mutate") {
    Catalog catalog;
    catalog.apply(parseStatement("CREATE TABLE T (a INT)", catalog, 1), 1);
    const TableSchema *before = catalog.tableAt("T", posOf(1));
    REQUIRE(before != nullptr);
    CHECK(before->columns.size() == 1);
    catalog.apply(parseStatement("ALTER TABLE T ADD COLUMN b TEXT", catalog, 5), 5);
    const TableSchema *after = catalog.tableAt("T", posOf(5));
    REQUIRE(after != nullptr);
    CHECK(after->columns.size() == 2);
    const TableSchema *asOf1 = catalog.tableAt("T", posOf(1));
    CHECK(asOf1->columns.size() == 1);
    CHECK(asOf1 == before);
}

TEST_CASE("view closure equals brute-force expansion") {
    Catalog catalog;
    catalog.apply(parseStatement("CREATE TABLE T (a INT, b INT, c INT)", catalog, 1), 1);
    catalog.apply(parseStatement("CREATE VIEW V1 AS SELECT a, b FROM T", catalog, 2), 2);
    catalog.apply(parseStatement("CREATE VIEW V2 AS SELECT a FROM V1 WHERE b = 3", catalog, 3), 3);
    const ViewDef *v2 = catalog.viewAt("V2", posOf(4));
    REQUIRE(v2 != nullptr);
    // Brute force: V2 reads V1.{a,b}; V1 reads T.{a,b}.
    std::set<std::pair<std::string, std::string>> expect{{"T", "a"}, {"T", "b"}};
    std::set<std::pair<std::string, std::string>> got(v2->baseColumns.begin(),
                                                      v2->baseColumns.end());
    CHECK(got == expect);
}

TEST_CASE("round-trip: print then re-parse is structurally identical") {
    Catalog catalog = bankCatalog();
    for (const char *text : {
             "INSERT INTO Accounts(aid,uid,balance) VALUES (1,'alice',100), (2,'bob',50)",
             "SELECT balance FROM Accounts WHERE aid = 1 ORDER BY balance DESC LIMIT 3",
             "SELECT COUNT(*) FROM Transactions WHERE amount BETWEEN 10 AND 20",
             "UPDATE Accounts SET balance = balance - 10 WHERE aid IN (1, 2, 3)",
             "DELETE FROM Accounts WHERE (aid = 1 OR aid = 2) AND balance = 0",
             "SELECT aid, SUM(amount) FROM Transactions WHERE sender = 1",
             "CREATE TABLE X (id INT PRIMARY KEY AUTO_INCREMENT, t TEXT UNIQUE, d DECIMAL(18,2), "
             "ts TIMESTAMP, FOREIGN KEY (id) REFERENCES Users(uid) ON DELETE CASCADE, CHECK (d >= 0))",
             "BEGIN; UPDATE Accounts SET balance = 1 WHERE aid = 1; DELETE FROM Statements "
             "WHERE aid = 1; COMMIT",
             "SELECT uid, ssn FROM Users JOIN Accounts ON Users.uid = Accounts.uid WHERE "
             "balance >= 100",
         }) {
        Statement first = parseStatementRaw(text);
        std::string printed = printStatement(first);
        CAPTURE(printed);
        Statement second = parseStatementRaw(printed);
        CHECK(first == second);
    }
}

TEST_CASE("round-trip covers trigger and procedure bodies") {
    const char *trigger = testing::kBankTriggerDdl;
    Statement first = parseStatementRaw(trigger);
    Statement second = parseStatementRaw(printStatement(first));
    CHECK(first == second);

    const char *procedure =
        "CREATE PROCEDURE SendMoney (IN sender INT, IN receiver INT, IN amount DECIMAL(18,0)) "
        "BEGIN DECLARE sbal DECIMAL(18,0); SELECT balance INTO sbal FROM Accounts WHERE aid = "
        "sender; IF sbal >= amount THEN UPDATE Accounts SET balance = sbal - amount WHERE aid = "
        "sender; UPDATE Accounts SET balance = balance + amount WHERE aid = receiver; ELSE "
        "SIGNAL SQLSTATE '45000' SET MESSAGE_TEXT = 'insufficient funds'; END IF; END";
    Statement p1 = parseStatementRaw(procedure);
    Statement p2 = parseStatementRaw(printStatement(p1));
    CHECK(p1 == p2);
}

TEST_CASE("parse_log: bank fixture yields 13 records, 4 tables and 1 trigger") {
    std::stringstream log(testing::bankLogJsonl());
    ParsedLog parsed = parseLog(log);
    CHECK(parsed.records.size() == 13);
    CHECK(parsed.catalog.tablesAliveAt(posOf(14)).size() == 4);
    CHECK(parsed.catalog.triggerAliveAt("BalanceCheck", posOf(14)));
    CHECK(parsed.records[9].stmt.kind == StatementKind::Insert); // Q10 transfer
}

TEST_CASE("parse_log: empty stream") {
    std::stringstream log("");
    ParsedLog parsed = parseLog(log);
    CHECK(parsed.records.empty());
}

TEST_CASE("parse_log: non-monotonic idx") {
    std::stringstream log(
        R"({"idx": 5, "ts": "2024-01-01T00:00:00Z", "session": "s", "stmt": "SELECT 1"})"
        "\n"
        R"({"idx": 4, "ts": "2024-01-01T00:00:01Z", "session": "s", "stmt": "SELECT 1"})"
        "\n");
    try {
        parseLog(log);
        FAIL("expected NonMonotonicIndex");
    } catch (const Error &e) {
        CHECK(e.kind() == ErrorKind::NonMonotonicIndex);
    }
}

TEST_CASE("parse_log: unknown fields rejected with line number") {
    std::stringstream log(
        R"({"idx": 1, "ts": "2024-01-01T00:00:00Z", "session": "s", "stmt": "SELECT 1", "bogus": 1})"
        "\n");
    try {
        parseLog(log);
        FAIL("expected MalformedLine");
    } catch (const Error &e) {
        CHECK(e.kind() == ErrorKind::MalformedLine);
        CHECK(std::string(e.what()).find("line 1") != std::string::npos);
    }
}

TEST_CASE("timestamps parse in both accepted spellings") {
    CHECK(parseTimestamp("2024-01-02T03:04:05Z") == parseTimestamp("2024-01-02 03:04:05"));
    int64_t micros = parseTimestamp("2024-01-02T03:04:05.250000Z");
    CHECK(micros % 1000000 == 250000);
    CHECK(formatTimestamp(parseTimestamp("2024-01-02T03:04:05Z")) == "2024-01-02T03:04:05Z");
}
