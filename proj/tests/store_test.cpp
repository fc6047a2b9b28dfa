#include <doctest.h>

#include <random>
#include <sstream>

#include "retro/errors.hpp"
#include "retro/sql/parser.hpp"
#include "retro/store/store.hpp"
#include "test_fixtures.hpp"

using namespace retro;
using namespace retro::sql;
using namespace retro::store;

namespace {

QueryRecord makeRecord(uint64_t idx, const std::string &text, const Catalog &catalog) {
    QueryRecord record;
    record.idx = idx;
    record.tsMicros = parseTimestamp("2024-01-01T10:00:00Z") + static_cast<int64_t>(idx) * 1000000;
    record.session = "t";
    record.text = text;
    record.stmt = parseStatement(text, catalog, idx);
    return record;
}

VersionedStore ingestBank() {
    VersionedStore store;
    uint64_t idx = 1;
    for (const auto &text : testing::bankStatements()) {
        store.commit(makeRecord(idx, text, store.catalog()));
        ++idx;
    }
    return store;
}

Value cell(const TableData &data, const std::string &keyColumn, const Value &key,
           const std::string &valueColumn) {
    int k = data.columnIndex(keyColumn);
    int v = data.columnIndex(valueColumn);
    REQUIRE(k >= 0);
    REQUIRE(v >= 0);
    for (const auto &row : data.rows) {
        int cmp;
        if (row[k].compareSql(key, cmp) && cmp == 0) {
            return row[v];
        }
    }
    return Value::null();
}

} // namespace

TEST_CASE("bank ingest: trigger moves the balance") {
    VersionedStore store = ingestBank();
    const TableData *accounts = store.findTable("Accounts");
    REQUIRE(accounts != nullptr);
    CHECK(cell(*accounts, "aid", Value::int64(1), "balance") == Value::int64(0));
    CHECK(cell(*accounts, "aid", Value::int64(2), "balance") == Value::int64(150));
    CHECK(cell(*accounts, "aid", Value::int64(3), "balance") == Value::int64(0));
    const TableData *transactions = store.findTable("Transactions");
    REQUIRE(transactions != nullptr);
    CHECK(transactions->rows.size() == 1);
    const TableData *statements = store.findTable("Statements");
    REQUIRE(statements != nullptr);
    REQUIRE(statements->rows.size() == 1);
    CHECK(statements->rows[0][1] == Value::int64(100));
}

TEST_CASE("insufficient balance aborts atomically") {
    VersionedStore store = ingestBank();
    QueryRecord record = makeRecord(
        14, "INSERT INTO Transactions(sender,receiver,amount) VALUES (1, 2, 9999)",
        store.catalog());
    const ExecEffect &effect = store.commit(record);
    CHECK(effect.aborted);
    CHECK(effect.tables.empty());
    const TableData *accounts = store.findTable("Accounts");
    CHECK(cell(*accounts, "aid", Value::int64(1), "balance") == Value::int64(0));
    CHECK(store.findTable("Transactions")->rows.size() == 1);
}

TEST_CASE("SendMoney procedure: guard branch") {
    VersionedStore store;
    uint64_t idx = 1;
    for (const char *ddl : {"CREATE TABLE Accounts (aid INT PRIMARY KEY, balance INT)",
                            "INSERT INTO Accounts VALUES (1, 200), (2, 10)"}) {
        store.commit(makeRecord(idx++, ddl, store.catalog()));
    }
    store.commit(makeRecord(
        idx++,
        "CREATE PROCEDURE SendMoney (IN sender INT, IN receiver INT, IN amount INT) BEGIN "
        "DECLARE sbal INT; SELECT balance INTO sbal FROM Accounts WHERE aid = sender; "
        "IF sbal >= amount THEN "
        "UPDATE Accounts SET balance = sbal - amount WHERE aid = sender; "
        "UPDATE Accounts SET balance = balance + amount WHERE aid = receiver; "
        "ELSE SIGNAL SQLSTATE '45000' SET MESSAGE_TEXT = 'insufficient funds'; END IF; END",
        store.catalog()));
    const ExecEffect &ok = store.commit(makeRecord(idx++, "CALL SendMoney (1, 2, 50)",
                                                   store.catalog()));
    CHECK_FALSE(ok.aborted);
    CHECK(cell(*store.findTable("Accounts"), "aid", Value::int64(1), "balance") ==
          Value::int64(150));
    CHECK(cell(*store.findTable("Accounts"), "aid", Value::int64(2), "balance") ==
          Value::int64(60));

    const ExecEffect &bad = store.commit(makeRecord(idx++, "CALL SendMoney (2, 1, 500)",
                                                    store.catalog()));
    CHECK(bad.aborted);
    CHECK(cell(*store.findTable("Accounts"), "aid", Value::int64(1), "balance") ==
          Value::int64(150));
}

TEST_CASE("RAND value recorded in Regular mode replays byte-exact") {
    auto build = [](ExecMode mode, const std::vector<sql::NondetValue> &nondet,
                    std::vector<sql::NondetValue> *outUsed) {
        VersionedStore store;
        uint64_t idx = 1;
        store.commit(makeRecord(idx++, "CREATE TABLE R (v INT)", store.catalog()));
        QueryRecord record = makeRecord(idx, "INSERT INTO R VALUES (RAND())", store.catalog());
        record.nondet = nondet;
        if (mode == ExecMode::Regular) {
            const ExecEffect &effect = store.commit(record);
            if (outUsed != nullptr) *outUsed = effect.nondetUsed;
        } else {
            ExecOptions options;
            options.mode = ExecMode::Replay;
            options.pos = posOf(idx);
            ExecEffect effect = execute(store, record, options);
            if (outUsed != nullptr) *outUsed = effect.nondetUsed;
        }
        return store.findTable("R")->rows[0][0];
    };
    std::vector<sql::NondetValue> used;
    Value regular = build(ExecMode::Regular, {}, &used);
    REQUIRE(used.size() == 1);
    Value replayed = build(ExecMode::Replay, used, nullptr);
    CHECK(regular == replayed);
}

TEST_CASE("replay with missing nondet values is a NondetExhausted abort") {
    VersionedStore store;
    store.commit(makeRecord(1, "CREATE TABLE R (v INT, w INT)", store.catalog()));
    QueryRecord record = makeRecord(2, "INSERT INTO R VALUES (RAND(), RAND())", store.catalog());
    record.nondet.push_back({"RAND", 0, "42"});
    ExecOptions options;
    options.mode = ExecMode::Replay;
    options.pos = posOf(2);
    ExecEffect effect = execute(store, record, options);
    CHECK(effect.aborted);
    CHECK(effect.abortReason.find("NondetExhausted") != std::string::npos);
}

TEST_CASE("tableAt reconstructs any historical state") {
    VersionedStore store = ingestBank();
    auto accountsAt9 = store.tableAt("Accounts", 9);
    REQUIRE(accountsAt9.has_value());
    CHECK(cell(*accountsAt9, "aid", Value::int64(1), "balance") == Value::int64(100));
    CHECK(cell(*accountsAt9, "aid", Value::int64(2), "balance") == Value::int64(50));
    CHECK(accountsAt9->rows.size() == 2);
    auto accountsAt12 = store.tableAt("Accounts", 12);
    CHECK(accountsAt12->rows.size() == 3);
    auto usersAt5 = store.tableAt("Users", 5);
    REQUIRE(usersAt5.has_value());
    CHECK(usersAt5->rows.empty());
    CHECK(!store.tableAt("Users", 0).has_value());
    // Current state equals the rolled-forward state at the last index.
    auto accountsNow = store.tableAt("Accounts", 13);
    CHECK(tableHash(*accountsNow) == *store.liveHash("Accounts"));
}

TEST_CASE("snapshot immutability: later commits never change earlier states") {
    VersionedStore store = ingestBank();
    auto before = store.tableAt("Accounts", 9);
    hash::U256 h = tableHash(*before);
    store.commit(makeRecord(14, "UPDATE Accounts SET balance = 7777 WHERE aid = 1",
                            store.catalog()));
    auto after = store.tableAt("Accounts", 9);
    CHECK(tableHash(*after) == h);
}

TEST_CASE("effect exactness: pre + inserts - deletes = post (randomized)") {
    std::mt19937_64 rng(11);
    VersionedStore store;
    uint64_t idx = 1;
    store.commit(makeRecord(idx++, "CREATE TABLE T (k INT, v INT)", store.catalog()));
    TableData pre = *store.findTable("T");
    for (int i = 0; i < 200; ++i) {
        int kind = static_cast<int>(rng() % 3);
        std::string text;
        int64_t k = static_cast<int64_t>(rng() % 20);
        int64_t v = static_cast<int64_t>(rng() % 100);
        if (kind == 0) {
            text = "INSERT INTO T VALUES (" + std::to_string(k) + ", " + std::to_string(v) + ")";
        } else if (kind == 1) {
            text = "UPDATE T SET v = " + std::to_string(v) + " WHERE k = " + std::to_string(k);
        } else {
            text = "DELETE FROM T WHERE k = " + std::to_string(k);
        }
        const ExecEffect &effect = store.commit(makeRecord(idx++, text, store.catalog()));
        // Apply the recorded effect to the tracked pre-state copy.
        if (!effect.aborted) {
            auto it = effect.tables.find("T");
            if (it != effect.tables.end()) {
                for (const Row &row : it->second.deleted) {
                    auto pos = std::find(pre.rows.begin(), pre.rows.end(), row);
                    REQUIRE(pos != pre.rows.end());
                    pre.rows.erase(pos);
                }
                for (const Row &row : it->second.inserted) {
                    pre.rows.push_back(row);
                }
            }
        }
        CHECK(tableHash(pre) == tableHash(*store.findTable("T")));
    }
}

TEST_CASE("auto increment: fresh counter and explicit bumps") {
    VersionedStore store;
    uint64_t idx = 1;
    store.commit(makeRecord(idx++, "CREATE TABLE A (id INT PRIMARY KEY AUTO_INCREMENT, v INT)",
                            store.catalog()));
    store.commit(makeRecord(idx++, "INSERT INTO A(v) VALUES (10)", store.catalog()));
    CHECK(cell(*store.findTable("A"), "v", Value::int64(10), "id") == Value::int64(1));
    store.commit(makeRecord(idx++, "INSERT INTO A(id, v) VALUES (12, 11)", store.catalog()));
    store.commit(makeRecord(idx++, "INSERT INTO A(v) VALUES (12)", store.catalog()));
    CHECK(cell(*store.findTable("A"), "v", Value::int64(12), "id") == Value::int64(13));
    CHECK(store.historicalAutoMax().at({"A", "id"}) == 13);
}

TEST_CASE("tombstone mode: identity reallocation and fresh-above-max") {
    VersionedStore store;
    store.commit(makeRecord(1, "CREATE TABLE A (id INT PRIMARY KEY AUTO_INCREMENT, v INT)",
                            store.catalog()));
    QueryRecord ins = makeRecord(2, "INSERT INTO A(v) VALUES (5)", store.catalog());
    const ExecEffect historical = store.commit(ins);
    REQUIRE(historical.tables.at("A").autoAllocated.at("id") == std::vector<int64_t>{1});

    // Replay the same record through a temp store with identity allocation.
    TempStore temp(store);
    TableData rolled = *store.findTable("A");
    rolled.rows.clear();
    rolled.autoCounter["id"] = 0;
    temp.pinTable("A", rolled);
    ExecOptions options;
    options.mode = ExecMode::Replay;
    options.pos = posOf(2);
    options.autoMode = AutoIncMode::Tombstone;
    options.historical = &historical;
    std::map<ColumnKey, int64_t> maxes = store.historicalAutoMax();
    options.historicalMax = &maxes;
    ExecEffect replayed = execute(temp, ins, options);
    CHECK_FALSE(replayed.aborted);
    CHECK(replayed.tables.at("A").autoAllocated.at("id") == std::vector<int64_t>{1});

    // A fresh statement (no identity) allocates strictly above the historical
    // maximum, skipping tombstones.
    QueryRecord fresh = makeRecord(3, "INSERT INTO A(v) VALUES (6)", store.catalog());
    ExecOptions freshOptions = options;
    freshOptions.historical = nullptr;
    std::map<ColumnKey, std::set<int64_t>> tombstones{{{"A", "id"}, {2}}};
    freshOptions.tombstones = &tombstones;
    ExecEffect freshEffect = execute(temp, fresh, freshOptions);
    CHECK(freshEffect.tables.at("A").autoAllocated.at("id") == std::vector<int64_t>{3});
}

TEST_CASE("select canonical ordering: LIMIT is storage-order independent") {
    VersionedStore store;
    uint64_t idx = 1;
    store.commit(makeRecord(idx++, "CREATE TABLE T (k INT PRIMARY KEY, v INT)", store.catalog()));
    store.commit(makeRecord(idx++, "INSERT INTO T VALUES (3, 30), (1, 10), (2, 20)",
                            store.catalog()));
    QueryRecord q = makeRecord(idx++, "SELECT k FROM T LIMIT 2", store.catalog());
    ExecOptions options;
    options.pos = posOf(q.idx);
    ExecEffect effect = execute(store, q, options);
    REQUIRE(effect.selectResult.size() == 2);
    CHECK(effect.selectResult[0][0] == Value::int64(1));
    CHECK(effect.selectResult[1][0] == Value::int64(2));
}

TEST_CASE("cascade delete follows declared FKs; restrict otherwise") {
    VersionedStore store;
    uint64_t idx = 1;
    store.commit(makeRecord(idx++, "CREATE TABLE P (pid INT PRIMARY KEY)", store.catalog()));
    store.commit(makeRecord(
        idx++, "CREATE TABLE C (cid INT PRIMARY KEY, pid INT REFERENCES P(pid) ON DELETE CASCADE)",
        store.catalog()));
    store.commit(makeRecord(
        idx++, "CREATE TABLE R (rid INT PRIMARY KEY, pid INT REFERENCES P(pid))",
        store.catalog()));
    store.commit(makeRecord(idx++, "INSERT INTO P VALUES (1), (2)", store.catalog()));
    store.commit(makeRecord(idx++, "INSERT INTO C VALUES (10, 1), (11, 2)", store.catalog()));
    const ExecEffect &cascade = store.commit(makeRecord(idx++, "DELETE FROM P WHERE pid = 1",
                                                        store.catalog()));
    CHECK_FALSE(cascade.aborted);
    CHECK(store.findTable("C")->rows.size() == 1);
    CHECK(store.findTable("P")->rows.size() == 1);

    store.commit(makeRecord(idx++, "INSERT INTO R VALUES (20, 2)", store.catalog()));
    const ExecEffect &restricted = store.commit(makeRecord(idx++, "DELETE FROM P WHERE pid = 2",
                                                           store.catalog()));
    CHECK(restricted.aborted);
    CHECK(store.findTable("P")->rows.size() == 1);
}

TEST_CASE("views: reads expand and simple views are updatable") {
    VersionedStore store;
    uint64_t idx = 1;
    store.commit(makeRecord(idx++, "CREATE TABLE T (k INT PRIMARY KEY, v INT)", store.catalog()));
    store.commit(makeRecord(idx++, "INSERT INTO T VALUES (1, 10), (2, 20), (3, 30)",
                            store.catalog()));
    store.commit(makeRecord(idx++, "CREATE VIEW Big AS SELECT k, v FROM T WHERE v >= 20",
                            store.catalog()));
    QueryRecord q = makeRecord(idx++, "SELECT k FROM Big WHERE v = 30", store.catalog());
    ExecOptions options;
    options.pos = posOf(q.idx);
    ExecEffect effect = execute(store, q, options);
    REQUIRE(effect.selectResult.size() == 1);
    CHECK(effect.selectResult[0][0] == Value::int64(3));

    store.commit(makeRecord(idx++, "UPDATE Big SET v = 99 WHERE k = 2", store.catalog()));
    CHECK(cell(*store.findTable("T"), "k", Value::int64(2), "v") == Value::int64(99));
    store.commit(makeRecord(idx++, "DELETE FROM Big WHERE k = 3", store.catalog()));
    CHECK(store.findTable("T")->rows.size() == 2);
    // Rows outside the view predicate are untouched by view DML.
    CHECK(cell(*store.findTable("T"), "k", Value::int64(1), "v") == Value::int64(10));
}

TEST_CASE("deterministic re-execution: same records, same store") {
    auto run = [] {
        VersionedStore store = ingestBank();
        std::map<std::string, std::string> digests;
        for (const auto &[name, data] : store.tables()) {
            digests[name] = tableHash(data).toHex();
        }
        return digests;
    };
    CHECK(run() == run());
}

TEST_CASE("snapshot export/import round trip") {
    VersionedStore store = ingestBank();
    std::string path = "/tmp/retro_accounts.snap";
    store.exportSnapshot("Accounts", path);
    VersionedStore other;
    other.importSnapshot(path);
    const TableData *imported = other.findTable("Accounts");
    REQUIRE(imported != nullptr);
    CHECK(tableHash(*imported) == *store.liveHash("Accounts"));
    CHECK(imported->columns.size() == 3);
}
