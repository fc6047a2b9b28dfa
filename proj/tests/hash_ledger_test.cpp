#include <doctest.h>

#include <random>

#include "retro/errors.hpp"
#include "retro/hash/ledger.hpp"
#include "retro/hash/table_hash.hpp"

using namespace retro;
using namespace retro::hash;
using retro::sql::ColumnDef;

namespace {

std::vector<ColumnDef> schemaOf(std::initializer_list<std::pair<const char *, ValueType>> cols) {
    std::vector<ColumnDef> out;
    for (const auto &[name, type] : cols) {
        ColumnDef def;
        def.name = name;
        def.type = type;
        out.push_back(def);
    }
    return out;
}

} // namespace

TEST_CASE("row hash determinism and sensitivity") {
    auto schema = schemaOf({{"id", ValueType::Int64}, {"name", ValueType::Text}});
    std::vector<Value> row{Value::int64(1), Value::text("alice")};
    CHECK(rowHash(row, schema) == rowHash(row, schema));
    std::vector<Value> other{Value::int64(1), Value::text("alicf")};
    CHECK(!(rowHash(row, schema) == rowHash(other, schema)));
}

// Golden vectors computed with an independent SHA-256 implementation
// (Python hashlib) over the documented canonical encoding.
TEST_CASE("canonical encoding golden vectors") {
    {
        auto schema = schemaOf({{"id", ValueType::Int64}, {"name", ValueType::Text}});
        std::vector<Value> row{Value::int64(1), Value::text("alice")};
        auto encoded = encodeRow(row, schema);
        std::string hex;
        for (uint8_t b : encoded) {
            char buf[3];
            snprintf(buf, sizeof(buf), "%02x", b);
            hex += buf;
        }
        CHECK(hex == "000269640100000008000000000000000100046e616d650300000005616c696365");
        CHECK(rowHash(row, schema).toHex() ==
              "72200a75f3a9dab3d264f1c70422bcfdbe869940ae36cb7e0dfbf87015684daa");
    }
    {
        auto schema = schemaOf({{"bal", ValueType::Decimal},
                                {"ts", ValueType::Timestamp},
                                {"note", ValueType::Text}});
        std::vector<Value> row{Value::decimal(12345, 2), Value::timestamp(1600000000000000),
                               Value::null()};
        CHECK(rowHash(row, schema).toHex() ==
              "13460e7634ddf823894724755e7ef06866578f15b8fcc8794dcdc6d4c5553da4");
    }
    {
        auto schema = schemaOf({{"k", ValueType::Int64}, {"s", ValueType::Text}});
        std::vector<Value> row{Value::int64(-7), Value::text("")};
        CHECK(rowHash(row, schema).toHex() ==
              "2499b100f2ef07fb82a37c5a7d6269f3afdc22924cd5bd7a1ace8e8380674500");
    }
}

TEST_CASE("update_hash: insert then delete restores the prior hash") {
    auto schema = schemaOf({{"id", ValueType::Int64}});
    U256 h = U256::zero();
    h += U256{{42, 0, 0, 0}};
    U256 r = rowHash({Value::int64(9)}, schema);
    U256 after = updateHash(h, {r}, {});
    CHECK(!(after == h));
    CHECK(updateHash(after, {}, {r}) == h);
}

TEST_CASE("update_hash: batch order does not matter") {
    auto schema = schemaOf({{"id", ValueType::Int64}});
    std::vector<U256> hashes;
    for (int i = 0; i < 10; ++i) {
        hashes.push_back(rowHash({Value::int64(i)}, schema));
    }
    U256 forward = updateHash(U256::zero(), hashes, {});
    std::reverse(hashes.begin(), hashes.end());
    U256 backward = updateHash(U256::zero(), hashes, {});
    CHECK(forward == backward);
}

TEST_CASE("incremental equals batch over random insert/delete sequences") {
    auto schema = schemaOf({{"id", ValueType::Int64}, {"v", ValueType::Int64}});
    std::mt19937_64 rng(7);
    // Multiset of live rows, tracked alongside the incremental hash.
    std::vector<std::vector<Value>> rows;
    U256 h = U256::zero();
    const int kOps = 12000;
    for (int op = 0; op < kOps; ++op) {
        bool insert = rows.empty() || (rng() % 3) != 0;
        if (insert) {
            std::vector<Value> row{Value::int64(static_cast<int64_t>(rng() % 500)),
                                   Value::int64(static_cast<int64_t>(rng() % 500))};
            h = updateHash(h, {rowHash(row, schema)}, {});
            rows.push_back(std::move(row));
        } else {
            size_t victim = rng() % rows.size();
            h = updateHash(h, {}, {rowHash(rows[victim], schema)});
            rows.erase(rows.begin() + victim);
        }
    }
    U256 batch = U256::zero();
    for (const auto &row : rows) {
        batch += rowHash(row, schema);
    }
    CHECK(h == batch);
}

TEST_CASE("multiset semantics: duplicates count with multiplicity") {
    auto schema = schemaOf({{"id", ValueType::Int64}});
    std::vector<Value> row{Value::int64(5)};
    U256 r = rowHash(row, schema);
    U256 two = updateHash(U256::zero(), {r, r}, {});
    U256 one = updateHash(two, {}, {r});
    CHECK(one == r);
    CHECK(!(two == one));
}

TEST_CASE("hex round trip") {
    U256 v{{0x0123456789abcdefULL, 0xfedcba9876543210ULL, 1, 0x8000000000000000ULL}};
    CHECK(U256::fromHex(v.toHex()) == v);
    CHECK(U256::zero().toHex() == std::string(64, '0'));
}

TEST_CASE("ledger effective-at and rewrite") {
    HashLedger ledger;
    U256 a{{1, 0, 0, 0}}, b{{2, 0, 0, 0}}, c{{3, 0, 0, 0}};
    ledger.append("T", 3, a);
    ledger.append("T", 7, b);
    CHECK(!ledger.effectiveAt("T", 2).has_value());
    CHECK(ledger.effectiveAt("T", 3) == a);
    CHECK(ledger.effectiveAt("T", 5) == a);
    CHECK(ledger.effectiveAt("T", 7) == b);
    ledger.rewriteRange("T", 5, 10, {{6, c}});
    CHECK(ledger.effectiveAt("T", 7) == c);
    CHECK(ledger.effectiveAt("T", 4) == a);
}

TEST_CASE("check_jump: all mutated tables must match") {
    HashLedger ledger;
    U256 a{{1, 0, 0, 0}}, b{{2, 0, 0, 0}};
    ledger.append("T", 5, a);
    ledger.append("U", 5, b);
    std::map<std::string, std::optional<U256>> live{{"T", a}, {"U", b}};
    auto decision = checkJump(ledger, live, 6, {"T", "U"}, {});
    CHECK(decision.jump);
    CHECK(decision.atIdx == 6);
    CHECK(decision.matchedTables.size() == 2);

    live["U"] = U256{{9, 0, 0, 0}};
    CHECK_FALSE(checkJump(ledger, live, 6, {"T", "U"}, {}).jump);
}

TEST_CASE("check_jump: retro divergence beyond idx forces Continue") {
    // A hash match means the state converged so far; it says nothing about a
    // retro change that has not been applied yet, so jumping would freeze the
    // wrong suffix.
    HashLedger ledger;
    U256 a{{1, 0, 0, 0}};
    ledger.append("T", 5, a);
    std::map<std::string, std::optional<U256>> live{{"T", a}};
    RemainingReplay remaining;
    remaining.retroDivergentBeyond = true;
    CHECK_FALSE(checkJump(ledger, live, 6, {"T"}, remaining).jump);
    remaining.retroDivergentBeyond = false;
    CHECK(checkJump(ledger, live, 6, {"T"}, remaining).jump);
}

TEST_CASE("check_jump: missing ledger coverage is LedgerGap") {
    HashLedger ledger;
    std::map<std::string, std::optional<U256>> live{{"T", U256::zero()}};
    try {
        checkJump(ledger, live, 6, {"T"}, {});
        FAIL("expected LedgerGap");
    } catch (const Error &e) {
        CHECK(e.kind() == ErrorKind::LedgerGap);
    }
}

TEST_CASE("check_jump: existence mismatch never jumps") {
    HashLedger ledger;
    ledger.append("T", 5, U256::zero());
    // Historically the table exists (hash of empty = 0); live side lacks it.
    std::map<std::string, std::optional<U256>> live{{"T", std::nullopt}};
    CHECK_FALSE(checkJump(ledger, live, 6, {"T"}, {}).jump);
}
