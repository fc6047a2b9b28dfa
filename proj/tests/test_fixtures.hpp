#pragma once

#include <array>
#include <sstream>
#include <string>
#include <vector>

namespace retro::testing {

// Online-banking fixture: 4 tables + 1 trigger, then account setup, one
// transfer, a third user, and a monthly statement (13 commits).

inline constexpr const char *kBankTriggerDdl =
    "CREATE TRIGGER BalanceCheck BEFORE INSERT ON Transactions FOR EACH ROW BEGIN "
    "DECLARE sbal INT; "
    "SELECT balance INTO sbal FROM Accounts WHERE aid = NEW.sender; "
    "IF sbal >= NEW.amount THEN "
    "UPDATE Accounts SET balance = sbal - NEW.amount WHERE aid = NEW.sender; "
    "UPDATE Accounts SET balance = balance + NEW.amount WHERE aid = NEW.receiver; "
    "ELSE SIGNAL SQLSTATE '45000' SET MESSAGE_TEXT = 'insufficient balance'; "
    "END IF; END";

inline const std::array<const char *, 5> kBankDdl = {
    "CREATE TABLE Users (uid TEXT PRIMARY KEY, ssn TEXT)",
    "CREATE TABLE Accounts (aid INT PRIMARY KEY, uid TEXT REFERENCES Users(uid), balance INT)",
    "CREATE TABLE Transactions (sender INT REFERENCES Accounts(aid), receiver INT REFERENCES "
    "Accounts(aid), amount INT)",
    "CREATE TABLE Statements (aid INT REFERENCES Accounts(aid), total INT)",
    kBankTriggerDdl,
};

inline std::vector<std::string> bankStatements() {
    std::vector<std::string> stmts(kBankDdl.begin(), kBankDdl.end());
    stmts.push_back("INSERT INTO Users(uid,ssn) VALUES ('alice','111-22-3333')");
    stmts.push_back("INSERT INTO Users(uid,ssn) VALUES ('bob','222-33-4444')");
    stmts.push_back("INSERT INTO Accounts(aid,uid,balance) VALUES (1,'alice',100)");
    stmts.push_back("INSERT INTO Accounts(aid,uid,balance) VALUES (2,'bob',50)");
    stmts.push_back("INSERT INTO Transactions(sender,receiver,amount) VALUES (1,2,100)");
    stmts.push_back("INSERT INTO Users(uid,ssn) VALUES ('charlie','333-44-5555')");
    stmts.push_back("INSERT INTO Accounts(aid,uid,balance) VALUES (3,'charlie',0)");
    stmts.push_back(
        "INSERT INTO Statements(aid,total) SELECT 1, SUM(amount) FROM Transactions WHERE "
        "sender = 1");
    return stmts;
}

inline std::string jsonEscape(const std::string &s) {
    std::string out;
    for (char c : s) {
        if (c == '"' || c == '\\') {
            out += '\\';
        }
        out += c;
    }
    return out;
}

inline std::string bankLogJsonl() {
    std::ostringstream out;
    auto stmts = bankStatements();
    for (size_t i = 0; i < stmts.size(); ++i) {
        int minute = static_cast<int>(i);
        char ts[40];
        snprintf(ts, sizeof(ts), "2024-01-01T10:%02d:00Z", minute);
        out << "{\"idx\": " << (i + 1) << ", \"ts\": \"" << ts
            << "\", \"session\": \"teller\", \"stmt\": \"" << jsonEscape(stmts[i]) << "\"}\n";
    }
    return out.str();
}

} // namespace retro::testing
