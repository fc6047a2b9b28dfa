#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "retro/analysis/rwset.hpp"
#include "retro/sql/log.hpp"

namespace retro::graph {

enum class TargetKind { Add, Remove, Change };

struct RetroTarget {
    TargetKind kind = TargetKind::Remove;
    uint64_t tau = 0;
    std::optional<sql::QueryRecord> newRecord; // Add / Change
};

struct Window {
    uint64_t tau = 0;
    uint64_t psi = 0;
};

struct Edge {
    uint64_t from = 0; // depends on `to`
    uint64_t to = 0;
    std::string column;
    bool trigger = false;

    auto operator<=>(const Edge &) const = default;
};

struct InfluencerEdge {
    uint64_t influencer = 0;
    uint64_t of = 0;
    std::string column;

    auto operator<=>(const InfluencerEdge &) const = default;
};

enum class TableClass { Mutated, Consulted, Irrelevant };

struct ReplaySet {
    std::set<uint64_t> members;
    std::map<std::string, TableClass> classification;
};

/// Column-wise dependency graph over the window: nodes are committed queries
/// with non-empty write sets in [tau, psi] plus trigger DDL whose alive
/// interval intersects the window. Direct rule-1 edges are kept as per-column
/// access lists; transitive edges are answered by reachability, not stored.
class DependencyGraph {
public:
    struct Node {
        uint64_t idx = 0;
        sql::Pos pos = 0;
        bool isTarget = false;
        bool isTriggerDdl = false;
        std::string triggerName;
        std::vector<int> reads;  // interned column ids
        std::vector<int> writes;
    };

    const std::vector<Node> &nodes() const { return _nodes; }
    const Node *nodeByIdx(uint64_t idx) const;
    Window window() const { return _window; }

    int columnId(const std::string &table, const std::string &column) const;
    const std::pair<std::string, std::string> &columnRef(int id) const { return _columns[id]; }

    /// Query indices (excluding the target) that transitively depend on the
    /// target per rules 1-2 plus the trigger propositions.
    std::set<uint64_t> dependentsOfTarget() const;

    /// Direct rule-1 edges plus trigger coupling edges, enumerated on demand
    /// (stable order by from, then to).
    std::vector<Edge> directEdges() const;

    /// True when `from` reaches `to` through dependency edges.
    bool reaches(uint64_t from, uint64_t to) const;

    const std::vector<InfluencerEdge> &influencerEdges() const { return _influencers; }

    void dump(std::ostream &out) const;

    friend DependencyGraph buildGraph(const std::vector<sql::QueryRecord> &records,
                                      const std::map<uint64_t, analysis::RWSet> &rwsets,
                                      Window window, const RetroTarget &target,
                                      const sql::Catalog &catalog);
    friend ReplaySet replaySet(DependencyGraph &graph);
    friend std::map<std::string, TableClass> classifyTables(const DependencyGraph &graph,
                                                            const std::set<uint64_t> &members);

private:
    int internColumn(const std::string &table, const std::string &column);
    std::vector<int> internSet(const std::set<analysis::ColumnRef> &refs);
    void computeCouplings();
    std::set<size_t> taintClosure(const std::vector<size_t> &seeds, bool seedsFeedFrontier) const;

    Window _window;
    const sql::Catalog *_catalog = nullptr;
    std::vector<Node> _nodes; // sorted by pos
    std::map<uint64_t, size_t> _byIdx;
    std::vector<std::pair<std::string, std::string>> _columns;
    std::map<std::pair<std::string, std::string>, int> _columnIds;
    // Per column: node positions (indices into _nodes) that write / access it,
    // sorted by pos.
    std::vector<std::vector<size_t>> _writers;
    std::vector<std::vector<size_t>> _accessors;
    // Trigger coupling: node <-> node mutual edges (by _nodes index).
    std::vector<std::vector<size_t>> _couplings;
    std::vector<size_t> _targetNodes; // seeds (virtual add node and/or removed node)
    std::vector<InfluencerEdge> _influencers;
    std::set<uint64_t> _members; // filled by replaySet
};

/// Builds the graph. `rwsets` must hold fully expanded sets for every record
/// index that participates (the whole log is fine). Raises WindowOutOfRange
/// and TargetKindMismatch.
DependencyGraph buildGraph(const std::vector<sql::QueryRecord> &records,
                           const std::map<uint64_t, analysis::RWSet> &rwsets, Window window,
                           const RetroTarget &target, const sql::Catalog &catalog);

/// Least fixpoint of the membership propositions: dependents of the target
/// seed the set; each member's influencers (last prior in-window writers of
/// its accessed columns) pull in their own dependents; in-window writers of a
/// member-read column positioned after the member join as well (their kept
/// effects would otherwise pollute the member's replayed reads). Influencer
/// edges are recorded on the graph.
ReplaySet replaySet(DependencyGraph &graph);

/// Column-specific pruning: promotes ignored columns back while some member
/// reads them and writes an included column, then drops members writing only
/// ignored columns. Returns the filtered set; classification recomputed.
ReplaySet pruneIgnoredColumns(const DependencyGraph &graph, const ReplaySet &replay,
                              const std::set<analysis::ColumnRef> &ignore);

/// Recomputes mutated/consulted/irrelevant over the catalog tables alive in
/// the window for an arbitrary member set.
std::map<std::string, TableClass> classifyTables(const DependencyGraph &graph,
                                                 const std::set<uint64_t> &members);

} // namespace retro::graph
