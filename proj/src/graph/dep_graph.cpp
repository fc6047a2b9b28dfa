#include "retro/graph/dep_graph.hpp"

#include <algorithm>
#include <deque>
#include <ostream>

#include "retro/errors.hpp"

namespace retro::graph {

using namespace retro::sql;
using analysis::ColumnRef;
using analysis::RWSet;

int DependencyGraph::internColumn(const std::string &table, const std::string &column) {
    auto key = std::make_pair(table, column);
    auto it = _columnIds.find(key);
    if (it != _columnIds.end()) {
        return it->second;
    }
    int id = static_cast<int>(_columns.size());
    _columns.push_back(key);
    _columnIds.emplace(std::move(key), id);
    return id;
}

std::vector<int> DependencyGraph::internSet(const std::set<ColumnRef> &refs) {
    std::vector<int> out;
    for (const auto &ref : refs) {
        if (ref.allColumns) {
            raise(ErrorKind::Internal, "graph requires expanded RW sets");
        }
        out.push_back(internColumn(ref.table, ref.column));
    }
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

const DependencyGraph::Node *DependencyGraph::nodeByIdx(uint64_t idx) const {
    auto it = _byIdx.find(idx);
    return it == _byIdx.end() ? nullptr : &_nodes[it->second];
}

int DependencyGraph::columnId(const std::string &table, const std::string &column) const {
    auto it = _columnIds.find({table, column});
    return it == _columnIds.end() ? -1 : it->second;
}

namespace {

bool intersects(const std::vector<int> &a, const std::vector<int> &b, int *witness = nullptr) {
    size_t i = 0, j = 0;
    while (i < a.size() && j < b.size()) {
        if (a[i] == b[j]) {
            if (witness != nullptr) {
                *witness = a[i];
            }
            return true;
        }
        if (a[i] < b[j]) {
            ++i;
        } else {
            ++j;
        }
    }
    return false;
}

std::vector<int> unionSorted(const std::vector<int> &a, const std::vector<int> &b) {
    std::vector<int> out;
    std::set_union(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
    return out;
}

} // namespace

void DependencyGraph::computeCouplings() {
    _couplings.assign(_nodes.size(), {});
    for (size_t t = 0; t < _nodes.size(); ++t) {
        if (!_nodes[t].isTriggerDdl) {
            continue;
        }
        const auto *events = _catalog->triggerEvents(_nodes[t].triggerName);
        if (events == nullptr) {
            continue;
        }
        auto aliveAt = [&](Pos pos) {
            bool alive = false;
            for (const auto &[eventPos, state] : *events) {
                if (eventPos >= pos) {
                    break;
                }
                alive = state;
            }
            return alive;
        };
        for (size_t k = 0; k < _nodes.size(); ++k) {
            if (_nodes[k].isTriggerDdl || k == t) {
                continue;
            }
            if (!aliveAt(_nodes[k].pos)) {
                continue;
            }
            // Props 3-4: shared written column in either direction couples the
            // trigger with the query.
            bool forward = intersects(_nodes[t].writes,
                                      unionSorted(_nodes[k].reads, _nodes[k].writes));
            bool backward =
                intersects(_nodes[k].writes, unionSorted(_nodes[t].reads, _nodes[t].writes));
            if (forward || backward) {
                _couplings[t].push_back(k);
                _couplings[k].push_back(t);
            }
        }
    }
}

DependencyGraph buildGraph(const std::vector<sql::QueryRecord> &records,
                           const std::map<uint64_t, RWSet> &rwsets, Window window,
                           const RetroTarget &target, const Catalog &catalog) {
    if (records.empty() || window.tau == 0 || window.tau > window.psi) {
        raise(ErrorKind::WindowOutOfRange, "empty window");
    }
    if (window.tau < records.front().idx || window.psi > records.back().idx) {
        raise(ErrorKind::WindowOutOfRange,
              "window [" + std::to_string(window.tau) + ", " + std::to_string(window.psi) +
                  "] outside the log");
    }
    const sql::QueryRecord *existing = nullptr;
    for (const auto &record : records) {
        if (record.idx == window.tau) {
            existing = &record;
        }
    }
    if ((target.kind == TargetKind::Remove || target.kind == TargetKind::Change) &&
        existing == nullptr) {
        raise(ErrorKind::TargetKindMismatch,
              "no committed query at idx " + std::to_string(target.tau));
    }
    if ((target.kind == TargetKind::Add || target.kind == TargetKind::Change) &&
        !target.newRecord.has_value()) {
        raise(ErrorKind::TargetKindMismatch, "missing statement for add/change target");
    }

    DependencyGraph graph;
    graph._window = window;
    graph._catalog = &catalog;

    auto rwOf = [&](uint64_t idx) -> const RWSet & {
        auto it = rwsets.find(idx);
        if (it == rwsets.end()) {
            raise(ErrorKind::Internal, "missing RW set for idx " + std::to_string(idx));
        }
        return it->second;
    };

    // Query nodes: non-empty write set within the window.
    for (const auto &record : records) {
        if (record.idx < window.tau || record.idx > window.psi) {
            continue;
        }
        const RWSet &rw = rwOf(record.idx);
        if (rw.writes.empty()) {
            continue;
        }
        DependencyGraph::Node node;
        node.idx = record.idx;
        node.pos = posOf(record.idx);
        node.reads = graph.internSet(rw.reads);
        node.writes = graph.internSet(rw.writes);
        if (record.stmt.kind == StatementKind::CreateTrigger) {
            node.isTriggerDdl = true;
            node.triggerName = record.stmt.as<CreateTriggerStmt>().name;
        } else if (record.stmt.kind == StatementKind::DropTrigger) {
            node.isTriggerDdl = true;
            node.triggerName = record.stmt.as<DropTriggerStmt>().name;
        }
        graph._nodes.push_back(std::move(node));
    }

    // Pre-window trigger DDL whose trigger is alive somewhere in the window.
    for (const auto &record : records) {
        if (record.idx >= window.tau) {
            break;
        }
        std::string name;
        if (record.stmt.kind == StatementKind::CreateTrigger) {
            name = record.stmt.as<CreateTriggerStmt>().name;
        } else if (record.stmt.kind == StatementKind::DropTrigger) {
            name = record.stmt.as<DropTriggerStmt>().name;
        } else {
            continue;
        }
        bool aliveInWindow = false;
        for (uint64_t i = window.tau; i <= window.psi && !aliveInWindow; ++i) {
            aliveInWindow = catalog.triggerAliveAt(name, posOf(i));
        }
        if (!aliveInWindow) {
            continue;
        }
        const RWSet &rw = rwOf(record.idx);
        DependencyGraph::Node node;
        node.idx = record.idx;
        node.pos = posOf(record.idx);
        node.isTriggerDdl = true;
        node.triggerName = name;
        node.reads = graph.internSet(rw.reads);
        node.writes = graph.internSet(rw.writes);
        graph._nodes.push_back(std::move(node));
    }

    // Target node(s).
    if (target.kind == TargetKind::Remove || target.kind == TargetKind::Change) {
        DependencyGraph::Node node;
        node.idx = target.tau;
        node.pos = posOf(target.tau);
        node.isTarget = true;
        const RWSet &rw = rwOf(target.tau);
        node.reads = graph.internSet(rw.reads);
        node.writes = graph.internSet(rw.writes);
        graph._nodes.push_back(std::move(node));
    }
    if (target.kind == TargetKind::Add || target.kind == TargetKind::Change) {
        DependencyGraph::Node node;
        node.idx = target.tau;
        node.pos = posJustBefore(target.tau);
        node.isTarget = true;
        RWSet rw = analysis::expandWildcards(
            analysis::extractRw(target.newRecord->stmt, catalog, target.tau), catalog,
            target.tau);
        node.reads = graph.internSet(rw.reads);
        node.writes = graph.internSet(rw.writes);
        graph._nodes.push_back(std::move(node));
    }

    std::sort(graph._nodes.begin(), graph._nodes.end(),
              [](const auto &a, const auto &b) { return a.pos < b.pos; });
    // Drop the duplicate window node for the removed/changed target (it was
    // added as a regular node too when its write set is non-empty).
    for (size_t i = 0; i + 1 < graph._nodes.size(); ++i) {
        if (graph._nodes[i].pos == graph._nodes[i + 1].pos) {
            size_t victim = graph._nodes[i].isTarget ? i + 1 : i;
            graph._nodes.erase(graph._nodes.begin() + static_cast<long>(victim));
            --i;
        }
    }

    for (size_t i = 0; i < graph._nodes.size(); ++i) {
        const auto &node = graph._nodes[i];
        if (node.isTarget) {
            graph._targetNodes.push_back(i);
        } else {
            graph._byIdx[node.idx] = i;
        }
    }

    graph._writers.assign(graph._columns.size(), {});
    graph._accessors.assign(graph._columns.size(), {});
    for (size_t i = 0; i < graph._nodes.size(); ++i) {
        const auto &node = graph._nodes[i];
        if (node.isTriggerDdl && node.idx < window.tau) {
            // Pre-window trigger nodes participate through coupling only.
            continue;
        }
        for (int c : node.writes) {
            graph._writers[c].push_back(i);
            graph._accessors[c].push_back(i);
        }
        for (int c : node.reads) {
            if (!std::binary_search(node.writes.begin(), node.writes.end(), c)) {
                graph._accessors[c].push_back(i);
            }
        }
    }
    graph.computeCouplings();
    return graph;
}

std::set<size_t> DependencyGraph::taintClosure(const std::vector<size_t> &seeds,
                                               bool seedsFeedFrontier) const {
    std::set<size_t> tainted;
    // Per column: smallest pos among tainted writers; accessors strictly after
    // it become tainted.
    std::vector<Pos> frontier(_columns.size(), kPosMax);
    std::deque<size_t> work;

    auto feed = [&](size_t n) {
        const Node &node = _nodes[n];
        for (int c : node.writes) {
            if (node.pos < frontier[c]) {
                frontier[c] = node.pos;
                work.push_back(n);
            }
        }
    };
    auto taint = [&](size_t n, auto &&taintRef) -> void {
        if (tainted.count(n)) {
            return;
        }
        tainted.insert(n);
        if (!(_nodes[n].isTriggerDdl && _nodes[n].idx < _window.tau)) {
            feed(n);
        }
        for (size_t coupled : _couplings[n]) {
            taintRef(coupled, taintRef);
        }
    };

    for (size_t seed : seeds) {
        if (seedsFeedFrontier) {
            feed(seed);
        }
        for (size_t coupled : _couplings[seed]) {
            taint(coupled, taint);
        }
    }

    bool changed = true;
    while (changed) {
        changed = false;
        for (size_t c = 0; c < _columns.size(); ++c) {
            if (frontier[c] == kPosMax) {
                continue;
            }
            for (size_t n : _accessors[c]) {
                if (_nodes[n].pos > frontier[c] && !tainted.count(n) && !_nodes[n].isTarget) {
                    taint(n, taint);
                    changed = true;
                }
            }
        }
    }
    return tainted;
}

std::set<uint64_t> DependencyGraph::dependentsOfTarget() const {
    std::set<size_t> tainted = taintClosure(_targetNodes, /*seedsFeedFrontier=*/true);
    std::set<uint64_t> out;
    for (size_t n : tainted) {
        if (!_nodes[n].isTarget) {
            out.insert(_nodes[n].idx);
        }
    }
    return out;
}

std::vector<Edge> DependencyGraph::directEdges() const {
    std::set<Edge> edges;
    for (size_t c = 0; c < _columns.size(); ++c) {
        const std::string label = _columns[c].first + "." + _columns[c].second;
        for (size_t w : _writers[c]) {
            for (size_t n : _accessors[c]) {
                if (_nodes[n].pos > _nodes[w].pos) {
                    edges.insert(
                        Edge{_nodes[n].idx, _nodes[w].idx, label, false});
                }
            }
        }
    }
    for (size_t t = 0; t < _nodes.size(); ++t) {
        for (size_t k : _couplings[t]) {
            if (_nodes[t].isTriggerDdl) {
                edges.insert(Edge{_nodes[t].idx, _nodes[k].idx, "", true});
                edges.insert(Edge{_nodes[k].idx, _nodes[t].idx, "", true});
            }
        }
    }
    return {edges.begin(), edges.end()};
}

bool DependencyGraph::reaches(uint64_t from, uint64_t to) const {
    auto fromIt = _byIdx.find(from);
    auto toIt = _byIdx.find(to);
    if (fromIt == _byIdx.end() || toIt == _byIdx.end()) {
        return false;
    }
    std::set<size_t> tainted = taintClosure({toIt->second}, /*seedsFeedFrontier=*/true);
    return tainted.count(fromIt->second) > 0;
}

ReplaySet replaySet(DependencyGraph &graph) {
    graph._influencers.clear();
    std::set<size_t> members;
    // Proposition 5: dependents of the target with non-empty writes.
    for (size_t n : graph.taintClosure(graph._targetNodes, true)) {
        if (!graph._nodes[n].isTarget) {
            members.insert(n);
        }
    }

    std::set<std::pair<int, size_t>> influencersDone; // (column, member) pairs
    std::set<size_t> futurePullDone;
    bool changed = true;
    while (changed) {
        changed = false;
        std::vector<size_t> pending(members.begin(), members.end());
        for (size_t m : pending) {
            const auto &node = graph._nodes[m];
            if (node.isTriggerDdl && node.idx < graph._window.tau) {
                continue; // reactivation bookkeeping only
            }
            // Influencers: last prior writer (within the graph) per accessed
            // column; everything depending on the influencer joins.
            std::vector<int> accessed = unionSorted(node.reads, node.writes);
            for (int c : accessed) {
                if (!influencersDone.emplace(c, m).second) {
                    continue;
                }
                const auto &writers = graph._writers[c];
                size_t best = SIZE_MAX;
                for (size_t w : writers) {
                    if (graph._nodes[w].pos < node.pos &&
                        (best == SIZE_MAX || graph._nodes[w].pos > graph._nodes[best].pos)) {
                        best = w;
                    }
                }
                if (best == SIZE_MAX || best == m) {
                    continue;
                }
                graph._influencers.push_back(
                    InfluencerEdge{graph._nodes[best].idx, node.idx,
                                   graph._columns[c].first + "." + graph._columns[c].second});
                for (size_t n : graph.taintClosure({best}, true)) {
                    if (!graph._nodes[n].isTarget && members.insert(n).second) {
                        changed = true;
                    }
                }
            }
            // In-window writers of a member-read column positioned after the
            // member: their kept effects would pollute the member's replayed
            // reads, so they must replay too.
            if (futurePullDone.insert(m).second) {
                for (int c : node.reads) {
                    for (size_t w : graph._writers[c]) {
                        if (graph._nodes[w].pos > node.pos && !graph._nodes[w].isTarget &&
                            members.insert(w).second) {
                            changed = true;
                        }
                    }
                }
            }
        }
        // Trigger coupling closes over new members.
        std::vector<size_t> wave(members.begin(), members.end());
        for (size_t m : wave) {
            for (size_t coupled : graph._couplings[m]) {
                if (!graph._nodes[coupled].isTarget && members.insert(coupled).second) {
                    changed = true;
                }
            }
        }
    }

    std::sort(graph._influencers.begin(), graph._influencers.end());
    graph._influencers.erase(std::unique(graph._influencers.begin(), graph._influencers.end()),
                             graph._influencers.end());

    ReplaySet out;
    for (size_t n : members) {
        out.members.insert(graph._nodes[n].idx);
    }
    graph._members = out.members;
    out.classification = classifyTables(graph, out.members);
    return out;
}

std::map<std::string, TableClass> classifyTables(const DependencyGraph &graph,
                                                 const std::set<uint64_t> &members) {
    std::map<std::string, TableClass> out;
    const sql::Catalog &catalog = *graph._catalog;
    std::set<std::string> tables;
    for (const auto &name : catalog.tablesAliveAt(posOf(graph._window.tau) - 1)) {
        tables.insert(name);
    }
    for (const auto &name : catalog.tablesAliveAt(posOf(graph._window.psi))) {
        tables.insert(name);
    }
    for (const auto &name : tables) {
        out[name] = TableClass::Irrelevant;
    }

    auto mark = [&](const DependencyGraph::Node &node) {
        for (int c : node.writes) {
            const auto &[table, column] = graph.columnRef(c);
            auto it = out.find(table);
            if (it != out.end()) {
                it->second = TableClass::Mutated;
            }
        }
        for (int c : node.reads) {
            const auto &[table, column] = graph.columnRef(c);
            auto it = out.find(table);
            if (it != out.end() && it->second != TableClass::Mutated) {
                it->second = TableClass::Consulted;
            }
        }
    };
    for (const auto &node : graph._nodes) {
        if (node.isTarget || members.count(node.idx)) {
            mark(node);
        }
    }
    // Second pass: reads never downgrade a mutated table.
    for (const auto &node : graph._nodes) {
        if (node.isTarget || members.count(node.idx)) {
            for (int c : node.writes) {
                const auto &[table, column] = graph.columnRef(c);
                auto it = out.find(table);
                if (it != out.end()) {
                    it->second = TableClass::Mutated;
                }
            }
        }
    }
    return out;
}

ReplaySet pruneIgnoredColumns(const DependencyGraph &graph, const ReplaySet &replay,
                              const std::set<ColumnRef> &ignore) {
    std::set<int> ignored;
    for (const auto &ref : ignore) {
        int id = graph.columnId(ref.table, ref.column);
        if (id < 0) {
            raise(ErrorKind::UnresolvedName, "unknown column " + ref.display());
        }
        ignored.insert(id);
    }
    // Step 3: promote ignored columns back while some member reads them and
    // writes an included column; run to fixpoint.
    bool changed = true;
    while (changed) {
        changed = false;
        for (const auto &node : graph.nodes()) {
            if (node.isTarget || !replay.members.count(node.idx)) {
                continue;
            }
            bool writesIncluded = false;
            for (int c : node.writes) {
                if (!ignored.count(c)) {
                    writesIncluded = true;
                }
            }
            if (!writesIncluded) {
                continue;
            }
            for (int c : node.reads) {
                if (ignored.erase(c) > 0) {
                    changed = true;
                }
            }
        }
    }
    // Step 4: drop members writing only ignored columns.
    ReplaySet out;
    for (const auto &node : graph.nodes()) {
        if (node.isTarget || !replay.members.count(node.idx)) {
            continue;
        }
        bool onlyIgnored = !node.writes.empty();
        for (int c : node.writes) {
            if (!ignored.count(c)) {
                onlyIgnored = false;
            }
        }
        if (!onlyIgnored) {
            out.members.insert(node.idx);
        }
    }
    out.classification = classifyTables(graph, out.members);
    return out;
}

void DependencyGraph::dump(std::ostream &out) const {
    for (const Edge &edge : directEdges()) {
        out << edge.from << " -> " << edge.to;
        if (!edge.column.empty()) {
            out << " [" << edge.column << "]";
        } else {
            out << " [trigger]";
        }
        out << "\n";
    }
    for (const InfluencerEdge &edge : _influencers) {
        out << "INFL " << edge.influencer << " ~> " << edge.of << " [" << edge.column << "]\n";
    }
}

} // namespace retro::graph
