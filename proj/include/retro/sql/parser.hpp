#pragma once

#include <string>
#include <vector>

#include "retro/sql/ast.hpp"
#include "retro/sql/catalog.hpp"

namespace retro::sql {

/// Parses a single statement (or one BEGIN..COMMIT block) and resolves every
/// name against the catalog state as of `atIdx`. Unqualified column
/// references are qualified; unknown names raise UnresolvedName; recognized
/// SQL outside the subset raises UnsupportedFeature.
Statement parseStatement(const std::string &text, const Catalog &catalog, uint64_t atIdx);

/// Parse without any catalog resolution (used by the pretty-print round-trip
/// and by the workload generator before a catalog exists).
Statement parseStatementRaw(const std::string &text);

/// Renders a statement back to SQL. parse(print(s)) is structurally identical
/// to s.
std::string printStatement(const Statement &stmt);
std::string printExpr(const Expr &expr);

} // namespace retro::sql
