#pragma once

#include <optional>
#include <string>
#include <vector>

#include "mathesis/binding.hpp"
#include "mathesis/config.hpp"
#include "mathesis/hypergraph.hpp"
#include "mathesis/pattern.hpp"
#include "mathesis/polynomial.hpp"

namespace mathesis {

struct SourcePos {
  int line = 0;
  int col = 0;
};

struct Diagnostic {
  SourcePos pos;
  std::string message;
  std::string render() const {
    return std::to_string(pos.line) + ":" + std::to_string(pos.col) + ": " + message;
  }
};

enum class DeclKind : std::uint8_t { Var, Const, Matrix, Point, PolyVar };

/// Parsed expression tree. A leaf is an identifier; a list applies an
/// operator; a quantifier carries binder names.
struct ExprNode {
  std::string head;
  std::vector<ExprNode> args;
  std::vector<std::string> binders;  // forall only
  SourcePos pos;
  bool leaf() const { return args.empty() && binders.empty(); }
};

struct ProblemDoc {
  struct Decl {
    std::string name;
    DeclKind kind;
    std::optional<int> dim;  // matrix decls may pin d
    SourcePos pos;
  };
  struct Bind {
    std::string name;
    std::vector<double> values;
    bool free_slot = false;
    SourcePos pos;
  };
  std::vector<Decl> decls;
  std::vector<ExprNode> premises;
  std::optional<ExprNode> goal;
  std::vector<Bind> binds;
};

struct ParseResult {
  std::optional<ProblemDoc> doc;
  Diagnostic error;
  bool ok() const { return doc.has_value(); }
};

/// Total parser: any input yields either a validated doc or a positioned
/// diagnostic (never a crash). Validation covers declarations, operator
/// arities, term/formula kinds, domains and binder scoping.
ParseResult parse_problem(const std::string& text);

/// Parses a sequence of "(bind name values... [free])" forms (binding
/// override files).
struct BindParseResult {
  std::optional<std::vector<ProblemDoc::Bind>> binds;
  Diagnostic error;
  bool ok() const { return binds.has_value(); }
};
BindParseResult parse_bind_forms(const std::string& text);

/// A fully built problem: initial state (premises asserted, goal structure
/// present but unasserted), goal pattern, numeric binding and the
/// polynomial ring shared by lifting and per-edge ideal energies.
struct Problem {
  std::string name;
  MathState initial;
  std::optional<GoalPattern> goal;
  std::optional<EdgeId> goal_edge;   // materialized goal root in `initial`
  Binding binding;
  PolyRing ring;
  std::map<NodeId, std::pair<int, int>> point_ring;  // point node -> (x, y) ring vars
  std::vector<EdgeId> premise_edges;
};

/// Deterministic: identical docs yield identical entity ids, hashes and
/// serialized bytes. Throws DimensionError/BindingError on bad seeds.
Problem build_state(const ProblemDoc& doc, const Config& config, const std::string& name = "");

/// Re-resolves bind overrides against an already built problem.
void apply_binds(Problem& problem, const std::vector<ProblemDoc::Bind>& binds);

// ---------------------------------------------------------------------------
// Trace serialization: line-oriented JSON, one header record then one record
// per step. Streamable during long searches.

struct TraceStep {
  int t = 0;
  std::string action;
  double e = 0.0;
  double r = 0.0;
  bool operator==(const TraceStep&) const = default;
};

struct ProofTrace {
  std::string problem;
  std::uint64_t seed = 0;
  std::string method;
  std::string version;
  std::string config_hash;
  double e0 = 0.0;
  std::vector<TraceStep> steps;
  bool operator==(const ProofTrace&) const = default;
};

std::string emit_trace(const ProofTrace& trace, const std::string& format = "jsonl");
ProofTrace parse_trace(const std::string& text);

// ---------------------------------------------------------------------------
// Whole-state serialization (canonical s-expression form; emit-parse-emit is
// byte-identical).

std::string emit_state(const MathState& state);
MathState parse_state(const std::string& text);

}  // namespace mathesis
