#include "mathesis/expr_io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <map>
#include <set>
#include <sstream>

#include <json.hpp>

#include "mathesis/rules.hpp"

namespace mathesis {

namespace {

// ---------------------------------------------------------------------------
// S-expression reader with positions.

struct Token {
  enum Kind { LParen, RParen, Atom, End } kind = End;
  std::string text;
  SourcePos pos;
};

struct ParseFail {
  Diagnostic diag;
};

[[noreturn]] void fail(SourcePos pos, const std::string& msg) {
  throw ParseFail{Diagnostic{pos, msg}};
}

class Lexer {
 public:
  explicit Lexer(const std::string& text) : text_(text) {}

  Token next() {
    skip_ws();
    Token t;
    t.pos = pos();
    if (i_ >= text_.size()) {
      t.kind = Token::End;
      return t;
    }
    char c = text_[i_];
    if (c == '(') {
      ++i_;
      ++col_;
      t.kind = Token::LParen;
      return t;
    }
    if (c == ')') {
      ++i_;
      ++col_;
      t.kind = Token::RParen;
      return t;
    }
    t.kind = Token::Atom;
    std::size_t start = i_;
    while (i_ < text_.size() && !std::isspace(static_cast<unsigned char>(text_[i_])) &&
           text_[i_] != '(' && text_[i_] != ')') {
      ++i_;
      ++col_;
    }
    t.text = text_.substr(start, i_ - start);
    return t;
  }

  SourcePos pos() const { return {line_, col_}; }

 private:
  void skip_ws() {
    while (i_ < text_.size()) {
      char c = text_[i_];
      if (c == ';') {  // comment to end of line
        while (i_ < text_.size() && text_[i_] != '\n') ++i_;
        continue;
      }
      if (c == '\n') {
        ++i_;
        ++line_;
        col_ = 1;
      } else if (std::isspace(static_cast<unsigned char>(c))) {
        ++i_;
        ++col_;
      } else {
        break;
      }
    }
  }

  const std::string& text_;
  std::size_t i_ = 0;
  int line_ = 1;
  int col_ = 1;
};

struct SExpr {
  bool is_atom = false;
  std::string atom;
  std::vector<SExpr> items;
  SourcePos pos;
};

SExpr read_sexpr(Lexer& lx, Token first) {
  if (first.kind == Token::Atom) {
    SExpr s;
    s.is_atom = true;
    s.atom = first.text;
    s.pos = first.pos;
    return s;
  }
  if (first.kind != Token::LParen) fail(first.pos, "expected '(' or atom");
  SExpr s;
  s.pos = first.pos;
  while (true) {
    Token t = lx.next();
    if (t.kind == Token::RParen) return s;
    if (t.kind == Token::End) fail(t.pos, "unbalanced parenthesis: missing ')'");
    s.items.push_back(read_sexpr(lx, t));
  }
}

const SExpr& item(const SExpr& s, std::size_t i) {
  if (i >= s.items.size()) fail(s.pos, "form is too short");
  return s.items[i];
}

std::string head_of(const SExpr& s) {
  if (s.is_atom || s.items.empty() || !s.items[0].is_atom) return "";
  return s.items[0].atom;
}

bool parse_number(const std::string& text, double& out) {
  const char* begin = text.c_str();
  char* end = nullptr;
  out = std::strtod(begin, &end);
  return end == begin + text.size() && !text.empty() && std::isfinite(out);
}

// ---------------------------------------------------------------------------
// Expression tree extraction and validation.

ExprNode to_expr(const SExpr& s) {
  ExprNode e;
  e.pos = s.pos;
  if (s.is_atom) {
    e.head = s.atom;
    return e;
  }
  if (s.items.empty()) fail(s.pos, "empty expression");
  if (!s.items[0].is_atom) fail(s.pos, "expression head must be a symbol");
  e.head = s.items[0].atom;
  if (e.head == "forall") {
    if (s.items.size() != 3) fail(s.pos, "forall needs a binder list and one body");
    const SExpr& binders = item(s, 1);
    if (binders.is_atom || binders.items.empty())
      fail(binders.pos, "forall binder list must be a nonempty (x y ...) list");
    for (const SExpr& b : binders.items) {
      if (!b.is_atom) fail(b.pos, "binder must be an identifier");
      e.binders.push_back(b.atom);
    }
    e.args.push_back(to_expr(item(s, 2)));
    return e;
  }
  for (std::size_t i = 1; i < s.items.size(); ++i) e.args.push_back(to_expr(s.items[i]));
  if (e.args.empty()) fail(s.pos, "operator application needs arguments");
  return e;
}

Domain decl_domain(DeclKind k) {
  switch (k) {
    case DeclKind::Matrix: return Domain::Matrix;
    case DeclKind::Point: return Domain::Point;
    default: return Domain::Scalar;
  }
}

struct ExprInfo {
  bool is_term = false;
  Domain domain = Domain::Scalar;
};

struct Checker {
  const std::map<std::string, DeclKind>& decls;
  std::set<std::string> used_binders;      // binder names are globally unique
  std::vector<std::string> active_binders;

  ExprInfo check(const ExprNode& e) {
    if (e.leaf()) {
      if (std::find(active_binders.begin(), active_binders.end(), e.head) !=
          active_binders.end())
        return {true, Domain::Scalar};
      auto it = decls.find(e.head);
      if (it == decls.end()) fail(e.pos, "undeclared symbol '" + e.head + "'");
      return {true, decl_domain(it->second)};
    }
    if (e.head == "forall") {
      for (const std::string& b : e.binders) {
        if (decls.count(b))
          fail(e.pos, "binder '" + b + "' shadows a declared symbol");
        if (!used_binders.insert(b).second)
          fail(e.pos, "binder '" + b + "' is reused; binder names must be unique");
        active_binders.push_back(b);
      }
      ExprInfo body = check(e.args[0]);
      if (body.is_term) fail(e.args[0].pos, "forall body must be a formula");
      for (std::size_t i = 0; i < e.binders.size(); ++i) active_binders.pop_back();
      return {false, Domain::Scalar};
    }
    const OperatorInfo* info = OperatorTable::instance().find(e.head);
    if (!info) fail(e.pos, "unknown operator '" + e.head + "'");
    if (info->type == EdgeType::Quantifier)
      fail(e.pos, "write quantifiers as (forall (x ...) body)");

    std::vector<ExprInfo> args;
    args.reserve(e.args.size());
    for (const ExprNode& a : e.args) args.push_back(check(a));

    if (info->type == EdgeType::Connective) {
      for (std::size_t i = 0; i < args.size(); ++i) {
        if (args[i].is_term)
          fail(e.args[i].pos, "'" + e.head + "' takes formulas, not terms");
      }
    } else {
      for (std::size_t i = 0; i < args.size(); ++i) {
        if (!args[i].is_term)
          fail(e.args[i].pos, "'" + e.head + "' takes terms, not formulas");
      }
    }

    const OperatorInfo::Signature* matched = nullptr;
    for (const auto& sig : info->signatures) {
      if (static_cast<int>(args.size()) != sig.arity) continue;
      if (info->type == EdgeType::Connective) {
        matched = &sig;
        break;
      }
      bool ok = true;
      for (const ExprInfo& a : args) {
        if (a.domain != sig.arg_domain) {
          ok = false;
          break;
        }
      }
      if (ok) {
        matched = &sig;
        break;
      }
    }
    if (!matched) {
      bool arity_ok = false;
      for (const auto& sig : info->signatures)
        arity_ok |= static_cast<int>(args.size()) == sig.arity;
      fail(e.pos, arity_ok ? "operand domains do not fit '" + e.head + "'"
                           : "arity mismatch for '" + e.head + "'");
    }
    if (info->type == EdgeType::Constructor) {
      Domain out = info->output_domain;
      if (e.head == "Sum" || e.head == "Product" || e.head == "Sub") out = args[0].domain;
      return {true, out};
    }
    return {false, Domain::Scalar};
  }
};

}  // namespace

ParseResult parse_problem(const std::string& text) {
  try {
    Lexer lx(text);
    Token first = lx.next();
    if (first.kind == Token::End) fail(first.pos, "empty input");
    SExpr root = read_sexpr(lx, first);
    Token trailing = lx.next();
    if (trailing.kind != Token::End) fail(trailing.pos, "trailing content after problem form");
    if (head_of(root) != "problem") fail(root.pos, "expected a (problem ...) form");

    ProblemDoc doc;
    for (std::size_t i = 1; i < root.items.size(); ++i) {
      const SExpr& s = root.items[i];
      std::string h = head_of(s);
      if (h == "decl") {
        if (s.items.size() != 3 && s.items.size() != 4)
          fail(s.pos, "decl needs a name and a kind");
        const SExpr& name = item(s, 1);
        const SExpr& kind = item(s, 2);
        if (!name.is_atom || !kind.is_atom) fail(s.pos, "decl fields must be atoms");
        ProblemDoc::Decl d;
        d.name = name.atom;
        d.pos = s.pos;
        if (kind.atom == "var") d.kind = DeclKind::Var;
        else if (kind.atom == "const") d.kind = DeclKind::Const;
        else if (kind.atom == "matrix") d.kind = DeclKind::Matrix;
        else if (kind.atom == "point") d.kind = DeclKind::Point;
        else if (kind.atom == "polyvar") d.kind = DeclKind::PolyVar;
        else fail(kind.pos, "unknown decl kind '" + kind.atom + "'");
        if (s.items.size() == 4) {
          const SExpr& dim = item(s, 3);
          double v = 0;
          if (!dim.is_atom || !parse_number(dim.atom, v) || v < 1 || v != std::floor(v))
            fail(dim.pos, "decl dimension must be a positive integer");
          if (d.kind != DeclKind::Matrix) fail(dim.pos, "only matrix decls take a dimension");
          d.dim = static_cast<int>(v);
        }
        doc.decls.push_back(std::move(d));
      } else if (h == "premise") {
        if (s.items.size() != 2) fail(s.pos, "premise takes exactly one expression");
        doc.premises.push_back(to_expr(item(s, 1)));
      } else if (h == "goal") {
        if (s.items.size() != 2) fail(s.pos, "goal takes exactly one expression");
        if (doc.goal) fail(s.pos, "duplicate goal");
        doc.goal = to_expr(item(s, 1));
      } else if (h == "bind") {
        if (s.items.size() < 3) fail(s.pos, "bind needs a name and at least one number");
        const SExpr& name = item(s, 1);
        if (!name.is_atom) fail(name.pos, "bind name must be an atom");
        ProblemDoc::Bind b;
        b.name = name.atom;
        b.pos = s.pos;
        for (std::size_t j = 2; j < s.items.size(); ++j) {
          const SExpr& v = s.items[j];
          if (!v.is_atom) fail(v.pos, "bind values must be numbers");
          double x = 0;
          if (parse_number(v.atom, x)) {
            b.values.push_back(x);
          } else if (v.atom == "free" && j == s.items.size() - 1) {
            b.free_slot = true;
          } else if (v.atom == "frozen" && j == s.items.size() - 1) {
            b.free_slot = false;
          } else {
            fail(v.pos, "bind value '" + v.atom + "' is not a number");
          }
        }
        if (b.values.empty()) fail(s.pos, "bind needs at least one number");
        doc.binds.push_back(std::move(b));
      } else {
        fail(s.pos, "unknown problem section '" + (h.empty() ? "?" : h) + "'");
      }
    }
    if (!doc.goal) fail(root.pos, "problem has no goal");

    // Validation: declarations unique, symbols known, expressions typed.
    std::map<std::string, DeclKind> decl_map;
    for (const auto& d : doc.decls) {
      if (!decl_map.emplace(d.name, d.kind).second)
        fail(d.pos, "duplicate declaration of '" + d.name + "'");
    }
    std::optional<int> mdim;
    for (const auto& d : doc.decls) {
      if (d.dim) {
        if (mdim && *mdim != *d.dim) fail(d.pos, "matrix dimensions disagree");
        mdim = d.dim;
      }
    }
    Checker checker{decl_map, {}, {}};
    for (const auto& p : doc.premises) {
      ExprInfo info = checker.check(p);
      if (info.is_term) fail(p.pos, "premise must be a formula");
    }
    ExprInfo ginfo = checker.check(*doc.goal);
    if (ginfo.is_term) fail(doc.goal->pos, "goal must be a formula");
    for (const auto& b : doc.binds) {
      if (!decl_map.count(b.name)) fail(b.pos, "bind of undeclared symbol '" + b.name + "'");
    }
    return ParseResult{std::move(doc), {}};
  } catch (const ParseFail& pf) {
    return ParseResult{std::nullopt, pf.diag};
  }
}

BindParseResult parse_bind_forms(const std::string& text) {
  try {
    Lexer lx(text);
    std::vector<ProblemDoc::Bind> out;
    while (true) {
      Token t = lx.next();
      if (t.kind == Token::End) break;
      SExpr s = read_sexpr(lx, t);
      if (head_of(s) != "bind") fail(s.pos, "expected a (bind ...) form");
      ProblemDoc::Bind b;
      const SExpr& name = item(s, 1);
      if (!name.is_atom) fail(name.pos, "bind name must be an atom");
      b.name = name.atom;
      b.pos = s.pos;
      for (std::size_t j = 2; j < s.items.size(); ++j) {
        const SExpr& v = s.items[j];
        double x = 0;
        if (v.is_atom && parse_number(v.atom, x)) {
          b.values.push_back(x);
        } else if (v.is_atom && v.atom == "free" && j == s.items.size() - 1) {
          b.free_slot = true;
        } else {
          fail(v.pos, "bind value is not a number");
        }
      }
      if (b.values.empty()) fail(s.pos, "bind needs at least one number");
      out.push_back(std::move(b));
    }
    return BindParseResult{std::move(out), {}};
  } catch (const ParseFail& pf) {
    return BindParseResult{std::nullopt, pf.diag};
  }
}

// ---------------------------------------------------------------------------
// build_state

namespace {

struct Builder {
  MathState& state;
  std::map<std::string, NodeId> symbols;          // declared name -> node
  std::map<std::string, NodeId> binder_nodes;     // binder name -> node

  EntityRef build_term(const ExprNode& e) {
    if (e.leaf()) {
      auto bit = binder_nodes.find(e.head);
      if (bit != binder_nodes.end()) return node_ref(bit->second);
      return node_ref(symbols.at(e.head));
    }
    std::vector<EntityRef> args;
    args.reserve(e.args.size());
    for (const ExprNode& a : e.args) args.push_back(build_term(a));
    EdgeId ctor = build_edge_shared(state, EdgeType::Constructor, e.head, std::move(args));
    return node_ref(*state.edge(ctor).output);
  }

  EdgeId build_formula(const ExprNode& e) {
    if (e.head == "forall") {
      std::vector<NodeId> bound;
      for (const std::string& b : e.binders) {
        NodeId v = state.add_node(NodeType::Variable, b, Domain::Scalar);
        binder_nodes[b] = v;
        bound.push_back(v);
      }
      EdgeId body = build_formula(e.args[0]);
      return build_edge_shared(state, EdgeType::Quantifier, "ForAll", {edge_ref(body)},
                               std::move(bound));
    }
    const OperatorInfo& info = OperatorTable::instance().require(e.head);
    std::vector<EntityRef> args;
    args.reserve(e.args.size());
    if (info.type == EdgeType::Connective) {
      for (const ExprNode& a : e.args) args.push_back(edge_ref(build_formula(a)));
    } else {
      for (const ExprNode& a : e.args) args.push_back(build_term(a));
    }
    return build_edge_shared(state, info.type, e.head, std::move(args));
  }
};

void load_bind(Problem& p, const ProblemDoc::Bind& b, NodeId node, Domain domain) {
  int d = p.binding.dim;
  switch (domain) {
    case Domain::Matrix: {
      if (static_cast<int>(b.values.size()) != d * d)
        throw DimensionError("matrix seed for '" + b.name + "' needs " + std::to_string(d * d) +
                             " values (d=" + std::to_string(d) + "), got " +
                             std::to_string(b.values.size()));
      Mat m(d, d);
      int k = 0;
      for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j) m(i, j) = b.values[static_cast<std::size_t>(k++)];
      p.binding.matrices[node] = std::move(m);
      break;
    }
    case Domain::Point: {
      if (b.values.size() != 2)
        throw DimensionError("point seed for '" + b.name + "' needs 2 values");
      p.binding.points[node] = Point2{b.values[0], b.values[1]};
      break;
    }
    case Domain::Scalar: {
      if (b.values.size() != 1)
        throw DimensionError("scalar seed for '" + b.name + "' needs 1 value, got " +
                             std::to_string(b.values.size()) +
                             " (point seed for a non-point symbol?)");
      p.binding.scalars[node].value = b.values[0];
      break;
    }
    case Domain::Line:
      throw BindingError("line symbols cannot carry numeric seeds");
  }
  if (b.free_slot)
    p.binding.free_slots.insert(node);
  else
    p.binding.free_slots.erase(node);
}

}  // namespace

Problem build_state(const ProblemDoc& doc, const Config& config, const std::string& name) {
  Problem p;
  p.name = name;
  int d = config.energy_dim_d;
  for (const auto& decl : doc.decls) {
    if (decl.dim) d = *decl.dim;
  }
  p.binding.dim = d;

  std::map<std::string, const ProblemDoc::Bind*> bind_of;
  for (const auto& b : doc.binds) bind_of[b.name] = &b;

  Builder builder{p.initial, {}, {}};

  int ring_idx = 0;
  for (const auto& decl : doc.decls) {
    Domain domain = decl_domain(decl.kind);
    NodeType type = decl.kind == DeclKind::Const ? NodeType::Constant : NodeType::Variable;
    NodeId node = p.initial.add_node(type, decl.name, domain);
    builder.symbols[decl.name] = node;
    switch (decl.kind) {
      case DeclKind::Var:
      case DeclKind::PolyVar:
        p.binding.scalars[node].ring_index = ring_idx++;
        p.ring.vars.push_back(decl.name);
        break;
      case DeclKind::Const:
        if (!bind_of.count(decl.name)) {
          // Unbound constants behave as opaque ring symbols.
          p.binding.scalars[node].ring_index = ring_idx++;
          p.ring.vars.push_back(decl.name);
        } else {
          p.binding.scalars[node].ring_index = -1;
        }
        break;
      case DeclKind::Point:
        p.point_ring[node] = {ring_idx, ring_idx + 1};
        p.ring.vars.push_back(decl.name + ".x");
        p.ring.vars.push_back(decl.name + ".y");
        ring_idx += 2;
        break;
      case DeclKind::Matrix:
        break;
    }
  }

  for (const auto& b : doc.binds) {
    NodeId node = builder.symbols.at(b.name);
    load_bind(p, b, node, p.initial.node_domain(node));
  }

  for (const auto& prem : doc.premises) {
    EdgeId e = builder.build_formula(prem);
    p.initial.assert_fact(e);
    p.premise_edges.push_back(e);
  }
  if (doc.goal) {
    EdgeId g = builder.build_formula(*doc.goal);
    p.goal_edge = g;
    p.goal = pattern_from_edge(p.initial, g);
  }
  return p;
}

void apply_binds(Problem& problem, const std::vector<ProblemDoc::Bind>& binds) {
  for (const auto& b : binds) {
    std::optional<NodeId> node = problem.initial.find_named(NodeType::Variable, b.name);
    if (!node) node = problem.initial.find_named(NodeType::Constant, b.name);
    if (!node) throw BindingError("bind of unknown symbol '" + b.name + "'");
    load_bind(problem, b, *node, problem.initial.node_domain(*node));
  }
}

// ---------------------------------------------------------------------------
// Trace serialization.

std::string emit_trace(const ProofTrace& trace, const std::string& format) {
  if (format != "jsonl") throw Error("emit_trace: unsupported format '" + format + "'");
  nlohmann::ordered_json header;
  header["problem"] = trace.problem;
  header["seed"] = trace.seed;
  header["method"] = trace.method;
  header["version"] = trace.version;
  header["config_hash"] = trace.config_hash;
  header["e0"] = trace.e0;
  std::string out = header.dump();
  out += '\n';
  for (const TraceStep& s : trace.steps) {
    nlohmann::ordered_json rec;
    rec["t"] = s.t;
    rec["action"] = s.action;
    rec["e"] = s.e;
    rec["r"] = s.r;
    out += rec.dump();
    out += '\n';
  }
  return out;
}

ProofTrace parse_trace(const std::string& text) {
  ProofTrace trace;
  std::istringstream is(text);
  std::string line;
  bool have_header = false;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    nlohmann::json rec = nlohmann::json::parse(line, nullptr, false);
    if (rec.is_discarded()) throw Error("parse_trace: malformed JSON record");
    if (!have_header) {
      trace.problem = rec.at("problem").get<std::string>();
      trace.seed = rec.at("seed").get<std::uint64_t>();
      trace.method = rec.at("method").get<std::string>();
      trace.version = rec.value("version", "");
      trace.config_hash = rec.value("config_hash", "");
      trace.e0 = rec.at("e0").get<double>();
      have_header = true;
      continue;
    }
    TraceStep s;
    s.t = rec.at("t").get<int>();
    s.action = rec.at("action").get<std::string>();
    s.e = rec.at("e").get<double>();
    s.r = rec.at("r").get<double>();
    trace.steps.push_back(std::move(s));
  }
  if (!have_header) throw Error("parse_trace: missing header record");
  return trace;
}

// ---------------------------------------------------------------------------
// Whole-state serialization.

namespace {

std::string quote(const std::string& s) {
  std::string out = "\"";
  for (char c : s) {
    if (c == '"' || c == '\\') out += '\\';
    out += c;
  }
  out += '"';
  return out;
}

}  // namespace

std::string emit_state(const MathState& state) {
  std::ostringstream os;
  os << "(state\n";
  for (const Node& n : state.nodes()) {
    os << " (node N" << n.id << ' ' << node_type_name(n.type) << ' ' << quote(n.label) << ' '
       << domain_name(n.domain);
    if (n.definition) os << " (def E" << *n.definition << ')';
    os << ")\n";
  }
  for (const Hyperedge& e : state.edges()) {
    os << " (edge E" << e.id << ' ' << edge_type_name(e.type) << ' ' << e.op << " (args";
    for (EntityRef a : e.args) os << ' ' << (a.is_node() ? 'N' : 'E') << a.id;
    os << ')';
    if (e.output) os << " (out N" << *e.output << ')';
    if (!e.bound_vars.empty()) {
      os << " (bound";
      for (NodeId v : e.bound_vars) os << " N" << v;
      os << ')';
    }
    os << ")\n";
  }
  os << " (facts";
  for (EdgeId f : state.facts()) os << " E" << f;
  os << "))\n";
  return os.str();
}

namespace {

std::uint32_t parse_ref_id(const SExpr& s, char kind) {
  if (!s.is_atom || s.atom.size() < 2 || s.atom[0] != kind)
    fail(s.pos, std::string("expected ") + kind + "<id> reference");
  return static_cast<std::uint32_t>(std::stoul(s.atom.substr(1)));
}

std::string unquote(const SExpr& s) {
  const std::string& a = s.atom;
  if (a.size() >= 2 && a.front() == '"' && a.back() == '"') {
    std::string out;
    for (std::size_t i = 1; i + 1 < a.size(); ++i) {
      if (a[i] == '\\' && i + 2 < a.size()) ++i;
      out += a[i];
    }
    return out;
  }
  return a;
}

}  // namespace

MathState parse_state(const std::string& text) {
  // Note the lexer splits on whitespace, so quoted labels must not contain
  // spaces; emit_state only quotes identifier-like labels.
  Lexer lx(text);
  Token first = lx.next();
  SExpr root = read_sexpr(lx, first);
  if (head_of(root) != "state") throw Error("parse_state: expected (state ...)");

  struct NodeRec {
    NodeType type;
    std::string label;
    Domain domain;
    std::optional<EdgeId> def;
  };
  struct EdgeRec {
    EdgeType type;
    std::string op;
    std::vector<EntityRef> args;
    std::optional<NodeId> output;
    std::vector<NodeId> bound;
  };
  std::vector<NodeRec> nodes;
  std::vector<EdgeRec> edges;
  std::vector<EdgeId> facts;

  auto parse_domain = [](const SExpr& s) {
    if (s.atom == "scalar") return Domain::Scalar;
    if (s.atom == "matrix") return Domain::Matrix;
    if (s.atom == "point") return Domain::Point;
    if (s.atom == "line") return Domain::Line;
    fail(s.pos, "unknown domain '" + s.atom + "'");
  };
  auto parse_node_type = [](const SExpr& s) {
    if (s.atom == "Variable") return NodeType::Variable;
    if (s.atom == "Constant") return NodeType::Constant;
    if (s.atom == "CompoundTerm") return NodeType::CompoundTerm;
    fail(s.pos, "unknown node type '" + s.atom + "'");
  };
  auto parse_edge_type = [](const SExpr& s) {
    if (s.atom == "Constructor") return EdgeType::Constructor;
    if (s.atom == "Predicate") return EdgeType::Predicate;
    if (s.atom == "Connective") return EdgeType::Connective;
    if (s.atom == "Quantifier") return EdgeType::Quantifier;
    fail(s.pos, "unknown edge type '" + s.atom + "'");
  };

  try {
    for (std::size_t i = 1; i < root.items.size(); ++i) {
      const SExpr& s = root.items[i];
      std::string h = head_of(s);
      if (h == "node") {
        NodeRec r;
        std::uint32_t id = parse_ref_id(item(s, 1), 'N');
        if (id != nodes.size()) fail(s.pos, "node ids must be dense and ordered");
        r.type = parse_node_type(item(s, 2));
        r.label = unquote(item(s, 3));
        r.domain = parse_domain(item(s, 4));
        if (s.items.size() > 5) {
          const SExpr& def = item(s, 5);
          if (head_of(def) != "def") fail(def.pos, "expected (def E<id>)");
          r.def = parse_ref_id(item(def, 1), 'E');
        }
        nodes.push_back(std::move(r));
      } else if (h == "edge") {
        EdgeRec r;
        std::uint32_t id = parse_ref_id(item(s, 1), 'E');
        if (id != edges.size()) fail(s.pos, "edge ids must be dense and ordered");
        r.type = parse_edge_type(item(s, 2));
        r.op = item(s, 3).atom;
        for (std::size_t j = 4; j < s.items.size(); ++j) {
          const SExpr& part = s.items[j];
          std::string ph = head_of(part);
          if (ph == "args") {
            for (std::size_t k = 1; k < part.items.size(); ++k) {
              const SExpr& a = part.items[k];
              if (!a.is_atom || a.atom.empty()) fail(a.pos, "bad arg ref");
              if (a.atom[0] == 'N')
                r.args.push_back(node_ref(parse_ref_id(a, 'N')));
              else
                r.args.push_back(edge_ref(parse_ref_id(a, 'E')));
            }
          } else if (ph == "out") {
            r.output = parse_ref_id(item(part, 1), 'N');
          } else if (ph == "bound") {
            for (std::size_t k = 1; k < part.items.size(); ++k)
              r.bound.push_back(parse_ref_id(part.items[k], 'N'));
          } else {
            fail(part.pos, "unknown edge section");
          }
        }
        edges.push_back(std::move(r));
      } else if (h == "facts") {
        for (std::size_t k = 1; k < s.items.size(); ++k)
          facts.push_back(parse_ref_id(s.items[k], 'E'));
      } else {
        fail(s.pos, "unknown state section");
      }
    }
  } catch (const ParseFail& pf) {
    throw Error("parse_state: " + pf.diag.render());
  }

  // Replay creation order: plain nodes fill the gaps between constructor
  // outputs; every edge's references predate it.
  MathState state;
  std::size_t next_node = 0;
  auto ensure_nodes_up_to = [&](std::uint32_t max_id) {
    while (next_node <= max_id) {
      const NodeRec& r = nodes.at(next_node);
      if (r.def) {
        if (state.node_count() <= next_node)
          throw Error("parse_state: compound node N" + std::to_string(next_node) +
                      " appears before its constructor");
        ++next_node;
        continue;
      }
      state.add_node(r.type, r.label, r.domain);
      ++next_node;
    }
  };
  for (std::size_t eid = 0; eid < edges.size(); ++eid) {
    const EdgeRec& r = edges[eid];
    std::uint32_t max_node_ref = 0;
    bool any_node = false;
    for (EntityRef a : r.args) {
      if (a.is_node()) {
        max_node_ref = std::max(max_node_ref, a.id);
        any_node = true;
      }
    }
    for (NodeId v : r.bound) {
      max_node_ref = std::max(max_node_ref, v);
      any_node = true;
    }
    if (r.output && *r.output > 0) {
      ensure_nodes_up_to(*r.output - 1);
    } else if (any_node) {
      ensure_nodes_up_to(max_node_ref);
    }
    EdgeId created = state.add_edge(r.type, r.op, r.args, r.bound);
    if (created != eid) throw Error("parse_state: edge id replay mismatch");
    if (r.output) {
      if (!state.edge(created).output || *state.edge(created).output != *r.output)
        throw Error("parse_state: constructor output replay mismatch");
      next_node = std::max<std::size_t>(next_node, *r.output + 1);
    }
  }
  if (!nodes.empty()) ensure_nodes_up_to(static_cast<std::uint32_t>(nodes.size() - 1));
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    const Node& built = state.node(static_cast<NodeId>(i));
    if (built.type != nodes[i].type || built.label != nodes[i].label)
      throw Error("parse_state: node replay mismatch at N" + std::to_string(i));
  }
  for (EdgeId f : facts) state.assert_fact(f);
  return state;
}

}  // namespace mathesis
