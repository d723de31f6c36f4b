#include "fragbn/dsl.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <map>
#include <optional>
#include <set>

#include "fragbn/error.hpp"

namespace fragbn {

namespace {

struct Pos {
  std::size_t line = 1;
  std::size_t col = 1;
};

enum class Tok { Ident, String, Number, Punct, End };

struct Token {
  Tok kind = Tok::End;
  std::string text;
  Pos pos;
};

struct SyntaxError {
  Pos pos;
  std::string code;
  std::string message;
};

bool ident_start(char c) {
  return std::isalpha(static_cast<unsigned char>(c)) || c == '_';
}

bool ident_char(char c) {
  return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-';
}

bool is_identifier(std::string_view s) {
  if (s.empty() || !ident_start(s.front())) return false;
  return std::all_of(s.begin(), s.end(), ident_char);
}

std::vector<Token> lex(std::string_view text) {
  std::vector<Token> out;
  std::size_t i = 0;
  Pos pos;
  auto advance = [&](std::size_t n) {
    for (std::size_t k = 0; k < n; ++k) {
      if (text[i] == '\n') {
        ++pos.line;
        pos.col = 1;
      } else {
        ++pos.col;
      }
      ++i;
    }
  };
  auto digit = [&](std::size_t k) {
    return k < text.size() && std::isdigit(static_cast<unsigned char>(text[k]));
  };
  while (i < text.size()) {
    char c = text[i];
    if (c == ' ' || c == '\t' || c == '\r' || c == '\n') {
      advance(1);
    } else if (c == '#') {
      while (i < text.size() && text[i] != '\n') advance(1);
    } else if (ident_start(c)) {
      Token t{Tok::Ident, {}, pos};
      std::size_t j = i;
      while (j < text.size() && ident_char(text[j])) ++j;
      t.text = std::string(text.substr(i, j - i));
      advance(j - i);
      out.push_back(std::move(t));
    } else if (std::isdigit(static_cast<unsigned char>(c)) || c == '.' ||
               ((c == '-' || c == '+') && (digit(i + 1) || (i + 1 < text.size() && text[i + 1] == '.')))) {
      Token t{Tok::Number, {}, pos};
      std::size_t j = i;
      if (text[j] == '-' || text[j] == '+') ++j;
      bool digits = false;
      while (digit(j)) ++j, digits = true;
      if (j < text.size() && text[j] == '.') {
        ++j;
        while (digit(j)) ++j, digits = true;
      }
      if (!digits) throw SyntaxError{pos, "E_SYNTAX", "malformed number"};
      if (j < text.size() && (text[j] == 'e' || text[j] == 'E')) {
        std::size_t k = j + 1;
        if (k < text.size() && (text[k] == '-' || text[k] == '+')) ++k;
        if (!digit(k)) throw SyntaxError{pos, "E_SYNTAX", "malformed exponent"};
        while (digit(k)) ++k;
        j = k;
      }
      if (j < text.size() && ident_char(text[j])) {
        throw SyntaxError{pos, "E_SYNTAX", "malformed number"};
      }
      t.text = std::string(text.substr(i, j - i));
      advance(j - i);
      out.push_back(std::move(t));
    } else if (c == '"') {
      Token t{Tok::String, {}, pos};
      advance(1);
      bool closed = false;
      while (i < text.size()) {
        char d = text[i];
        if (d == '\n') break;
        if (d == '"') {
          advance(1);
          closed = true;
          break;
        }
        if (d == '\\') {
          if (i + 1 >= text.size() || (text[i + 1] != '"' && text[i + 1] != '\\')) {
            throw SyntaxError{pos, "E_SYNTAX", "invalid escape in string"};
          }
          advance(1);
          d = text[i];
        }
        t.text += d;
        advance(1);
      }
      if (!closed) throw SyntaxError{t.pos, "E_SYNTAX", "unterminated string"};
      out.push_back(std::move(t));
    } else if (std::string_view("{}()[],;:").find(c) != std::string_view::npos) {
      out.push_back({Tok::Punct, std::string(1, c), pos});
      advance(1);
    } else {
      char buf[48];
      std::snprintf(buf, sizeof buf, "unexpected character 0x%02x", static_cast<unsigned char>(c));
      throw SyntaxError{pos, "E_SYNTAX", buf};
    }
  }
  out.push_back({Tok::End, "", pos});
  return out;
}

// ---------------------------------------------------------------------------
// Raw document model, resolved against the variable schemas after parsing.

struct PosRef {
  VariableRef ref;
  Pos pos;
};

struct RawVar {
  Pos pos;
  std::string name;
  std::vector<std::string> attrs;
  std::vector<std::string> states;
  bool ordered = false;
  Pos states_pos;
  CombinationMethod method = CombinationMethod::Simple;
  std::optional<std::vector<double>> default_dist;
  Pos default_pos;
};

struct RawBlock {
  std::string label;
  Pos pos;
  std::optional<std::vector<double>> leak;
  std::vector<std::pair<PosRef, std::vector<std::vector<double>>>> links;
};

struct RawNoisyMin {
  PosRef given;
  std::vector<RawBlock> blocks;
};

struct RawResident {
  PosRef var;
  std::vector<PosRef> parents;
  std::optional<InfluencePayload> payload;
  std::optional<RawNoisyMin> noisy_min;
  Pos influence_pos;
  std::optional<std::vector<double>> table;
};

struct RawFragment {
  Pos pos;
  std::string name;
  std::vector<std::string> attrs;
  std::vector<PosRef> hyp_vars;
  std::vector<std::vector<std::string>> hyp_tuples;
  bool has_hypothesis = false;
  std::vector<PosRef> inputs;
  std::vector<RawResident> residents;
};

class Parser {
 public:
  explicit Parser(std::vector<Token> tokens) : t_(std::move(tokens)) {}

  void document(std::vector<RawVar>& vars, std::vector<RawFragment>& frags) {
    if (is_ident("fragbn-kb")) {
      next();
      const Token& v = peek();
      if (v.kind != Tok::Number || v.text != "1") fail(v.pos, "unsupported format version");
      next();
    }
    while (peek().kind != Tok::End) {
      if (is_ident("varschema")) {
        vars.push_back(varschema());
      } else if (is_ident("fragment")) {
        frags.push_back(fragment());
      } else {
        fail(peek().pos, "expected 'varschema' or 'fragment', found " + describe(peek()));
      }
    }
  }

 private:
  std::vector<Token> t_;
  std::size_t i_ = 0;

  const Token& peek(std::size_t k = 0) const { return t_[std::min(i_ + k, t_.size() - 1)]; }
  const Token& next() {
    const Token& t = peek();
    if (i_ < t_.size() - 1) ++i_;
    return t;
  }
  [[noreturn]] static void fail(Pos p, std::string msg, std::string code = "E_SYNTAX") {
    throw SyntaxError{p, std::move(code), std::move(msg)};
  }
  static std::string describe(const Token& t) {
    switch (t.kind) {
      case Tok::End: return "end of input";
      case Tok::String: return "string \"" + t.text + "\"";
      default: return "'" + t.text + "'";
    }
  }
  bool is_ident(std::string_view s) const { return peek().kind == Tok::Ident && peek().text == s; }
  bool is_punct(char c) const { return peek().kind == Tok::Punct && peek().text[0] == c; }
  void expect(char c) {
    if (!is_punct(c)) fail(peek().pos, std::string("expected '") + c + "', found " + describe(peek()));
    next();
  }
  void keyword(std::string_view k) {
    if (!is_ident(k)) fail(peek().pos, "expected '" + std::string(k) + "', found " + describe(peek()));
    next();
  }
  std::string identifier(const char* what) {
    if (peek().kind != Tok::Ident) fail(peek().pos, std::string("expected ") + what + ", found " + describe(peek()));
    return next().text;
  }
  std::string label() {
    if (peek().kind != Tok::Ident && peek().kind != Tok::String) {
      fail(peek().pos, "expected a state label, found " + describe(peek()));
    }
    return next().text;
  }
  double number(bool probability) {
    const Token& t = peek();
    if (t.kind != Tok::Number) fail(t.pos, "expected a number, found " + describe(t));
    double v = std::strtod(t.text.c_str(), nullptr);
    if (!std::isfinite(v)) fail(t.pos, "number out of range", "E_RANGE");
    if (probability && (v < 0.0 || v > 1.0)) fail(t.pos, "probability " + t.text + " outside [0,1]", "E_RANGE");
    next();
    return v;
  }
  std::vector<double> numbers(bool probability) {
    expect('[');
    std::vector<double> out;
    if (!is_punct(']')) {
      out.push_back(number(probability));
      while (is_punct(',')) {
        next();
        out.push_back(number(probability));
      }
    }
    expect(']');
    return out;
  }
  std::vector<std::vector<double>> matrix() {
    expect('[');
    std::vector<std::vector<double>> out;
    if (!is_punct(']')) {
      out.push_back(numbers(true));
      while (is_punct(',')) {
        next();
        out.push_back(numbers(true));
      }
    }
    expect(']');
    return out;
  }
  std::vector<std::string> ident_list() {
    expect('(');
    std::vector<std::string> out;
    if (!is_punct(')')) {
      out.push_back(identifier("an attribute name"));
      while (is_punct(',')) {
        next();
        out.push_back(identifier("an attribute name"));
      }
    }
    expect(')');
    return out;
  }
  std::vector<std::string> label_set() {
    expect('{');
    std::vector<std::string> out;
    if (!is_punct('}')) {
      out.push_back(label());
      while (is_punct(',')) {
        next();
        out.push_back(label());
      }
    }
    expect('}');
    return out;
  }
  std::vector<std::string> label_tuple() {
    expect('(');
    std::vector<std::string> out;
    if (!is_punct(')')) {
      out.push_back(label());
      while (is_punct(',')) {
        next();
        out.push_back(label());
      }
    }
    expect(')');
    return out;
  }
  PosRef ref() {
    PosRef r;
    r.pos = peek().pos;
    r.ref.schema = identifier("a variable reference");
    if (!is_punct('(')) return r;  // attribute-free variable
    next();
    if (!is_punct(')')) {
      for (;;) {
        const Token& a = peek();
        if (a.kind == Tok::Ident) {
          r.ref.args.push_back({a.text, false});
        } else if (a.kind == Tok::String) {
          r.ref.args.push_back({a.text, true});
        } else {
          fail(a.pos, "expected an attribute name or quoted literal, found " + describe(a));
        }
        next();
        if (!is_punct(',')) break;
        next();
      }
    }
    expect(')');
    return r;
  }
  std::vector<PosRef> ref_list() {
    std::vector<PosRef> out{ref()};
    while (is_punct(',')) {
      next();
      out.push_back(ref());
    }
    return out;
  }
  // `key:` at the start of a body item.
  std::string item_key(std::initializer_list<std::string_view> allowed, const char* where) {
    const Token& k = peek();
    if (k.kind == Tok::Ident && std::find(allowed.begin(), allowed.end(), k.text) != allowed.end()) {
      next();
      expect(':');
      return k.text;
    }
    std::string list;
    for (auto a : allowed) list += (list.empty() ? "" : ", ") + std::string(a);
    fail(k.pos, std::string("expected one of ") + list + " in " + where + ", found " + describe(k));
  }
  [[noreturn]] void duplicate(Pos p, const std::string& key) { fail(p, "duplicate '" + key + "' entry"); }

  RawVar varschema() {
    keyword("varschema");
    RawVar v;
    v.pos = peek().pos;
    v.name = identifier("a schema name");
    expect('{');
    std::set<std::string> seen;
    bool has_states = false;
    while (!is_punct('}')) {
      Pos p = peek().pos;
      std::string key = item_key({"attrs", "states", "method", "default"}, "varschema");
      if (!seen.insert(key).second) duplicate(p, key);
      if (key == "attrs") {
        v.attrs = ident_list();
      } else if (key == "states") {
        v.states_pos = peek().pos;
        v.states = label_set();
        has_states = true;
        if (is_ident("ordered")) {
          next();
          v.ordered = true;
        }
      } else if (key == "method") {
        const Token& m = peek();
        auto id = identifier("a combination method");
        auto parsed = parse_method(id);
        if (!parsed) fail(m.pos, "unknown combination method '" + id + "'");
        v.method = *parsed;
      } else {
        v.default_pos = peek().pos;
        if (is_ident("uniform")) {
          next();
        } else {
          v.default_dist = numbers(true);
        }
      }
      expect(';');
    }
    if (!has_states) fail(peek().pos, "varschema " + v.name + " declares no states", "E_MISSING");
    expect('}');
    return v;
  }

  RawFragment fragment() {
    keyword("fragment");
    RawFragment f;
    f.pos = peek().pos;
    f.name = identifier("a schema name");
    expect('{');
    bool has_attrs = false;
    while (!is_punct('}')) {
      Pos p = peek().pos;
      std::string key = item_key({"attrs", "hypothesis", "input", "resident"}, "fragment");
      if (key == "attrs") {
        if (has_attrs) duplicate(p, key);
        has_attrs = true;
        f.attrs = ident_list();
        expect(';');
      } else if (key == "hypothesis") {
        if (f.has_hypothesis) duplicate(p, key);
        f.has_hypothesis = true;
        hypothesis(f);
        expect(';');
      } else if (key == "input") {
        auto refs = ref_list();
        f.inputs.insert(f.inputs.end(), refs.begin(), refs.end());
        expect(';');
      } else {
        f.residents.push_back(resident());
      }
    }
    expect('}');
    return f;
  }

  void hypothesis(RawFragment& f) {
    if (is_ident("tuples")) {
      next();
      expect('(');
      f.hyp_vars = ref_list();
      expect(')');
      expect('{');
      if (!is_punct('}')) {
        f.hyp_tuples.push_back(label_tuple());
        while (is_punct(',')) {
          next();
          f.hyp_tuples.push_back(label_tuple());
        }
      }
      expect('}');
      return;
    }
    std::vector<std::vector<std::string>> sets;
    for (;;) {
      f.hyp_vars.push_back(ref());
      keyword("in");
      sets.push_back(label_set());
      if (!is_punct(',')) break;
      next();
    }
    // Cartesian product of the per-variable sets.
    std::vector<std::vector<std::string>> tuples{{}};
    for (const auto& s : sets) {
      std::vector<std::vector<std::string>> grown;
      for (const auto& t : tuples) {
        for (const auto& l : s) {
          auto u = t;
          u.push_back(l);
          grown.push_back(std::move(u));
        }
      }
      tuples = std::move(grown);
    }
    f.hyp_tuples = std::move(tuples);
  }

  RawResident resident() {
    RawResident r;
    r.var = ref();
    expect('{');
    std::set<std::string> seen;
    while (!is_punct('}')) {
      Pos p = peek().pos;
      std::string key = item_key({"parents", "influence", "table"}, "resident");
      if (!seen.insert(key).second) duplicate(p, key);
      if (key == "parents") {
        if (seen.count("influence")) fail(p, "'parents' must precede 'influence'");
        r.parents = ref_list();
      } else if (key == "influence") {
        r.influence_pos = peek().pos;
        influence(r);
      } else {
        r.table = numbers(true);
      }
      expect(';');
    }
    if (!seen.count("influence")) fail(peek().pos, "resident " + to_string(r.var.ref) + " has no influence", "E_MISSING");
    expect('}');
    return r;
  }

  void influence(RawResident& r) {
    const Token& k = peek();
    std::string kind = identifier("an influence kind");
    if (kind == "table") {
      r.payload = TablePayload{numbers(true)};
    } else if (kind == "default") {
      r.payload = DefaultTablePayload{Specificity::Default, numbers(true)};
    } else if (kind == "specific") {
      r.payload = DefaultTablePayload{Specificity::Specific, numbers(true)};
    } else if (kind == "noisy_or") {
      NoisyOrPayload p;
      keyword("leak");
      p.leak = number(true);
      keyword("links");
      p.links = numbers(true);
      r.payload = std::move(p);
    } else if (kind == "sigmoid") {
      SigmoidPayload p;
      keyword("bias");
      p.bias = number(false);
      keyword("weights");
      p.weights = numbers(false);
      r.payload = std::move(p);
    } else if (kind == "na") {
      r.payload = NaPayload{};
    } else if (kind == "noisy_min") {
      RawNoisyMin nm;
      keyword("given");
      nm.given = ref();
      expect('{');
      while (!is_punct('}')) {
        RawBlock b;
        b.pos = peek().pos;
        b.label = label();
        expect('{');
        while (!is_punct('}')) {
          if (is_ident("leak") && peek(1).kind == Tok::Punct && peek(1).text == "[") {
            Pos p = peek().pos;
            next();
            if (b.leak) duplicate(p, "leak");
            b.leak = numbers(true);
          } else {
            auto parent = ref();
            b.links.emplace_back(std::move(parent), matrix());
          }
          expect(';');
        }
        expect('}');
        nm.blocks.push_back(std::move(b));
      }
      expect('}');
      r.noisy_min = std::move(nm);
    } else {
      fail(k.pos, "unknown influence kind '" + kind + "'");
    }
  }
};

// ---------------------------------------------------------------------------

std::string code_for(ErrorCode c) {
  switch (c) {
    case ErrorCode::DuplicateName: return "E_DUPLICATE";
    case ErrorCode::InvalidDistribution: return "E_DISTRIBUTION";
    case ErrorCode::InvalidStateSpace: return "E_STATES";
    case ErrorCode::UnresolvedVariable: return "E_UNRESOLVED";
    case ErrorCode::CyclicFragmentGraph: return "E_CYCLE";
    case ErrorCode::InputNotRoot: return "E_INPUT_NOT_ROOT";
    case ErrorCode::ResidentInputOverlap: return "E_OVERLAP";
    case ErrorCode::UndeclaredNode: return "E_UNDECLARED_NODE";
    case ErrorCode::EmptyResidents: return "E_EMPTY_RESIDENTS";
    case ErrorCode::BadHypothesisSubset: return "E_BAD_HYPOTHESIS";
    case ErrorCode::InvalidPayload: return "E_PAYLOAD";
    case ErrorCode::ArityMismatch: return "E_ARITY";
    case ErrorCode::UnknownAttribute: return "E_UNKNOWN_ATTR";
    default: return "E_SEMANTIC";
  }
}

class Builder {
 public:
  ParseResult run(std::vector<RawVar> vars, std::vector<RawFragment> frags) {
    auto kb = std::make_shared<KnowledgeBase>();
    kb_ = kb.get();
    std::set<std::string> names;
    for (auto& v : vars) {
      if (!names.insert(v.name).second) {
        error(v.pos, "E_DUPLICATE", "variable schema " + v.name + " declared twice");
        continue;
      }
      VariableSchema s;
      s.name = v.name;
      s.attributes = v.attrs;
      s.method = v.method;
      s.default_distribution = v.default_dist;
      try {
        s.states = StateSpace(v.states, v.ordered);
      } catch (const Error& e) {
        error(v.states_pos, code_for(e.code()), e.what());
        continue;
      }
      try {
        kb->register_variable_schema(std::move(s));
      } catch (const Error& e) {
        Pos p = e.code() == ErrorCode::InvalidDistribution ? v.default_pos : v.pos;
        error(p, code_for(e.code()), e.what());
      }
    }
    std::set<std::string> frag_names;
    for (auto& f : frags) {
      if (!frag_names.insert(f.name).second) {
        error(f.pos, "E_DUPLICATE", "fragment schema " + f.name + " declared twice");
        continue;
      }
      fragment(f);
    }
    ParseResult out;
    out.diagnostics = std::move(diags_);
    if (out.diagnostics.empty()) out.kb = std::move(kb);
    return out;
  }

 private:
  KnowledgeBase* kb_ = nullptr;
  std::vector<Diagnostic> diags_;

  void error(Pos p, std::string code, std::string msg) {
    diags_.push_back({Severity::Error, p.line, p.col, std::move(code), std::move(msg)});
  }

  bool check_ref(const PosRef& r, const std::set<std::string>& attrs) {
    const auto* schema = kb_->find_variable(r.ref.schema);
    if (!schema) {
      error(r.pos, "E_UNRESOLVED", "unknown variable schema " + r.ref.schema);
      return false;
    }
    if (schema->attributes.size() != r.ref.args.size()) {
      error(r.pos, "E_ARITY",
            r.ref.schema + " takes " + std::to_string(schema->attributes.size()) + " argument(s), got " +
                std::to_string(r.ref.args.size()));
      return false;
    }
    for (const auto& a : r.ref.args) {
      if (!a.literal && !attrs.count(a.text)) {
        error(r.pos, "E_UNKNOWN_ATTR", "'" + a.text + "' is not an attribute of the fragment");
        return false;
      }
    }
    return true;
  }

  std::optional<NoisyMinPayload> noisy_min(const RawResident& r) {
    const RawNoisyMin& nm = *r.noisy_min;
    auto pos_of = [&](const VariableRef& ref) -> std::optional<std::size_t> {
      for (std::size_t k = 0; k < r.parents.size(); ++k) {
        if (r.parents[k].ref == ref) return k;
      }
      return std::nullopt;
    };
    auto cond = pos_of(nm.given.ref);
    if (!cond) {
      error(nm.given.pos, "E_PAYLOAD", to_string(nm.given.ref) + " is not a parent of " + to_string(r.var.ref));
      return std::nullopt;
    }
    const auto& states = kb_->variable(nm.given.ref.schema).states;
    NoisyMinPayload p;
    p.conditioning = *cond;
    p.blocks.resize(states.size());
    std::vector<bool> filled(states.size(), false);
    bool ok = true;
    for (const auto& b : nm.blocks) {
      auto s = states.index_of(b.label);
      if (!s || filled[*s]) {
        error(b.pos, "E_PAYLOAD",
              (s ? "duplicate block for state " : "unknown conditioning state ") + b.label);
        ok = false;
        continue;
      }
      filled[*s] = true;
      NoisyMinBlock& block = p.blocks[*s];
      if (!b.leak) {
        error(b.pos, "E_PAYLOAD", "block " + b.label + " has no leak distribution");
        ok = false;
      } else {
        block.leak = *b.leak;
      }
      block.links.resize(r.parents.size());
      std::vector<bool> linked(r.parents.size(), false);
      for (const auto& [parent, m] : b.links) {
        auto k = pos_of(parent.ref);
        if (!k || *k == *cond || linked[*k]) {
          error(parent.pos, "E_PAYLOAD", "unexpected link entry for " + to_string(parent.ref));
          ok = false;
          continue;
        }
        linked[*k] = true;
        block.links[*k] = m;
      }
    }
    for (std::size_t s = 0; s < states.size(); ++s) {
      if (!filled[s]) {
        error(nm.given.pos, "E_PAYLOAD", "no block for conditioning state " + states.label(s));
        ok = false;
      }
    }
    if (!ok) return std::nullopt;
    return p;
  }

  void fragment(const RawFragment& f) {
    std::set<std::string> attrs(f.attrs.begin(), f.attrs.end());
    bool ok = true;
    auto check = [&](const PosRef& r) { ok = check_ref(r, attrs) && ok; };
    for (const auto& r : f.hyp_vars) check(r);
    for (const auto& r : f.inputs) check(r);
    for (const auto& res : f.residents) {
      check(res.var);
      for (const auto& p : res.parents) check(p);
      if (res.noisy_min) {
        check(res.noisy_min->given);
        for (const auto& b : res.noisy_min->blocks) {
          for (const auto& l : b.links) check(l.first);
        }
      }
    }
    if (!ok) return;

    FragmentSchema s;
    s.name = f.name;
    s.attributes = f.attrs;
    for (const auto& r : f.inputs) s.inputs.push_back(r.ref);
    for (const auto& r : f.hyp_vars) {
      s.hypothesis_vars.push_back(r.ref);
      if (std::find(s.inputs.begin(), s.inputs.end(), r.ref) == s.inputs.end()) s.inputs.push_back(r.ref);
    }
    if (f.has_hypothesis) s.hypothesized_subset = f.hyp_tuples;
    for (const auto& r : f.residents) {
      ResidentSpec spec;
      spec.var = r.var.ref;
      for (const auto& p : r.parents) spec.parents.push_back(p.ref);
      if (r.noisy_min) {
        auto p = noisy_min(r);
        if (!p) return;
        spec.influence = std::move(*p);
      } else {
        spec.influence = *r.payload;
      }
      spec.table = r.table;
      s.residents.push_back(std::move(spec));
    }
    try {
      kb_->register_fragment_schema(std::move(s));
    } catch (const Error& e) {
      error(f.pos, code_for(e.code()), "fragment " + f.name + ": " + e.what());
    }
  }
};

// ---------------------------------------------------------------------------

std::string num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string quoted(const std::string& s) {
  std::string out = "\"";
  for (char c : s) {
    if (c == '"' || c == '\\') out += '\\';
    out += c;
  }
  return out + "\"";
}

std::string label_text(const std::string& s) { return is_identifier(s) ? s : quoted(s); }

std::string num_list(const std::vector<double>& v) {
  std::string out = "[";
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? ", " : "") + num(v[i]);
  return out + "]";
}

std::string ref_text(const VariableRef& r) {
  if (r.args.empty()) return r.schema;
  std::string out = r.schema + "(";
  for (std::size_t i = 0; i < r.args.size(); ++i) {
    if (i) out += ", ";
    out += r.args[i].literal ? quoted(r.args[i].text) : r.args[i].text;
  }
  return out + ")";
}

std::string ref_list_text(const std::vector<VariableRef>& refs) {
  std::string out;
  for (std::size_t i = 0; i < refs.size(); ++i) out += (i ? ", " : "") + ref_text(refs[i]);
  return out;
}

std::string hypothesis_text(const KnowledgeBase& kb, const FragmentSchema& f) {
  const auto& tuples = f.hypothesized_subset;
  const std::size_t k = f.hypothesis_vars.size();
  // Per-coordinate projections, in state order.
  std::vector<std::vector<std::string>> proj(k);
  std::size_t product = 1;
  for (std::size_t c = 0; c < k; ++c) {
    const auto& states = kb.variable(f.hypothesis_vars[c].schema).states;
    std::set<std::size_t> idx;
    for (const auto& t : tuples) idx.insert(*states.index_of(t[c]));
    for (auto i : idx) proj[c].push_back(states.label(i));
    product *= proj[c].size();
  }
  std::string out;
  if (product == tuples.size()) {
    for (std::size_t c = 0; c < k; ++c) {
      if (c) out += ", ";
      out += ref_text(f.hypothesis_vars[c]) + " in {";
      for (std::size_t i = 0; i < proj[c].size(); ++i) out += (i ? ", " : "") + label_text(proj[c][i]);
      out += "}";
    }
    return out;
  }
  out = "tuples (" + ref_list_text(f.hypothesis_vars) + ") {";
  for (std::size_t i = 0; i < tuples.size(); ++i) {
    out += i ? ", (" : "(";
    for (std::size_t c = 0; c < k; ++c) out += (c ? ", " : "") + label_text(tuples[i][c]);
    out += ")";
  }
  return out + "}";
}

std::string influence_text(const KnowledgeBase& kb, const ResidentSpec& r) {
  struct Visitor {
    const KnowledgeBase& kb;
    const ResidentSpec& r;
    std::string operator()(const TablePayload& p) const { return "table " + num_list(p.values); }
    std::string operator()(const DefaultTablePayload& p) const {
      return std::string(p.specificity == Specificity::Default ? "default " : "specific ") + num_list(p.values);
    }
    std::string operator()(const NoisyOrPayload& p) const {
      return "noisy_or leak " + num(p.leak) + " links " + num_list(p.links);
    }
    std::string operator()(const SigmoidPayload& p) const {
      return "sigmoid bias " + num(p.bias) + " weights " + num_list(p.weights);
    }
    std::string operator()(const NaPayload&) const { return "na"; }
    std::string operator()(const NoisyMinPayload& p) const {
      const VariableRef& given = r.parents.at(p.conditioning);
      const auto& states = kb.variable(given.schema).states;
      std::string out = "noisy_min given " + ref_text(given) + " {\n";
      for (std::size_t s = 0; s < p.blocks.size(); ++s) {
        const auto& b = p.blocks[s];
        out += "      " + label_text(states.label(s)) + " {\n";
        out += "        leak " + num_list(b.leak) + ";\n";
        for (std::size_t k = 0; k < b.links.size(); ++k) {
          if (k == p.conditioning) continue;
          out += "        " + ref_text(r.parents[k]) + " [";
          for (std::size_t j = 0; j < b.links[k].size(); ++j) out += (j ? ", " : "") + num_list(b.links[k][j]);
          out += "];\n";
        }
        out += "      }\n";
      }
      return out + "    }";
    }
  };
  return std::visit(Visitor{kb, r}, r.influence);
}

}  // namespace

bool is_syntax_code(std::string_view code) noexcept { return code == "E_SYNTAX" || code == "E_RANGE"; }

std::string format_diagnostic(const Diagnostic& d, std::string_view file) {
  return std::string(file) + ":" + std::to_string(d.line) + ":" + std::to_string(d.column) + ": " +
         (d.severity == Severity::Error ? "error" : "warning") + "[" + d.code + "]: " + d.message;
}

bool ParseResult::has_syntax_error() const noexcept {
  return std::any_of(diagnostics.begin(), diagnostics.end(), [](const Diagnostic& d) {
    return d.severity == Severity::Error && is_syntax_code(d.code);
  });
}

ParseResult parse_kb(std::string_view text) {
  std::vector<RawVar> vars;
  std::vector<RawFragment> frags;
  try {
    Parser(lex(text)).document(vars, frags);
  } catch (const SyntaxError& e) {
    ParseResult r;
    r.diagnostics.push_back({Severity::Error, e.pos.line, e.pos.col, e.code, e.message});
    return r;
  }
  try {
    return Builder().run(std::move(vars), std::move(frags));
  } catch (const std::exception& e) {
    // Defensive: registration should report through Error, but no input may
    // escape as an exception.
    ParseResult r;
    r.diagnostics.push_back({Severity::Error, 1, 1, "E_SEMANTIC", e.what()});
    return r;
  }
}

std::string serialize_kb(const KnowledgeBase& kb) {
  std::string out = "fragbn-kb 1\n";
  for (const auto& [name, v] : kb.variables()) {
    out += "\nvarschema " + name + " {\n";
    if (!v.attributes.empty()) {
      out += "  attrs: (";
      for (std::size_t i = 0; i < v.attributes.size(); ++i) out += (i ? ", " : "") + v.attributes[i];
      out += ");\n";
    }
    out += "  states: {";
    for (std::size_t i = 0; i < v.states.size(); ++i) out += (i ? ", " : "") + label_text(v.states.label(i));
    out += v.states.ordered() ? "} ordered;\n" : "};\n";
    out += "  method: " + std::string(to_string(v.method)) + ";\n";
    if (v.default_distribution) out += "  default: " + num_list(*v.default_distribution) + ";\n";
    out += "}\n";
  }
  for (const auto& [name, fp] : kb.fragments()) {
    const FragmentSchema& f = *fp;
    out += "\nfragment " + name + " {\n";
    if (!f.attributes.empty()) {
      out += "  attrs: (";
      for (std::size_t i = 0; i < f.attributes.size(); ++i) out += (i ? ", " : "") + f.attributes[i];
      out += ");\n";
    }
    if (!f.hypothesis_vars.empty()) out += "  hypothesis: " + hypothesis_text(kb, f) + ";\n";
    if (!f.inputs.empty()) out += "  input: " + ref_list_text(f.inputs) + ";\n";
    for (const auto& r : f.residents) {
      out += "  resident: " + ref_text(r.var) + " {\n";
      if (!r.parents.empty()) out += "    parents: " + ref_list_text(r.parents) + ";\n";
      out += "    influence: " + influence_text(kb, r) + ";\n";
      if (r.table) out += "    table: " + num_list(*r.table) + ";\n";
      out += "  }\n";
    }
    out += "}\n";
  }
  return out;
}

}  // namespace fragbn
