// fragbn command-line front end: validate, construct, query.

#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include "fragbn/fragbn.hpp"

namespace {

using namespace fragbn;

enum Exit {
  kOk = 0,
  kUsage = 1,
  kParse = 2,
  kSemantic = 3,
  kConsistency = 4,
  kIncomplete = 5,
  kZeroEvidence = 6,
};

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ExitWith {
  int code;
};

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw UsageError("cannot read " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::shared_ptr<const KnowledgeBase> load_kb(const std::string& path) {
  auto result = parse_kb(read_file(path));
  for (const auto& d : result.diagnostics) std::cerr << format_diagnostic(d, path) << "\n";
  if (!result.ok()) throw ExitWith{result.has_syntax_error() ? kParse : kSemantic};
  return result.kb;
}

std::string trim(std::string s) {
  auto b = s.find_first_not_of(" \t");
  auto e = s.find_last_not_of(" \t");
  return b == std::string::npos ? "" : s.substr(b, e - b + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == sep) {
      out.push_back(trim(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(trim(cur));
  return out;
}

std::pair<std::string, std::string> split_assignment(const std::string& s, const char* what) {
  auto eq = s.rfind('=');
  if (eq == std::string::npos || eq == 0 || eq + 1 == s.size()) {
    throw UsageError(std::string("expected ") + what + ", got '" + s + "'");
  }
  return {trim(s.substr(0, eq)), trim(s.substr(eq + 1))};
}

VariableInstance variable_arg(const std::string& s) {
  auto v = parse_variable_instance(s);
  if (!v) throw UsageError("malformed variable '" + s + "', expected Schema(arg,...)");
  return *v;
}

// Node names as printed by the library; accepts any spacing the user types.
std::string node_name(const std::string& s) {
  auto v = parse_variable_instance(s);
  return v ? v->name() : trim(s);
}

struct ConstructArgs {
  std::string kb_path;
  std::vector<std::string> fragments;
  std::vector<std::string> binds;
  std::vector<std::string> hypothesis;
  std::string partition;
  std::string element;
  bool all_elements = false;
  std::vector<std::string> priors;
  std::vector<std::string> auto_retrieve;
  int depth = 5;
};

void add_construct_options(CLI::App* cmd, ConstructArgs& a) {
  cmd->add_option("--fragment", a.fragments, "Fragment to instantiate, Name or Name:attr=value,...");
  cmd->add_option("--bind", a.binds, "Attribute binding attr=value shared by all fragments");
  cmd->add_option("--hypothesis", a.hypothesis, "Hypothesis variable (default: those of the fragments)");
  cmd->add_option("--partition", a.partition,
                  "Hypothesis partition: elements separated by '|', tuples by ',', "
                  "tuple components by '/'");
  cmd->add_option("--element", a.element, "Hypothesis element to combine for, same syntax as one element");
  cmd->add_flag("--all-elements", a.all_elements, "Build the multi-fragment over every element");
  cmd->add_option("--prior", a.priors, "Prior for an input or hypothesis variable, Var(...)=(p1,...)");
  cmd->add_option("--auto-retrieve", a.auto_retrieve,
                  "Retrieve fragments needed for this variable by backward chaining");
  cmd->add_option("--depth", a.depth, "Retrieval depth for --auto-retrieve")->check(CLI::NonNegativeNumber);
}

Binding parse_binding_list(const std::vector<std::string>& items) {
  Binding b;
  for (const auto& item : items) {
    auto [k, v] = split_assignment(item, "attr=value");
    b[k] = v;
  }
  return b;
}

// Unifies a resident reference with a ground variable; nullopt if they clash.
std::optional<Binding> unify(const VariableRef& ref, const VariableInstance& v) {
  if (ref.schema != v.schema || ref.args.size() != v.args.size()) return std::nullopt;
  Binding b;
  for (std::size_t i = 0; i < ref.args.size(); ++i) {
    const auto& a = ref.args[i];
    if (a.literal) {
      if (a.text != v.args[i]) return std::nullopt;
      continue;
    }
    auto [it, fresh] = b.emplace(a.text, v.args[i]);
    if (!fresh && it->second != v.args[i]) return std::nullopt;
  }
  return b;
}

void auto_retrieve(Workspace& ws, const std::vector<std::string>& targets, const Binding& global, int depth) {
  const KnowledgeBase& kb = ws.kb();
  std::set<VariableInstance> needed, done;
  for (const auto& t : targets) needed.insert(variable_arg(t));
  for (int round = 0; round < depth && !needed.empty(); ++round) {
    std::set<VariableInstance> next;
    for (const auto& v : needed) {
      done.insert(v);
      for (const auto& [name, schema] : kb.fragments()) {
        for (const auto& r : schema->residents) {
          auto b = unify(r.var, v);
          if (!b) continue;
          bool clash = false;
          for (const auto& [k, val] : global) {
            auto [it, fresh] = b->emplace(k, val);
            clash = clash || (!fresh && it->second != val);
          }
          bool complete = std::all_of(schema->attributes.begin(), schema->attributes.end(),
                                      [&](const std::string& a) { return b->count(a) > 0; });
          if (clash || !complete) continue;
          auto f = ws.instantiate_fragment(name, *b);
          for (const auto& i : f->inputs()) {
            if (!done.count(i)) next.insert(i);
          }
        }
      }
    }
    needed = std::move(next);
  }
}

std::vector<std::size_t> state_indices(const KnowledgeBase& kb, const std::vector<VariableInstance>& vars,
                                       const std::string& tuple) {
  auto parts = split(tuple, '/');
  if (parts.size() != vars.size()) {
    throw UsageError("hypothesis tuple '" + tuple + "' needs " + std::to_string(vars.size()) + " component(s)");
  }
  std::vector<std::size_t> out;
  for (std::size_t k = 0; k < vars.size(); ++k) {
    auto s = kb.variable(vars[k].schema).states.index_of(parts[k]);
    if (!s) throw UsageError(vars[k].name() + " has no state '" + parts[k] + "'");
    out.push_back(*s);
  }
  return out;
}

TupleSet parse_element(const KnowledgeBase& kb, const HypothesisPartition& s, const std::string& text) {
  std::string body = trim(text);
  if (body.size() >= 2 && body.front() == '{' && body.back() == '}') body = body.substr(1, body.size() - 2);
  TupleSet out;
  for (const auto& t : split(body, ',')) out.push_back(s.encode(state_indices(kb, s.vars(), t)));
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

struct Model {
  std::shared_ptr<const KnowledgeBase> kb;
  BayesNet bn;
};

Model construct(const ConstructArgs& a) {
  Model m;
  m.kb = load_kb(a.kb_path);
  const KnowledgeBase& kb = *m.kb;
  Workspace ws(m.kb);
  Binding global = parse_binding_list(a.binds);

  for (const auto& spec : a.fragments) {
    auto colon = spec.find(':');
    std::string name = trim(spec.substr(0, colon));
    Binding b = global;
    if (colon != std::string::npos) {
      for (const auto& [k, v] : parse_binding_list(split(spec.substr(colon + 1), ','))) b[k] = v;
    }
    ws.instantiate_fragment(name, b);
  }
  if (!a.auto_retrieve.empty()) auto_retrieve(ws, a.auto_retrieve, global, a.depth);
  if (a.fragments.empty() && a.auto_retrieve.empty()) {
    for (const auto& [name, schema] : kb.fragments()) ws.instantiate_fragment(name, global);
  }
  auto fragments = ws.fragments();
  if (fragments.empty()) throw UsageError("no fragments selected");

  std::vector<VariableInstance> hvars;
  if (!a.hypothesis.empty()) {
    for (const auto& h : a.hypothesis) hvars.push_back(variable_arg(h));
  } else {
    std::set<VariableInstance> u;
    for (const auto& f : fragments) u.insert(f->hypothesis_vars().begin(), f->hypothesis_vars().end());
    hvars.assign(u.begin(), u.end());
  }
  for (const auto& h : hvars) {
    if (!kb.find_variable(h.schema)) throw Error(ErrorCode::UnresolvedVariable, "unknown variable schema " + h.schema);
  }
  HypothesisPartition s = HypothesisPartition::over(kb, hvars);
  if (!a.partition.empty()) {
    std::vector<TupleSet> elements;
    for (const auto& e : split(a.partition, '|')) elements.push_back(parse_element(kb, s, e));
    s = HypothesisPartition(s.vars(), s.cards(), std::move(elements));
  } else {
    s = refine(s, std::span<const FragmentPtr>(fragments));
  }

  PriorMap priors;
  for (const auto& p : a.priors) {
    auto eq = p.rfind("=(");
    if (eq == std::string::npos || p.back() != ')') throw UsageError("expected Var(...)=(p1,...), got '" + p + "'");
    std::vector<double> values;
    for (const auto& x : split(p.substr(eq + 2, p.size() - eq - 3), ',')) {
      char* end = nullptr;
      double v = std::strtod(x.c_str(), &end);
      if (x.empty() || *end != '\0') throw UsageError("bad probability '" + x + "' in --prior");
      values.push_back(v);
    }
    priors[variable_arg(p.substr(0, eq))] = std::move(values);
  }

  std::vector<Component> components(fragments.begin(), fragments.end());
  if (a.all_elements) {
    if (!a.element.empty()) throw UsageError("--element and --all-elements are exclusive");
    auto multi = combine_multi(m.kb, components, s);
    m.bn = materialize_bn(multi, priors);
    return m;
  }
  std::size_t element = 0;
  if (!a.element.empty()) {
    auto wanted = parse_element(kb, s, a.element);
    auto it = std::find(s.elements().begin(), s.elements().end(), wanted);
    if (it == s.elements().end()) {
      std::string known;
      for (std::size_t e = 0; e < s.size(); ++e) known += (e ? " " : "") + s.describe(kb, e);
      throw UsageError("'" + a.element + "' is not an element of the partition; elements: " + known);
    }
    element = static_cast<std::size_t>(it - s.elements().begin());
  } else if (s.size() != 1) {
    std::string known;
    for (std::size_t e = 0; e < s.size(); ++e) known += (e ? " " : "") + s.describe(kb, e);
    throw UsageError("partition has " + std::to_string(s.size()) +
                     " elements; choose one with --element or use --all-elements: " + known);
  }
  auto compound = combine_compound(m.kb, components, s, element);
  m.bn = materialize_bn(compound, priors);
  return m;
}

void write_output(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
    return;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw UsageError("cannot write " + path);
  out << text;
}

int error_exit(const Error& e) {
  switch (e.code()) {
    case ErrorCode::CyclicUnion:
    case ErrorCode::EnablingViolation:
    case ErrorCode::InconsistentSet:
    case ErrorCode::CoverageGap:
    case ErrorCode::NAViolation:
    case ErrorCode::ZeroColumn:
      return kConsistency;
    case ErrorCode::ZeroEvidence:
      return kZeroEvidence;
    case ErrorCode::ParseError:
      return kParse;
    default:
      return kSemantic;
  }
}

int run(int argc, char** argv) {
  CLI::App app{"Build Bayesian networks from network fragments and query them"};
  app.require_subcommand(1);

  std::string validate_path;
  auto* validate = app.add_subcommand("validate", "Parse and check a knowledge base");
  validate->add_option("kb", validate_path, "Knowledge base (.fkb)")->required();

  ConstructArgs cargs;
  std::string out_path;
  auto* cons = app.add_subcommand("construct", "Combine fragment instances and export the network");
  cons->add_option("kb", cargs.kb_path, "Knowledge base (.fkb)")->required();
  add_construct_options(cons, cargs);
  cons->add_option("-o,--output", out_path, "Output file (default: standard output)");

  ConstructArgs qargs;
  std::string bn_path;
  std::vector<std::string> targets, evidence;
  bool allow_incomplete = false;
  auto* query = app.add_subcommand("query", "Posterior of target variables given evidence");
  query->add_option("kb", qargs.kb_path, "Knowledge base (.fkb), unless --bn is given");
  add_construct_options(query, qargs);
  query->add_option("--bn", bn_path, "Previously exported network");
  query->add_option("--target", targets, "Target variable")->required();
  query->add_option("--evidence", evidence, "Observation Var(...)=state");
  query->add_flag("--allow-incomplete", allow_incomplete, "Close open inputs with default priors and warn");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int rc = app.exit(e);
    return rc == 0 ? kOk : kUsage;
  }

  try {
    if (*validate) {
      auto kb = load_kb(validate_path);
      std::cout << validate_path << ": ok (" << kb->variables().size() << " variable schemas, "
                << kb->fragments().size() << " fragment schemas)\n";
      return kOk;
    }
    if (*cons) {
      auto m = construct(cargs);
      write_output(out_path, export_bn(m.bn));
      return kOk;
    }
    BayesNet bn;
    if (!bn_path.empty()) {
      if (!qargs.kb_path.empty()) throw UsageError("give either a knowledge base or --bn, not both");
      bn = parse_bn(read_file(bn_path));
    } else {
      if (qargs.kb_path.empty()) throw UsageError("query needs a knowledge base or --bn");
      bn = construct(qargs).bn;
    }
    Query q;
    for (const auto& t : targets) q.targets.push_back(node_name(t));
    for (const auto& e : evidence) {
      auto [var, state] = split_assignment(e, "Var(...)=state");
      q.evidence[node_name(var)] = state;
    }
    if (!query_complete(bn, q)) {
      if (!allow_incomplete) {
        std::cerr << "error[E_INCOMPLETE]: the evidence does not d-separate the targets from the open "
                     "inputs; supply priors or pass --allow-incomplete\n";
        return kIncomplete;
      }
      std::cerr << "warning[W_INCOMPLETE]: model is not query complete; open inputs were closed with "
                   "their default distributions\n";
    }
    // Open inputs that remain are irrelevant to the targets given the
    // evidence, so closing them does not change the answer.
    bn = close_with_defaults(std::move(bn));
    std::cout << format_posterior(bn, eliminate(bn, q));
    return kOk;
  } catch (const ExitWith& e) {
    return e.code;
  } catch (const UsageError& e) {
    std::cerr << "fragbn: " << e.what() << "\n";
    return kUsage;
  } catch (const ConsistencyError& e) {
    std::cerr << "fragbn: " << to_string(e.code()) << ": fragment set is not globally consistent\n"
              << e.report().format();
    return kConsistency;
  } catch (const Error& e) {
    std::cerr << "fragbn: " << to_string(e.code()) << ": " << e.what() << "\n";
    return error_exit(e);
  }
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const std::exception& e) {
    std::cerr << "fragbn: internal error: " << e.what() << "\n";
    return kUsage;
  }
}
