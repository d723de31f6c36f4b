#include "fragbn/bayes_net.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <set>

#include "fragbn/error.hpp"
#include "fragbn/kb.hpp"

namespace fragbn {

std::string format_probability(double p) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", p);
  return buf;
}

std::size_t BayesNet::add_node(BnNode node) {
  if (node.name.empty()) throw Error(ErrorCode::InvalidQuery, "node without a name");
  if (index_.count(node.name)) throw Error(ErrorCode::InvalidQuery, "duplicate node " + node.name);
  if (node.states.empty()) throw Error(ErrorCode::InvalidQuery, "node " + node.name + " has no states");
  std::set<std::size_t> seen;
  std::size_t rows = 1;
  for (auto p : node.parents) {
    if (p >= nodes_.size() || !seen.insert(p).second) {
      throw Error(ErrorCode::InvalidQuery, "node " + node.name + " has an invalid parent");
    }
    rows *= nodes_[p].card();
  }
  const std::size_t n = node.card();
  auto check_rows = [&](const std::vector<double>& t, std::size_t r, const char* what) {
    if (t.size() != r * n) {
      throw Error(ErrorCode::InvalidDistribution, "node " + node.name + ": " + what + " has " +
                                                      std::to_string(t.size()) + " entries, expected " +
                                                      std::to_string(r * n));
    }
    for (std::size_t i = 0; i < r; ++i) {
      double sum = 0.0;
      for (std::size_t s = 0; s < n; ++s) {
        double x = t[i * n + s];
        if (!std::isfinite(x) || x < 0.0) {
          throw Error(ErrorCode::InvalidDistribution, "node " + node.name + ": negative entry");
        }
        sum += x;
      }
      if (std::abs(sum - 1.0) > kNormTolerance) {
        throw Error(ErrorCode::InvalidDistribution,
                    "node " + node.name + ": " + what + " column " + std::to_string(i) +
                        " sums to " + format_probability(sum));
      }
    }
  };
  if (node.open_input) {
    if (!node.parents.empty() || !node.cpt.empty()) {
      throw Error(ErrorCode::InvalidQuery, "open input " + node.name + " cannot have a table");
    }
    check_rows(node.default_prior, 1, "default prior");
  } else {
    check_rows(node.cpt, rows, "table");
  }
  std::size_t idx = nodes_.size();
  index_.emplace(node.name, idx);
  nodes_.push_back(std::move(node));
  return idx;
}

std::optional<std::size_t> BayesNet::index_of(std::string_view name) const {
  auto it = index_.find(name);
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

std::size_t BayesNet::find(std::string_view name) const {
  if (auto i = index_of(name)) return *i;
  throw Error(ErrorCode::UnknownNode, "no node named " + std::string(name));
}

std::optional<std::size_t> BayesNet::state_index(std::size_t node, std::string_view label) const {
  const auto& states = nodes_.at(node).states;
  auto it = std::find(states.begin(), states.end(), label);
  if (it == states.end()) return std::nullopt;
  return static_cast<std::size_t>(it - states.begin());
}

std::vector<std::size_t> BayesNet::open_inputs() const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    if (nodes_[i].open_input) out.push_back(i);
  }
  return out;
}

std::vector<std::size_t> BayesNet::children(std::size_t node) const {
  std::vector<std::size_t> out;
  for (std::size_t i = node + 1; i < nodes_.size(); ++i) {
    const auto& p = nodes_[i].parents;
    if (std::find(p.begin(), p.end(), node) != p.end()) out.push_back(i);
  }
  return out;
}

void BayesNet::close_input(std::size_t node, std::vector<double> prior) {
  BnNode& n = nodes_.at(node);
  if (!n.open_input) return;
  double sum = 0.0;
  for (double x : prior) {
    if (!std::isfinite(x) || x < 0.0) {
      throw Error(ErrorCode::InvalidDistribution, "prior for " + n.name + " has a negative entry");
    }
    sum += x;
  }
  if (prior.size() != n.card() || std::abs(sum - 1.0) > kNormTolerance) {
    throw Error(ErrorCode::InvalidDistribution, "prior for " + n.name + " is not a distribution");
  }
  n.cpt = std::move(prior);
  n.open_input = false;
}

double BayesNet::conditional(std::size_t node, std::span<const std::size_t> assignment) const {
  const BnNode& n = nodes_.at(node);
  if (n.open_input) {
    throw Error(ErrorCode::MissingPrior, "input " + n.name + " has no distribution");
  }
  std::size_t row = 0;
  for (auto p : n.parents) row = row * nodes_[p].card() + assignment[p];
  return n.cpt[row * n.card() + assignment[node]];
}

bool BayesNet::operator==(const BayesNet& other) const {
  if (nodes_.size() != other.nodes_.size()) return false;
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    const auto& a = nodes_[i];
    const auto& b = other.nodes_[i];
    if (a.name != b.name || a.states != b.states || a.parents != b.parents || a.cpt != b.cpt ||
        a.open_input != b.open_input || a.default_prior != b.default_prior) {
      return false;
    }
  }
  return true;
}

namespace {

bool plain_label(const std::string& s) {
  if (s.empty()) return false;
  return std::none_of(s.begin(), s.end(), [](unsigned char c) {
    return std::isspace(c) || c == ';' || c == '{' || c == '}' || c == '"' || c == '#';
  });
}

std::string quote_label(const std::string& s) {
  if (plain_label(s)) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"' || c == '\\') out += '\\';
    out += c;
  }
  return out + "\"";
}

struct BnToken {
  std::string text;
  std::size_t line;
};

std::vector<BnToken> tokenize_bn(std::string_view text) {
  std::vector<BnToken> out;
  std::size_t line = 1;
  std::size_t i = 0;
  while (i < text.size()) {
    char c = text[i];
    if (c == '\n') {
      ++line;
      ++i;
    } else if (std::isspace(static_cast<unsigned char>(c))) {
      ++i;
    } else if (c == '#') {
      while (i < text.size() && text[i] != '\n') ++i;
    } else if (c == '{' || c == '}' || c == ';') {
      out.push_back({std::string(1, c), line});
      ++i;
    } else {
      std::string tok;
      bool quoted = false;
      while (i < text.size()) {
        char d = text[i];
        if (quoted) {
          if (d == '\n') throw Error(ErrorCode::ParseError, "line " + std::to_string(line) + ": unterminated quote");
          tok += d;
          if (d == '\\' && i + 1 < text.size()) {
            tok += text[++i];
          } else if (d == '"') {
            quoted = false;
          }
          ++i;
          continue;
        }
        if (std::isspace(static_cast<unsigned char>(d)) || d == '{' || d == '}' || d == ';') break;
        if (d == '"') quoted = true;
        tok += d;
        ++i;
      }
      if (quoted) throw Error(ErrorCode::ParseError, "line " + std::to_string(line) + ": unterminated quote");
      out.push_back({std::move(tok), line});
    }
  }
  return out;
}

std::string unquote_label(const std::string& tok) {
  if (tok.size() < 2 || tok.front() != '"' || tok.back() != '"') return tok;
  std::string out;
  for (std::size_t i = 1; i + 1 < tok.size(); ++i) {
    if (tok[i] == '\\' && i + 2 < tok.size()) ++i;
    out += tok[i];
  }
  return out;
}

}  // namespace

std::string export_bn(const BayesNet& bn) {
  std::string out = "# fragbn bayes net\n";
  for (const auto& n : bn.nodes()) {
    out += "node " + quote_label(n.name) + " {\n  states";
    for (const auto& s : n.states) out += " " + quote_label(s);
    out += ";\n  parents";
    for (auto p : n.parents) out += " " + quote_label(bn.node(p).name);
    out += ";\n";
    const auto& values = n.open_input ? n.default_prior : n.cpt;
    out += n.open_input ? "  input" : "  table";
    const std::size_t card = n.card();
    for (std::size_t i = 0; i < values.size(); ++i) {
      // One parent configuration per line keeps large tables readable.
      if (i % card == 0 && values.size() > card) out += "\n   ";
      out += " " + format_probability(values[i]);
    }
    out += ";\n}\n";
  }
  return out;
}

BayesNet parse_bn(std::string_view text) {
  auto tokens = tokenize_bn(text);
  BayesNet bn;
  std::size_t i = 0;
  auto fail = [&](const std::string& msg) -> void {
    std::size_t line = i < tokens.size() ? tokens[i].line : (tokens.empty() ? 1 : tokens.back().line);
    throw Error(ErrorCode::ParseError, "line " + std::to_string(line) + ": " + msg);
  };
  auto expect = [&](std::string_view t) {
    if (i >= tokens.size() || tokens[i].text != t) fail("expected '" + std::string(t) + "'");
    ++i;
  };
  auto until_semicolon = [&]() {
    std::vector<std::string> items;
    while (i < tokens.size() && tokens[i].text != ";") {
      if (tokens[i].text == "{" || tokens[i].text == "}") fail("unexpected brace");
      items.push_back(tokens[i++].text);
    }
    expect(";");
    return items;
  };
  auto numbers = [&](const std::vector<std::string>& items) {
    std::vector<double> out;
    for (const auto& s : items) {
      char* end = nullptr;
      double v = std::strtod(s.c_str(), &end);
      if (end != s.c_str() + s.size() || s.empty()) fail("bad number '" + s + "'");
      out.push_back(v);
    }
    return out;
  };
  while (i < tokens.size()) {
    expect("node");
    if (i >= tokens.size()) fail("expected node name");
    BnNode node;
    node.name = unquote_label(tokens[i++].text);
    expect("{");
    expect("states");
    for (const auto& s : until_semicolon()) node.states.push_back(unquote_label(s));
    expect("parents");
    for (const auto& raw : until_semicolon()) {
      const auto p = unquote_label(raw);
      auto idx = bn.index_of(p);
      if (!idx) fail("parent " + p + " of " + node.name + " is not defined earlier");
      node.parents.push_back(*idx);
    }
    if (i < tokens.size() && tokens[i].text == "input") {
      ++i;
      node.open_input = true;
      node.default_prior = numbers(until_semicolon());
    } else {
      expect("table");
      node.cpt = numbers(until_semicolon());
    }
    expect("}");
    try {
      bn.add_node(std::move(node));
    } catch (const Error& e) {
      --i;
      fail(e.what());
    }
  }
  return bn;
}

}  // namespace fragbn
