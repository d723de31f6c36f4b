#pragma once

#include <gtest/gtest.h>

#include <fstream>
#include <initializer_list>
#include <sstream>
#include <string>

#include "fragbn/fragbn.hpp"

namespace fragbn::test {

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline std::string data_path(const std::string& name) { return std::string(FRAGBN_DATA_DIR) + "/" + name; }

inline std::shared_ptr<const KnowledgeBase> load_kb(const std::string& name) {
  auto r = parse_kb(read_file(data_path(name)));
  if (!r.ok()) throw std::runtime_error("failed to load " + name);
  return r.kb;
}

/// Reference with attribute-name arguments.
inline VariableRef ref(std::string schema, std::initializer_list<const char*> attrs = {}) {
  VariableRef r{std::move(schema), {}};
  for (const char* a : attrs) r.args.push_back({a, false});
  return r;
}

inline VariableInstance var(std::string schema, std::initializer_list<const char*> args = {}) {
  VariableInstance v{std::move(schema), {}};
  for (const char* a : args) v.args.emplace_back(a);
  return v;
}

inline VariableSchema schema(std::string name, std::vector<std::string> states,
                             CombinationMethod m = CombinationMethod::Simple,
                             std::vector<std::string> attrs = {}) {
  VariableSchema s;
  s.name = std::move(name);
  s.states = StateSpace(std::move(states));
  s.method = m;
  s.attributes = std::move(attrs);
  return s;
}

inline ResidentSpec resident(VariableRef x, std::vector<VariableRef> parents, InfluencePayload p) {
  ResidentSpec r;
  r.var = std::move(x);
  r.parents = std::move(parents);
  r.influence = std::move(p);
  return r;
}

template <class F>
ErrorCode code_of(F&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "expected an exception";
  return ErrorCode::ParseError;
}

inline const Binding kDemoBinding{{"u", "B654"}, {"t0", "0"}, {"t1", "1"}};

}  // namespace fragbn::test
