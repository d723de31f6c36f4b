#pragma once

#include <cstddef>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "fragbn/kb.hpp"

namespace fragbn {

enum class Severity { Error, Warning };

struct Diagnostic {
  Severity severity = Severity::Error;
  std::size_t line = 1;    // 1-based
  std::size_t column = 1;  // 1-based, in bytes
  std::string code;        // e.g. E_SYNTAX, E_UNRESOLVED
  std::string message;
};

/// E_SYNTAX and E_RANGE are syntax-level; every other code is semantic.
bool is_syntax_code(std::string_view code) noexcept;

/// `file:line:col: severity[code]: message`
std::string format_diagnostic(const Diagnostic& d, std::string_view file);

struct ParseResult {
  std::shared_ptr<const KnowledgeBase> kb;  // null when any error was reported
  std::vector<Diagnostic> diagnostics;

  bool ok() const noexcept { return kb != nullptr; }
  bool has_syntax_error() const noexcept;
};

/// Parses a `.fkb` document. Never throws on malformed input; every failure
/// is reported as a positioned diagnostic.
ParseResult parse_kb(std::string_view text);

/// Canonical text: header line, variable schemas then fragment schemas,
/// each sorted by name, probabilities with 17 significant digits.
std::string serialize_kb(const KnowledgeBase& kb);

}  // namespace fragbn
