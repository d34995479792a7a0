#pragma once

#include "bp/ast.hpp"

#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace bp {

struct Diagnostic {
    std::string code;
    std::string message;
    int line = 0;    // 1-based; 0 when not tied to a source position
    int column = 0;

    std::string to_string() const;
};

/// Raised by the parser. Carries every diagnostic collected before giving up.
class ModelError : public std::runtime_error {
public:
    explicit ModelError(std::vector<Diagnostic> diagnostics);
    const std::vector<Diagnostic>& diagnostics() const { return diagnostics_; }

private:
    std::vector<Diagnostic> diagnostics_;
};

namespace diag {
inline constexpr std::string_view kSyntax = "E-SYNTAX";
inline constexpr std::string_view kUndeclared = "E-UNDECLARED";
inline constexpr std::string_view kReserved = "E-RESERVED";
inline constexpr std::string_view kArity = "E-ARITY";
inline constexpr std::string_view kDuplicate = "E-DUPLICATE";
inline constexpr std::string_view kQuantifier = "E-QUANTIFIER";
inline constexpr std::string_view kSort = "E-SORT";
inline constexpr std::string_view kValuation = "E-VALUATION";
inline constexpr std::string_view kSensingSsa = "E-SENSING-SSA";

inline constexpr std::string_view kBeliefSum = "V-BELIEF-SUM";
inline constexpr std::string_view kBeliefWeight = "V-BELIEF-WEIGHT";
inline constexpr std::string_view kNoOutcomes = "V-NO-OUTCOMES";
inline constexpr std::string_view kRowSum = "V-ROW-SUM";
inline constexpr std::string_view kWeightRange = "V-WEIGHT-RANGE";
inline constexpr std::string_view kContextOverlap = "V-CONTEXT-OVERLAP";
inline constexpr std::string_view kContextGap = "V-CONTEXT-GAP";
}  // namespace diag

/// Parses a model file. Throws ModelError with positioned diagnostics.
ModelFile parse_model(std::string_view text);
ModelFile load_model(const std::string& path);

/// Checks the finiteness restrictions that make progression a finite sum.
/// Parameter-dependent weights and context disjointness/completeness are
/// checked at the evaluation points the model itself exposes (program
/// instantiations against initial belief support and representative worlds).
std::vector<Diagnostic> validate_restrictions(const ModelFile& m);

/// Canonical text form. parse_model(print_model(m)) == m.
std::string print_model(const ModelFile& m);

std::string print_term(const TermPtr& t);
std::string print_formula(const FormulaPtr& f);
std::string print_program(const ModelFile& m, const ProgramPtr& p);
std::string print_state_formula(const StatePtr& s);
std::string print_trace_formula(const TracePtr& t);
std::string print_primitive(const ModelFile& m, const PrimitiveProgram& p);
std::string print_valuation(const ModelFile& m, const Valuation& v);

inline std::string print(const FluentFormula& f) { return print_formula(f.root); }
inline std::string print(const SubjectiveFormula& f) { return print_formula(f.root); }

/// Parses fragments against an existing model's declarations.
StatePtr parse_state_formula(const ModelFile& m, std::string_view text);
TracePtr parse_trace_formula(const ModelFile& m, std::string_view text);
SubjectiveFormula parse_subjective_formula(const ModelFile& m, std::string_view text);
FluentFormula parse_fluent_formula(const ModelFile& m, std::string_view text);
PrimitiveProgram parse_primitive(const ModelFile& m, std::string_view text);
/// "h=0, g=1" or "{h=0, g=1}": total over state fluents, reserved slots 0.
Valuation parse_valuation(const ModelFile& m, std::string_view text);

}  // namespace bp
