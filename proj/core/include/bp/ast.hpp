#pragma once

#include "bp/rational.hpp"

#include <cstddef>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace bp {

struct Term;
struct Formula;
struct Program;
struct StateFormula;
struct TraceFormula;

using TermPtr = std::shared_ptr<const Term>;
using FormulaPtr = std::shared_ptr<const Formula>;
using ProgramPtr = std::shared_ptr<const Program>;
using StatePtr = std::shared_ptr<const StateFormula>;
using TracePtr = std::shared_ptr<const TraceFormula>;

using FluentId = std::size_t;
using ActionId = std::size_t;

/// Fluent values indexed by FluentId. Covers the reserved Final/Fail slots.
using Valuation = std::vector<Rational>;

enum class CmpOp { Eq, Ne, Lt, Le, Gt, Ge };

/// Arithmetic and belief terms share one node type. Which kinds may appear
/// where is enforced by the parser: fluent reads and parameters belong to
/// objective terms, Bel/Expect/Conf to subjective ones.
struct Term {
    enum class Kind {
        Const,
        Fluent,   // index = FluentId
        Param,    // index = argument slot of the enclosing action
        Add,
        Sub,
        Mul,
        Div,
        Neg,
        Cases,    // guards[i] -> args[i]; args.back() is the default
        Bel,      // guards[0]
        Expect,   // index = FluentId
        Conf,     // index = FluentId, value = radius, strict selects < over <=
    };

    Kind kind = Kind::Const;
    Rational value;
    std::size_t index = 0;
    std::string name;
    bool strict = false;
    std::vector<TermPtr> args;
    std::vector<FormulaPtr> guards;
};

struct Formula {
    enum class Kind { True, False, Cmp, Not, And, Or };

    Kind kind = Kind::True;
    CmpOp op = CmpOp::Eq;
    TermPtr lhs;
    TermPtr rhs;
    std::vector<FormulaPtr> args;
};

// Node constructors.
TermPtr make_const(Rational value);
TermPtr make_fluent(FluentId id, std::string name);
TermPtr make_param(std::size_t slot, std::string name);
TermPtr make_binary(Term::Kind kind, TermPtr lhs, TermPtr rhs);
TermPtr make_neg(TermPtr operand);
TermPtr make_cases(std::vector<FormulaPtr> guards, std::vector<TermPtr> values, TermPtr otherwise);
TermPtr make_bel(FormulaPtr phi);
TermPtr make_expect(FluentId id, std::string name);
TermPtr make_conf(FluentId id, std::string name, Rational radius, bool strict);

FormulaPtr make_true();
FormulaPtr make_false();
FormulaPtr make_cmp(CmpOp op, TermPtr lhs, TermPtr rhs);
FormulaPtr make_not(FormulaPtr f);
FormulaPtr make_and(FormulaPtr a, FormulaPtr b);
FormulaPtr make_or(FormulaPtr a, FormulaPtr b);

bool equal(const Term& a, const Term& b);
bool equal(const Formula& a, const Formula& b);
bool equal(const TermPtr& a, const TermPtr& b);
bool equal(const FormulaPtr& a, const FormulaPtr& b);

/// Objective formula: fluents, bound parameters and constants only.
struct FluentFormula {
    FormulaPtr root = make_true();
};

/// Depth-1 belief formula: every fluent read sits under Bel/Expect/Conf.
struct SubjectiveFormula {
    FormulaPtr root = make_true();
};

inline bool operator==(const FluentFormula& a, const FluentFormula& b) { return equal(a.root, b.root); }
inline bool operator==(const SubjectiveFormula& a, const SubjectiveFormula& b) { return equal(a.root, b.root); }

/// Replaces Param nodes by constants taken from `args` (slot-indexed).
FormulaPtr bind_params(const FormulaPtr& f, const std::vector<Rational>& args);
TermPtr bind_params(const TermPtr& t, const std::vector<Rational>& args);

/// True when the term mentions no fluent (a rigid term).
bool is_rigid(const TermPtr& t);
bool mentions_params(const TermPtr& t);
bool mentions_params(const FormulaPtr& f);

// ---------------------------------------------------------------------------
// Declarations

struct FluentDecl {
    enum class Role { State, Reserved };
    std::string name;
    Role role = Role::State;
};

struct ActionDecl {
    enum class Kind { Stochastic, Sensing, Terminate, Abort };
    std::string name;
    Kind kind = Kind::Stochastic;
    std::vector<std::string> ctrl_params;
    std::vector<std::string> unctrl_params;
    /// outcomes[j] holds r_j: one rigid term per uncontrollable parameter,
    /// over the controllable parameters (slots 0..ctrl-1).
    std::vector<std::vector<TermPtr>> outcomes;

    std::size_t controllable_arity() const { return ctrl_params.size(); }
    std::size_t uncontrollable_arity() const { return unctrl_params.size(); }
    bool reserved() const { return kind == Kind::Terminate || kind == Kind::Abort; }
};

/// One likelihood context phi_j' with its outcome weights c_{j,j'}.
struct LikelihoodRow {
    FluentFormula context;  // may mention controllable parameters
    std::vector<TermPtr> weights;  // one per declared outcome, rigid
    bool otherwise = false;  // context is the negation of all earlier rows
};

struct LikelihoodTable {
    std::vector<LikelihoodRow> rows;
};

/// Effect of one action symbol on one fluent; parameters are slot-indexed
/// (controllable first, then uncontrollable).
struct SsaCase {
    ActionId action = 0;
    TermPtr effect;
};

struct BasicActionTheory {
    std::vector<std::vector<SsaCase>> ssa;       // per FluentId
    std::vector<LikelihoodTable> likelihood;     // per ActionId
};

struct InitTheory {
    std::vector<FluentFormula> constraints;
    std::vector<Valuation> worlds;  // optional representative worlds
};

using BeliefDistribution = std::map<Valuation, Rational>;

// ---------------------------------------------------------------------------
// Programs

struct PrimitiveProgram {
    ActionId action = 0;
    std::vector<Rational> ctrl;
};

bool operator==(const PrimitiveProgram& a, const PrimitiveProgram& b);
bool operator<(const PrimitiveProgram& a, const PrimitiveProgram& b);

struct Program {
    enum class Kind { Nil, Prim, Test, Seq, Choice, Star };
    Kind kind = Kind::Nil;
    PrimitiveProgram prim;
    SubjectiveFormula test;
    ProgramPtr first;
    ProgramPtr second;
};

ProgramPtr make_nil();
ProgramPtr make_prim(PrimitiveProgram p);
ProgramPtr make_test(SubjectiveFormula alpha);
ProgramPtr make_seq(ProgramPtr a, ProgramPtr b);
ProgramPtr make_choice(ProgramPtr a, ProgramPtr b);
ProgramPtr make_star(ProgramPtr body);

bool equal(const ProgramPtr& a, const ProgramPtr& b);

// ---------------------------------------------------------------------------
// Properties

struct Interval {
    Rational lo = 0;
    Rational hi = 1;
    bool lo_closed = true;
    bool hi_closed = true;

    bool contains(const Rational& p) const;
    bool operator==(const Interval& o) const;
};

struct StateFormula {
    enum class Kind { Subj, Not, And, Or, Prob };
    Kind kind = Kind::Subj;
    SubjectiveFormula beta;
    Interval interval;
    TracePtr trace;
    std::vector<StatePtr> args;
};

struct TraceFormula {
    enum class Kind { Next, Until, BoundedUntil };
    Kind kind = Kind::Next;
    StatePtr lhs;  // unused for Next
    StatePtr rhs;
    std::size_t bound = 0;
};

bool equal(const StatePtr& a, const StatePtr& b);
bool equal(const TracePtr& a, const TracePtr& b);

struct NamedProperty {
    std::string name;
    StatePtr formula;
};

// ---------------------------------------------------------------------------

/// A parsed and resolved belief program together with its domain.
struct ModelFile {
    std::vector<FluentDecl> fluents;   // state fluents, then Final, Fail
    std::vector<ActionDecl> actions;   // user actions, then eps, fail
    BasicActionTheory real_bat;
    BasicActionTheory believed_bat;
    InitTheory init;
    BeliefDistribution kb0;
    ProgramPtr program = make_nil();
    std::vector<NamedProperty> properties;

    FluentId final_fluent() const { return fluents.size() - 2; }
    FluentId fail_fluent() const { return fluents.size() - 1; }
    ActionId eps_action() const { return actions.size() - 2; }
    ActionId abort_action() const { return actions.size() - 1; }
    std::size_t state_fluent_count() const { return fluents.size() - 2; }

    std::optional<FluentId> find_fluent(std::string_view name) const;
    std::optional<ActionId> find_action(std::string_view name) const;
    const NamedProperty* find_property(std::string_view name) const;
};

bool operator==(const ModelFile& a, const ModelFile& b);

inline constexpr std::string_view kFinalFluent = "Final";
inline constexpr std::string_view kFailFluent = "Fail";
inline constexpr std::string_view kEpsAction = "eps";
inline constexpr std::string_view kAbortAction = "fail";

/// Adds Final/Fail and eps/fail to a declaration list that holds only user
/// entries, and sizes the BAT tables accordingly.
void inject_reserved(ModelFile& m);

}  // namespace bp
