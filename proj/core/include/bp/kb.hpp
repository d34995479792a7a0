#pragma once

#include "bp/ast.hpp"

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace bp {

/// A total valuation of every declared fluent, reserved slots included.
using World = Valuation;

struct GroundAction {
    ActionId action = 0;
    std::vector<Rational> ctrl;
    std::vector<Rational> unctrl;

    bool operator==(const GroundAction& o) const { return action == o.action && ctrl == o.ctrl && unctrl == o.unctrl; }
    bool operator!=(const GroundAction& o) const { return !(*this == o); }
    bool operator<(const GroundAction& o) const;
};

/// Finite-support belief over worlds. The believed theory it progresses
/// under is the model's believed_bat.
struct KnowledgeBase {
    BeliefDistribution dist;

    bool operator==(const KnowledgeBase& o) const { return dist == o.dist; }
    bool operator!=(const KnowledgeBase& o) const { return !(*this == o); }
    bool operator<(const KnowledgeBase& o) const { return dist < o.dist; }
};

/// Runtime failure during evaluation: division by zero, a likelihood
/// context assertion, or an incompatible progression.
class EvalError : public std::runtime_error {
public:
    EvalError(std::string code, const std::string& message)
        : std::runtime_error(code + ": " + message), code_(std::move(code)) {}
    const std::string& code() const { return code_; }

private:
    std::string code_;
};

namespace errc {
inline constexpr const char* kDivByZero = "R-DIV-ZERO";
inline constexpr const char* kContextOverlap = "V-CONTEXT-OVERLAP";
inline constexpr const char* kContextGap = "V-CONTEXT-GAP";
inline constexpr const char* kRowSum = "V-ROW-SUM";
inline constexpr const char* kWeightRange = "V-WEIGHT-RANGE";
inline constexpr const char* kIncompatible = "R-INCOMPATIBLE";
inline constexpr const char* kMassLoss = "R-MASS-LOSS";
inline constexpr const char* kNotObjective = "R-SORT";
}  // namespace errc

/// Objective evaluation. Params read `args` by slot.
Rational eval_term(const TermPtr& t, const World& w, const std::vector<Rational>& args = {});
bool eval_fluent_formula(const FormulaPtr& f, const World& w, const std::vector<Rational>& args = {});
inline bool eval_fluent_formula(const FluentFormula& f, const World& w, const std::vector<Rational>& args = {}) {
    return eval_fluent_formula(f.root, w, args);
}

World progress_world(const ModelFile& m, const World& w, const GroundAction& a, const BasicActionTheory& bat);

/// Likelihood of `a` at `w`. Asserts that exactly one context holds and that
/// the selected row is a probability vector.
Rational action_likelihood(const ModelFile& m, const GroundAction& a, const World& w, const BasicActionTheory& bat);

/// Index of the likelihood row whose context holds at `w` for ctrl args.
std::size_t active_context(const ModelFile& m, ActionId action, const std::vector<Rational>& ctrl, const World& w,
                           const BasicActionTheory& bat);

/// Ground instantiations sharing rho's controllable part, in outcome order.
std::vector<GroundAction> oi_alternatives(const ModelFile& m, const PrimitiveProgram& rho);
std::vector<GroundAction> oi_alternatives(const ModelFile& m, const GroundAction& t);

PrimitiveProgram suppress_outcome(const GroundAction& t);
GroundAction eps_action(const ModelFile& m);
GroundAction abort_action(const ModelFile& m);

KnowledgeBase initial_kb(const ModelFile& m);

/// Throws EvalError(kIncompatible) when the result would have zero mass.
KnowledgeBase progress_kb_stochastic(const ModelFile& m, const KnowledgeBase& kb, const GroundAction& t);
KnowledgeBase progress_kb_sensing(const ModelFile& m, const KnowledgeBase& kb, const GroundAction& t);
/// Dispatches on the action kind; reserved actions push forward.
KnowledgeBase progress_kb(const ModelFile& m, const KnowledgeBase& kb, const GroundAction& t);
/// nullopt instead of throwing on incompatibility.
std::optional<KnowledgeBase> try_progress_kb(const ModelFile& m, const KnowledgeBase& kb, const GroundAction& t);

Rational eval_belief_term(const TermPtr& t, const KnowledgeBase& kb);
bool eval_subjective(const FormulaPtr& f, const KnowledgeBase& kb);
inline bool eval_subjective(const SubjectiveFormula& f, const KnowledgeBase& kb) { return eval_subjective(f.root, kb); }

/// Product of per-step likelihoods along the progressed worlds.
Rational trace_likelihood(const ModelFile& m, const World& w, const std::vector<GroundAction>& z,
                          const BasicActionTheory& bat);

/// `{[h=0]: 1/4, [h=1]: 1/2}`; reserved fluents appear only when set.
std::string render_distribution(const ModelFile& m, const BeliefDistribution& d);
std::string render_world(const ModelFile& m, const World& w);
std::string print_ground_action(const ModelFile& m, const GroundAction& t);
/// "east(1,1)", "sencfe(0)", "eps". Throws ModelError on bad input.
GroundAction parse_ground_action(const ModelFile& m, std::string_view text);

}  // namespace bp
