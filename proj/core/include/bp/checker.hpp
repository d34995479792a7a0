#pragma once

#include "bp/pomdp.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace bp {

/// A resolution of nondeterminism that depends only on what the agent can
/// observe: states sharing a class (observation plus offered options) make
/// the same choice.
struct PolicySpace {
    struct Class {
        std::size_t observation = 0;
        std::string signature;
        std::vector<std::string> labels;  // option labels, in state option order
        std::vector<std::size_t> states;
    };
    std::vector<Class> classes;
    std::vector<std::size_t> class_of;  // per state; npos for forced states
    std::uint64_t count = 1;            // saturates at UINT64_MAX
};

struct ProperPolicy {
    std::vector<std::size_t> choice;  // option index per class
};

PolicySpace policy_space(const ModelFile& m, const FinitePomdp& p);
/// Throws ModelError(C-POLICY-CAP) when the count exceeds `cap`.
std::vector<ProperPolicy> enumerate_policies(const PolicySpace& space, std::uint64_t cap);
ProperPolicy policy_at(const PolicySpace& space, std::uint64_t index);

/// Option index chosen at a state (0 for forced states).
std::size_t chosen_option(const PolicySpace& space, const ProperPolicy& pol, std::size_t state);

/// Truth of a subjective leaf at a POMDP state. Leaves are matched to
/// atomic propositions by text; the breakdown sink satisfies none.
bool state_label(const FinitePomdp& p, std::size_t state, const SubjectiveFormula& beta);

/// Probability of a bounded trace formula from the initial state.
Rational path_probability(const ModelFile& m, const FinitePomdp& p, const PolicySpace& space, const ProperPolicy& pol,
                          const TraceFormula& psi);

/// Per-depth total mass of the forward recursion (success + failure +
/// live). Every entry equals 1.
std::vector<Rational> forward_masses(const FinitePomdp& p, const PolicySpace& space, const ProperPolicy& pol,
                                     const TraceFormula& psi);

struct ProbResult {
    std::string formula;
    Rational min;
    Rational max;
    std::uint64_t policy_count = 0;
    ProperPolicy argmin;
    ProperPolicy argmax;
    bool holds = false;
};

struct TypeVerdict {
    std::size_t type = 0;
    World witness;
    bool holds = false;
    std::vector<ProbResult> probs;
    PolicySpace space;
};

struct Verdict {
    bool holds = true;
    std::string property;
    std::vector<TypeVerdict> per_type;
    std::vector<std::string> warnings;
};

struct CheckOptions {
    std::uint64_t policy_cap = 1000000;
    unsigned threads = 1;
};

/// Default cap, overridable through BP_POLICY_CAP.
std::uint64_t default_policy_cap();

Verdict check(const ModelFile& m, const TypeAnalysis& analysis, const std::vector<FinitePomdp>& pomdps,
              const StatePtr& phi, const CheckOptions& options = {});

/// Describes a policy as "observation/options -> choice" lines.
std::vector<std::string> describe_policy(const ModelFile& m, const FinitePomdp& p, const PolicySpace& space,
                                         const ProperPolicy& pol);

}  // namespace bp
