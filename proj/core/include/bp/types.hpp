#pragma once

#include "bp/ast.hpp"
#include "bp/kb.hpp"

#include <map>
#include <optional>
#include <string>
#include <tuple>
#include <vector>

namespace bp {

struct ContextEntry {
    enum class Source { Init, Likelihood, Test, Property };
    FormulaPtr formula;
    bool subjective = false;
    bool negated = false;  // added by closure under negation
    Source source = Source::Init;
    std::string text;
};

/// Formulas whose truth along action sequences determines a type.
struct ProgramContext {
    std::vector<ContextEntry> entries;
    /// (action, ctrl args, real likelihood row) -> entry index.
    std::map<std::tuple<ActionId, std::vector<Rational>, std::size_t>, std::size_t> likelihood_entry;

    std::size_t size() const { return entries.size(); }
};

const char* source_name(ContextEntry::Source s);

ProgramContext program_context(const ModelFile& m, const StatePtr& property = nullptr);

/// OI alternatives of every primitive program in the program, then eps and fail.
std::vector<GroundAction> ground_action_universe(const ModelFile& m);

/// Bound k for a checker-admissible property. Throws ModelError with
/// C-UNBOUNDED or C-NESTED-P otherwise.
std::size_t horizon_of(const StatePtr& phi);

/// Sequences over the ground universe up to length k, in DFS order, with
/// their believed progressions.
struct SequenceTable {
    std::vector<std::vector<GroundAction>> seqs;  // seqs[0] is the empty sequence
    std::vector<std::optional<KnowledgeBase>> kbs;  // nullopt: believed-incompatible
    std::vector<std::vector<char>> subjective;  // [seq][entry], meaningful for subjective entries
    std::map<std::vector<GroundAction>, std::size_t> index;

    std::optional<std::size_t> find(const std::vector<GroundAction>& z) const {
        auto it = index.find(z);
        if (it == index.end()) return std::nullopt;
        return it->second;
    }
};

struct TypeAssignment {
    std::vector<char> bits;  // [seq * entries + entry]
    World witness;
    std::vector<World> members;  // every representative of this type, witness first
    std::size_t entry_count = 0;

    bool holds(std::size_t seq, std::size_t entry) const { return bits[seq * entry_count + entry] != 0; }
};

struct TypeAnalysis {
    ProgramContext context;
    std::vector<GroundAction> universe;
    std::size_t k = 0;
    SequenceTable table;
    std::vector<TypeAssignment> types;
    std::size_t full_sequence_count = 0;  // sum of |A|^i for i <= k
    std::size_t pruned_sequences = 0;     // sequences with zero real likelihood for every representative
    std::vector<std::string> notes;
};

struct TypeOptions {
    unsigned threads = 1;
    std::size_t max_sequences = 2000000;
};

TypeAnalysis compute_types(const ModelFile& m, std::size_t k, const std::vector<World>& reps,
                           const StatePtr& property = nullptr, const TypeOptions& options = {});

/// Worlds from the cartesian product of integer ranges, e.g. {"h=-2..0"}.
std::vector<World> reps_from_ranges(const ModelFile& m, const std::vector<std::string>& specs);
/// One valuation per non-empty line; '#' starts a comment.
std::vector<World> reps_from_text(const ModelFile& m, const std::string& text);
/// Heuristic: constants compared against each fluent, shifted by up to k+1,
/// filtered through the initial constraints.
std::vector<World> reps_auto(const ModelFile& m, std::size_t k);

/// Rejects worlds that violate an initial constraint.
void check_representatives(const ModelFile& m, const std::vector<World>& reps);

}  // namespace bp
