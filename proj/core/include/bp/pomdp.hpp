#pragma once

#include "bp/graph.hpp"
#include "bp/types.hpp"

#include <string>
#include <vector>

namespace bp {

struct PomdpTransition {
    std::size_t target = 0;
    Rational prob;
    std::optional<GroundAction> outcome;  // the ground action taken, if any
};

struct PomdpOption {
    enum class Kind { Edge, Eps, Fail };
    Kind kind = Kind::Edge;
    std::size_t edge = 0;  // graph edge for Kind::Edge
    PrimitiveProgram rho;
    std::vector<PomdpTransition> succ;
};

struct PomdpState {
    std::size_t seq = 0;   // index into the type analysis sequence table
    std::size_t node = 0;  // graph node
    bool sink = false;     // belief-breakdown sink
    bool frontier = false; // |z| = k
};

/// Finite POMDP for one type. Observation `sink_obs` (if any) is the
/// belief-breakdown observation, carrying an empty KB and no labels.
struct FinitePomdp {
    std::size_t k = 0;
    std::vector<PomdpState> states;
    std::size_t initial = 0;
    std::vector<std::vector<PomdpOption>> options;  // per state
    std::vector<KnowledgeBase> observations;
    std::vector<std::size_t> obs_of;
    std::vector<std::string> ap;                    // atomic proposition texts
    std::vector<std::size_t> ap_entry;              // context entry per proposition
    std::vector<std::vector<char>> labels;          // [obs][ap]
    std::optional<std::size_t> sink_obs;
    std::size_t breakdown_branches = 0;
    std::size_t nonuniform_observations = 0;        // observations whose states offer different option sets

    std::size_t transition_count() const;
};

FinitePomdp build_pomdp(const ModelFile& m, const CharGraph& g, const TypeAnalysis& analysis, std::size_t type_index);

/// Human-readable option label ("east(1)", "eps", "fail").
std::string option_label(const ModelFile& m, const PomdpOption& o);
/// Identifies an option among those of a state; distinct edges with the
/// same primitive program stay distinct.
std::string option_signature(const ModelFile& m, const FinitePomdp& p, std::size_t state);

std::string state_name(const ModelFile& m, const TypeAnalysis& a, const FinitePomdp& p, std::size_t s);

/// Order-independent canonical serialization.
std::string pomdp_fingerprint(const ModelFile& m, const TypeAnalysis& a, const FinitePomdp& p);

std::string pomdp_to_json(const ModelFile& m, const TypeAnalysis& a, const FinitePomdp& p, std::size_t type_index);
std::string pomdp_to_dot(const ModelFile& m, const TypeAnalysis& a, const FinitePomdp& p);

}  // namespace bp
