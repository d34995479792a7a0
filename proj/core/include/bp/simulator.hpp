#pragma once

#include "bp/checker.hpp"
#include "bp/graph.hpp"

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace bp {

struct TraceRecord {
    enum class Outcome { Final, Fail, Breakdown, HorizonCut };
    World world0;
    std::vector<GroundAction> actions;
    /// One snapshot per position; a breakdown position holds an empty KB.
    std::vector<KnowledgeBase> kbs;
    std::vector<std::size_t> nodes;  // graph node per position
    Outcome outcome = Outcome::HorizonCut;
    Rational likelihood = 1;  // real likelihood of `actions` from world0
};

const char* outcome_name(TraceRecord::Outcome o);

/// How the simulated agent resolves a choice among offered options.
struct Strategy {
    enum class Kind { FirstEnabled, UniformRandom, Table };
    struct Entry {
        std::string observation;  // render_distribution of the KB
        std::string options;      // option signature; empty matches any
        std::string choice;       // option label
    };
    Kind kind = Kind::FirstEnabled;
    std::vector<Entry> table;
};

/// "first-enabled", "uniform-random", or a path to a policy JSON file.
/// Throws ModelError(S-STRATEGY) otherwise.
Strategy parse_strategy(const std::string& token);
Strategy strategy_from_json(const std::string& text);
std::string strategy_to_json(const Strategy& s);
/// Table strategy reproducing a checker policy.
Strategy strategy_from_policy(const ModelFile& m, const FinitePomdp& p, const PolicySpace& space,
                              const ProperPolicy& pol);

/// Counter-based generator: stream (seed, trial) is independent of
/// scheduling.
class SplitMix64 {
public:
    SplitMix64(std::uint64_t seed, std::uint64_t stream);
    std::uint64_t next();
    /// Uniform integer in [0, n).
    std::uint64_t below(std::uint64_t n);

private:
    std::uint64_t state_;
};

/// Runs the program at most `horizon` actions deep. Throws ModelError with
/// S-WORLD when w0 violates the initial constraints.
TraceRecord run_trace(const ModelFile& m, const CharGraph& g, const World& w0, const Strategy& strategy,
                      std::size_t horizon, std::uint64_t seed, std::uint64_t trial = 0);

enum class TraceTruth { Holds, Fails, Unknown };

/// Truth of a trace formula over a recorded trace. Positions past a final
/// or failed end repeat the last snapshot, breakdown positions satisfy no
/// label, and positions past a horizon cut are Unknown.
TraceTruth trace_satisfies(const TraceRecord& r, const TraceFormula& psi);

struct EstimateOptions {
    std::size_t trials = 10000;
    std::size_t horizon = 10;
    std::uint64_t seed = 42;
    unsigned threads = 1;
};

struct Estimate {
    std::size_t trials = 0;
    std::size_t successes = 0;
    double estimate = 0;
    double half_width = 0;  // Hoeffding, 95%
    std::size_t undecided = 0;  // trials cut by the horizon before psi was decided
    bool lower_bound_only = false;
    std::map<std::string, std::size_t> outcomes;
    std::size_t policy_misses = 0;  // table lookups that fell back to the first option
    std::vector<std::string> notes;

    double lower() const { return estimate - half_width < 0 ? 0 : estimate - half_width; }
    double upper() const { return estimate + half_width > 1 ? 1 : estimate + half_width; }
};

Estimate estimate(const ModelFile& m, const TracePtr& psi, const World& w0, const Strategy& strategy,
                  const EstimateOptions& options);

}  // namespace bp
