#include "bp/simulator.hpp"

#include "bp/dsl.hpp"
#include "bp/parallel.hpp"

#include "json.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

namespace bp {

namespace {

[[noreturn]] void fail(const char* code, const std::string& message) {
    throw ModelError({Diagnostic{code, message, 0, 0}});
}

constexpr std::size_t kBreakdown = static_cast<std::size_t>(-1);

struct Option {
    enum class Kind { Edge, Eps, Fail } kind;
    std::size_t edge = 0;
    std::string label;
};

std::string signature_of(const std::vector<Option>& opts) {
    std::string s;
    for (const auto& o : opts) {
        if (!s.empty()) s += " | ";
        if (o.kind == Option::Kind::Edge) s += "e" + std::to_string(o.edge) + ":";
        s += o.label;
    }
    return s;
}

// A trace with worlds, actions and KBs replaced by ids into the runner's
// intern tables.
struct Compact {
    std::vector<std::size_t> actions;
    std::vector<std::size_t> kbs;  // kBreakdown marks the breakdown position
    std::vector<std::size_t> nodes;
    TraceRecord::Outcome outcome = TraceRecord::Outcome::HorizonCut;
    Rational likelihood = 1;
};

// Per-worker caches; progression, sampling tables and edge evaluation are
// pure functions of their keys.
class Runner {
public:
    Runner(const ModelFile& m, const CharGraph& g)
        : m_(m), g_(g), kb0_(intern_kb(initial_kb(m))), eps_(intern_action(eps_action(m))),
          abort_(intern_action(abort_action(m))) {}

    const KnowledgeBase& kb(std::size_t id) const { return kbs_[id]; }
    const GroundAction& action(std::size_t id) const { return actions_[id]; }

    Compact run(const World& w0, const Strategy& strategy, std::size_t horizon, SplitMix64& rng, std::size_t& misses,
                bool track_likelihood) {
        Compact c;
        std::size_t w = intern_world(w0);
        std::size_t id = kb0_;
        std::size_t node = 0;
        c.kbs.push_back(id);
        c.nodes.push_back(node);
        while (c.actions.size() < horizon) {
            const std::vector<Option>& opts = options(id, node);
            const Option& o = opts[choose(opts, id, strategy, rng, misses)];
            std::size_t t;
            std::size_t target = node;
            if (o.kind == Option::Kind::Edge) {
                t = sample(o.edge, w, rng);
                target = g_.edges[o.edge].target;
            } else if (o.kind == Option::Kind::Eps) {
                t = eps_;
                target = g_.nil_node;
            } else {
                t = abort_;
            }
            const Step& step = advance(w, t);
            if (track_likelihood) c.likelihood *= step.likelihood;
            w = step.world;
            c.actions.push_back(t);
            std::size_t next = progress(id, t);
            c.kbs.push_back(next);
            c.nodes.push_back(target);
            if (next == kBreakdown) {
                c.outcome = TraceRecord::Outcome::Breakdown;
                return c;
            }
            id = next;
            node = target;
            if (o.kind == Option::Kind::Eps) {
                c.outcome = TraceRecord::Outcome::Final;
                return c;
            }
            if (o.kind == Option::Kind::Fail) {
                c.outcome = TraceRecord::Outcome::Fail;
                return c;
            }
        }
        return c;
    }

    bool label(std::size_t id, const SubjectiveFormula& f) {
        if (id == kBreakdown) return false;
        auto key = std::make_pair(id, f.root.get());
        auto it = labels_.find(key);
        if (it != labels_.end()) return it->second;
        bool v = eval_subjective(f, kbs_[id]);
        labels_.emplace(key, v);
        return v;
    }

private:
    template <class T>
    static std::size_t intern(std::vector<T>& table, std::map<T, std::size_t>& index, const T& x) {
        auto [it, fresh] = index.emplace(x, table.size());
        if (fresh) table.push_back(x);
        return it->second;
    }
    std::size_t intern_kb(const KnowledgeBase& kb) { return intern(kbs_, kb_index_, kb); }
    std::size_t intern_world(const World& w) { return intern(worlds_, world_index_, w); }
    std::size_t intern_action(const GroundAction& t) { return intern(actions_, action_index_, t); }

    std::size_t progress(std::size_t id, std::size_t t) {
        auto key = std::make_pair(id, t);
        auto it = progress_.find(key);
        if (it != progress_.end()) return it->second;
        std::size_t out = kBreakdown;
        if (auto kb = try_progress_kb(m_, kbs_[id], actions_[t])) out = intern_kb(*kb);
        progress_.emplace(key, out);
        return out;
    }

    const std::vector<Option>& options(std::size_t id, std::size_t node) {
        auto key = std::make_pair(id, node);
        auto it = options_.find(key);
        if (it != options_.end()) return it->second;
        EnabledSet en = enabled(g_, node, kbs_[id]);
        std::vector<Option> opts;
        for (std::size_t e : en.edges) opts.push_back({Option::Kind::Edge, e, print_primitive(m_, g_.edges[e].rho)});
        if (en.is_final) opts.push_back({Option::Kind::Eps, 0, std::string(kEpsAction)});
        if (en.is_failing) opts.push_back({Option::Kind::Fail, 0, std::string(kAbortAction)});
        return options_.emplace(key, std::move(opts)).first->second;
    }

    std::size_t choose(const std::vector<Option>& opts, std::size_t id, const Strategy& s, SplitMix64& rng,
                       std::size_t& misses) {
        if (opts.size() == 1) return 0;
        switch (s.kind) {
            case Strategy::Kind::FirstEnabled: return 0;
            case Strategy::Kind::UniformRandom: return static_cast<std::size_t>(rng.below(opts.size()));
            case Strategy::Kind::Table: break;
        }
        auto rit = rendered_.find(id);
        if (rit == rendered_.end()) rit = rendered_.emplace(id, render_distribution(m_, kbs_[id].dist)).first;
        std::string sig = signature_of(opts);
        for (const auto& entry : s.table) {
            if (entry.observation != rit->second) continue;
            if (!entry.options.empty() && entry.options != sig) continue;
            for (std::size_t i = 0; i < opts.size(); ++i)
                if (opts[i].label == entry.choice) return i;
        }
        ++misses;
        return 0;
    }

    struct Step {
        std::size_t world;
        Rational likelihood;
    };

    const Step& advance(std::size_t w, std::size_t t) {
        auto key = std::make_pair(w, t);
        auto it = steps_.find(key);
        if (it != steps_.end()) return it->second;
        World next = progress_world(m_, worlds_[w], actions_[t], m_.real_bat);
        Rational l = action_likelihood(m_, actions_[t], worlds_[w], m_.real_bat);
        Step st{intern_world(next), l};
        return steps_.emplace(key, std::move(st)).first->second;
    }

    struct Outcomes {
        std::vector<std::size_t> alts;  // really possible alternatives only
        std::vector<Rational> cumulative;
    };

    // Samples a ground outcome from the real likelihoods at w. Comparison is
    // exact: u is a 53-bit dyadic rational.
    std::size_t sample(std::size_t edge, std::size_t w, SplitMix64& rng) {
        auto key = std::make_pair(w, edge);
        auto it = outcomes_.find(key);
        if (it == outcomes_.end()) {
            const PrimitiveProgram& rho = g_.edges[edge].rho;
            Outcomes o;
            Rational acc = 0;
            for (const auto& t : oi_alternatives(m_, rho)) {
                Rational l = action_likelihood(m_, t, worlds_[w], m_.real_bat);
                if (l == 0) continue;
                acc += l;
                o.alts.push_back(intern_action(t));
                o.cumulative.push_back(acc);
            }
            if (o.alts.empty())
                fail("S-NO-OUTCOME", "no outcome of " + print_primitive(m_, rho) + " is really possible");
            it = outcomes_.emplace(key, std::move(o)).first;
        }
        const Outcomes& o = it->second;
        if (o.alts.size() == 1) return o.alts[0];
        Rational u(mpz_class(static_cast<unsigned long>(rng.next() >> 11)), mpz_class(1) << 53);
        u.canonicalize();
        u *= o.cumulative.back();
        for (std::size_t i = 0; i < o.alts.size(); ++i)
            if (u < o.cumulative[i]) return o.alts[i];
        return o.alts.back();
    }

    const ModelFile& m_;
    const CharGraph& g_;
    std::vector<KnowledgeBase> kbs_;
    std::map<KnowledgeBase, std::size_t> kb_index_;
    std::vector<World> worlds_;
    std::map<World, std::size_t> world_index_;
    std::vector<GroundAction> actions_;
    std::map<GroundAction, std::size_t> action_index_;
    std::size_t kb0_, eps_, abort_;
    std::map<std::pair<std::size_t, std::size_t>, std::size_t> progress_;
    std::map<std::pair<std::size_t, std::size_t>, std::vector<Option>> options_;
    std::map<std::pair<std::size_t, const Formula*>, bool> labels_;
    std::map<std::size_t, std::string> rendered_;
    std::map<std::pair<std::size_t, std::size_t>, Step> steps_;
    std::map<std::pair<std::size_t, std::size_t>, Outcomes> outcomes_;
};

// Shared evaluator over `positions` recorded label positions.
template <class Label>
TraceTruth evaluate(const TraceFormula& psi, std::size_t positions, bool finished, Label&& at) {
    auto label = [&](std::size_t i, const SubjectiveFormula& f) -> std::optional<bool> {
        if (i < positions) return at(i, f);
        if (!finished) return std::nullopt;
        return at(positions - 1, f);
    };
    if (psi.kind == TraceFormula::Kind::Next) {
        auto r = label(1, psi.rhs->beta);
        if (!r) return TraceTruth::Unknown;
        return *r ? TraceTruth::Holds : TraceTruth::Fails;
    }
    const bool bounded = psi.kind == TraceFormula::Kind::BoundedUntil;
    for (std::size_t i = 0;; ++i) {
        if (bounded && i > psi.bound) return TraceTruth::Fails;
        auto l = label(i, psi.lhs->beta);
        auto r = label(i, psi.rhs->beta);
        if (!l || !r) return TraceTruth::Unknown;
        if (*l && *r) return TraceTruth::Holds;
        if (!*l) return TraceTruth::Fails;
        // Past the end the labels are constant, so pending means pending forever.
        if (i + 1 >= positions && finished) return TraceTruth::Fails;
    }
}

bool is_literal_true(const StatePtr& s) {
    return s && s->kind == StateFormula::Kind::Subj && s->beta.root->kind == Formula::Kind::True;
}

void check_world(const ModelFile& m, const World& w0) {
    if (w0.size() != m.fluents.size() || w0[m.final_fluent()] != 0 || w0[m.fail_fluent()] != 0)
        fail("S-WORLD", "initial world " + render_world(m, w0) + " is malformed");
    for (const auto& c : m.init.constraints)
        if (!eval_fluent_formula(c, w0))
            fail("S-WORLD", "initial world " + render_world(m, w0) + " violates " + print(c));
}

}  // namespace

const char* outcome_name(TraceRecord::Outcome o) {
    switch (o) {
        case TraceRecord::Outcome::Final: return "final";
        case TraceRecord::Outcome::Fail: return "fail";
        case TraceRecord::Outcome::Breakdown: return "belief-breakdown";
        case TraceRecord::Outcome::HorizonCut: return "horizon-cut";
    }
    return "?";
}

namespace {

std::uint64_t mix64(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

}  // namespace

// Streams are decorrelated by hashing the trial index into the start state.
SplitMix64::SplitMix64(std::uint64_t seed, std::uint64_t stream) : state_(mix64(seed) ^ mix64(~stream)) {}

std::uint64_t SplitMix64::next() {
    return mix64(state_ += 0x9e3779b97f4a7c15ULL);
}

std::uint64_t SplitMix64::below(std::uint64_t n) {
    // Rejection sampling keeps the draw unbiased.
    std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() - std::numeric_limits<std::uint64_t>::max() % n;
    std::uint64_t x;
    do x = next();
    while (x >= limit);
    return x % n;
}

Strategy strategy_from_json(const std::string& text) {
    Strategy s;
    s.kind = Strategy::Kind::Table;
    try {
        auto js = nlohmann::json::parse(text);
        for (const auto& c : js.at("choices")) {
            Strategy::Entry e;
            e.observation = c.at("observation").get<std::string>();
            e.options = c.value("options", std::string());
            e.choice = c.at("choice").get<std::string>();
            s.table.push_back(std::move(e));
        }
    } catch (const nlohmann::json::exception& ex) {
        fail("S-STRATEGY", std::string("malformed policy file: ") + ex.what());
    }
    return s;
}

std::string strategy_to_json(const Strategy& s) {
    nlohmann::json js;
    js["choices"] = nlohmann::json::array();
    for (const auto& e : s.table)
        js["choices"].push_back({{"observation", e.observation}, {"options", e.options}, {"choice", e.choice}});
    return js.dump(2);
}

Strategy parse_strategy(const std::string& token) {
    if (token == "first-enabled") return {};
    if (token == "uniform-random") return {Strategy::Kind::UniformRandom, {}};
    std::ifstream in(token);
    if (!in) fail("S-STRATEGY", "unknown strategy '" + token + "'");
    std::stringstream buf;
    buf << in.rdbuf();
    return strategy_from_json(buf.str());
}

Strategy strategy_from_policy(const ModelFile& m, const FinitePomdp& p, const PolicySpace& space,
                              const ProperPolicy& pol) {
    Strategy s;
    s.kind = Strategy::Kind::Table;
    for (std::size_t c = 0; c < space.classes.size(); ++c) {
        const auto& cls = space.classes[c];
        if (p.sink_obs && cls.observation == *p.sink_obs) continue;
        s.table.push_back({render_distribution(m, p.observations[cls.observation].dist), cls.signature,
                           cls.labels[pol.choice[c]]});
    }
    return s;
}

TraceRecord run_trace(const ModelFile& m, const CharGraph& g, const World& w0, const Strategy& strategy,
                      std::size_t horizon, std::uint64_t seed, std::uint64_t trial) {
    check_world(m, w0);
    Runner runner(m, g);
    SplitMix64 rng(seed, trial);
    std::size_t misses = 0;
    Compact c = runner.run(w0, strategy, horizon, rng, misses, true);
    TraceRecord r;
    r.world0 = w0;
    for (std::size_t t : c.actions) r.actions.push_back(runner.action(t));
    for (std::size_t id : c.kbs) r.kbs.push_back(id == kBreakdown ? KnowledgeBase{} : runner.kb(id));
    r.nodes = std::move(c.nodes);
    r.outcome = c.outcome;
    r.likelihood = c.likelihood;
    return r;
}

TraceTruth trace_satisfies(const TraceRecord& r, const TraceFormula& psi) {
    const bool breakdown = r.outcome == TraceRecord::Outcome::Breakdown;
    const bool finished = r.outcome != TraceRecord::Outcome::HorizonCut;
    return evaluate(psi, r.kbs.size(), finished, [&](std::size_t i, const SubjectiveFormula& f) {
        if (breakdown && i + 1 == r.kbs.size()) return false;
        return eval_subjective(f, r.kbs[i]);
    });
}

Estimate estimate(const ModelFile& m, const TracePtr& psi, const World& w0, const Strategy& strategy,
                  const EstimateOptions& options) {
    check_world(m, w0);
    if (options.trials == 0) fail("S-TRIALS", "at least one trial is required");
    CharGraph g = build_graph(m.program);
    unsigned workers = resolve_threads(options.threads);
    struct Tally {
        std::size_t successes = 0, undecided = 0, misses = 0;
        std::map<std::string, std::size_t> outcomes;
    };
    std::vector<Tally> tallies(workers);
    parallel_chunks(options.trials, options.threads, [&](std::size_t lo, std::size_t hi, unsigned w) {
        Runner runner(m, g);
        Tally& t = tallies[w];
        for (std::size_t i = lo; i < hi; ++i) {
            SplitMix64 rng(options.seed, i);
            Compact c = runner.run(w0, strategy, options.horizon, rng, t.misses, false);
            ++t.outcomes[outcome_name(c.outcome)];
            TraceTruth v = evaluate(*psi, c.kbs.size(), c.outcome != TraceRecord::Outcome::HorizonCut,
                                    [&](std::size_t j, const SubjectiveFormula& f) { return runner.label(c.kbs[j], f); });
            if (v == TraceTruth::Holds) ++t.successes;
            if (v == TraceTruth::Unknown) ++t.undecided;
        }
    });
    Estimate e;
    e.trials = options.trials;
    for (const auto& t : tallies) {
        e.successes += t.successes;
        e.undecided += t.undecided;
        e.policy_misses += t.misses;
        for (const auto& [k, v] : t.outcomes) e.outcomes[k] += v;
    }
    e.estimate = static_cast<double>(e.successes) / static_cast<double>(e.trials);
    const bool trivial = psi->kind != TraceFormula::Kind::Next && is_literal_true(psi->rhs) &&
                         is_literal_true(psi->lhs);
    e.half_width = trivial ? 0.0 : std::sqrt(std::log(2.0 / 0.05) / (2.0 * static_cast<double>(e.trials)));
    if (psi->kind == TraceFormula::Kind::Until) {
        e.lower_bound_only = true;
        e.notes.push_back("unbounded until cut at horizon " + std::to_string(options.horizon) +
                          "; the estimate is a lower bound");
    }
    if (e.undecided > 0) {
        e.lower_bound_only = true;
        e.notes.push_back(std::to_string(e.undecided) + " trial(s) hit the horizon before the formula was decided");
    }
    if (e.policy_misses > 0)
        e.notes.push_back(std::to_string(e.policy_misses) + " policy lookup(s) fell back to the first option");
    return e;
}

}  // namespace bp
