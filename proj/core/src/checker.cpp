#include "bp/checker.hpp"

#include "bp/dsl.hpp"
#include "bp/parallel.hpp"

#include <cstdlib>
#include <limits>
#include <map>

namespace bp {

namespace {

constexpr std::size_t kNone = std::numeric_limits<std::size_t>::max();

[[noreturn]] void fail(const char* code, const std::string& message) {
    throw ModelError({Diagnostic{code, message, 0, 0}});
}

}  // namespace

PolicySpace policy_space(const ModelFile& m, const FinitePomdp& p) {
    PolicySpace space;
    space.class_of.assign(p.states.size(), kNone);
    std::map<std::pair<std::size_t, std::string>, std::size_t> index;
    for (std::size_t s = 0; s < p.states.size(); ++s) {
        if (p.states[s].frontier || p.states[s].sink || p.options[s].size() < 2) continue;
        std::string sig = option_signature(m, p, s);
        auto [it, fresh] = index.emplace(std::make_pair(p.obs_of[s], sig), 0);
        if (fresh) {
            PolicySpace::Class c;
            c.observation = p.obs_of[s];
            c.signature = sig;
            for (const auto& o : p.options[s]) c.labels.push_back(option_label(m, o));
            space.classes.push_back(std::move(c));
        }
        space.class_of[s] = 0;  // fixed up after sorting
    }
    std::sort(space.classes.begin(), space.classes.end(), [](const auto& a, const auto& b) {
        return a.observation != b.observation ? a.observation < b.observation : a.signature < b.signature;
    });
    index.clear();
    for (std::size_t c = 0; c < space.classes.size(); ++c)
        index[{space.classes[c].observation, space.classes[c].signature}] = c;
    for (std::size_t s = 0; s < p.states.size(); ++s) {
        if (space.class_of[s] == kNone) continue;
        std::size_t c = index.at({p.obs_of[s], option_signature(m, p, s)});
        space.class_of[s] = c;
        space.classes[c].states.push_back(s);
    }
    for (const auto& c : space.classes) {
        std::uint64_t n = c.labels.size();
        if (space.count > std::numeric_limits<std::uint64_t>::max() / n) {
            space.count = std::numeric_limits<std::uint64_t>::max();
            break;
        }
        space.count *= n;
    }
    return space;
}

ProperPolicy policy_at(const PolicySpace& space, std::uint64_t index) {
    ProperPolicy pol;
    pol.choice.resize(space.classes.size());
    // Mixed radix, last class varies fastest.
    for (std::size_t c = space.classes.size(); c-- > 0;) {
        std::uint64_t n = space.classes[c].labels.size();
        pol.choice[c] = static_cast<std::size_t>(index % n);
        index /= n;
    }
    return pol;
}

std::vector<ProperPolicy> enumerate_policies(const PolicySpace& space, std::uint64_t cap) {
    if (space.count > cap)
        fail("C-POLICY-CAP", std::to_string(space.count) + " proper policies exceed the cap of " + std::to_string(cap));
    std::vector<ProperPolicy> out;
    out.reserve(space.count);
    for (std::uint64_t i = 0; i < space.count; ++i) out.push_back(policy_at(space, i));
    return out;
}

std::size_t chosen_option(const PolicySpace& space, const ProperPolicy& pol, std::size_t state) {
    std::size_t c = space.class_of[state];
    return c == kNone ? 0 : pol.choice[c];
}

bool state_label(const FinitePomdp& p, std::size_t state, const SubjectiveFormula& beta) {
    std::size_t o = p.obs_of[state];
    if (p.sink_obs && o == *p.sink_obs) return false;
    std::string text = print(beta);
    for (std::size_t i = 0; i < p.ap.size(); ++i)
        if (p.ap[i] == text) return p.labels[o][i] != 0;
    return eval_subjective(beta, p.observations[o]);
}

namespace {

struct Forward {
    Rational success;
    std::vector<Rational> masses;
};

Forward run_forward(const FinitePomdp& p, const PolicySpace& space, const ProperPolicy& pol, const TraceFormula& psi,
                    bool track) {
    Forward out;
    const std::size_t n = p.states.size();
    if (psi.kind == TraceFormula::Kind::Next) {
        const auto& opts = p.options[p.initial];
        if (opts.empty()) return out;
        for (const auto& t : opts[chosen_option(space, pol, p.initial)].succ)
            if (state_label(p, t.target, psi.rhs->beta)) out.success += t.prob;
        if (track) out.masses = {Rational(1), Rational(1)};
        return out;
    }
    // Position i succeeds when both operands hold there, and fails as soon
    // as the left operand does not.
    std::vector<char> lhs(n), rhs(n);
    for (std::size_t s = 0; s < n; ++s) {
        lhs[s] = state_label(p, s, psi.lhs->beta);
        rhs[s] = state_label(p, s, psi.rhs->beta);
    }
    std::vector<Rational> dist(n), next(n);
    std::vector<char> live(n, 0), next_live(n, 0);
    dist[p.initial] = 1;
    live[p.initial] = 1;
    Rational failed = 0;
    for (std::size_t i = 0; i <= psi.bound; ++i) {
        std::fill(next_live.begin(), next_live.end(), 0);
        Rational pending = 0;
        for (std::size_t s = 0; s < n; ++s) {
            if (!live[s]) continue;
            const Rational& mass = dist[s];
            if (mass == 0) continue;
            if (lhs[s] && rhs[s]) {
                out.success += mass;
            } else if (!lhs[s]) {
                failed += mass;
            } else if (i < psi.bound) {
                for (const auto& t : p.options[s][chosen_option(space, pol, s)].succ) {
                    if (!next_live[t.target]) {
                        next[t.target] = 0;
                        next_live[t.target] = 1;
                    }
                    next[t.target] += mass * t.prob;
                }
            } else {
                pending += mass;
            }
        }
        std::swap(dist, next);
        std::swap(live, next_live);
        if (track) {
            Rational total = out.success + failed + pending;
            for (std::size_t s = 0; s < n; ++s)
                if (live[s]) total += dist[s];
            out.masses.push_back(total);
        }
    }
    return out;
}

void collect_probs(const StatePtr& s, std::vector<const StateFormula*>& out) {
    if (s->kind == StateFormula::Kind::Prob) {
        out.push_back(s.get());
        return;
    }
    for (const auto& a : s->args) collect_probs(a, out);
}

bool eval_state(const StatePtr& s, const FinitePomdp& p, const std::map<const StateFormula*, bool>& probs) {
    switch (s->kind) {
        case StateFormula::Kind::Subj: return state_label(p, p.initial, s->beta);
        case StateFormula::Kind::Not: return !eval_state(s->args[0], p, probs);
        case StateFormula::Kind::And: return eval_state(s->args[0], p, probs) && eval_state(s->args[1], p, probs);
        case StateFormula::Kind::Or: return eval_state(s->args[0], p, probs) || eval_state(s->args[1], p, probs);
        case StateFormula::Kind::Prob: return probs.at(s.get());
    }
    return false;
}

}  // namespace

Rational path_probability(const ModelFile&, const FinitePomdp& p, const PolicySpace& space, const ProperPolicy& pol,
                          const TraceFormula& psi) {
    return run_forward(p, space, pol, psi, false).success;
}

std::vector<Rational> forward_masses(const FinitePomdp& p, const PolicySpace& space, const ProperPolicy& pol,
                                     const TraceFormula& psi) {
    return run_forward(p, space, pol, psi, true).masses;
}

std::uint64_t default_policy_cap() {
    if (const char* env = std::getenv("BP_POLICY_CAP")) {
        char* end = nullptr;
        unsigned long long v = std::strtoull(env, &end, 10);
        if (end && *end == '\0' && v > 0) return v;
    }
    return 1000000;
}

Verdict check(const ModelFile& m, const TypeAnalysis& analysis, const std::vector<FinitePomdp>& pomdps,
              const StatePtr& phi, const CheckOptions& options) {
    std::size_t k = horizon_of(phi);
    Verdict v;
    v.property = print_state_formula(phi);
    std::vector<const StateFormula*> probs;
    collect_probs(phi, probs);

    for (std::size_t t = 0; t < pomdps.size(); ++t) {
        const FinitePomdp& p = pomdps[t];
        if (p.k < k)
            fail("C-HORIZON", "POMDP built for horizon " + std::to_string(p.k) + " but the property needs " +
                                  std::to_string(k));
        TypeVerdict tv;
        tv.type = t;
        tv.witness = analysis.types.at(t).witness;
        tv.space = policy_space(m, p);
        v.warnings.push_back("type " + std::to_string(t + 1) + ": " + std::to_string(tv.space.count) +
                             " proper polic" + (tv.space.count == 1 ? "y" : "ies"));
        if (tv.space.count > options.policy_cap)
            fail("C-POLICY-CAP", "type " + std::to_string(t + 1) + " has " + std::to_string(tv.space.count) +
                                     " proper policies, above the cap of " + std::to_string(options.policy_cap));

        std::map<const StateFormula*, bool> truth;
        for (const StateFormula* pf : probs) {
            const std::uint64_t count = tv.space.count;
            struct Best {
                Rational min, max;
                std::uint64_t argmin = 0, argmax = 0;
                bool any = false;
            };
            unsigned workers = resolve_threads(options.threads);
            std::vector<Best> best(workers);
            parallel_chunks(count, options.threads, [&](std::size_t lo, std::size_t hi, unsigned w) {
                Best& b = best[w];
                for (std::size_t i = lo; i < hi; ++i) {
                    Rational pr = path_probability(m, p, tv.space, policy_at(tv.space, i), *pf->trace);
                    if (!b.any || pr < b.min) b.min = pr, b.argmin = i;
                    if (!b.any || pr > b.max) b.max = pr, b.argmax = i;
                    b.any = true;
                }
            });
            // Deterministic reduction: ties go to the lowest policy index.
            Best all;
            for (const auto& b : best) {
                if (!b.any) continue;
                if (!all.any || b.min < all.min || (b.min == all.min && b.argmin < all.argmin))
                    all.min = b.min, all.argmin = b.argmin;
                if (!all.any || b.max > all.max || (b.max == all.max && b.argmax < all.argmax))
                    all.max = b.max, all.argmax = b.argmax;
                all.any = true;
            }
            ProbResult r;
            auto self = std::make_shared<StateFormula>(*pf);
            r.formula = print_state_formula(self);
            r.min = all.min;
            r.max = all.max;
            r.policy_count = count;
            r.argmin = policy_at(tv.space, all.argmin);
            r.argmax = policy_at(tv.space, all.argmax);
            r.holds = pf->interval.contains(r.min) && pf->interval.contains(r.max);
            truth[pf] = r.holds;
            tv.probs.push_back(std::move(r));
        }
        tv.holds = eval_state(phi, p, truth);
        v.holds = v.holds && tv.holds;
        v.per_type.push_back(std::move(tv));
    }
    return v;
}

std::vector<std::string> describe_policy(const ModelFile& m, const FinitePomdp& p, const PolicySpace& space,
                                         const ProperPolicy& pol) {
    std::vector<std::string> out;
    for (std::size_t c = 0; c < space.classes.size(); ++c) {
        const auto& cls = space.classes[c];
        std::string obs = p.sink_obs && cls.observation == *p.sink_obs
                              ? std::string("breakdown")
                              : render_distribution(m, p.observations[cls.observation].dist);
        std::string opts;
        for (const auto& l : cls.labels) opts += (opts.empty() ? "" : ", ") + l;
        out.push_back(obs + " {" + opts + "} -> " + cls.labels[pol.choice[c]]);
    }
    return out;
}

}  // namespace bp
